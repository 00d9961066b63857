#include "disturb/tensor.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace disturb {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) {
        if (e == 0) throw std::invalid_argument("tensor extent must be positive");
        n *= e;
    }
    return n;
}

void require_2d(const Tensor& t, const char* who) {
    if (t.rank() != 2) {
        throw std::invalid_argument(std::string(who) + ": expected rank-2 tensor, got shape " +
                                    shape_str(t.shape()));
    }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_product(shape_)) {
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_str(shape_));
    }
}

std::size_t Tensor::extent(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw std::invalid_argument("axis " + std::to_string(axis) + " out of range for shape " +
                                    shape_str(shape_));
    }
    return shape_[axis];
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
    if (shape_product(shape) != data_.size()) {
        throw std::invalid_argument("reshape from " + shape_str(shape_) + " to " + shape_str(shape) +
                                    " changes element count");
    }
    return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    if (a.extent(1) != b.extent(0)) {
        throw std::invalid_argument("matmul: inner extents disagree, " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    }
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    Tensor c({m, n});
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, (int)m, (int)n, (int)k, 1.0, a.data(),
                (int)k, b.data(), (int)n, 0.0, c.data(), (int)n);
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul_nt");
    require_2d(b, "matmul_nt");
    if (a.extent(1) != b.extent(1)) {
        throw std::invalid_argument("matmul_nt: inner extents disagree, " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    }
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(0);
    Tensor c({m, n});
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, (int)m, (int)n, (int)k, 1.0, a.data(),
                (int)k, b.data(), (int)k, 0.0, c.data(), (int)n);
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul_tn");
    require_2d(b, "matmul_tn");
    if (a.extent(0) != b.extent(0)) {
        throw std::invalid_argument("matmul_tn: inner extents disagree, " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    }
    const std::size_t m = a.extent(1), k = a.extent(0), n = b.extent(1);
    Tensor c({m, n});
    cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, (int)m, (int)n, (int)k, 1.0, a.data(),
                (int)m, b.data(), (int)n, 0.0, c.data(), (int)n);
    return c;
}

Tensor elementwise(EwOp op, const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("elementwise: shape mismatch, " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    }
    Tensor out(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    const std::size_t n = a.size();
    switch (op) {
        case EwOp::Add:
            for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
            break;
        case EwOp::Sub:
            for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
            break;
        case EwOp::Mul:
            for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
            break;
        case EwOp::ReluMask:
            for (std::size_t i = 0; i < n; ++i) po[i] = pb[i] > 0.0 ? pa[i] : 0.0;
            break;
    }
    return out;
}

Tensor elementwise(EwOp op, const Tensor& a, double b) {
    Tensor out(a.shape());
    const double* pa = a.data();
    double* po = out.data();
    const std::size_t n = a.size();
    switch (op) {
        case EwOp::Add:
            for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + b;
            break;
        case EwOp::Sub:
            for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] - b;
            break;
        case EwOp::Mul:
            for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] * b;
            break;
        case EwOp::ReluMask:
            for (std::size_t i = 0; i < n; ++i) po[i] = b > 0.0 ? pa[i] : 0.0;
            break;
    }
    return out;
}

double reduce_sum(const Tensor& a) {
    if (a.size() == 0) throw std::domain_error("reduce_sum: empty tensor");
    // Sequential left-to-right accumulation, fixed order.
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
    return s;
}

double reduce_max(const Tensor& a) {
    if (a.size() == 0) throw std::domain_error("reduce_max: empty tensor");
    double m = a[0];
    for (std::size_t i = 1; i < a.size(); ++i) m = std::max(m, a[i]);
    return m;
}

std::size_t reduce_argmax(const Tensor& a) {
    if (a.size() == 0) throw std::domain_error("reduce_argmax: empty tensor");
    std::size_t best = 0;
    for (std::size_t i = 1; i < a.size(); ++i) {
        if (a[i] > a[best]) best = i;  // strict: ties keep the lowest index
    }
    return best;
}

namespace {

// Iterates a tensor as [outer, axisExtent, inner] around the reduced axis.
struct AxisView {
    std::size_t outer = 1, extent = 1, inner = 1;
    AxisView(const Tensor& a, std::size_t axis) {
        if (axis >= a.rank()) {
            throw std::invalid_argument("reduce: axis " + std::to_string(axis) +
                                        " out of range for shape " + shape_str(a.shape()));
        }
        for (std::size_t i = 0; i < axis; ++i) outer *= a.shape()[i];
        extent = a.shape()[axis];
        for (std::size_t i = axis + 1; i < a.rank(); ++i) inner *= a.shape()[i];
    }
};

std::vector<std::size_t> drop_axis(const std::vector<std::size_t>& shape, std::size_t axis) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < shape.size(); ++i)
        if (i != axis) out.push_back(shape[i]);
    if (out.empty()) out.push_back(1);
    return out;
}

}  // namespace

Tensor reduce_sum_axis(const Tensor& a, std::size_t axis) {
    AxisView v(a, axis);
    Tensor out(drop_axis(a.shape(), axis));
    for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t e = 0; e < v.extent; ++e)
            for (std::size_t i = 0; i < v.inner; ++i)
                out[o * v.inner + i] += a[(o * v.extent + e) * v.inner + i];
    return out;
}

Tensor reduce_max_axis(const Tensor& a, std::size_t axis) {
    AxisView v(a, axis);
    Tensor out(drop_axis(a.shape(), axis));
    out.fill(-std::numeric_limits<double>::infinity());
    for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t e = 0; e < v.extent; ++e)
            for (std::size_t i = 0; i < v.inner; ++i) {
                double& m = out[o * v.inner + i];
                m = std::max(m, a[(o * v.extent + e) * v.inner + i]);
            }
    return out;
}

std::vector<std::size_t> argmax_rows(const Tensor& a) {
    if (a.rank() != 2) throw std::invalid_argument("argmax_rows: expected rank-2 tensor");
    const std::size_t rows = a.extent(0), cols = a.extent(1);
    std::vector<std::size_t> out(rows, 0);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* p = a.data() + r * cols;
        std::size_t best = 0;
        for (std::size_t c = 1; c < cols; ++c)
            if (p[c] > p[best]) best = c;
        out[r] = best;
    }
    return out;
}

void axpy(double alpha, const Tensor& x, Tensor& y) {
    if (!x.same_shape(y)) {
        throw std::invalid_argument("axpy: shape mismatch, " + shape_str(x.shape()) + " vs " +
                                    shape_str(y.shape()));
    }
    cblas_daxpy((int)x.size(), alpha, x.data(), 1, y.data(), 1);
}

}  // namespace disturb
