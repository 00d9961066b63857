#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace disturb {

// Dense row-major tensor of doubles. Shapes are fixed at construction;
// all library operations keep finite inputs finite.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at2(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double at2(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    // Reinterprets the buffer with a new shape of equal element count.
    Tensor reshaped(std::vector<std::size_t> shape) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    void fill(double v);

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::string shape_str(const std::vector<std::size_t>& shape);

// Standard matrix product of 2-D tensors, [M×K]·[K×N] -> [M×N].
Tensor matmul(const Tensor& a, const Tensor& b);

// a·b with b transposed: [M×K]·[N×K]^T -> [M×N].
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// a transposed: [K×M]^T·[K×N] -> [M×N].
Tensor matmul_tn(const Tensor& a, const Tensor& b);

enum class EwOp { Add, Sub, Mul, ReluMask };

// Elementwise binary op on equal-shaped tensors. ReluMask keeps a where b > 0.
Tensor elementwise(EwOp op, const Tensor& a, const Tensor& b);
// Elementwise op against a scalar b (Mul doubles as scale).
Tensor elementwise(EwOp op, const Tensor& a, double b);

double reduce_sum(const Tensor& a);
double reduce_max(const Tensor& a);
std::size_t reduce_argmax(const Tensor& a);  // ties -> lowest index

// Reduction along one axis; result drops that axis.
Tensor reduce_sum_axis(const Tensor& a, std::size_t axis);
Tensor reduce_max_axis(const Tensor& a, std::size_t axis);

// argmax over the last axis of a 2-D tensor, one index per row.
std::vector<std::size_t> argmax_rows(const Tensor& a);

void axpy(double alpha, const Tensor& x, Tensor& y);  // y += alpha * x

}  // namespace disturb
