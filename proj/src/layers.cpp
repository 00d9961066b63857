#include "disturb/layers.hpp"

#include <cblas.h>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace disturb {

void Layer::require_forward(const char* who) const {
    if (!forward_done_) {
        throw std::logic_error(std::string(who) + ": backward called before forward");
    }
}

namespace {

void require_nchw(const Tensor& t, const char* who) {
    if (t.rank() != 4) {
        throw std::invalid_argument(std::string(who) + ": expected [BxCxHxW] input, got shape " +
                                    shape_str(t.shape()));
    }
}

std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad,
                            const char* who) {
    if (in + 2 * pad < k) {
        throw std::invalid_argument(std::string(who) + ": window larger than padded input");
    }
    const std::size_t out = (in + 2 * pad - k) / stride + 1;
    if (out < 1) throw std::invalid_argument(std::string(who) + ": empty output map");
    return out;
}

// Unpacks one image [C×H×W] into columns [C·k·k × outH·outW].
void im2col(const double* img, std::size_t channels, std::size_t h, std::size_t w, std::size_t k,
            std::size_t stride, std::size_t pad, std::size_t out_h, std::size_t out_w,
            double* cols) {
    const std::size_t col_w = out_h * out_w;
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                double* row = cols + ((c * k + ky) * k + kx) * col_w;
                for (std::size_t oy = 0; oy < out_h; ++oy) {
                    const long iy = (long)(oy * stride + ky) - (long)pad;
                    if (iy < 0 || iy >= (long)h) {
                        for (std::size_t ox = 0; ox < out_w; ++ox) row[oy * out_w + ox] = 0.0;
                        continue;
                    }
                    const double* src = img + (c * h + (std::size_t)iy) * w;
                    for (std::size_t ox = 0; ox < out_w; ++ox) {
                        const long ix = (long)(ox * stride + kx) - (long)pad;
                        row[oy * out_w + ox] = (ix < 0 || ix >= (long)w) ? 0.0 : src[ix];
                    }
                }
            }
        }
    }
}

// Scatter-accumulates columns back into one image gradient.
void col2im(const double* cols, std::size_t channels, std::size_t h, std::size_t w, std::size_t k,
            std::size_t stride, std::size_t pad, std::size_t out_h, std::size_t out_w,
            double* img) {
    const std::size_t col_w = out_h * out_w;
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                const double* row = cols + ((c * k + ky) * k + kx) * col_w;
                for (std::size_t oy = 0; oy < out_h; ++oy) {
                    const long iy = (long)(oy * stride + ky) - (long)pad;
                    if (iy < 0 || iy >= (long)h) continue;
                    double* dst = img + (c * h + (std::size_t)iy) * w;
                    for (std::size_t ox = 0; ox < out_w; ++ox) {
                        const long ix = (long)(ox * stride + kx) - (long)pad;
                        if (ix >= 0 && ix < (long)w) dst[ix] += row[oy * out_w + ox];
                    }
                }
            }
        }
    }
}

}  // namespace

ConvLayer::ConvLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                     std::size_t stride, std::size_t padding)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      k_(kernel),
      stride_(stride),
      pad_(padding),
      kernel_({out_channels, in_channels * kernel * kernel}),
      bias_({out_channels}),
      grad_kernel_({out_channels, in_channels * kernel * kernel}),
      grad_bias_({out_channels}) {
    if (stride == 0) throw std::invalid_argument("conv stride must be positive");
}

void ConvLayer::init_params(RngStream& rng) {
    const double fan_in = static_cast<double>(in_channels_ * k_ * k_);
    const double stddev = std::sqrt(2.0 / fan_in);
    for (std::size_t i = 0; i < kernel_.size(); ++i) kernel_[i] = rng.normal(0.0, stddev);
    bias_.fill(0.0);
}

std::string ConvLayer::describe() const {
    std::ostringstream os;
    os << "C" << k_ << "(S" << stride_ << "P" << pad_ << ")@" << out_channels_;
    return os.str();
}

Tensor ConvLayer::forward(const Tensor& input, Mode, RngStream*) {
    require_nchw(input, "conv");
    if (input.extent(1) != in_channels_) {
        throw std::invalid_argument("conv: expected " + std::to_string(in_channels_) +
                                    " input channels, got shape " + shape_str(input.shape()));
    }
    batch_ = input.extent(0);
    in_h_ = input.extent(2);
    in_w_ = input.extent(3);
    out_h_ = conv_out_extent(in_h_, k_, stride_, pad_, "conv");
    out_w_ = conv_out_extent(in_w_, k_, stride_, pad_, "conv");

    const std::size_t ickk = in_channels_ * k_ * k_;
    const std::size_t map = out_h_ * out_w_;
    cols_ = Tensor({batch_, ickk, map});
    Tensor out({batch_, out_channels_, out_h_, out_w_});

    for (std::size_t b = 0; b < batch_; ++b) {
        double* cols_b = cols_.data() + b * ickk * map;
        im2col(input.data() + b * in_channels_ * in_h_ * in_w_, in_channels_, in_h_, in_w_, k_,
               stride_, pad_, out_h_, out_w_, cols_b);
        // out_b [outC × map] = kernel [outC × ickk] · cols_b [ickk × map]
        double* dst = out.data() + b * out_channels_ * map;
        for (std::size_t oc = 0; oc < out_channels_; ++oc) {
            const double bias = bias_[oc];
            for (std::size_t i = 0; i < map; ++i) dst[oc * map + i] = bias;
        }
        cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, (int)out_channels_, (int)map,
                    (int)ickk, 1.0, kernel_.data(), (int)ickk, cols_b, (int)map, 1.0, dst,
                    (int)map);
    }
    forward_done_ = true;
    return out;
}

Tensor ConvLayer::backward(const Tensor& grad_out) {
    require_forward("conv");
    const std::size_t ickk = in_channels_ * k_ * k_;
    const std::size_t map = out_h_ * out_w_;
    if (grad_out.shape() != std::vector<std::size_t>{batch_, out_channels_, out_h_, out_w_}) {
        throw std::invalid_argument("conv backward: unexpected grad shape " +
                                    shape_str(grad_out.shape()));
    }
    grad_kernel_.fill(0.0);
    grad_bias_.fill(0.0);
    Tensor grad_in({batch_, in_channels_, in_h_, in_w_});

    Tensor dcols({ickk, map});
    for (std::size_t b = 0; b < batch_; ++b) {
        const double* gy = grad_out.data() + b * out_channels_ * map;
        const double* cols_b = cols_.data() + b * ickk * map;

        // dK += gy_b [outC × map] · cols_bᵀ [map × ickk]
        cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, (int)out_channels_, (int)ickk,
                    (int)map, 1.0, gy, (int)map, cols_b, (int)map, 1.0, grad_kernel_.data(),
                    (int)ickk);
        for (std::size_t oc = 0; oc < out_channels_; ++oc)
            for (std::size_t i = 0; i < map; ++i) grad_bias_[oc] += gy[oc * map + i];

        // dcols = kernelᵀ · gy_b, then scatter back to the input image
        cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, (int)ickk, (int)map,
                    (int)out_channels_, 1.0, kernel_.data(), (int)ickk, gy, (int)map, 0.0,
                    dcols.data(), (int)map);
        col2im(dcols.data(), in_channels_, in_h_, in_w_, k_, stride_, pad_, out_h_, out_w_,
               grad_in.data() + b * in_channels_ * in_h_ * in_w_);
    }
    return grad_in;
}

MaxPoolLayer::MaxPoolLayer(std::size_t window, std::size_t stride)
    : window_(window), stride_(stride) {
    if (window == 0 || stride == 0) throw std::invalid_argument("pool window/stride must be positive");
}

std::string MaxPoolLayer::describe() const {
    std::ostringstream os;
    os << "MP" << window_ << "(S" << stride_ << ")";
    return os.str();
}

Tensor MaxPoolLayer::forward(const Tensor& input, Mode, RngStream*) {
    require_nchw(input, "maxpool");
    const std::size_t b = input.extent(0), c = input.extent(1), h = input.extent(2),
                      w = input.extent(3);
    const std::size_t oh = conv_out_extent(h, window_, stride_, 0, "maxpool");
    const std::size_t ow = conv_out_extent(w, window_, stride_, 0, "maxpool");
    in_shape_ = input.shape();
    Tensor out({b, c, oh, ow});
    argmax_.assign(out.size(), 0);

    for (std::size_t n = 0; n < b * c; ++n) {
        const double* src = input.data() + n * h * w;
        double* dst = out.data() + n * oh * ow;
        std::size_t* amax = argmax_.data() + n * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                std::size_t best = (oy * stride_) * w + ox * stride_;
                double best_v = src[best];
                for (std::size_t ky = 0; ky < window_; ++ky) {
                    const std::size_t iy = oy * stride_ + ky;
                    if (iy >= h) break;
                    for (std::size_t kx = 0; kx < window_; ++kx) {
                        const std::size_t ix = ox * stride_ + kx;
                        if (ix >= w) break;
                        const std::size_t idx = iy * w + ix;
                        if (src[idx] > best_v) {
                            best_v = src[idx];
                            best = idx;
                        }
                    }
                }
                dst[oy * ow + ox] = best_v;
                amax[oy * ow + ox] = n * h * w + best;
            }
        }
    }
    forward_done_ = true;
    return out;
}

Tensor MaxPoolLayer::backward(const Tensor& grad_out) {
    require_forward("maxpool");
    if (grad_out.size() != argmax_.size()) {
        throw std::invalid_argument("maxpool backward: unexpected grad shape " +
                                    shape_str(grad_out.shape()));
    }
    Tensor grad_in(in_shape_);
    for (std::size_t i = 0; i < grad_out.size(); ++i) grad_in[argmax_[i]] += grad_out[i];
    return grad_in;
}

Tensor ReluLayer::forward(const Tensor& input, Mode, RngStream*) {
    input_ = input;
    forward_done_ = true;
    return elementwise(EwOp::ReluMask, input, input);
}

Tensor ReluLayer::backward(const Tensor& grad_out) {
    require_forward("relu");
    return elementwise(EwOp::ReluMask, grad_out, input_);
}

FcLayer::FcLayer(std::size_t in_dim, std::size_t out_dim)
    : in_dim_(in_dim),
      out_dim_(out_dim),
      weights_({out_dim, in_dim}),
      bias_({out_dim}),
      grad_weights_({out_dim, in_dim}),
      grad_bias_({out_dim}) {}

void FcLayer::init_params(RngStream& rng) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(in_dim_));
    for (std::size_t i = 0; i < weights_.size(); ++i) weights_[i] = rng.normal(0.0, stddev);
    bias_.fill(0.0);
}

std::string FcLayer::describe() const { return "FC" + std::to_string(out_dim_); }

Tensor FcLayer::forward(const Tensor& input, Mode, RngStream*) {
    if (input.rank() != 2 || input.extent(1) != in_dim_) {
        throw std::invalid_argument("fc: expected [Bx" + std::to_string(in_dim_) +
                                    "] input, got shape " + shape_str(input.shape()));
    }
    input_ = input;
    Tensor out = matmul_nt(input, weights_);  // [B × out]
    for (std::size_t r = 0; r < out.extent(0); ++r)
        for (std::size_t c = 0; c < out_dim_; ++c) out.at2(r, c) += bias_[c];
    forward_done_ = true;
    return out;
}

Tensor FcLayer::backward(const Tensor& grad_out) {
    require_forward("fc");
    if (grad_out.rank() != 2 || grad_out.extent(1) != out_dim_ ||
        grad_out.extent(0) != input_.extent(0)) {
        throw std::invalid_argument("fc backward: unexpected grad shape " +
                                    shape_str(grad_out.shape()));
    }
    grad_weights_ = matmul_tn(grad_out, input_);  // [out × in]
    grad_bias_ = reduce_sum_axis(grad_out, 0);
    return matmul(grad_out, weights_);  // [B × in]
}

DropoutLayer::DropoutLayer(double rate) : rate_(rate) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw std::invalid_argument("dropout rate must be in [0,1), got " + std::to_string(rate));
    }
}

std::string DropoutLayer::describe() const {
    std::ostringstream os;
    os << "D" << rate_;
    return os.str();
}

Tensor DropoutLayer::forward(const Tensor& input, Mode mode, RngStream* rng) {
    mode_ = mode;
    forward_done_ = true;
    if (mode == Mode::Eval || rate_ == 0.0) return input;
    if (!rng) throw std::invalid_argument("dropout: train-mode forward needs an rng stream");
    const double keep = 1.0 - rate_;
    mask_ = Tensor(input.shape());
    for (std::size_t i = 0; i < mask_.size(); ++i) {
        mask_[i] = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    }
    return elementwise(EwOp::Mul, input, mask_);
}

Tensor DropoutLayer::backward(const Tensor& grad_out) {
    require_forward("dropout");
    if (mode_ == Mode::Eval || rate_ == 0.0) return grad_out;
    return elementwise(EwOp::Mul, grad_out, mask_);
}

Tensor FlattenLayer::forward(const Tensor& input, Mode, RngStream*) {
    in_shape_ = input.shape();
    forward_done_ = true;
    std::size_t rest = 1;
    for (std::size_t i = 1; i < in_shape_.size(); ++i) rest *= in_shape_[i];
    return input.reshaped({in_shape_[0], rest});
}

Tensor FlattenLayer::backward(const Tensor& grad_out) {
    require_forward("flatten");
    return grad_out.reshaped(in_shape_);
}

}  // namespace disturb
