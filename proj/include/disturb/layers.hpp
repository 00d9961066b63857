#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "disturb/rng.hpp"
#include "disturb/tensor.hpp"

namespace disturb {

enum class Mode { Train, Eval };

// One differentiable stage of the network. Inputs and outputs are batched:
// [B×C×H×W] for spatial layers, [B×D] for dense ones. forward() caches what
// backward() needs; backward() must follow a forward() in the same mode.
class Layer {
public:
    virtual ~Layer() = default;

    virtual Tensor forward(const Tensor& input, Mode mode, RngStream* rng) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;

    virtual std::string describe() const = 0;

    // Parameter/gradient pairs; empty for parameterless layers.
    virtual std::vector<Tensor*> params() { return {}; }
    virtual std::vector<Tensor*> grads() { return {}; }

    virtual void init_params(RngStream&) {}

protected:
    bool forward_done_ = false;
    void require_forward(const char* who) const;
};

class ConvLayer : public Layer {
public:
    ConvLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
              std::size_t stride, std::size_t padding);

    Tensor forward(const Tensor& input, Mode mode, RngStream* rng) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string describe() const override;
    std::vector<Tensor*> params() override { return {&kernel_, &bias_}; }
    std::vector<Tensor*> grads() override { return {&grad_kernel_, &grad_bias_}; }
    void init_params(RngStream& rng) override;

    std::size_t out_channels() const { return out_channels_; }

    Tensor& kernel() { return kernel_; }
    Tensor& bias() { return bias_; }

private:
    std::size_t in_channels_, out_channels_, k_, stride_, pad_;
    Tensor kernel_;  // [outC × inC·k·k], the im2col-ready layout
    Tensor bias_;    // [outC]
    Tensor grad_kernel_, grad_bias_;

    // forward caches
    Tensor cols_;  // [inC·k·k × B·outH·outW]
    std::size_t in_h_ = 0, in_w_ = 0, out_h_ = 0, out_w_ = 0, batch_ = 0;
};

class MaxPoolLayer : public Layer {
public:
    MaxPoolLayer(std::size_t window, std::size_t stride);

    Tensor forward(const Tensor& input, Mode mode, RngStream* rng) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string describe() const override;

private:
    std::size_t window_, stride_;
    std::vector<std::size_t> argmax_;  // flat input index per output cell
    std::vector<std::size_t> in_shape_;
};

class ReluLayer : public Layer {
public:
    Tensor forward(const Tensor& input, Mode mode, RngStream* rng) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string describe() const override { return "ReLU"; }

private:
    Tensor input_;
};

class FcLayer : public Layer {
public:
    FcLayer(std::size_t in_dim, std::size_t out_dim);

    Tensor forward(const Tensor& input, Mode mode, RngStream* rng) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string describe() const override;
    std::vector<Tensor*> params() override { return {&weights_, &bias_}; }
    std::vector<Tensor*> grads() override { return {&grad_weights_, &grad_bias_}; }
    void init_params(RngStream& rng) override;

    std::size_t out_dim() const { return out_dim_; }
    Tensor& weights() { return weights_; }
    Tensor& bias() { return bias_; }

private:
    std::size_t in_dim_, out_dim_;
    Tensor weights_;  // [out × in]
    Tensor bias_;     // [out]
    Tensor grad_weights_, grad_bias_;
    Tensor input_;  // [B × in]
};

// Inverted dropout: kept units are scaled by 1/(1-rate) at train time so the
// eval path is the identity.
class DropoutLayer : public Layer {
public:
    explicit DropoutLayer(double rate);

    Tensor forward(const Tensor& input, Mode mode, RngStream* rng) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string describe() const override;

    double rate() const { return rate_; }
    const Tensor& mask() const { return mask_; }

private:
    double rate_;
    Mode mode_ = Mode::Eval;
    Tensor mask_;  // scaled keep mask, last sampled
};

// Reshapes [B×C×H×W] to [B×C·H·W]; shape bookkeeping only.
class FlattenLayer : public Layer {
public:
    Tensor forward(const Tensor& input, Mode mode, RngStream* rng) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string describe() const override { return "Flatten"; }

private:
    std::vector<std::size_t> in_shape_;
};

}  // namespace disturb
