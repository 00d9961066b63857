#pragma once

#include <memory>
#include <string>
#include <vector>

#include "disturb/layers.hpp"

namespace disturb {

struct LayerDesc {
    enum class Kind { Conv, MaxPool, Fc, Dropout, Flatten } kind;
    std::size_t kernel = 0;    // conv/pool window
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t channels = 0;  // conv out channels / fc out dim
    double rate = 0.0;         // dropout
    bool relu_after = false;

    bool operator==(const LayerDesc&) const = default;
};

struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg + " (offset " + std::to_string(offset) + ")"), offset(offset) {}
    std::size_t offset;
};

// Parsed network description plus, once built, the executable layer stack and
// its parameter store.
class Network {
public:
    Network() = default;
    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;
    Network(Network&&) = default;
    Network& operator=(Network&&) = default;

    // Grammar: dash-separated tokens C<k>(S<s>P<p>)@<n> | MP<k>(S<s>) | FC<n>
    // | D<r>; square brackets group visually and are ignored. A ReLU follows
    // every conv and every FC except the final one; a flatten is inserted
    // before the first FC.
    static Network parse(const std::string& abbrev);

    std::string render() const;

    const std::vector<LayerDesc>& descriptors() const { return descs_; }

    // Instantiates layers for a given input geometry. Dropout descriptors are
    // skipped when dropout_enabled is false.
    void build(std::size_t in_channels, std::size_t height, std::size_t width,
               bool dropout_enabled = true);
    bool built() const { return !layers_.empty(); }

    void init_params(RngStream& rng);

    Tensor forward(const Tensor& batch, Mode mode, RngStream* dropout_rng);
    Tensor backward(const Tensor& grad_out);

    std::vector<Tensor*> params();
    std::vector<Tensor*> grads();
    std::size_t param_count();

    std::size_t class_count() const;  // out dim of the final FC

    const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }

    void save_checkpoint(const std::string& path);
    void load_checkpoint(const std::string& path);

private:
    std::vector<LayerDesc> descs_;
    std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace disturb
