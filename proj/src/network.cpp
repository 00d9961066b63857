#include "disturb/network.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace disturb {

namespace {

struct Cursor {
    const std::string& s;
    std::size_t pos = 0;

    bool done() const { return pos >= s.size(); }
    char peek() const { return s[pos]; }

    void expect(char c) {
        if (done() || s[pos] != c) {
            throw ParseError(std::string("expected '") + c + "'", pos);
        }
        ++pos;
    }

    std::size_t integer() {
        const std::size_t start = pos;
        std::size_t v = 0;
        while (!done() && s[pos] >= '0' && s[pos] <= '9') {
            v = v * 10 + static_cast<std::size_t>(s[pos] - '0');
            ++pos;
        }
        if (pos == start) throw ParseError("expected integer", pos);
        return v;
    }

    double real() {
        const std::size_t start = pos;
        while (!done() && ((s[pos] >= '0' && s[pos] <= '9') || s[pos] == '.')) ++pos;
        if (pos == start) throw ParseError("expected number", pos);
        return std::stod(s.substr(start, pos - start));
    }
};

std::string format_rate(double r) {
    std::ostringstream os;
    os << r;
    return os.str();
}

}  // namespace

Network Network::parse(const std::string& abbrev) {
    Network net;
    Cursor cur{abbrev};
    while (!cur.done()) {
        const char c = cur.peek();
        if (c == '[' || c == ']' || c == '-') {
            ++cur.pos;
            continue;
        }
        LayerDesc d{};
        if (c == 'C') {
            ++cur.pos;
            d.kind = LayerDesc::Kind::Conv;
            d.kernel = cur.integer();
            cur.expect('(');
            cur.expect('S');
            d.stride = cur.integer();
            cur.expect('P');
            d.padding = cur.integer();
            cur.expect(')');
            cur.expect('@');
            d.channels = cur.integer();
            d.relu_after = true;
        } else if (c == 'M') {
            ++cur.pos;
            cur.expect('P');
            d.kind = LayerDesc::Kind::MaxPool;
            d.kernel = cur.integer();
            cur.expect('(');
            cur.expect('S');
            d.stride = cur.integer();
            cur.expect(')');
        } else if (c == 'F') {
            ++cur.pos;
            cur.expect('C');
            d.kind = LayerDesc::Kind::Fc;
            d.channels = cur.integer();
            d.relu_after = true;  // stripped again for the final FC below
        } else if (c == 'D') {
            ++cur.pos;
            d.kind = LayerDesc::Kind::Dropout;
            d.rate = cur.real();
            if (!(d.rate >= 0.0 && d.rate < 1.0)) {
                throw ParseError("dropout rate must be in [0,1)", cur.pos);
            }
        } else {
            throw ParseError(std::string("unexpected character '") + c + "'", cur.pos);
        }
        net.descs_.push_back(d);
    }
    if (net.descs_.empty()) throw ParseError("empty network string", 0);

    // Flatten before the first FC; no activation after the classifier head.
    for (std::size_t i = 0; i < net.descs_.size(); ++i) {
        if (net.descs_[i].kind == LayerDesc::Kind::Fc) {
            LayerDesc flat{};
            flat.kind = LayerDesc::Kind::Flatten;
            net.descs_.insert(net.descs_.begin() + static_cast<long>(i), flat);
            break;
        }
    }
    for (std::size_t i = net.descs_.size(); i-- > 0;) {
        if (net.descs_[i].kind == LayerDesc::Kind::Fc) {
            net.descs_[i].relu_after = false;
            break;
        }
    }
    return net;
}

std::string Network::render() const {
    std::ostringstream os;
    bool first = true;
    for (const auto& d : descs_) {
        if (d.kind == LayerDesc::Kind::Flatten) continue;
        if (!first) os << "-";
        first = false;
        switch (d.kind) {
            case LayerDesc::Kind::Conv:
                os << "C" << d.kernel << "(S" << d.stride << "P" << d.padding << ")@" << d.channels;
                break;
            case LayerDesc::Kind::MaxPool:
                os << "MP" << d.kernel << "(S" << d.stride << ")";
                break;
            case LayerDesc::Kind::Fc:
                os << "FC" << d.channels;
                break;
            case LayerDesc::Kind::Dropout:
                os << "D" << format_rate(d.rate);
                break;
            case LayerDesc::Kind::Flatten:
                break;
        }
    }
    return os.str();
}

void Network::build(std::size_t in_channels, std::size_t height, std::size_t width,
                    bool dropout_enabled) {
    layers_.clear();
    std::size_t c = in_channels, h = height, w = width;
    bool flat = false;
    std::size_t dim = 0;

    for (const auto& d : descs_) {
        switch (d.kind) {
            case LayerDesc::Kind::Conv: {
                if (flat) throw std::invalid_argument("conv after flatten is not supported");
                layers_.push_back(
                    std::make_unique<ConvLayer>(c, d.channels, d.kernel, d.stride, d.padding));
                if (h + 2 * d.padding < d.kernel || w + 2 * d.padding < d.kernel) {
                    throw std::invalid_argument("conv kernel larger than padded input at layer " +
                                                std::to_string(layers_.size() - 1));
                }
                h = (h + 2 * d.padding - d.kernel) / d.stride + 1;
                w = (w + 2 * d.padding - d.kernel) / d.stride + 1;
                c = d.channels;
                if (d.relu_after) layers_.push_back(std::make_unique<ReluLayer>());
                break;
            }
            case LayerDesc::Kind::MaxPool: {
                if (flat) throw std::invalid_argument("pool after flatten is not supported");
                layers_.push_back(std::make_unique<MaxPoolLayer>(d.kernel, d.stride));
                if (h < d.kernel || w < d.kernel) {
                    throw std::invalid_argument("pool window larger than input at layer " +
                                                std::to_string(layers_.size() - 1));
                }
                h = (h - d.kernel) / d.stride + 1;
                w = (w - d.kernel) / d.stride + 1;
                break;
            }
            case LayerDesc::Kind::Flatten:
                layers_.push_back(std::make_unique<FlattenLayer>());
                dim = c * h * w;
                flat = true;
                break;
            case LayerDesc::Kind::Fc:
                if (!flat) {
                    layers_.push_back(std::make_unique<FlattenLayer>());
                    dim = c * h * w;
                    flat = true;
                }
                layers_.push_back(std::make_unique<FcLayer>(dim, d.channels));
                dim = d.channels;
                if (d.relu_after) layers_.push_back(std::make_unique<ReluLayer>());
                break;
            case LayerDesc::Kind::Dropout:
                if (dropout_enabled) layers_.push_back(std::make_unique<DropoutLayer>(d.rate));
                break;
        }
    }
}

void Network::init_params(RngStream& rng) {
    for (auto& l : layers_) l->init_params(rng);
}

Tensor Network::forward(const Tensor& batch, Mode mode, RngStream* dropout_rng) {
    if (layers_.empty()) throw std::logic_error("network not built");
    Tensor x = batch;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        try {
            x = layers_[i]->forward(x, mode, dropout_rng);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("layer " + std::to_string(i) + " (" +
                                        layers_[i]->describe() + "): " + e.what());
        }
    }
    return x;
}

Tensor Network::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g);
    return g;
}

std::vector<Tensor*> Network::params() {
    std::vector<Tensor*> out;
    for (auto& l : layers_)
        for (Tensor* t : l->params()) out.push_back(t);
    return out;
}

std::vector<Tensor*> Network::grads() {
    std::vector<Tensor*> out;
    for (auto& l : layers_)
        for (Tensor* t : l->grads()) out.push_back(t);
    return out;
}

std::size_t Network::param_count() {
    std::size_t n = 0;
    for (Tensor* t : params()) n += t->size();
    return n;
}

std::size_t Network::class_count() const {
    for (std::size_t i = descs_.size(); i-- > 0;) {
        if (descs_[i].kind == LayerDesc::Kind::Fc) return descs_[i].channels;
    }
    throw std::logic_error("network has no FC classifier head");
}

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;
const char kCheckpointMagic[8] = {'D', 'L', 'C', 'K', 'P', 'T', '0', '\n'};

template <typename T>
void write_pod(std::ofstream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint truncated");
    return v;
}

}  // namespace

void Network::save_checkpoint(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_pod(os, kCheckpointVersion);
    auto ps = params();
    write_pod(os, static_cast<std::uint32_t>(ps.size()));
    for (Tensor* t : ps) {
        write_pod(os, static_cast<std::uint32_t>(t->rank()));
        for (std::size_t e : t->shape()) write_pod(os, static_cast<std::uint64_t>(e));
        os.write(reinterpret_cast<const char*>(t->data()),
                 static_cast<std::streamsize>(t->size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

void Network::load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::string(magic, 8) != std::string(kCheckpointMagic, 8)) {
        throw std::runtime_error("bad checkpoint magic in " + path);
    }
    const auto version = read_pod<std::uint32_t>(is);
    if (version != kCheckpointVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    auto ps = params();
    const auto count = read_pod<std::uint32_t>(is);
    if (count != ps.size()) {
        throw std::runtime_error("checkpoint parameter count mismatch: file has " +
                                 std::to_string(count) + ", network has " +
                                 std::to_string(ps.size()));
    }
    for (Tensor* t : ps) {
        const auto rank = read_pod<std::uint32_t>(is);
        std::vector<std::size_t> shape(rank);
        for (auto& e : shape) e = static_cast<std::size_t>(read_pod<std::uint64_t>(is));
        if (shape != t->shape()) {
            throw std::runtime_error("checkpoint shape mismatch: file " + shape_str(shape) +
                                     " vs network " + shape_str(t->shape()));
        }
        is.read(reinterpret_cast<char*>(t->data()),
                static_cast<std::streamsize>(t->size() * sizeof(double)));
        if (!is) throw std::runtime_error("checkpoint truncated");
    }
}

}  // namespace disturb
