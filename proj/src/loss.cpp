#include "disturb/loss.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

namespace disturb {

namespace {

std::atomic<std::uint64_t> g_draw_count{0};

const std::vector<std::size_t>* find_block(const std::vector<std::vector<std::size_t>>& groups,
                                           std::size_t c) {
    for (const auto& block : groups) {
        if (std::find(block.begin(), block.end(), c) != block.end()) return &block;
    }
    return nullptr;
}

}  // namespace

Tensor OneHotLabel::vector() const {
    Tensor v({class_count});
    v[class_index] = 1.0;
    return v;
}

void DisturbConfig::validate(std::size_t class_count) const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw std::domain_error("noise rate alpha must be in [0,1], got " + std::to_string(alpha));
    }
    if (groups) {
        std::vector<bool> seen(class_count, false);
        for (const auto& block : *groups) {
            for (std::size_t c : block) {
                if (c >= class_count || seen[c]) {
                    throw std::domain_error("label groups must partition the classes exactly once");
                }
                seen[c] = true;
            }
        }
        if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
            throw std::domain_error("label groups must cover every class");
        }
    }
}

SoftLabel multinoulli_probs(std::size_t c, std::size_t class_count, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw std::domain_error("noise rate alpha must be in [0,1], got " + std::to_string(alpha));
    }
    if (c >= class_count) {
        throw std::domain_error("class index out of range");
    }
    const double cd = static_cast<double>(class_count);
    SoftLabel out;
    out.probs.assign(class_count, alpha / cd);
    out.probs[c] = 1.0 - (cd - 1.0) / cd * alpha;
    return out;
}

SoftLabel soft_label(const OneHotLabel& y, double alpha) {
    return multinoulli_probs(y.class_index, y.class_count, alpha);
}

OneHotLabel disturb_label(const OneHotLabel& y, const DisturbConfig& cfg, RngStream& rng) {
    cfg.validate(y.class_count);
    if (cfg.alpha == 0.0) return y;  // degenerate case, no draw

    // Redraw with probability alpha, uniformly over the label's block
    // (the whole class set when no groups are configured). Equivalent to the
    // Multinoulli with the block size as C.
    g_draw_count.fetch_add(1, std::memory_order_relaxed);
    if (!rng.bernoulli(cfg.alpha)) return y;

    OneHotLabel out = y;
    if (cfg.groups) {
        const auto* block = find_block(*cfg.groups, y.class_index);
        if (!block) throw std::domain_error("label class missing from groups");
        out.class_index = (*block)[rng.below(block->size())];
    } else {
        out.class_index = rng.below(y.class_count);
    }
    return out;
}

std::vector<OneHotLabel> disturb_batch(const std::vector<OneHotLabel>& labels,
                                       const DisturbConfig& cfg, RngStream& rng) {
    if (labels.empty()) throw std::invalid_argument("disturb_batch: empty batch");
    std::vector<OneHotLabel> out;
    out.reserve(labels.size());
    for (const auto& y : labels) out.push_back(disturb_label(y, cfg, rng));
    return out;
}

std::uint64_t disturb_draw_count() { return g_draw_count.load(std::memory_order_relaxed); }

Tensor softmax(const Tensor& logits) {
    Tensor out(logits.shape());
    const std::size_t n = logits.size();
    double m = reduce_max(logits);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(logits[i] - m);
        z += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= z;
    return out;
}

LossResult softmax_xent(const Tensor& logits, const Tensor& target) {
    if (!logits.same_shape(target)) {
        throw std::invalid_argument("softmax_xent: logits shape " + shape_str(logits.shape()) +
                                    " vs target shape " + shape_str(target.shape()));
    }
    const std::size_t n = logits.size();
    const double m = reduce_max(logits);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) z += std::exp(logits[i] - m);
    const double logz = std::log(z) + m;

    LossResult res;
    res.grad = Tensor(logits.shape());
    for (std::size_t i = 0; i < n; ++i) {
        const double logp = logits[i] - logz;
        res.loss -= target[i] * logp;
        res.grad[i] = std::exp(logp) - target[i];
    }
    return res;
}

LossResult softmax_xent_batch(const Tensor& logits, const Tensor& targets) {
    if (logits.rank() != 2 || !logits.same_shape(targets)) {
        throw std::invalid_argument("softmax_xent_batch: need matching [BxC] tensors, got " +
                                    shape_str(logits.shape()) + " and " +
                                    shape_str(targets.shape()));
    }
    const std::size_t b = logits.extent(0), c = logits.extent(1);
    LossResult res;
    res.grad = Tensor(logits.shape());
    for (std::size_t r = 0; r < b; ++r) {
        const double* lr = logits.data() + r * c;
        const double* tr = targets.data() + r * c;
        double* gr = res.grad.data() + r * c;
        double m = lr[0];
        for (std::size_t i = 1; i < c; ++i) m = std::max(m, lr[i]);
        double z = 0.0;
        for (std::size_t i = 0; i < c; ++i) z += std::exp(lr[i] - m);
        const double logz = std::log(z) + m;
        for (std::size_t i = 0; i < c; ++i) {
            const double logp = lr[i] - logz;
            res.loss -= tr[i] * logp;
            gr[i] = (std::exp(logp) - tr[i]) / static_cast<double>(b);
        }
    }
    res.loss /= static_cast<double>(b);
    return res;
}

LossResult square_loss(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target)) {
        throw std::invalid_argument("square_loss: shape mismatch, " + shape_str(pred.shape()) +
                                    " vs " + shape_str(target.shape()));
    }
    LossResult res;
    res.grad = elementwise(EwOp::Sub, pred, target);
    for (std::size_t i = 0; i < res.grad.size(); ++i) res.loss += 0.5 * res.grad[i] * res.grad[i];
    return res;
}

Tensor labels_to_matrix(const std::vector<OneHotLabel>& labels, std::size_t class_count) {
    Tensor out({labels.size(), class_count});
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r].class_index >= class_count) {
            throw std::invalid_argument("label class index out of range");
        }
        out.at2(r, labels[r].class_index) = 1.0;
    }
    return out;
}

}  // namespace disturb
