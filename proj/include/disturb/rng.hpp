#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace disturb {

// Named, seedable random stream. Streams derived from the same master seed
// with different labels are statistically independent, so toggling one noise
// source (dropout, shuffle, disturbance) never shifts another's sequence.
class RngStream {
public:
    RngStream() : RngStream(0, "default") {}
    RngStream(std::uint64_t master_seed, const std::string& label);

    std::mt19937_64& engine() { return engine_; }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
    double normal(double mean, double stddev) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }
    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
    }
    bool bernoulli(double p) { return uniform() < p; }

    // Child stream for deterministic per-worker splitting.
    RngStream split(const std::string& label) const;

private:
    RngStream(std::uint64_t derived) : engine_(derived) {}
    std::uint64_t derived_seed_ = 0;
    std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, const std::string& label);

}  // namespace disturb
