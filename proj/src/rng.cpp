#include "disturb/rng.hpp"

namespace disturb {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, const std::string& label) {
    return splitmix64(seed ^ splitmix64(fnv1a(label)));
}

RngStream::RngStream(std::uint64_t master_seed, const std::string& label)
    : derived_seed_(mix_seed(master_seed, label)), engine_(derived_seed_) {}

RngStream RngStream::split(const std::string& label) const {
    return RngStream(mix_seed(derived_seed_, label));
}

}  // namespace disturb
