#pragma once

#include <cstddef>
#include <cstdint>

#include "disturb/data.hpp"

namespace disturb {

// Procedurally rendered handwritten-style digit images in the same shapes and
// file formats as the MNIST/CIFAR-10 corpora. Used when the real corpora are
// not on disk: stroke skeletons per digit class, randomly jittered, rotated,
// sheared, scaled and noised per sample.
struct SynthSpec {
    std::size_t image_size = 28;
    double point_jitter = 0.035;   // control-point displacement, unit coords
    double rotation_deg = 14.0;    // uniform in +-rotation_deg
    double shear = 0.18;           // uniform in +-shear
    double scale_spread = 0.14;    // axis scales uniform in 1 +- spread
    double translate_px = 2.0;     // uniform in +-translate_px
    double stroke_min = 0.9;       // stroke half-width range, pixels
    double stroke_max = 1.9;
    double noise_sd = 0.06;        // additive pixel noise
};

// Renders one digit image [1×1×S×S] with pixels in [0,1].
Tensor render_digit(std::size_t digit, const SynthSpec& spec, RngStream& rng);

// Balanced dataset of `count` images (count/10 per class, remainder spread
// over the low classes), shuffled.
Dataset synth_digits(std::size_t count, const SynthSpec& spec, std::uint64_t seed);

// 32×32 RGB variant in CIFAR-10 geometry: tinted digit over a noisy tinted
// background.
Dataset synth_digits_rgb(std::size_t count, std::uint64_t seed);

}  // namespace disturb
