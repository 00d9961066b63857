#include "disturb/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace disturb {

namespace {

struct Pt {
    double x, y;
};

using Stroke = std::vector<Pt>;

void arc(Stroke& s, double cx, double cy, double rx, double ry, double a0, double a1, int steps) {
    for (int i = 0; i <= steps; ++i) {
        const double a = a0 + (a1 - a0) * i / steps;
        s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
    }
}

constexpr double kPi = std::numbers::pi;

// Digit skeletons in unit coordinates, x right, y down.
std::vector<Stroke> digit_strokes(std::size_t digit) {
    std::vector<Stroke> out;
    switch (digit) {
        case 0: {
            Stroke s;
            arc(s, 0.5, 0.5, 0.26, 0.38, 0.0, 2.0 * kPi, 24);
            out.push_back(s);
            break;
        }
        case 1: {
            out.push_back({{0.36, 0.3}, {0.54, 0.12}});
            out.push_back({{0.54, 0.12}, {0.54, 0.88}});
            break;
        }
        case 2: {
            Stroke top;
            arc(top, 0.48, 0.32, 0.24, 0.2, -kPi, -0.15, 14);
            out.push_back(top);
            out.push_back({{0.70, 0.37}, {0.26, 0.85}});
            out.push_back({{0.26, 0.85}, {0.76, 0.85}});
            break;
        }
        case 3: {
            Stroke top, bottom;
            arc(top, 0.46, 0.31, 0.22, 0.19, -0.8 * kPi, 0.45 * kPi, 14);
            arc(bottom, 0.46, 0.67, 0.25, 0.21, -0.45 * kPi, 0.8 * kPi, 14);
            out.push_back(top);
            out.push_back(bottom);
            break;
        }
        case 4: {
            out.push_back({{0.62, 0.12}, {0.22, 0.6}});
            out.push_back({{0.22, 0.6}, {0.8, 0.6}});
            out.push_back({{0.62, 0.12}, {0.62, 0.9}});
            break;
        }
        case 5: {
            out.push_back({{0.72, 0.14}, {0.3, 0.14}});
            out.push_back({{0.3, 0.14}, {0.3, 0.48}});
            Stroke belly;
            arc(belly, 0.46, 0.66, 0.25, 0.21, -0.55 * kPi, 0.75 * kPi, 14);
            out.push_back(belly);
            break;
        }
        case 6: {
            out.push_back({{0.64, 0.1}, {0.44, 0.32}, {0.31, 0.54}, {0.28, 0.66}});
            Stroke loop;
            arc(loop, 0.5, 0.66, 0.22, 0.2, 0.0, 2.0 * kPi, 18);
            out.push_back(loop);
            break;
        }
        case 7: {
            out.push_back({{0.24, 0.15}, {0.76, 0.15}});
            out.push_back({{0.76, 0.15}, {0.4, 0.88}});
            break;
        }
        case 8: {
            Stroke top, bottom;
            arc(top, 0.5, 0.3, 0.19, 0.17, 0.0, 2.0 * kPi, 18);
            arc(bottom, 0.5, 0.68, 0.23, 0.2, 0.0, 2.0 * kPi, 18);
            out.push_back(top);
            out.push_back(bottom);
            break;
        }
        case 9: {
            Stroke loop;
            arc(loop, 0.48, 0.34, 0.21, 0.19, 0.0, 2.0 * kPi, 18);
            out.push_back(loop);
            out.push_back({{0.69, 0.36}, {0.66, 0.62}, {0.52, 0.88}});
            break;
        }
        default:
            throw std::domain_error("digit must be in 0..9");
    }
    return out;
}

double segment_distance(double px, double py, Pt a, Pt b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((px - a.x) * dx + (py - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double cx = a.x + t * dx, cy = a.y + t * dy;
    return std::hypot(px - cx, py - cy);
}

double uniform_pm(RngStream& rng, double spread) { return (rng.uniform() * 2.0 - 1.0) * spread; }

}  // namespace

Tensor render_digit(std::size_t digit, const SynthSpec& spec, RngStream& rng) {
    const std::size_t s = spec.image_size;
    auto strokes = digit_strokes(digit);

    // Per-sample deformation: control-point jitter, then a random affine map.
    const double theta = uniform_pm(rng, spec.rotation_deg * kPi / 180.0);
    const double shear = uniform_pm(rng, spec.shear);
    const double sx = 1.0 + uniform_pm(rng, spec.scale_spread);
    const double sy = 1.0 + uniform_pm(rng, spec.scale_spread);
    const double ct = std::cos(theta), st = std::sin(theta);
    const double glyph = 0.72 * static_cast<double>(s);
    const double ox = 0.5 * static_cast<double>(s) + uniform_pm(rng, spec.translate_px);
    const double oy = 0.5 * static_cast<double>(s) + uniform_pm(rng, spec.translate_px);

    for (auto& stroke : strokes) {
        for (auto& p : stroke) {
            double x = p.x - 0.5 + rng.normal(0.0, spec.point_jitter);
            double y = p.y - 0.5 + rng.normal(0.0, spec.point_jitter);
            x = sx * x + shear * y;
            y = sy * y;
            const double rx = ct * x - st * y;
            const double ry = st * x + ct * y;
            p.x = ox + rx * glyph;
            p.y = oy + ry * glyph;
        }
    }

    const double half_width = spec.stroke_min + rng.uniform() * (spec.stroke_max - spec.stroke_min);
    Tensor img({1, 1, s, s});
    for (const auto& stroke : strokes) {
        for (std::size_t i = 0; i + 1 < stroke.size(); ++i) {
            const Pt a = stroke[i], b = stroke[i + 1];
            const long x0 = std::max(0L, (long)std::floor(std::min(a.x, b.x) - half_width - 1));
            const long x1 = std::min((long)s - 1, (long)std::ceil(std::max(a.x, b.x) + half_width + 1));
            const long y0 = std::max(0L, (long)std::floor(std::min(a.y, b.y) - half_width - 1));
            const long y1 = std::min((long)s - 1, (long)std::ceil(std::max(a.y, b.y) + half_width + 1));
            for (long y = y0; y <= y1; ++y) {
                for (long x = x0; x <= x1; ++x) {
                    const double d =
                        segment_distance((double)x + 0.5, (double)y + 0.5, a, b);
                    const double v = std::clamp((half_width + 0.5 - d), 0.0, 1.0);
                    double& px = img[(std::size_t)y * s + (std::size_t)x];
                    px = std::max(px, v);
                }
            }
        }
    }

    if (spec.noise_sd > 0.0) {
        for (std::size_t i = 0; i < img.size(); ++i) {
            img[i] = std::clamp(img[i] + rng.normal(0.0, spec.noise_sd), 0.0, 1.0);
        }
    }
    return img;
}

Dataset synth_digits(std::size_t count, const SynthSpec& spec, std::uint64_t seed) {
    if (count == 0) throw std::domain_error("synth_digits: count must be positive");
    RngStream rng(seed, "synth-digits");
    const std::size_t s = spec.image_size;

    std::vector<std::size_t> classes(count);
    for (std::size_t i = 0; i < count; ++i) classes[i] = i % 10;
    std::shuffle(classes.begin(), classes.end(), rng.engine());

    Dataset d;
    d.name = "synth-digits";
    d.images = Tensor({count, 1, s, s});
    d.labels.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Tensor img = render_digit(classes[i], spec, rng);
        std::copy(img.data(), img.data() + img.size(), d.images.data() + i * s * s);
        d.labels.push_back({classes[i], 10});
    }
    return d;
}

Dataset synth_digits_rgb(std::size_t count, std::uint64_t seed) {
    if (count == 0) throw std::domain_error("synth_digits_rgb: count must be positive");
    SynthSpec spec;
    spec.image_size = 32;
    RngStream rng(seed, "synth-digits-rgb");

    std::vector<std::size_t> classes(count);
    for (std::size_t i = 0; i < count; ++i) classes[i] = i % 10;
    std::shuffle(classes.begin(), classes.end(), rng.engine());

    const std::size_t plane = 32 * 32;
    Dataset d;
    d.name = "synth-digits-rgb";
    d.images = Tensor({count, 3, 32, 32});
    d.labels.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Tensor glyph = render_digit(classes[i], spec, rng);
        double fg[3], bg[3];
        for (int c = 0; c < 3; ++c) {
            bg[c] = 0.2 + 0.4 * rng.uniform();
            fg[c] = 0.6 + 0.4 * rng.uniform();
        }
        double* dst = d.images.data() + i * 3 * plane;
        for (int c = 0; c < 3; ++c) {
            for (std::size_t p = 0; p < plane; ++p) {
                const double a = glyph[p];
                const double v = bg[c] * (1.0 - a) + fg[c] * a + rng.normal(0.0, 0.04);
                dst[c * plane + p] = std::clamp(v, 0.0, 1.0);
            }
        }
        d.labels.push_back({classes[i], 10});
    }
    return d;
}

}  // namespace disturb
