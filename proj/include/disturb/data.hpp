#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "disturb/loss.hpp"
#include "disturb/rng.hpp"
#include "disturb/tensor.hpp"

namespace disturb {

struct Dataset {
    Tensor images;  // [N × channels × H × W], pixels in [0,1] before centering
    std::vector<OneHotLabel> labels;
    std::string name;

    std::size_t count() const { return labels.size(); }
    std::size_t channels() const { return images.extent(1); }
    std::size_t height() const { return images.extent(2); }
    std::size_t width() const { return images.extent(3); }
    std::size_t class_count() const;

    // One image as a [1×C×H×W] tensor copy.
    Tensor image(std::size_t index) const;

    void validate() const;
};

struct AugmentSpec {
    std::size_t crop_size = 0;  // 0 -> no crop
    double flip_probability = 0.0;
    std::size_t pad_before_crop = 0;

    bool active() const { return crop_size > 0 || flip_probability > 0.0; }
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// IDX: big-endian; images magic 0x00000803 then N,H,W then bytes; labels
// magic 0x00000801 then N then label bytes. Pixels are scaled by 1/255.
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path);
void save_mnist_idx(const Dataset& d, const std::string& images_path,
                    const std::string& labels_path);

// CIFAR-10 binary: 3073-byte records, label byte then 1024 R/G/B planes.
Dataset load_cifar10_bin(const std::vector<std::string>& batch_paths);
void save_cifar10_bin(const Dataset& d, const std::string& path);

// Random crop (after optional zero padding) and horizontal flip of a single
// [1×C×H×W] image. Eval pipelines use center_crop instead.
Tensor augment(const Tensor& image, const AugmentSpec& spec, RngStream& rng);
Tensor center_crop(const Tensor& image, const AugmentSpec& spec);

// Class-stratified subset with floor(fraction*N/C) items per class, preserving
// image/label pairing and original order within a class.
Dataset stratified_subsample(const Dataset& d, double fraction, RngStream& rng);

// Uniform random subset of floor(fraction*N) items.
Dataset uniform_subsample(const Dataset& d, double fraction, RngStream& rng);

// Mean image over a training set, for mean-centering.
Tensor mean_image(const Dataset& d);
void subtract_mean(Dataset& d, const Tensor& mean);

}  // namespace disturb
