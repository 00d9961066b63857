#include "disturb/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace disturb {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::ifstream& is, const std::string& path) {
    unsigned char buf[4];
    is.read(reinterpret_cast<char*>(buf), 4);
    if (!is) {
        throw FormatError("truncated file " + path + " at byte offset " +
                          std::to_string(static_cast<long long>(is.gcount())));
    }
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_be32(std::ofstream& os, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                            static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<const char*>(buf), 4);
}

std::vector<unsigned char> read_bytes(std::ifstream& is, std::size_t n, const std::string& path,
                                      std::size_t offset) {
    std::vector<unsigned char> buf(n);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    if (!is) {
        throw FormatError("truncated file " + path + " at byte offset " +
                          std::to_string(offset + static_cast<std::size_t>(is.gcount())));
    }
    return buf;
}

}  // namespace

std::size_t Dataset::class_count() const {
    return labels.empty() ? 0 : labels.front().class_count;
}

Tensor Dataset::image(std::size_t index) const {
    const std::size_t n = channels() * height() * width();
    const double* src = images.data() + index * n;
    return Tensor({1, channels(), height(), width()}, std::vector<double>(src, src + n));
}

void Dataset::validate() const {
    if (images.rank() != 4 || images.extent(0) != labels.size()) {
        throw std::invalid_argument("dataset: image count does not match label count");
    }
    for (const auto& y : labels) {
        if (y.class_index >= y.class_count) {
            throw std::invalid_argument("dataset: label class index out of range");
        }
    }
}

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw FormatError("cannot open " + images_path);
    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw FormatError("cannot open " + labels_path);

    const std::uint32_t img_magic = read_be32(imgs, images_path);
    if (img_magic != kImagesMagic) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "0x%08x", img_magic);
        throw FormatError("bad IDX image magic " + std::string(buf) + " in " + images_path);
    }
    const std::uint32_t n_img = read_be32(imgs, images_path);
    const std::uint32_t h = read_be32(imgs, images_path);
    const std::uint32_t w = read_be32(imgs, images_path);

    const std::uint32_t lab_magic = read_be32(labs, labels_path);
    if (lab_magic != kLabelsMagic) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "0x%08x", lab_magic);
        throw FormatError("bad IDX label magic " + std::string(buf) + " in " + labels_path);
    }
    const std::uint32_t n_lab = read_be32(labs, labels_path);
    if (n_img != n_lab) {
        throw FormatError("IDX count mismatch: " + std::to_string(n_img) + " images in " +
                          images_path + " vs " + std::to_string(n_lab) + " labels in " +
                          labels_path);
    }

    const std::size_t pixels = static_cast<std::size_t>(n_img) * h * w;
    auto raw = read_bytes(imgs, pixels, images_path, 16);
    auto raw_labels = read_bytes(labs, n_lab, labels_path, 8);

    Dataset d;
    d.name = "mnist";
    d.images = Tensor({n_img, 1, h, w});
    for (std::size_t i = 0; i < pixels; ++i) d.images[i] = raw[i] / 255.0;
    d.labels.reserve(n_lab);
    for (unsigned char c : raw_labels) d.labels.push_back({c, 10});
    d.validate();
    return d;
}

void save_mnist_idx(const Dataset& d, const std::string& images_path,
                    const std::string& labels_path) {
    d.validate();
    if (d.channels() != 1) throw std::invalid_argument("IDX writer expects single-channel images");
    std::ofstream imgs(images_path, std::ios::binary);
    if (!imgs) throw std::runtime_error("cannot open " + images_path + " for writing");
    write_be32(imgs, kImagesMagic);
    write_be32(imgs, static_cast<std::uint32_t>(d.count()));
    write_be32(imgs, static_cast<std::uint32_t>(d.height()));
    write_be32(imgs, static_cast<std::uint32_t>(d.width()));
    for (std::size_t i = 0; i < d.images.size(); ++i) {
        const double v = std::clamp(d.images[i], 0.0, 1.0);
        imgs.put(static_cast<char>(std::lround(v * 255.0)));
    }

    std::ofstream labs(labels_path, std::ios::binary);
    if (!labs) throw std::runtime_error("cannot open " + labels_path + " for writing");
    write_be32(labs, kLabelsMagic);
    write_be32(labs, static_cast<std::uint32_t>(d.count()));
    for (const auto& y : d.labels) labs.put(static_cast<char>(y.class_index));
}

Dataset load_cifar10_bin(const std::vector<std::string>& batch_paths) {
    constexpr std::size_t kRecord = 3073;
    constexpr std::size_t kPlane = 1024;

    std::vector<unsigned char> raw;
    for (const auto& path : batch_paths) {
        std::ifstream is(path, std::ios::binary | std::ios::ate);
        if (!is) throw FormatError("cannot open " + path);
        const auto len = static_cast<std::size_t>(is.tellg());
        if (len % kRecord != 0) {
            throw FormatError("file length " + std::to_string(len) + " of " + path +
                              " is not a multiple of " + std::to_string(kRecord));
        }
        is.seekg(0);
        const std::size_t old = raw.size();
        raw.resize(old + len);
        is.read(reinterpret_cast<char*>(raw.data() + old), static_cast<std::streamsize>(len));
        if (!is) throw FormatError("truncated read from " + path);
    }

    const std::size_t n = raw.size() / kRecord;
    Dataset d;
    d.name = "cifar10";
    d.images = Tensor({n, 3, 32, 32});
    d.labels.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        const unsigned char* rec = raw.data() + r * kRecord;
        if (rec[0] > 9) throw FormatError("CIFAR label byte " + std::to_string(rec[0]) +
                                          " out of range in record " + std::to_string(r));
        d.labels.push_back({rec[0], 10});
        double* dst = d.images.data() + r * 3 * kPlane;
        for (std::size_t i = 0; i < 3 * kPlane; ++i) dst[i] = rec[1 + i] / 255.0;
    }
    d.validate();
    return d;
}

void save_cifar10_bin(const Dataset& d, const std::string& path) {
    d.validate();
    if (d.channels() != 3 || d.height() != 32 || d.width() != 32) {
        throw std::invalid_argument("CIFAR writer expects [3x32x32] images");
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    for (std::size_t r = 0; r < d.count(); ++r) {
        os.put(static_cast<char>(d.labels[r].class_index));
        const double* src = d.images.data() + r * 3 * 1024;
        for (std::size_t i = 0; i < 3 * 1024; ++i) {
            os.put(static_cast<char>(std::lround(std::clamp(src[i], 0.0, 1.0) * 255.0)));
        }
    }
}

namespace {

Tensor crop_image(const Tensor& image, std::size_t pad, std::size_t size, std::size_t off_y,
                  std::size_t off_x) {
    const std::size_t c = image.extent(1), h = image.extent(2), w = image.extent(3);
    Tensor out({1, c, size, size});
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t y = 0; y < size; ++y) {
            const long iy = (long)(off_y + y) - (long)pad;
            for (std::size_t x = 0; x < size; ++x) {
                const long ix = (long)(off_x + x) - (long)pad;
                double v = 0.0;
                if (iy >= 0 && iy < (long)h && ix >= 0 && ix < (long)w) {
                    v = image[(ch * h + (std::size_t)iy) * w + (std::size_t)ix];
                }
                out[(ch * size + y) * size + x] = v;
            }
        }
    }
    return out;
}

void require_crop_fits(const Tensor& image, const AugmentSpec& spec) {
    const std::size_t padded_h = image.extent(2) + 2 * spec.pad_before_crop;
    const std::size_t padded_w = image.extent(3) + 2 * spec.pad_before_crop;
    if (spec.crop_size > padded_h || spec.crop_size > padded_w) {
        throw std::domain_error("crop size " + std::to_string(spec.crop_size) +
                                " exceeds padded image extent " + std::to_string(padded_h) + "x" +
                                std::to_string(padded_w));
    }
}

}  // namespace

Tensor augment(const Tensor& image, const AugmentSpec& spec, RngStream& rng) {
    if (image.rank() != 4 || image.extent(0) != 1) {
        throw std::invalid_argument("augment: expected a single [1xCxHxW] image");
    }
    Tensor out = image;
    if (spec.crop_size > 0) {
        require_crop_fits(image, spec);
        const std::size_t span_y =
            image.extent(2) + 2 * spec.pad_before_crop - spec.crop_size + 1;
        const std::size_t span_x =
            image.extent(3) + 2 * spec.pad_before_crop - spec.crop_size + 1;
        out = crop_image(out, spec.pad_before_crop, spec.crop_size, rng.below(span_y),
                         rng.below(span_x));
    }
    if (spec.flip_probability > 0.0 && rng.bernoulli(spec.flip_probability)) {
        const std::size_t c = out.extent(1), h = out.extent(2), w = out.extent(3);
        Tensor flipped(out.shape());
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x)
                    flipped[(ch * h + y) * w + x] = out[(ch * h + y) * w + (w - 1 - x)];
        out = flipped;
    }
    return out;
}

Tensor center_crop(const Tensor& image, const AugmentSpec& spec) {
    if (spec.crop_size == 0) return image;
    require_crop_fits(image, spec);
    const std::size_t span_y = image.extent(2) + 2 * spec.pad_before_crop - spec.crop_size;
    const std::size_t span_x = image.extent(3) + 2 * spec.pad_before_crop - spec.crop_size;
    return crop_image(image, spec.pad_before_crop, spec.crop_size, span_y / 2, span_x / 2);
}

namespace {

Dataset gather(const Dataset& d, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.name = d.name;
    const std::size_t n = d.channels() * d.height() * d.width();
    out.images = Tensor({indices.size(), d.channels(), d.height(), d.width()});
    out.labels.reserve(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const double* src = d.images.data() + indices[i] * n;
        std::copy(src, src + n, out.images.data() + i * n);
        out.labels.push_back(d.labels[indices[i]]);
    }
    return out;
}

void require_fraction(double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw std::domain_error("subsample fraction must be in (0,1], got " +
                                std::to_string(fraction));
    }
}

}  // namespace

Dataset stratified_subsample(const Dataset& d, double fraction, RngStream& rng) {
    require_fraction(fraction);
    d.validate();
    if (fraction == 1.0) return d;

    const std::size_t classes = d.class_count();
    std::vector<std::vector<std::size_t>> by_class(classes);
    for (std::size_t i = 0; i < d.count(); ++i) by_class[d.labels[i].class_index].push_back(i);

    // floor(fraction*N/C) per class, documented floor behaviour
    const std::size_t per_class =
        static_cast<std::size_t>(fraction * static_cast<double>(d.count()) /
                                 static_cast<double>(classes));
    if (per_class == 0) throw std::domain_error("subsample fraction leaves zero items per class");

    std::vector<std::size_t> chosen;
    for (auto& idxs : by_class) {
        std::shuffle(idxs.begin(), idxs.end(), rng.engine());
        const std::size_t take = std::min(per_class, idxs.size());
        std::vector<std::size_t> head(idxs.begin(), idxs.begin() + static_cast<long>(take));
        std::sort(head.begin(), head.end());
        chosen.insert(chosen.end(), head.begin(), head.end());
    }
    std::sort(chosen.begin(), chosen.end());
    return gather(d, chosen);
}

Dataset uniform_subsample(const Dataset& d, double fraction, RngStream& rng) {
    require_fraction(fraction);
    d.validate();
    if (fraction == 1.0) return d;
    std::vector<std::size_t> idxs(d.count());
    for (std::size_t i = 0; i < idxs.size(); ++i) idxs[i] = i;
    std::shuffle(idxs.begin(), idxs.end(), rng.engine());
    const std::size_t take = static_cast<std::size_t>(fraction * static_cast<double>(d.count()));
    idxs.resize(std::max<std::size_t>(take, 1));
    std::sort(idxs.begin(), idxs.end());
    return gather(d, idxs);
}

Tensor mean_image(const Dataset& d) {
    const std::size_t n = d.channels() * d.height() * d.width();
    Tensor mean({1, d.channels(), d.height(), d.width()});
    for (std::size_t i = 0; i < d.count(); ++i) {
        const double* src = d.images.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) mean[j] += src[j];
    }
    for (std::size_t j = 0; j < n; ++j) mean[j] /= static_cast<double>(d.count());
    return mean;
}

void subtract_mean(Dataset& d, const Tensor& mean) {
    const std::size_t n = d.channels() * d.height() * d.width();
    if (mean.size() != n) {
        throw std::invalid_argument("subtract_mean: mean shape " + shape_str(mean.shape()) +
                                    " does not match images");
    }
    for (std::size_t i = 0; i < d.count(); ++i) {
        double* dst = d.images.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) dst[j] -= mean[j];
    }
}

}  // namespace disturb
