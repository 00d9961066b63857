#include "disturb/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "disturb/synth.hpp"

namespace disturb {

namespace fs = std::filesystem;

const char* const kMetricsHeader = "epoch,train_err,test_err,train_loss,lr,effective_alpha,wall_s";

void ExperimentConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw ConfigError("alpha must be in [0,1], got " + std::to_string(alpha));
    }
    if (!(subset_fraction > 0.0 && subset_fraction <= 1.0)) {
        throw ConfigError("subset-fraction must be in (0,1]");
    }
    if (epochs_scale <= 0.0) throw ConfigError("epochs-scale must be positive");
    try {
        Network::parse(network);
    } catch (const ParseError& e) {
        throw ConfigError(std::string("network string: ") + e.what());
    }
    try {
        sgd.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

std::string format_record(const MetricsRecord& r) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(6);
    os << r.epoch << ',' << r.train_err << ',' << r.test_err << ',' << r.train_loss << ',';
    os.unsetf(std::ios::fixed);
    os << r.lr << ',' << r.effective_alpha << ',';
    os.setf(std::ios::fixed);
    os.precision(3);
    os << r.wall_s;
    return os.str();
}

double resolve_alpha(const ExperimentConfig& cfg) {
    if (cfg.dropout && cfg.halve_alpha_with_dropout) return cfg.alpha / 2.0;
    return cfg.alpha;
}

ExperimentConfig soft_label_mode(const ExperimentConfig& cfg) {
    ExperimentConfig out = cfg;
    out.soft_labels = true;
    return out;
}

namespace {

SgdConfig lenet_schedule() {
    SgdConfig sgd;
    sgd.stages = {{40, 1e-3}, {20, 1e-4}, {20, 1e-5}, {20, 1e-6}};
    sgd.batch_size = 64;
    sgd.weight_decay = 0.0;
    return sgd;
}

// Desk-scale compression: divide stage epoch counts by `scale` and multiply
// the rates by it, preserving the lr x epochs budget of the full schedule.
SgdConfig scaled(const SgdConfig& sgd, double scale) {
    SgdConfig out = sgd;
    for (auto& [epochs, rate] : out.stages) {
        epochs = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(static_cast<double>(epochs) / scale)));
        rate *= scale;
    }
    return out;
}

}  // namespace

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig cfg;
    cfg.sgd = lenet_schedule();
    cfg.epochs_scale = 5.0;  // desk-scale default; 1.0 restores the full schedule

    if (name == "mnist-baseline") {
        // plain SGD, no regularizers
    } else if (name == "mnist-disturb") {
        cfg.alpha = 0.2;
    } else if (name == "mnist-dropout") {
        cfg.dropout = true;
    } else if (name == "mnist-both") {
        cfg.dropout = true;
        cfg.alpha = 0.2;
        cfg.halve_alpha_with_dropout = true;
    } else if (name == "mnist-1pct") {
        cfg.subset_fraction = 0.01;
        cfg.preserve_iterations = true;
        cfg.alpha = 0.2;
        // preserve_iterations makes each epoch cost a full-data epoch, so the
        // desk default compresses the schedule further
        cfg.epochs_scale = 10.0;
    } else if (name == "mnist-10pct") {
        cfg.subset_fraction = 0.1;
        cfg.preserve_iterations = true;
        cfg.alpha = 0.2;
    } else if (name == "alpha-sweep") {
        cfg.alpha_sweep = {0.0, 0.1, 0.2, 0.5};
    } else if (name == "soft-vs-disturb") {
        cfg.alpha = 0.2;
        cfg.compare_soft_modes = true;
    } else if (name == "cifar10-smoke") {
        cfg.dataset = "cifar10-auto";
        cfg.alpha = 0.2;
        cfg.sgd.stages = {{2, 1e-3}};
        cfg.epochs_scale = 1.0;
    } else {
        throw ConfigError("unknown preset: " + name);
    }
    return cfg;
}

std::vector<std::string> preset_names() {
    return {"mnist-baseline", "mnist-disturb", "mnist-dropout",   "mnist-both",   "mnist-1pct",
            "mnist-10pct",    "alpha-sweep",   "soft-vs-disturb", "cifar10-smoke"};
}

double evaluate(Network& net, const Dataset& d, const AugmentSpec& augment_spec,
                std::size_t batch_size) {
    if (net.class_count() != d.class_count()) {
        throw std::invalid_argument("evaluate: network has " + std::to_string(net.class_count()) +
                                    " classes, dataset has " + std::to_string(d.class_count()));
    }
    const std::size_t item = d.channels() * d.height() * d.width();
    std::size_t wrong = 0;
    for (std::size_t start = 0; start < d.count(); start += batch_size) {
        const std::size_t b = std::min(batch_size, d.count() - start);
        Tensor batch;
        if (augment_spec.crop_size > 0) {
            const std::size_t cs = augment_spec.crop_size;
            batch = Tensor({b, d.channels(), cs, cs});
            for (std::size_t i = 0; i < b; ++i) {
                Tensor img = center_crop(d.image(start + i), augment_spec);
                std::copy(img.data(), img.data() + img.size(),
                          batch.data() + i * d.channels() * cs * cs);
            }
        } else {
            batch = Tensor({b, d.channels(), d.height(), d.width()},
                           std::vector<double>(d.images.data() + start * item,
                                               d.images.data() + (start + b) * item));
        }
        Tensor logits = net.forward(batch, Mode::Eval, nullptr);
        const auto pred = argmax_rows(logits);
        for (std::size_t i = 0; i < b; ++i) {
            if (pred[i] != d.labels[start + i].class_index) ++wrong;
        }
    }
    return static_cast<double>(wrong) / static_cast<double>(d.count());
}

namespace {

bool file_exists(const std::string& p) { return fs::exists(p); }

std::string join(const std::string& dir, const std::string& file) {
    return (fs::path(dir) / file).string();
}

LoadedData load_mnist_dir(const std::string& dir) {
    LoadedData out;
    out.train = load_mnist_idx(join(dir, "train-images-idx3-ubyte"),
                               join(dir, "train-labels-idx1-ubyte"));
    out.test =
        load_mnist_idx(join(dir, "t10k-images-idx3-ubyte"), join(dir, "t10k-labels-idx1-ubyte"));
    return out;
}

LoadedData load_cifar_dir(const std::string& dir) {
    std::vector<std::string> batches;
    for (int i = 1; i <= 5; ++i) batches.push_back(join(dir, "data_batch_" + std::to_string(i) + ".bin"));
    LoadedData out;
    out.train = load_cifar10_bin(batches);
    out.test = load_cifar10_bin({join(dir, "test_batch.bin")});
    return out;
}

bool mnist_present(const std::string& dir) {
    return file_exists(join(dir, "train-images-idx3-ubyte")) &&
           file_exists(join(dir, "t10k-images-idx3-ubyte"));
}

bool cifar_present(const std::string& dir) {
    return file_exists(join(dir, "data_batch_1.bin")) && file_exists(join(dir, "test_batch.bin"));
}

}  // namespace

LoadedData load_experiment_data(const ExperimentConfig& cfg) {
    LoadedData out;
    const std::string& ds = cfg.dataset;
    try {
        if (ds == "mnist") {
            out = load_mnist_dir(cfg.data_dir);
        } else if (ds == "cifar10") {
            out = load_cifar_dir(cfg.data_dir);
        } else if (ds == "synth") {
            SynthSpec spec;
            out.train = synth_digits(cfg.synth_train, spec, cfg.data_seed);
            out.test = synth_digits(cfg.synth_test, spec, cfg.data_seed + 1);
        } else if (ds == "synth-rgb") {
            out.train = synth_digits_rgb(cfg.synth_train, cfg.data_seed);
            out.test = synth_digits_rgb(cfg.synth_test, cfg.data_seed + 1);
        } else if (ds == "auto") {
            if (mnist_present(cfg.data_dir)) {
                out = load_mnist_dir(cfg.data_dir);
            } else {
                SynthSpec spec;
                out.train = synth_digits(cfg.synth_train, spec, cfg.data_seed);
                out.test = synth_digits(cfg.synth_test, spec, cfg.data_seed + 1);
            }
        } else if (ds == "cifar10-auto") {
            if (cifar_present(cfg.data_dir)) {
                out = load_cifar_dir(cfg.data_dir);
            } else {
                out.train = synth_digits_rgb(cfg.synth_train, cfg.data_seed);
                out.test = synth_digits_rgb(cfg.synth_test, cfg.data_seed + 1);
            }
        } else {
            throw ConfigError("unknown dataset: " + ds);
        }
    } catch (const std::runtime_error& e) {
        if (dynamic_cast<const ConfigError*>(&e)) throw;
        throw DataError(e.what());
    }
    out.full_train_count = out.train.count();
    return out;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const double eff_alpha = resolve_alpha(cfg);

    LoadedData data = load_experiment_data(cfg);
    RngStream subsample_rng(cfg.data_seed, "subsample");
    if (cfg.subset_fraction < 1.0) {
        data.train = cfg.stratified_subset
                         ? stratified_subsample(data.train, cfg.subset_fraction, subsample_rng)
                         : uniform_subsample(data.train, cfg.subset_fraction, subsample_rng);
    }

    // Mean-centering with the training-set mean image.
    Tensor mean = mean_image(data.train);
    subtract_mean(data.train, mean);
    subtract_mean(data.test, mean);

    // Train-error estimates run on a capped stratified slice of the train set.
    Dataset train_eval = data.train;
    if (cfg.train_eval_cap > 0 && data.train.count() > cfg.train_eval_cap) {
        RngStream cap_rng(cfg.data_seed, "train-eval-cap");
        train_eval = stratified_subsample(
            data.train, static_cast<double>(cfg.train_eval_cap) / data.train.count(), cap_rng);
    }

    const std::size_t in_h = cfg.augment.crop_size > 0 ? cfg.augment.crop_size : data.train.height();
    const std::size_t in_w = cfg.augment.crop_size > 0 ? cfg.augment.crop_size : data.train.width();
    Network net = Network::parse(cfg.network);
    net.build(data.train.channels(), in_h, in_w, cfg.dropout);

    RngStream init_rng(cfg.seed, "init");
    RngStream shuffle_rng(cfg.seed, "shuffle");
    RngStream dropout_rng(cfg.seed, "dropout");
    RngStream disturb_rng(cfg.seed, "disturb");
    RngStream augment_rng(cfg.seed, "augment");
    net.init_params(init_rng);

    DisturbConfig disturb_cfg;
    disturb_cfg.alpha = eff_alpha;
    disturb_cfg.groups = cfg.label_groups;
    disturb_cfg.seed = cfg.seed;

    const SgdConfig sgd = scaled(cfg.sgd, cfg.epochs_scale);
    const std::size_t epochs = total_epochs(sgd);
    const std::size_t batch = sgd.batch_size;
    const std::size_t n_train = data.train.count();
    const std::size_t iterations_per_epoch =
        cfg.preserve_iterations ? (data.full_train_count + batch - 1) / batch
                                : (n_train + batch - 1) / batch;

    std::ofstream csv;
    if (!cfg.out_path.empty()) {
        csv.open(cfg.out_path);
        if (!csv) throw DataError("cannot open metrics output " + cfg.out_path);
        csv << kMetricsHeader << "\n" << std::flush;
    }

    const std::size_t item = data.train.channels() * data.train.height() * data.train.width();
    const std::size_t C = data.train.class_count();
    std::vector<std::size_t> order(n_train);
    for (std::size_t i = 0; i < n_train; ++i) order[i] = i;
    std::size_t cursor = n_train;  // forces a shuffle before the first batch

    RunResult result;
    result.best_test_err = 1.0;
    const auto t0 = std::chrono::steady_clock::now();

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        const double lr = lr_at_epoch(sgd, epoch);
        double loss_sum = 0.0;

        for (std::size_t it = 0; it < iterations_per_epoch; ++it) {
            // Assemble the mini-batch (cycling through reshuffles for
            // iteration-preserving subset runs).
            std::vector<std::size_t> picks(batch);
            for (std::size_t i = 0; i < batch; ++i) {
                if (cursor >= n_train) {
                    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
                    cursor = 0;
                }
                picks[i] = order[cursor++];
            }

            Tensor batch_images;
            if (cfg.augment.active()) {
                const std::size_t h = cfg.augment.crop_size > 0 ? cfg.augment.crop_size
                                                                : data.train.height();
                batch_images = Tensor({batch, data.train.channels(), h, h});
                for (std::size_t i = 0; i < batch; ++i) {
                    Tensor img = augment(data.train.image(picks[i]), cfg.augment, augment_rng);
                    std::copy(img.data(), img.data() + img.size(),
                              batch_images.data() + i * img.size());
                }
            } else {
                batch_images = Tensor({batch, data.train.channels(), data.train.height(),
                                       data.train.width()});
                for (std::size_t i = 0; i < batch; ++i) {
                    const double* src = data.train.images.data() + picks[i] * item;
                    std::copy(src, src + item, batch_images.data() + i * item);
                }
            }

            std::vector<OneHotLabel> labels(batch);
            for (std::size_t i = 0; i < batch; ++i) labels[i] = data.train.labels[picks[i]];

            Tensor targets;
            if (cfg.soft_labels) {
                targets = Tensor({batch, C});
                for (std::size_t i = 0; i < batch; ++i) {
                    const SoftLabel s = soft_label(labels[i], eff_alpha);
                    std::copy(s.probs.begin(), s.probs.end(), targets.data() + i * C);
                }
            } else if (cfg.disturb_enabled) {
                targets = labels_to_matrix(disturb_batch(labels, disturb_cfg, disturb_rng), C);
            } else {
                targets = labels_to_matrix(labels, C);
            }

            Tensor logits = net.forward(batch_images, Mode::Train, &dropout_rng);
            LossResult loss = softmax_xent_batch(logits, targets);
            if (!std::isfinite(loss.loss)) throw DivergenceError(epoch, it);
            loss_sum += loss.loss;
            net.backward(loss.grad);
            sgd_step(net.params(), net.grads(), lr, sgd.weight_decay);
        }

        MetricsRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(iterations_per_epoch);
        rec.lr = lr;
        rec.effective_alpha = eff_alpha;
        rec.train_err = evaluate(net, train_eval, cfg.augment);
        rec.test_err = evaluate(net, data.test, cfg.augment);
        rec.wall_s = cfg.deterministic
                         ? 0.0
                         : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                               .count();
        result.records.push_back(rec);
        if (csv.is_open()) csv << format_record(rec) << "\n" << std::flush;

        if (rec.test_err < result.best_test_err || result.records.size() == 1) {
            result.best_test_err = rec.test_err;
            result.best_epoch = epoch;
        }
        result.final_test_err = rec.test_err;
    }

    if (!cfg.out_path.empty()) {
        const std::string ckpt =
            cfg.checkpoint_path.empty() ? cfg.out_path + ".ckpt" : cfg.checkpoint_path;
        net.save_checkpoint(ckpt);
    }
    return result;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        if (strip(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        }
        out[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
    }
    return out;
}

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': expected boolean, got '" + v + "'");
}

double parse_real(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected number, got '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const std::uint64_t u = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return u;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected integer, got '" + v + "'");
    }
}

}  // namespace

void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "dataset") cfg.dataset = value;
    else if (key == "data-dir") cfg.data_dir = value;
    else if (key == "network") cfg.network = value;
    else if (key == "alpha") cfg.alpha = parse_real(value, key);
    else if (key == "disturb-enabled") cfg.disturb_enabled = parse_bool(value, key);
    else if (key == "dropout") cfg.dropout = parse_bool(value, key);
    else if (key == "halve-alpha") cfg.halve_alpha_with_dropout = parse_bool(value, key);
    else if (key == "soft-labels") cfg.soft_labels = parse_bool(value, key);
    else if (key == "subset-fraction") cfg.subset_fraction = parse_real(value, key);
    else if (key == "preserve-iterations") cfg.preserve_iterations = parse_bool(value, key);
    else if (key == "stratified") cfg.stratified_subset = parse_bool(value, key);
    else if (key == "epochs-scale") cfg.epochs_scale = parse_real(value, key);
    else if (key == "seed") cfg.seed = parse_u64(value, key);
    else if (key == "data-seed") cfg.data_seed = parse_u64(value, key);
    else if (key == "out") cfg.out_path = value;
    else if (key == "checkpoint") cfg.checkpoint_path = value;
    else if (key == "deterministic") cfg.deterministic = parse_bool(value, key);
    else if (key == "batch-size") cfg.sgd.batch_size = static_cast<std::size_t>(parse_u64(value, key));
    else if (key == "weight-decay") cfg.sgd.weight_decay = parse_real(value, key);
    else if (key == "crop") cfg.augment.crop_size = static_cast<std::size_t>(parse_u64(value, key));
    else if (key == "pad-before-crop")
        cfg.augment.pad_before_crop = static_cast<std::size_t>(parse_u64(value, key));
    else if (key == "flip-prob") cfg.augment.flip_probability = parse_real(value, key);
    else if (key == "synth-train") cfg.synth_train = static_cast<std::size_t>(parse_u64(value, key));
    else if (key == "synth-test") cfg.synth_test = static_cast<std::size_t>(parse_u64(value, key));
    else if (key == "train-eval-cap")
        cfg.train_eval_cap = static_cast<std::size_t>(parse_u64(value, key));
    else throw ConfigError("unknown config key: " + key);
}

}  // namespace disturb
