#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "disturb/experiment.hpp"
#include "disturb/synth.hpp"

namespace {

using disturb::ExperimentConfig;

std::string suffixed(const std::string& path, const std::string& suffix) {
    if (path.empty()) return path;
    const auto dot = path.rfind('.');
    if (dot == std::string::npos || path.find('/', dot) != std::string::npos) {
        return path + suffix;
    }
    return path.substr(0, dot) + suffix + path.substr(dot);
}

void report(const std::string& tag, const disturb::RunResult& r) {
    std::fprintf(stderr, "%s: final test_err %.4f, best test_err %.4f (epoch %zu)\n", tag.c_str(),
                 r.final_test_err, r.best_test_err, r.best_epoch);
}

int run_train(ExperimentConfig cfg) {
    if (!cfg.alpha_sweep.empty()) {
        for (double a : cfg.alpha_sweep) {
            ExperimentConfig sub = cfg;
            sub.alpha_sweep.clear();
            sub.alpha = a;
            sub.out_path = suffixed(cfg.out_path, "-alpha" + std::to_string(a).substr(0, 4));
            report("alpha=" + std::to_string(a).substr(0, 4), disturb::run_experiment(sub));
        }
        return 0;
    }
    if (cfg.compare_soft_modes) {
        ExperimentConfig base = cfg;
        base.compare_soft_modes = false;

        ExperimentConfig plain = base;
        plain.alpha = 0.0;
        plain.out_path = suffixed(cfg.out_path, "-baseline");
        report("baseline", disturb::run_experiment(plain));

        ExperimentConfig soft = disturb::soft_label_mode(base);
        soft.out_path = suffixed(cfg.out_path, "-soft");
        report("soft-labels", disturb::run_experiment(soft));

        ExperimentConfig hard = base;
        hard.out_path = suffixed(cfg.out_path, "-disturb");
        report("disturb", disturb::run_experiment(hard));
        return 0;
    }
    report("run", disturb::run_experiment(cfg));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DisturbLabel training and experiment harness"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "Run a training experiment");
    std::string config_path, preset_name;
    train->add_option("--config", config_path, "key=value config file");
    train->add_option("--preset", preset_name, "named experiment recipe");
    // every config key doubles as a flag of the same name
    static const char* keys[] = {"dataset",       "data-dir",       "network",
                                 "alpha",         "disturb-enabled", "dropout",
                                 "halve-alpha",
                                 "soft-labels",   "subset-fraction", "preserve-iterations",
                                 "stratified",    "epochs-scale",   "seed",
                                 "data-seed",     "out",            "checkpoint",
                                 "deterministic", "batch-size",     "weight-decay",
                                 "crop",          "pad-before-crop", "flip-prob",
                                 "synth-train",   "synth-test",     "train-eval-cap"};
    auto values = std::make_shared<std::map<std::string, std::string>>();
    for (const char* key : keys) {
        train->add_option_function<std::string>(
            std::string("--") + key,
            [values, key](const std::string& v) { (*values)[key] = v; });
    }

    // synth
    auto* synth = app.add_subcommand("synth", "Write a synthetic digit corpus in IDX/CIFAR format");
    std::string synth_dir = "data";
    std::size_t synth_train_n = 4000, synth_test_n = 2000;
    std::uint64_t synth_seed = 90210;
    std::string synth_format = "idx";
    synth->add_option("--out-dir", synth_dir, "output directory");
    synth->add_option("--train", synth_train_n, "training image count");
    synth->add_option("--test", synth_test_n, "test image count");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--format", synth_format, "idx (28x28 grayscale) or cifar (32x32 RGB)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            ExperimentConfig cfg;
            if (!preset_name.empty()) cfg = disturb::preset(preset_name);
            if (!config_path.empty()) {
                for (const auto& [k, v] : disturb::parse_config_file(config_path)) {
                    disturb::apply_config_entry(cfg, k, v);
                }
            }
            for (const auto& [k, v] : *values) disturb::apply_config_entry(cfg, k, v);
            cfg.validate();
            return run_train(cfg);
        }
        if (synth->parsed()) {
            std::filesystem::create_directories(synth_dir);
            if (synth_format == "idx") {
                disturb::SynthSpec spec;
                auto train_d = disturb::synth_digits(synth_train_n, spec, synth_seed);
                auto test_d = disturb::synth_digits(synth_test_n, spec, synth_seed + 1);
                disturb::save_mnist_idx(train_d, synth_dir + "/train-images-idx3-ubyte",
                                        synth_dir + "/train-labels-idx1-ubyte");
                disturb::save_mnist_idx(test_d, synth_dir + "/t10k-images-idx3-ubyte",
                                        synth_dir + "/t10k-labels-idx1-ubyte");
            } else if (synth_format == "cifar") {
                auto train_d = disturb::synth_digits_rgb(synth_train_n, synth_seed);
                auto test_d = disturb::synth_digits_rgb(synth_test_n, synth_seed + 1);
                const std::size_t per = (train_d.count() + 4) / 5;
                disturb::RngStream unused(0, "x");
                for (int b = 0; b < 5; ++b) {
                    // slice into five batch files, CIFAR layout
                    const std::size_t lo = std::min<std::size_t>(b * per, train_d.count());
                    const std::size_t hi = std::min<std::size_t>((b + 1) * per, train_d.count());
                    disturb::Dataset slice;
                    slice.name = train_d.name;
                    const std::size_t item = 3 * 32 * 32;
                    slice.images = disturb::Tensor(
                        {hi - lo, 3, 32, 32},
                        std::vector<double>(train_d.images.data() + lo * item,
                                            train_d.images.data() + hi * item));
                    slice.labels.assign(train_d.labels.begin() + lo, train_d.labels.begin() + hi);
                    disturb::save_cifar10_bin(slice, synth_dir + "/data_batch_" +
                                                         std::to_string(b + 1) + ".bin");
                }
                disturb::save_cifar10_bin(test_d, synth_dir + "/test_batch.bin");
            } else {
                throw disturb::ConfigError("unknown synth format: " + synth_format);
            }
            return 0;
        }
    } catch (const disturb::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const disturb::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const disturb::DivergenceError& e) {
        std::fprintf(stderr, "diverged: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
