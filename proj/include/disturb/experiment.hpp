#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "disturb/data.hpp"
#include "disturb/loss.hpp"
#include "disturb/network.hpp"
#include "disturb/optim.hpp"

namespace disturb {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DivergenceError : std::runtime_error {
    DivergenceError(std::size_t epoch, std::size_t batch)
        : std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch)),
          epoch(epoch),
          batch(batch) {}
    std::size_t epoch, batch;
};

struct ExperimentConfig {
    // dataset: mnist | cifar10 | synth | synth-rgb | auto | cifar10-auto.
    // "auto" falls back to the synthetic digit corpus when the real files are
    // not under data_dir.
    std::string dataset = "auto";
    std::string data_dir = "data";
    std::string network = "[C5(S1P0)@32-MP2(S2)]-[C5(S1P0)@64-MP2(S2)]-FC512-D0.5-FC10";
    SgdConfig sgd;
    double alpha = 0.0;
    bool disturb_enabled = true;  // off: targets bypass the disturbance module
    std::optional<std::vector<std::vector<std::size_t>>> label_groups;
    bool dropout = false;
    bool halve_alpha_with_dropout = false;
    bool soft_labels = false;
    AugmentSpec augment;
    double subset_fraction = 1.0;
    bool preserve_iterations = false;
    bool stratified_subset = true;
    double epochs_scale = 1.0;  // divisor applied to stage epoch counts
    std::uint64_t seed = 1;
    std::uint64_t data_seed = 90210;  // synthesis + subsampling, fixed across run seeds
    std::string out_path;             // metrics CSV; empty -> no file
    std::string checkpoint_path;      // empty -> out_path + ".ckpt" when out set
    bool deterministic = true;
    std::size_t train_eval_cap = 10000;  // train-error estimate subset size
    std::size_t synth_train = 4000;
    std::size_t synth_test = 2000;

    // multi-run presets, expanded by the CLI
    std::vector<double> alpha_sweep;
    bool compare_soft_modes = false;

    void validate() const;
};

struct MetricsRecord {
    std::size_t epoch = 0;
    double train_err = 0.0;
    double test_err = 0.0;
    double train_loss = 0.0;
    double lr = 0.0;
    double effective_alpha = 0.0;
    double wall_s = 0.0;
};

struct RunResult {
    std::vector<MetricsRecord> records;
    double final_test_err = 0.0;
    double best_test_err = 0.0;
    std::size_t best_epoch = 0;
};

extern const char* const kMetricsHeader;  // epoch,train_err,test_err,...

std::string format_record(const MetricsRecord& r);

// alpha/2 when dropout and the halving rule are both on, else alpha verbatim.
double resolve_alpha(const ExperimentConfig& cfg);

// Switches the run to fixed soft-label targets at the same alpha.
ExperimentConfig soft_label_mode(const ExperimentConfig& cfg);

// Named recipes: mnist-baseline, mnist-disturb, mnist-dropout, mnist-both,
// mnist-1pct, mnist-10pct, alpha-sweep, soft-vs-disturb, cifar10-smoke.
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

// Top-1 error rate, eval mode; disturbance never touches this path.
double evaluate(Network& net, const Dataset& d, const AugmentSpec& augment_spec,
                std::size_t batch_size = 256);

struct LoadedData {
    Dataset train;
    Dataset test;
    std::size_t full_train_count = 0;  // before subsampling
};

LoadedData load_experiment_data(const ExperimentConfig& cfg);

// Alg.-style training loop: per mini-batch disturb the labels, forward in
// train mode, loss gradient, backward, one SGD step; per epoch evaluate and
// append one CSV row.
RunResult run_experiment(const ExperimentConfig& cfg);

// Flat key=value config file with '#' comments; keys match the CLI flags.
std::map<std::string, std::string> parse_config_file(const std::string& path);
void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value);

}  // namespace disturb
