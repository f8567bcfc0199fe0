#pragma once

#include <cstdint>
#include <string>

#include "htr/relabel.hpp"
#include "htr/sac.hpp"

namespace htr {

// Full run configuration. File format: flat `key = value` lines with dotted
// section keys, '#' comments; unknown keys are errors.
struct RunConfig {
    EnvSpec env;

    int n_train_tasks = 100;
    int n_test_tasks = 100;
    int meta_batch = 16;
    int train_steps_per_iter = 50;
    int episodes_per_task_per_iter = 2;
    int total_iters = 100;
    int latent_dim = 5;
    std::vector<int> hidden{300, 300, 300};          // policy + critics
    std::vector<int> encoder_hidden{200, 200, 200};  // context network
    double lr = 3e-4;
    bool oracle_dense = false;
    uint64_t seed = 0;
    bool seed_set = false;
    int eval_interval = 5;
    int eval_episodes_per_task = 3;
    int eval_task_limit = 0;  // 0 = all tasks
    int checkpoint_interval = 50;
    std::string out_dir = "run_out";

    SacConfig sac;
    int batch_size = 256;

    int context_size = 64;
    size_t buffer_capacity = 100'000;
    size_t recency_window = 0;  // 0 = whole buffer
    double kl_weight = 0.1;

    RelabelConfig relabel;
};

RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text);

// Single key override; throws std::invalid_argument naming unknown keys or
// bad values.
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

// Lossless round trip: parse(serialize(cfg)) == cfg.
std::string serialize_config(const RunConfig& cfg);

// Rejects invalid configs before any work, naming the offending key.
void validate_config(const RunConfig& cfg);

}  // namespace htr
