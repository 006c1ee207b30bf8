#pragma once

// Line-oriented `key = value` run configuration. Blank lines and text after
// '#' are ignored. Recognised keys:
//
//   contrastive_epochs, mse_epochs, batch_size, seed
//   lr, lr_decay, lr_decay_every, weight_decay, beta1, beta2, eps
//   positive_threshold, gt_sigma, target_norm (peak | mass), target_sigma
//   temperature, init_noise

#include <string>
#include <string_view>

#include "zsol/align.hpp"

namespace zsol {

struct RunConfig {
    TrainConfig train;
    double temperature = 0.07;
    double init_noise = 0.02;
};

/// Throws DataError naming the offending line for unknown keys or bad values.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Inverse of parse_run_config; every key is written.
std::string format_run_config(const RunConfig& cfg);

}  // namespace zsol
