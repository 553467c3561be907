#pragma once

#include <string>
#include <vector>

#include "tcf/nn/modules.hpp"
#include "tcf/sample.hpp"

namespace tcf {

// Everything needed to restart training mid-stream. Parameters (with their
// Adam moments) are stored by name with shape metadata; the config snapshot
// is the canonical dump of the run configuration.
struct CheckpointData {
    std::string config_text;
    long epoch = 0;
    long global_step = 0;
    long step_in_epoch = 0;
    double best_metric = -1.0;
    long best_step = -1;
    std::string train_rng_state;  // serialized mt19937_64
    long adam_t_gen = 0, adam_t_disc = 0, adam_t_cls = 0;
    NormalizationStats stats;
};

void save_checkpoint(const std::string& path, const CheckpointData& data, const std::vector<nn::Param*>& params);

// Header only (compatibility checks before constructing a model).
CheckpointData peek_checkpoint(const std::string& path);

// Fills `params` (by name) with values and optimizer moments; throws
// IncompatibleError naming any missing or shape-mismatched parameter.
CheckpointData load_checkpoint(const std::string& path, const std::vector<nn::Param*>& params);

}  // namespace tcf
