#pragma once

#include <random>
#include <set>
#include <string>
#include <vector>

#include "tcf/checkpoint.hpp"
#include "tcf/config.hpp"
#include "tcf/encoders.hpp"
#include "tcf/losses.hpp"
#include "tcf/moe.hpp"
#include "tcf/store.hpp"

namespace tcf {

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_size = 128;
    int epochs = 300;
    long max_steps = -1;  // stop after this many generator steps (desk runs); -1 = no cap
    std::uint64_t seed = 42;
    int checkpoint_every = 0;  // extra epoch checkpoints; 0 = last/best only
    std::string device = "cpu";

    // Ablation toggles (atmosphere / mixture-of-experts / ocean / terrain).
    bool use_atm = true;
    bool use_moe = true;
    bool use_ocean = true;
    bool use_terrain = true;

    EncoderConfig encoder;
    MoeConfig moe;
    LossConfig loss;
    long disc_hidden = 64;
    long cls_hidden = 64;

    void validate() const;
    // Pushes the toggles into the per-module configs (call before model init).
    void resolve_toggles();

    static TrainConfig from_config(const Config& cfg);
    std::string to_config_text() const;
    static std::set<std::string> known_keys();
};

struct LossBreakdown {
    double huber = 0, atm = 0, adv_g = 0, cls = 0, route = 0, total = 0;
    double adv_d = 0, cls_classifier = 0;
};

struct EpochMetrics {
    long epoch = 0;
    double train_loss_mean = 0;
    double val_track24_km = -1;  // top-1 rule; -1 when no validation split
};

struct TrainRunResult {
    std::vector<EpochMetrics> epochs;
    std::vector<LossBreakdown> step_trace;
    std::string last_checkpoint;
    std::string best_checkpoint;
    long steps_run = 0;
};

// Owns the full trainable state: encoders, expert bank + router, the
// discriminator and mode classifier, one Adam instance per parameter group.
class Trainer {
  public:
    explicit Trainer(TrainConfig cfg);

    // One alternating update: discriminator, classifier, then the joint
    // generator-side step. The batch must be normalized samples.
    LossBreakdown train_step(const std::vector<const TcSample*>& batch);

    // Epoch loop over the store's train split with per-epoch validation.
    TrainRunResult train(const SampleStore& store, const std::string& out_dir);

    // Restores parameters, optimizer state, stats and loop counters.
    // Architecture keys must match; batch-size changes are allowed (warning).
    void resume_from(const std::string& checkpoint_path);
    void save(const std::string& path);

    Encoders& encoders() { return encoders_; }
    TmaMoe& moe() { return moe_; }
    Discriminator& discriminator() { return disc_; }
    ModeClassifier& classifier() { return cls_; }
    NormalizationStats& stats() { return stats_; }
    const TrainConfig& config() const { return cfg_; }
    long global_step() const { return global_step_; }

    std::vector<nn::Param*> generator_params();
    std::vector<nn::Param*> discriminator_params();
    std::vector<nn::Param*> classifier_params();
    std::vector<nn::Param*> all_params();

    // Validation metric used for best-checkpoint tracking (top-1 24 h km).
    double validation_track24(const std::vector<TcSample>& normalized_val);

  private:
    TrainConfig cfg_;
    Encoders encoders_;
    TmaMoe moe_;
    Discriminator disc_;
    ModeClassifier cls_;
    nn::Adam opt_gen_, opt_disc_, opt_cls_;
    NormalizationStats stats_;
    std::mt19937_64 train_rng_;
    long epoch_ = 0, step_in_epoch_ = 0, global_step_ = 0;
    double best_metric_ = -1.0;
    long best_step_ = -1;
};

// Largest-remainder split of storm ids into train/val/test by year of first
// fix, preserving the given fractions when year ranges are not configured.
void write_fraction_splits(SampleStore* store, double train_frac, double val_frac, std::uint64_t seed);

}  // namespace tcf
