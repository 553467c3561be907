#pragma once

#include <array>
#include <random>
#include <vector>

#include "tcf/encoders.hpp"
#include "tcf/nn/modules.hpp"
#include "tcf/sample.hpp"

namespace tcf {

struct MoeConfig {
    int k = 6;                  // experts
    long expert_trunk = 128;    // fully connected trunk width
    long expert_decoder = 64;   // recurrent decoder width
    long router_hidden = 48;    // fixed 3-layer router
    bool enabled = true;        // M toggle; disabled -> single expert, no router

    void validate() const;
    int effective_k() const { return enabled ? k : 1; }
};

// Routing decision for one sample.
struct RouterOutput {
    std::vector<double> logits;
    std::vector<double> pi;  // softmax(logits), sums to 1
    int selected = 0;        // argmax(pi), lowest index on ties
};

RouterOutput route_from_logits(const std::vector<double>& logits);

// Matching-score posterior over experts: S_i = -|Yhat_i - Y|^2 in normalized
// target space, R = softmax(S) with max subtraction.
struct RoutingPosterior {
    std::vector<double> scores;
    std::vector<double> posterior;
};

RoutingPosterior compute_posterior(const std::vector<std::vector<double>>& expert_forecasts,
                                   const std::vector<double>& truth);

// Expert bank + router. Experts share one architecture (fully connected
// trunk, 4-step recurrent decoder emitting (dlat, dlon, pressure, wind))
// with unshared parameters.
class TmaMoe {
  public:
    void init(const MoeConfig& cfg, long fused_width, std::mt19937_64& rng);
    const MoeConfig& config() const { return cfg_; }
    long fused_width() const { return fused_width_; }

    // [N, fused] -> [N, kTargetSteps, 4]; throws ValidationError on bad index.
    nn::NodeId expert_forward(nn::Tape& t, nn::NodeId c, int expert_index);
    // [N, fused] -> [N, k] logits.
    nn::NodeId router_logits(nn::Tape& t, nn::NodeId c);

    // Plain-value routing for a batch of fused features [N, fused].
    std::vector<RouterOutput> route(const nn::Tensor& fused_values);

    void collect_router(std::vector<nn::Param*>& out);
    void collect_expert(int g, std::vector<nn::Param*>& out);
    void collect_all(std::vector<nn::Param*>& out);

  private:
    struct Expert {
        nn::Mlp trunk;
        nn::Linear h0, c0;
        nn::LstmCell cell;
        nn::Linear head;
    };
    MoeConfig cfg_;
    long fused_width_ = 0;
    nn::Mlp router_;
    std::vector<Expert> experts_;
};

// One anchor's ensemble forecast: every expert's denormalized 4-step track
// plus the routing distribution and the top-1 (or sampled) member.
struct ForecastEnsemble {
    std::string storm_id;
    DateTime anchor_time;
    std::vector<std::array<std::array<double, 4>, kTargetSteps>> member_tracks;
    std::vector<double> pi;
    int selected = 0;        // argmax pi
    int sampled = -1;        // >= 0 only in sampling mode
    std::array<std::array<double, 4>, kTargetSteps> truth{};
    std::array<double, 4> anchor_fix{};
    int mode_label = -1;
};

enum class EnsembleMode { select, sample };

// Runs all experts on normalized samples and denormalizes each member track.
// `rng` is consumed only in sampling mode (one generator per caller).
std::vector<ForecastEnsemble> assemble_ensemble(Encoders& encoders, TmaMoe& moe, const NormalizationStats& stats,
                                                const std::vector<const TcSample*>& batch,
                                                EnsembleMode mode = EnsembleMode::select,
                                                std::mt19937_64* rng = nullptr);

}  // namespace tcf
