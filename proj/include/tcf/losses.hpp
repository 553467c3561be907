#pragma once

#include <random>
#include <vector>

#include "tcf/nn/modules.hpp"

namespace tcf {

struct LossConfig {
    double huber_delta = 0.5;

    double w_huber = 1.0;
    double w_atm = 0.5;
    double w_adv = 0.1;
    double w_cls = 0.1;
    double w_route = 1.0;

    // Eq-form options left open by the source method description.
    bool conditional_discriminator = false;  // D(Y | c) instead of D(Y)
    bool huber_all_experts = false;          // posterior-weighted across experts vs routed-only

    double prob_eps = 1e-7;  // clamp inside adversarial/classification logs

    void validate() const;
};

// Binary critic over a flattened normalized 4-step track, optionally
// conditioned on the fused feature vector. Sigmoid head keeps outputs in (0,1).
class Discriminator {
  public:
    void init(long track_width, long cond_width, long hidden, std::mt19937_64& rng);
    nn::NodeId forward(nn::Tape& t, nn::NodeId flat_track, nn::NodeId cond = -1);  // [N,1] probabilities
    void collect(std::vector<nn::Param*>& out);
    bool conditional() const { return cond_width_ > 0; }

  private:
    nn::Mlp net_;
    long cond_width_ = 0;
};

// k-way classifier guessing which expert generated a track.
class ModeClassifier {
  public:
    void init(long track_width, int k, long hidden, std::mt19937_64& rng);
    nn::NodeId logits(nn::Tape& t, nn::NodeId flat_track);  // [N,k]
    void collect(std::vector<nn::Param*>& out);
    int k() const { return k_; }

  private:
    nn::Mlp net_;
    int k_ = 0;
};

// ---- tape-level loss builders (scalars) ----

// Mean elementwise Huber between pred and a constant target.
nn::NodeId huber_loss(nn::Tape& t, nn::NodeId pred, const nn::Tensor& target, double delta);

// Per-sample weighted combination across experts:
// sum_{n,e} weights[n,e] * huber_row(pred_e[n]) / N. Rows of `weights` are a
// distribution (one-hot for routed-only, posterior for weighted mode).
nn::NodeId huber_weighted_experts(nn::Tape& t, const std::vector<nn::NodeId>& expert_preds,
                                  const nn::Tensor& target, const nn::Tensor& weights, double delta);

// Mean squared error between the reconstruction and a constant target cube.
nn::NodeId atm_mse(nn::Tape& t, nn::NodeId recon, const nn::Tensor& target);

// Discriminator objective: -E[log D(real)] - E[log(1 - D(fake))].
nn::NodeId adversarial_loss_d(nn::Tape& t, nn::NodeId d_real, nn::NodeId d_fake, double eps);
// Non-saturating generator side, restricted per sample by `sample_weights`
// (the routed-member mask): -sum_n w[n] log D(fake_n) / sum_n w[n].
nn::NodeId adversarial_loss_g(nn::Tape& t, nn::NodeId d_fake, const nn::Tensor& sample_weights, double eps);

// -sum_{n} w[n,e(n)] log C_{e(n)}(track_n), mean over the batch; `weights`
// is [N,k] selecting (or weighting) the generating expert per sample.
nn::NodeId mode_cls_loss(nn::Tape& t, nn::NodeId classifier_logits, const nn::Tensor& weights);

// Cross-entropy of pi under the posterior R (Eq. 6 form), from router logits.
nn::NodeId routing_entropy_from_logits(nn::Tape& t, nn::NodeId router_logits, const nn::Tensor& posterior);

// ---- plain-value forms (API mirrors + closed-form tests) ----

double huber_value(double error, double delta);
double routing_entropy_loss(const std::vector<double>& pi, const std::vector<double>& posterior,
                            double eps = 1e-12);

struct TotalLossBreakdown {
    double huber = 0, atm = 0, adv_g = 0, cls = 0, route = 0;
    double adv_d = 0, cls_classifier = 0;  // companion-network objectives, reported not summed
    double total = 0;
};

// Weighted sum with per-term breakdown; throws ConfigError on negative weight.
double total_loss(const TotalLossBreakdown& parts, const LossConfig& cfg, TotalLossBreakdown* out = nullptr);

// Diagnostic: pairwise Jensen-Shannon divergence between expert output
// distributions, estimated by per-dimension histogram discretization.
// Returns a k x k symmetric matrix (nats).
std::vector<std::vector<double>> expert_jsd_matrix(const std::vector<std::vector<std::vector<double>>>& expert_outputs,
                                                   int bins = 16);

}  // namespace tcf
