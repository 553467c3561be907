#include "tcf/losses.hpp"

#include <algorithm>
#include <cmath>

#include "tcf/error.hpp"

namespace tcf {

using nn::NodeId;
using nn::Tape;
using nn::Tensor;

void LossConfig::validate() const {
    if (!(huber_delta > 0.0)) throw ConfigError("huber delta must be > 0");
    const double ws[] = {w_huber, w_atm, w_adv, w_cls, w_route};
    for (double w : ws)
        if (w < 0.0) throw ConfigError("loss weights must be >= 0");
    if (!(prob_eps > 0.0 && prob_eps < 0.5)) throw ConfigError("prob_eps out of range");
}

void Discriminator::init(long track_width, long cond_width, long hidden, std::mt19937_64& rng) {
    cond_width_ = cond_width;
    net_.init("discriminator", {track_width + cond_width, hidden, hidden, 1}, rng);
}

NodeId Discriminator::forward(Tape& t, NodeId flat_track, NodeId cond) {
    NodeId in = flat_track;
    if (cond_width_ > 0) {
        if (cond < 0) throw StateError("conditional discriminator needs the fused features");
        in = t.concat({flat_track, cond}, 1);
    }
    return t.sigmoid_act(net_.forward(t, in));
}

void Discriminator::collect(std::vector<nn::Param*>& out) { net_.collect(out); }

void ModeClassifier::init(long track_width, int k, long hidden, std::mt19937_64& rng) {
    k_ = k;
    net_.init("classifier", {track_width, hidden, static_cast<long>(k)}, rng);
}

NodeId ModeClassifier::logits(Tape& t, NodeId flat_track) { return net_.forward(t, flat_track); }

void ModeClassifier::collect(std::vector<nn::Param*>& out) { net_.collect(out); }

// ------------------------------------------------------------ tape builders

NodeId huber_loss(Tape& t, NodeId pred, const Tensor& target, double delta) {
    const NodeId per_sample = t.huber_per_sample(pred, target, delta);
    return t.mean_all(per_sample);
}

NodeId huber_weighted_experts(Tape& t, const std::vector<NodeId>& expert_preds, const Tensor& target,
                              const Tensor& weights, double delta) {
    if (expert_preds.empty()) throw ValidationError("huber_weighted_experts: no experts");
    const long n = t.value(expert_preds[0]).dim(0);
    const long k = static_cast<long>(expert_preds.size());
    if (weights.dims() != std::vector<long>({n, k}))
        throw ValidationError("huber_weighted_experts: weights must be [N,k]");
    NodeId acc = -1;
    for (long e = 0; e < k; ++e) {
        Tensor col({n});
        for (long i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = weights[static_cast<std::size_t>(i * k + e)];
        const NodeId per_sample = t.huber_per_sample(expert_preds[static_cast<std::size_t>(e)], target, delta);
        const NodeId term = t.weighted_sum(per_sample, col);
        acc = acc < 0 ? term : t.add(acc, term);
    }
    return t.scale(acc, 1.0 / static_cast<double>(n));
}

NodeId atm_mse(Tape& t, NodeId recon, const Tensor& target) {
    const NodeId diff = t.sub(recon, t.constant(target));
    return t.mean_all(t.mul(diff, diff));
}

NodeId adversarial_loss_d(Tape& t, NodeId d_real, NodeId d_fake, double eps) {
    const NodeId log_real = t.log_act(t.clamp(d_real, eps, 1.0 - eps));
    const NodeId one_minus = t.add_scalar(t.scale(d_fake, -1.0), 1.0);
    const NodeId log_fake = t.log_act(t.clamp(one_minus, eps, 1.0 - eps));
    return t.sub(t.scale(t.mean_all(log_real), -1.0), t.mean_all(log_fake));
}

NodeId adversarial_loss_g(Tape& t, NodeId d_fake, const Tensor& sample_weights, double eps) {
    const NodeId log_fake = t.log_act(t.clamp(d_fake, eps, 1.0 - eps));
    double wsum = 0.0;
    for (long i = 0; i < sample_weights.numel(); ++i) wsum += sample_weights[static_cast<std::size_t>(i)];
    if (!(wsum > 0.0)) throw ValidationError("adversarial_loss_g: zero weight mass");
    return t.scale(t.weighted_sum(log_fake, sample_weights), -1.0 / wsum);
}

NodeId mode_cls_loss(Tape& t, NodeId classifier_logits, const Tensor& weights) {
    if (t.value(classifier_logits).dims() != weights.dims())
        throw ValidationError("mode_cls_loss: weights shape mismatch");
    const long n = t.value(classifier_logits).dim(0);
    const NodeId lsm = t.log_softmax_last(classifier_logits);
    return t.scale(t.weighted_sum(lsm, weights), -1.0 / static_cast<double>(n));
}

NodeId routing_entropy_from_logits(Tape& t, NodeId router_logits, const Tensor& posterior) {
    if (t.value(router_logits).dims() != posterior.dims())
        throw ValidationError("routing entropy: posterior shape mismatch");
    const long n = t.value(router_logits).dim(0);
    const NodeId lsm = t.log_softmax_last(router_logits);
    return t.scale(t.weighted_sum(lsm, posterior), -1.0 / static_cast<double>(n));
}

// ------------------------------------------------------------- plain values

double huber_value(double error, double delta) {
    if (!(delta > 0.0)) throw ConfigError("huber delta must be > 0");
    const double ae = std::fabs(error);
    return ae < delta ? 0.5 * error * error : delta * ae - 0.5 * delta * delta;
}

double routing_entropy_loss(const std::vector<double>& pi, const std::vector<double>& posterior, double eps) {
    if (pi.size() != posterior.size() || pi.empty()) throw ValidationError("routing_entropy_loss: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < pi.size(); ++i)
        acc -= posterior[i] * std::log(std::max(pi[i], eps));
    return acc;
}

double total_loss(const TotalLossBreakdown& parts, const LossConfig& cfg, TotalLossBreakdown* out) {
    cfg.validate();
    TotalLossBreakdown b = parts;
    b.total = cfg.w_huber * parts.huber + cfg.w_atm * parts.atm + cfg.w_adv * parts.adv_g + cfg.w_cls * parts.cls +
              cfg.w_route * parts.route;
    if (out) *out = b;
    return b.total;
}

// -------------------------------------------------------------- diagnostics

namespace {

double kl_term(double p, double m) { return p > 0.0 && m > 0.0 ? p * std::log(p / m) : 0.0; }

double jsd_1d(const std::vector<double>& a, const std::vector<double>& b, int bins, double lo, double hi) {
    std::vector<double> pa(static_cast<std::size_t>(bins), 0.0), pb(static_cast<std::size_t>(bins), 0.0);
    const double width = hi - lo;
    auto bucket = [&](double v) {
        int idx = width > 0.0 ? static_cast<int>((v - lo) / width * bins) : 0;
        return std::clamp(idx, 0, bins - 1);
    };
    for (double v : a) pa[static_cast<std::size_t>(bucket(v))] += 1.0 / static_cast<double>(a.size());
    for (double v : b) pb[static_cast<std::size_t>(bucket(v))] += 1.0 / static_cast<double>(b.size());
    double jsd = 0.0;
    for (int i = 0; i < bins; ++i) {
        const double m = 0.5 * (pa[static_cast<std::size_t>(i)] + pb[static_cast<std::size_t>(i)]);
        jsd += 0.5 * kl_term(pa[static_cast<std::size_t>(i)], m) + 0.5 * kl_term(pb[static_cast<std::size_t>(i)], m);
    }
    return jsd;
}

}  // namespace

std::vector<std::vector<double>> expert_jsd_matrix(const std::vector<std::vector<std::vector<double>>>& expert_outputs,
                                                   int bins) {
    const std::size_t k = expert_outputs.size();
    std::vector<std::vector<double>> out(k, std::vector<double>(k, 0.0));
    if (k == 0) return out;
    const std::size_t dims = expert_outputs[0].empty() ? 0 : expert_outputs[0][0].size();
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a + 1; b < k; ++b) {
            double acc = 0.0;
            for (std::size_t d = 0; d < dims; ++d) {
                std::vector<double> va, vb;
                for (const auto& row : expert_outputs[a]) va.push_back(row[d]);
                for (const auto& row : expert_outputs[b]) vb.push_back(row[d]);
                double lo = va[0], hi = va[0];
                for (double v : va) {
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
                for (double v : vb) {
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
                acc += jsd_1d(va, vb, bins, lo, hi);
            }
            out[a][b] = out[b][a] = dims ? acc / static_cast<double>(dims) : 0.0;
        }
    return out;
}

}  // namespace tcf
