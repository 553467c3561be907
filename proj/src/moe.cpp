#include "tcf/moe.hpp"

#include <algorithm>
#include <cmath>

#include "tcf/error.hpp"

namespace tcf {

using nn::NodeId;
using nn::Tape;
using nn::Tensor;

void MoeConfig::validate() const {
    if (k < 1) throw ConfigError("k experts must be >= 1");
    if (expert_trunk <= 0 || expert_decoder <= 0 || router_hidden <= 0)
        throw ConfigError("expert/router widths must be positive");
}

RouterOutput route_from_logits(const std::vector<double>& logits) {
    if (logits.empty()) throw ValidationError("route: empty logits");
    RouterOutput out;
    out.logits = logits;
    double mx = logits[0];
    for (double v : logits) {
        if (!std::isfinite(v)) throw ComputeError("route: non-finite logit");
        mx = std::max(mx, v);
    }
    double z = 0.0;
    out.pi.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out.pi[i] = std::exp(logits[i] - mx);
        z += out.pi[i];
    }
    for (double& p : out.pi) p /= z;
    out.selected = 0;
    for (std::size_t i = 1; i < out.pi.size(); ++i)
        if (out.pi[i] > out.pi[static_cast<std::size_t>(out.selected)]) out.selected = static_cast<int>(i);
    return out;
}

RoutingPosterior compute_posterior(const std::vector<std::vector<double>>& expert_forecasts,
                                   const std::vector<double>& truth) {
    if (expert_forecasts.empty()) throw ValidationError("posterior: no forecasts");
    RoutingPosterior out;
    out.scores.reserve(expert_forecasts.size());
    for (const auto& f : expert_forecasts) {
        if (f.size() != truth.size()) throw ValidationError("posterior: forecast/truth shape mismatch");
        double err2 = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double d = f[i] - truth[i];
            err2 += d * d;
        }
        out.scores.push_back(-err2);
    }
    double mx = out.scores[0];
    for (double s : out.scores) mx = std::max(mx, s);
    double z = 0.0;
    out.posterior.resize(out.scores.size());
    for (std::size_t i = 0; i < out.scores.size(); ++i) {
        out.posterior[i] = std::exp(out.scores[i] - mx);
        z += out.posterior[i];
    }
    for (double& p : out.posterior) p /= z;
    return out;
}

void TmaMoe::init(const MoeConfig& cfg, long fused_width, std::mt19937_64& rng) {
    cfg.validate();
    cfg_ = cfg;
    fused_width_ = fused_width;
    if (cfg_.enabled)
        router_.init("router", {fused_width, cfg.router_hidden, cfg.router_hidden, static_cast<long>(cfg.k)}, rng);
    experts_.resize(static_cast<std::size_t>(cfg_.effective_k()));
    for (int g = 0; g < cfg_.effective_k(); ++g) {
        Expert& e = experts_[static_cast<std::size_t>(g)];
        const std::string base = "expert_" + std::to_string(g);
        e.trunk.init(base + "/trunk", {fused_width, cfg.expert_trunk, cfg.expert_trunk}, rng);
        e.h0.init(base + "/h0", cfg.expert_trunk, cfg.expert_decoder, rng);
        e.c0.init(base + "/c0", cfg.expert_trunk, cfg.expert_decoder, rng);
        e.cell.init(base + "/cell", 4, cfg.expert_decoder, rng);
        e.head.init(base + "/head", cfg.expert_decoder, 4, rng);
    }
}

NodeId TmaMoe::expert_forward(Tape& t, NodeId c, int expert_index) {
    if (expert_index < 0 || expert_index >= cfg_.effective_k())
        throw ValidationError("expert index " + std::to_string(expert_index) + " outside [0, " +
                              std::to_string(cfg_.effective_k()) + ")");
    Expert& e = experts_[static_cast<std::size_t>(expert_index)];
    const long n = t.value(c).dim(0);
    const NodeId trunk = t.relu(e.trunk.forward(t, c));
    NodeId h = t.tanh_act(e.h0.forward(t, trunk));
    NodeId cc = t.tanh_act(e.c0.forward(t, trunk));
    NodeId y_prev = t.constant(Tensor({n, 4}));
    std::vector<NodeId> steps;
    for (int s = 0; s < kTargetSteps; ++s) {
        auto [h2, c2] = e.cell.forward(t, y_prev, h, cc);
        h = h2;
        cc = c2;
        const NodeId y = e.head.forward(t, h);
        steps.push_back(t.reshape(y, {n, 1, 4}));
        y_prev = y;
    }
    return t.concat(steps, 1);
}

NodeId TmaMoe::router_logits(Tape& t, NodeId c) {
    if (!cfg_.enabled) throw StateError("router disabled (single-expert mode)");
    if (!t.value(c).all_finite()) throw ComputeError("router: non-finite input");
    return router_.forward(t, c);
}

std::vector<RouterOutput> TmaMoe::route(const Tensor& fused_values) {
    const long n = fused_values.dim(0);
    std::vector<RouterOutput> out;
    out.reserve(static_cast<std::size_t>(n));
    if (!cfg_.enabled) {
        for (long i = 0; i < n; ++i) {
            RouterOutput r;
            r.logits = {0.0};
            r.pi = {1.0};
            r.selected = 0;
            out.push_back(std::move(r));
        }
        return out;
    }
    Tape t;
    const NodeId c = t.constant(fused_values);
    const NodeId logits = router_logits(t, c);
    for (long i = 0; i < n; ++i) {
        std::vector<double> row(static_cast<std::size_t>(cfg_.k));
        for (int g = 0; g < cfg_.k; ++g)
            row[static_cast<std::size_t>(g)] = t.value(logits)[static_cast<std::size_t>(i * cfg_.k + g)];
        out.push_back(route_from_logits(row));
    }
    return out;
}

void TmaMoe::collect_router(std::vector<nn::Param*>& out) {
    if (cfg_.enabled) router_.collect(out);
}

void TmaMoe::collect_expert(int g, std::vector<nn::Param*>& out) {
    Expert& e = experts_.at(static_cast<std::size_t>(g));
    e.trunk.collect(out);
    e.h0.collect(out);
    e.c0.collect(out);
    e.cell.collect(out);
    e.head.collect(out);
}

void TmaMoe::collect_all(std::vector<nn::Param*>& out) {
    collect_router(out);
    for (int g = 0; g < cfg_.effective_k(); ++g) collect_expert(g, out);
}

std::vector<ForecastEnsemble> assemble_ensemble(Encoders& encoders, TmaMoe& moe, const NormalizationStats& stats,
                                                const std::vector<const TcSample*>& batch, EnsembleMode mode,
                                                std::mt19937_64* rng) {
    if (!stats.fitted) throw StateError("assemble_ensemble: normalization stats missing");
    if (mode == EnsembleMode::sample && !rng) throw StateError("sampling mode needs a caller-owned generator");
    const EncoderInputs in = make_encoder_inputs(batch, encoders.config());
    Tape t;
    const auto enc = encoders.forward(t, in);
    const int k = moe.config().effective_k();
    std::vector<NodeId> member_nodes;
    for (int g = 0; g < k; ++g) member_nodes.push_back(moe.expert_forward(t, enc.fused, g));

    Tensor fused_values = t.value(enc.fused);
    std::vector<RouterOutput> routes = moe.route(fused_values);

    std::vector<ForecastEnsemble> out;
    const long n = in.n;
    for (long i = 0; i < n; ++i) {
        const TcSample& s = *batch[static_cast<std::size_t>(i)];
        ForecastEnsemble e;
        e.storm_id = s.storm_id;
        e.anchor_time = s.anchor_time;
        e.anchor_fix = s.anchor_fix;
        e.mode_label = s.mode_label;
        e.pi = routes[static_cast<std::size_t>(i)].pi;
        e.selected = routes[static_cast<std::size_t>(i)].selected;
        if (mode == EnsembleMode::sample) {
            std::discrete_distribution<int> dist(e.pi.begin(), e.pi.end());
            e.sampled = dist(*rng);
        }
        for (int g = 0; g < k; ++g) {
            std::array<std::array<double, 4>, kTargetSteps> rows{};
            const Tensor& mv = t.value(member_nodes[static_cast<std::size_t>(g)]);
            for (int st = 0; st < kTargetSteps; ++st)
                for (int f = 0; f < 4; ++f)
                    rows[static_cast<std::size_t>(st)][static_cast<std::size_t>(f)] =
                        mv[static_cast<std::size_t>(((i * kTargetSteps) + st) * 4 + f)];
            e.member_tracks.push_back(invert_normalization(rows, s.anchor_fix, stats));
        }
        // Truth is denormalized the same way so scoring compares like with like.
        e.truth = invert_normalization(s.target, s.anchor_fix, stats);
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace tcf
