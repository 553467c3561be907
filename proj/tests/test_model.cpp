#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "tcf/encoders.hpp"
#include "tcf/error.hpp"
#include "tcf/losses.hpp"
#include "tcf/moe.hpp"
#include "tcf/nn/modules.hpp"
#include "tcf/nn/tape.hpp"
#include "test_util.hpp"

using namespace tcf;
using nn::NodeId;
using nn::Param;
using nn::Tape;
using nn::Tensor;

namespace {

Tensor random_tensor(std::vector<long> dims, std::mt19937_64& rng, double scale = 1.0) {
    Tensor t(std::move(dims));
    std::normal_distribution<double> dist(0.0, scale);
    for (long i = 0; i < t.numel(); ++i) t[static_cast<std::size_t>(i)] = dist(rng);
    return t;
}

// Checks d(probe)/d(*storage) against central differences at sampled indices.
// `eval` must rebuild the graph from current storage contents and return the
// probe value; `analytic` is the tape gradient for the same storage.
double fd_check(const std::function<double()>& eval, Tensor* storage, const Tensor& analytic,
                const std::vector<std::size_t>& indices, double h = 1e-5) {
    double worst = 0.0;
    for (std::size_t idx : indices) {
        const double keep = (*storage)[idx];
        (*storage)[idx] = keep + h;
        const double fp = eval();
        (*storage)[idx] = keep - h;
        const double fm = eval();
        (*storage)[idx] = keep;
        const double fd = (fp - fm) / (2.0 * h);
        const double ad = analytic[idx];
        worst = std::max(worst, std::fabs(fd - ad) / std::max({std::fabs(fd), std::fabs(ad), 1e-6}));
    }
    return worst;
}

// Shared probe: weighted sum of the op output with fixed weights.
struct ProbeRig {
    Tensor weights;
    double run(Tape& t, NodeId out) {
        const NodeId probe = t.weighted_sum(out, weights);
        t.backward(probe);
        return t.value(probe)[0];
    }
    double value_only(Tape& t, NodeId out) {
        double acc = 0.0;
        for (long i = 0; i < weights.numel(); ++i) acc += t.value(out)[static_cast<std::size_t>(i)] * weights[static_cast<std::size_t>(i)];
        return acc;
    }
};

}  // namespace

TEST_CASE("tape: elementwise and reduction gradients match finite differences") {
    std::mt19937_64 rng(21);
    struct Case {
        const char* name;
        std::function<NodeId(Tape&, NodeId)> build;
        double scale;
    };
    const std::vector<Case> cases = {
        {"relu", [](Tape& t, NodeId x) { return t.relu(x); }, 1.0},
        {"tanh", [](Tape& t, NodeId x) { return t.tanh_act(x); }, 1.0},
        {"sigmoid", [](Tape& t, NodeId x) { return t.sigmoid_act(x); }, 1.0},
        {"scale+add_scalar", [](Tape& t, NodeId x) { return t.add_scalar(t.scale(x, 1.7), 0.3); }, 1.0},
        {"mul_self", [](Tape& t, NodeId x) { return t.mul(x, x); }, 1.0},
        {"softmax", [](Tape& t, NodeId x) { return t.softmax_last(x); }, 1.0},
        {"log_softmax", [](Tape& t, NodeId x) { return t.log_softmax_last(x); }, 1.0},
        {"clamp_log", [](Tape& t, NodeId x) { return t.log_act(t.clamp(t.sigmoid_act(x), 1e-7, 1.0 - 1e-7)); }, 1.0},
        {"reshape_slice_concat",
         [](Tape& t, NodeId x) {
             const NodeId a = t.slice(x, 1, 0, 2);
             const NodeId b = t.slice(x, 1, 2, 3);
             return t.reshape(t.concat({b, a}, 1), {3, 5});
         },
         1.0},
    };
    for (const auto& c : cases) {
        CAPTURE(c.name);
        Tensor x = random_tensor({3, 5}, rng, c.scale);
        Tape t0;
        const NodeId xin = t0.leaf(x, true);
        const NodeId y = c.build(t0, xin);
        ProbeRig rig{random_tensor(t0.value(y).dims(), rng)};
        rig.run(t0, y);
        const Tensor analytic = t0.grad(xin);
        auto eval = [&]() {
            Tape t;
            const NodeId xi = t.leaf(x, false);
            return rig.value_only(t, c.build(t, xi));
        };
        const double err = fd_check(eval, &x, analytic, test::pick_indices(static_cast<std::size_t>(x.numel()), 10, rng));
        CHECK_MESSAGE(err < 1e-6, c.name << " rel err " << err);
    }
}

TEST_CASE("tape: linear gradients (x, W, b)") {
    std::mt19937_64 rng(5);
    Tensor x = random_tensor({4, 6}, rng);
    Tensor W = random_tensor({3, 6}, rng);
    Tensor b = random_tensor({3}, rng);
    ProbeRig rig{random_tensor({4, 3}, rng)};

    Tape t0;
    const NodeId xi = t0.leaf(x, true), wi = t0.leaf(W, true), bi = t0.leaf(b, true);
    rig.run(t0, t0.linear(xi, wi, bi));
    auto eval = [&]() {
        Tape t;
        return rig.value_only(t, t.linear(t.leaf(x, false), t.leaf(W, false), t.leaf(b, false)));
    };
    CHECK(fd_check(eval, &x, t0.grad(xi), test::pick_indices(24, 10, rng)) < 1e-7);
    CHECK(fd_check(eval, &W, t0.grad(wi), test::pick_indices(18, 10, rng)) < 1e-7);
    CHECK(fd_check(eval, &b, t0.grad(bi), test::pick_indices(3, 3, rng)) < 1e-7);
}

TEST_CASE("tape: conv3d/conv2d/upsample/crop/pool gradients") {
    std::mt19937_64 rng(8);
    Tensor x = random_tensor({2, 3, 4, 5, 5}, rng);
    Tensor w = random_tensor({2, 3, 3, 3, 3}, rng, 0.5);
    Tensor b = random_tensor({2}, rng, 0.1);

    auto net = [&](Tape& t, NodeId xi, NodeId wi, NodeId bi) {
        NodeId h = t.conv3d(xi, wi, bi, 1, 2, 2, 1, 1, 1);
        h = t.relu(h);
        h = t.upsample3d_nearest(h, 1, 2, 2);
        h = t.crop3d(h, 4, 5, 5);
        return t.global_avg_pool(h);
    };
    Tape t0;
    const NodeId xi = t0.leaf(x, true), wi = t0.leaf(w, true), bi = t0.leaf(b, true);
    const NodeId y = net(t0, xi, wi, bi);
    ProbeRig rig{random_tensor(t0.value(y).dims(), rng)};
    rig.run(t0, y);
    auto eval = [&]() {
        Tape t;
        return rig.value_only(t, net(t, t.leaf(x, false), t.leaf(w, false), t.leaf(b, false)));
    };
    CHECK(fd_check(eval, &x, t0.grad(xi), test::pick_indices(static_cast<std::size_t>(x.numel()), 12, rng)) < 1e-6);
    CHECK(fd_check(eval, &w, t0.grad(wi), test::pick_indices(static_cast<std::size_t>(w.numel()), 12, rng)) < 1e-6);
    CHECK(fd_check(eval, &b, t0.grad(bi), {0, 1}) < 1e-6);

    // conv2d path shares the conv3d kernel
    Tensor x2 = random_tensor({2, 1, 7, 7}, rng);
    Tensor w2 = random_tensor({3, 1, 3, 3}, rng, 0.5);
    Tensor b2 = random_tensor({3}, rng, 0.1);
    auto net2 = [&](Tape& t, NodeId a, NodeId ww, NodeId bb) {
        return t.global_avg_pool(t.relu(t.conv2d(a, ww, bb, 2, 2, 1, 1)));
    };
    Tape t1;
    const NodeId a1 = t1.leaf(x2, true), w1 = t1.leaf(w2, true), b1 = t1.leaf(b2, true);
    const NodeId y2 = net2(t1, a1, w1, b1);
    ProbeRig rig2{random_tensor(t1.value(y2).dims(), rng)};
    rig2.run(t1, y2);
    auto eval2 = [&]() {
        Tape t;
        return rig2.value_only(t, net2(t, t.leaf(x2, false), t.leaf(w2, false), t.leaf(b2, false)));
    };
    CHECK(fd_check(eval2, &x2, t1.grad(a1), test::pick_indices(static_cast<std::size_t>(x2.numel()), 10, rng)) < 1e-6);
    CHECK(fd_check(eval2, &w2, t1.grad(w1), test::pick_indices(static_cast<std::size_t>(w2.numel()), 10, rng)) < 1e-6);
}

TEST_CASE("tape: huber per-sample values and gradient") {
    std::mt19937_64 rng(13);
    Tensor pred = random_tensor({4, 6}, rng);
    Tensor target = random_tensor({4, 6}, rng);
    Tape t0;
    const NodeId pi = t0.leaf(pred, true);
    const NodeId hps = t0.huber_per_sample(pi, target, 0.5);
    ProbeRig rig{random_tensor({4}, rng)};
    rig.run(t0, hps);
    // value oracle: direct piecewise evaluation
    for (long n = 0; n < 4; ++n) {
        double acc = 0.0;
        for (long i = 0; i < 6; ++i) acc += huber_value(pred[static_cast<std::size_t>(n * 6 + i)] - target[static_cast<std::size_t>(n * 6 + i)], 0.5);
        CHECK(t0.value(hps)[static_cast<std::size_t>(n)] == doctest::Approx(acc / 6.0).epsilon(1e-12));
    }
    auto eval = [&]() {
        Tape t;
        return rig.value_only(t, t.huber_per_sample(t.leaf(pred, false), target, 0.5));
    };
    CHECK(fd_check(eval, &pred, t0.grad(pi), test::pick_indices(24, 10, rng)) < 1e-6);
}

TEST_CASE("tape: detach cuts gradient flow") {
    Tensor x = Tensor::full({2, 2}, 1.5);
    Tape t;
    const NodeId xi = t.leaf(x, true);
    const NodeId y = t.mul(t.detach(xi), xi);  // d/dx should be detach(x) only
    const NodeId s = t.sum_all(y);
    t.backward(s);
    for (long i = 0; i < 4; ++i) CHECK(t.grad(xi)[static_cast<std::size_t>(i)] == doctest::Approx(1.5));
}

// ------------------------------------------------------------------ modules

namespace {

EncoderConfig tiny_encoder_config(int grid = 7) {
    EncoderConfig cfg;
    cfg.tc_hidden = 8;
    cfg.atm_c1 = 2;
    cfg.atm_c2 = 3;
    cfg.atm_c3 = 4;
    cfg.atm_vec = 6;
    cfg.terrain_channels = {2, 3};
    cfg.terrain_vec = 4;
    cfg.cat_hidden = 6;
    cfg.cat_vec = 4;
    cfg.cont_hidden = 6;
    cfg.cont_vec = 4;
    cfg.fusion_hidden = 16;
    cfg.fused_width = 10;
    cfg.grid = grid;
    return cfg;
}

EncoderInputs tiny_inputs(const EncoderConfig& cfg, std::mt19937_64& rng, long n = 2) {
    EncoderInputs in;
    in.n = n;
    in.history = random_tensor({n, kHistorySteps, 4}, rng, 0.5);
    in.atm = random_tensor({n, kAtmChannels, kHistorySteps, cfg.grid, cfg.grid}, rng, 0.5);
    in.terrain = random_tensor({n, 1, cfg.grid, cfg.grid}, rng, 0.5);
    in.cat = Tensor({n, cfg.cat_input_width()});
    for (long b = 0; b < n; ++b) {
        in.cat[static_cast<std::size_t>(b * cfg.cat_input_width() + (b % 12))] = 1.0;
        if (cfg.include_intensity_category) in.cat[static_cast<std::size_t>(b * cfg.cat_input_width() + 12 + (b % 10))] = 1.0;
    }
    in.cont = random_tensor({n, cfg.cont_input_width()}, rng, 0.5);
    return in;
}

// Gradient check of a scalar probe through the full encoder stack w.r.t. one
// parameter tensor and one input tensor.
template <typename Forward>
void check_module_grads(Encoders& enc, const EncoderConfig& cfg, Forward forward, std::mt19937_64& rng,
                        int n_probes = 10, double h = 1e-5) {
    EncoderInputs in = tiny_inputs(cfg, rng);
    Tensor probe_w;
    auto run = [&](bool backward) {
        Tape t;
        const NodeId out = forward(t, enc, in);
        if (probe_w.numel() == 0) probe_w = random_tensor(t.value(out).dims(), rng);
        const NodeId probe = t.weighted_sum(out, probe_w);
        if (backward) t.backward(probe);
        struct R {
            double value;
            Tape tape;
        };
        return t.value(probe)[0];
    };
    (void)run;

    std::vector<Param*> params;
    enc.collect(params);
    REQUIRE(!params.empty());

    // analytic pass
    Tape t0;
    const NodeId out0 = forward(t0, enc, in);
    probe_w = random_tensor(t0.value(out0).dims(), rng);
    nn::zero_grads(params);
    const NodeId probe0 = t0.weighted_sum(out0, probe_w);
    t0.backward(probe0);

    auto eval = [&]() {
        Tape t;
        const NodeId out = forward(t, enc, in);
        double acc = 0.0;
        for (long i = 0; i < probe_w.numel(); ++i) acc += t.value(out)[static_cast<std::size_t>(i)] * probe_w[static_cast<std::size_t>(i)];
        return acc;
    };

    // parameters: sample a few tensors, a few indices each
    std::uniform_int_distribution<std::size_t> pick_param(0, params.size() - 1);
    for (int p = 0; p < n_probes; ++p) {
        Param* prm = params[pick_param(rng)];
        const auto idx = test::pick_indices(static_cast<std::size_t>(prm->value.numel()), 1, rng);
        const double err = fd_check(eval, &prm->value, prm->grad, idx, h);
        CHECK_MESSAGE(err < 1e-4, prm->name << " rel err " << err);
    }
    // inputs: history coordinate (the spec's example probe)
    {
        Tape t1;
        EncoderInputs in2 = in;
        // rebuild with input leaf requiring grad
        const NodeId hist = t1.leaf(in2.history, true);
        const NodeId c_tc = enc.encode_tc(t1, hist);
        Tensor w2 = random_tensor(t1.value(c_tc).dims(), rng);
        const NodeId probe = t1.weighted_sum(c_tc, w2);
        t1.backward(probe);
        auto eval_in = [&]() {
            Tape t;
            const NodeId h2 = t.leaf(in2.history, false);
            const NodeId c2 = enc.encode_tc(t, h2);
            double acc = 0.0;
            for (long i = 0; i < w2.numel(); ++i) acc += t.value(c2)[static_cast<std::size_t>(i)] * w2[static_cast<std::size_t>(i)];
            return acc;
        };
        const double err = fd_check(eval_in, &in2.history, t1.grad(hist),
                                    test::pick_indices(static_cast<std::size_t>(in2.history.numel()), 5, rng), 1e-4);
        CHECK_MESSAGE(err < 1e-4, "encode_tc input grad rel err " << err);
    }
}

}  // namespace

TEST_CASE("encode_tc: zero parameters give the tanh(0) fixed point; determinism holds") {
    EncoderConfig cfg = tiny_encoder_config();
    std::mt19937_64 rng(31);
    Encoders enc;
    enc.init(cfg, rng);
    std::vector<Param*> params;
    enc.collect(params);
    for (Param* p : params)
        if (p->name.rfind("encoders/tc_lstm", 0) == 0) p->value.fill(0.0);

    Tape t;
    const NodeId hist = t.constant(Tensor({2, kHistorySteps, 4}));
    const NodeId c_tc = enc.encode_tc(t, hist);
    for (long i = 0; i < t.value(c_tc).numel(); ++i) CHECK(t.value(c_tc)[static_cast<std::size_t>(i)] == 0.0);

    // determinism: fixed params + fixed inputs -> identical outputs
    std::mt19937_64 rng2(77);
    Encoders enc2;
    enc2.init(cfg, rng2);
    EncoderInputs in = tiny_inputs(cfg, rng2);
    Tape ta, tb;
    const Tensor va = ta.value(enc2.encode_tc(ta, ta.constant(in.history)));
    const Tensor vb = tb.value(enc2.encode_tc(tb, tb.constant(in.history)));
    CHECK(va.vec() == vb.vec());

    Tensor bad({1, kHistorySteps, 4});
    bad[0] = std::nan("");
    Tape tc;
    CHECK_THROWS_AS(enc.encode_tc(tc, tc.constant(bad)), ComputeError);
}

TEST_CASE("encoder branches pass finite-difference gradient checks") {
    EncoderConfig cfg = tiny_encoder_config();
    std::mt19937_64 rng(41);
    Encoders enc;
    enc.init(cfg, rng);

    SUBCASE("tc encoder") {
        check_module_grads(enc, cfg, [](Tape& t, Encoders& e, const EncoderInputs& in) {
            return e.encode_tc(t, t.constant(in.history));
        }, rng);
    }
    SUBCASE("atmospheric encoder-decoder vector") {
        check_module_grads(enc, cfg, [](Tape& t, Encoders& e, const EncoderInputs& in) {
            return e.encode_atm(t, t.constant(in.atm)).vec;
        }, rng, 6);
    }
    SUBCASE("atmospheric reconstruction") {
        check_module_grads(enc, cfg, [](Tape& t, Encoders& e, const EncoderInputs& in) {
            return e.encode_atm(t, t.constant(in.atm)).recon;
        }, rng, 6);
    }
    SUBCASE("terrain encoder") {
        check_module_grads(enc, cfg, [](Tape& t, Encoders& e, const EncoderInputs& in) {
            return e.encode_terrain(t, t.constant(in.terrain));
        }, rng, 6);
    }
    SUBCASE("cat and cont embedders") {
        check_module_grads(enc, cfg, [](Tape& t, Encoders& e, const EncoderInputs& in) {
            return t.concat({e.encode_cat(t, t.constant(in.cat)), e.encode_cont(t, t.constant(in.cont))}, 1);
        }, rng, 8);
    }
    SUBCASE("full fusion") {
        check_module_grads(enc, cfg, [](Tape& t, Encoders& e, const EncoderInputs& in) {
            return e.forward(t, in).fused;
        }, rng, 8);
    }
}

TEST_CASE("encoder batch independence and ablation widths") {
    EncoderConfig cfg = tiny_encoder_config();
    std::mt19937_64 rng(51);
    Encoders enc;
    enc.init(cfg, rng);
    EncoderInputs in = tiny_inputs(cfg, rng, 3);

    Tape t;
    const auto out = enc.forward(t, in);
    const Tensor fused = t.value(out.fused);

    // permute the batch: swap samples 0 and 2
    EncoderInputs swapped = in;
    auto swap_rows = [](Tensor* x, long a, long b) {
        const long row = x->numel() / x->dim(0);
        for (long i = 0; i < row; ++i)
            std::swap((*x)[static_cast<std::size_t>(a * row + i)], (*x)[static_cast<std::size_t>(b * row + i)]);
    };
    swap_rows(&swapped.history, 0, 2);
    swap_rows(&swapped.atm, 0, 2);
    swap_rows(&swapped.terrain, 0, 2);
    swap_rows(&swapped.cat, 0, 2);
    swap_rows(&swapped.cont, 0, 2);
    Tape t2;
    const Tensor fused2 = t2.value(enc.forward(t2, swapped).fused);
    const long fw = cfg.fused_width;
    for (long i = 0; i < fw; ++i) {
        CHECK(fused2[static_cast<std::size_t>(0 * fw + i)] == fused[static_cast<std::size_t>(2 * fw + i)]);
        CHECK(fused2[static_cast<std::size_t>(2 * fw + i)] == fused[static_cast<std::size_t>(0 * fw + i)]);
        CHECK(fused2[static_cast<std::size_t>(1 * fw + i)] == fused[static_cast<std::size_t>(1 * fw + i)]);
    }

    // toggles remove parameters and concat slices
    EncoderConfig a_only = cfg;
    a_only.enable_terrain = false;
    a_only.enable_cat = false;
    a_only.enable_cont = false;
    CHECK(a_only.concat_width() == cfg.tc_hidden + cfg.atm_vec);
    std::mt19937_64 rng3(52);
    Encoders enc_a;
    enc_a.init(a_only, rng3);
    std::vector<Param*> full_params, a_params;
    enc.collect(full_params);
    enc_a.collect(a_params);
    CHECK(nn::total_param_count(a_params) < nn::total_param_count(full_params));

    // doubling the terrain embedding width doubles that branch's output width
    EncoderConfig wide = cfg;
    wide.terrain_vec *= 2;
    std::mt19937_64 rng4(53);
    Encoders enc_w;
    enc_w.init(wide, rng4);
    Tape t3;
    const NodeId ter = enc_w.encode_terrain(t3, t3.constant(in.terrain));
    CHECK(t3.value(ter).dim(1) == 2 * cfg.terrain_vec);
}

TEST_CASE("fuse respects the fixed component order") {
    EncoderConfig cfg = tiny_encoder_config();
    cfg.enable_atm = false;
    cfg.enable_terrain = false;
    cfg.cat_vec = cfg.cont_vec;  // make the swap shape-compatible
    std::mt19937_64 rng(61);
    Encoders enc;
    enc.init(cfg, rng);
    EncoderInputs in = tiny_inputs(cfg, rng, 1);
    Tape t;
    const NodeId c_tc = enc.encode_tc(t, t.constant(in.history));
    const NodeId c_cat = enc.encode_cat(t, t.constant(in.cat));
    const NodeId c_cont = enc.encode_cont(t, t.constant(in.cont));
    const Tensor in_order = t.value(enc.fuse(t, {c_tc, c_cat, c_cont}));
    const Tensor swapped = t.value(enc.fuse(t, {c_tc, c_cont, c_cat}));
    double diff = 0.0;
    for (long i = 0; i < in_order.numel(); ++i) diff = std::max(diff, std::fabs(in_order[static_cast<std::size_t>(i)] - swapped[static_cast<std::size_t>(i)]));
    CHECK(diff > 1e-9);
    // width mismatch is rejected
    CHECK_THROWS_AS(enc.fuse(t, {c_tc, c_cat}), ConfigError);
}

TEST_CASE("one-hot assembly places single ones and rejects out-of-vocabulary codes") {
    const TcTrack track = test::straight_track(12);
    const FieldLibrary fields = test::tiny_fields(track);
    const IndexTable nino = test::tiny_nino(2014, 2016);
    auto samples = build_samples(track, fields, nino, test::tiny_build_config());
    REQUIRE(samples.size() == 1);
    samples[0].env.month = 3;
    const NormalizationStats stats = fit_normalization(samples);
    apply_normalization(&samples[0], stats);

    EncoderConfig cfg = tiny_encoder_config();
    const EncoderInputs in = make_encoder_inputs({&samples[0]}, cfg);
    CHECK(in.cat[2] == 1.0);  // month=3 -> index 2
    double month_block = 0.0;
    for (int i = 0; i < 12; ++i) month_block += in.cat[static_cast<std::size_t>(i)];
    CHECK(month_block == 1.0);

    TcSample bad = samples[0];
    bad.env.month = 13;
    CHECK_THROWS_AS(make_encoder_inputs({&bad}, cfg), ValidationError);

    // different months map to different embeddings at random init
    std::mt19937_64 rng(71);
    Encoders enc;
    enc.init(cfg, rng);
    TcSample other = samples[0];
    other.env.month = 7;
    const EncoderInputs in_a = make_encoder_inputs({&samples[0]}, cfg);
    const EncoderInputs in_b = make_encoder_inputs({&other}, cfg);
    Tape t;
    const Tensor ca = t.value(enc.encode_cat(t, t.constant(in_a.cat)));
    const Tensor cb = t.value(enc.encode_cat(t, t.constant(in_b.cat)));
    double diff = 0.0;
    for (long i = 0; i < ca.numel(); ++i) diff = std::max(diff, std::fabs(ca[static_cast<std::size_t>(i)] - cb[static_cast<std::size_t>(i)]));
    CHECK(diff > 1e-9);
}

// ---------------------------------------------------------------------- moe

TEST_CASE("router semantics: softmax, tie-break, scaling invariance") {
    const RouterOutput uniform = route_from_logits({0.0, 0.0, 0.0});
    for (double p : uniform.pi) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(uniform.selected == 0);  // lowest index wins ties

    const RouterOutput r = route_from_logits({std::log(2.0), 0.0, 0.0});
    CHECK(r.pi[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.pi[1] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(r.pi[2] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(r.selected == 0);

    std::mt19937_64 rng(81);
    std::normal_distribution<double> dist(0, 2);
    for (int i = 0; i < 500; ++i) {
        std::vector<double> logits(5);
        for (double& v : logits) v = dist(rng);
        const RouterOutput a = route_from_logits(logits);
        double sum = 0.0;
        for (double p : a.pi) sum += p;
        CHECK(std::fabs(sum - 1.0) < 1e-6);
        for (double p : a.pi) CHECK(p >= 0.0);
        std::vector<double> scaled = logits;
        for (double& v : scaled) v *= 3.7;  // positive scaling keeps the argmax
        CHECK(route_from_logits(scaled).selected == a.selected);
    }
}

TEST_CASE("posterior: closed forms, equivariance, monotonicity, shift invariance") {
    {
        const RoutingPosterior p = compute_posterior({{1.0, 0.0}, {0.0, 1.0}}, {0.0, 0.0});
        CHECK(p.posterior[0] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(p.posterior[1] == doctest::Approx(0.5).epsilon(1e-12));
    }
    {
        // S = [0, -1] -> R = [1/(1+e^-1), e^-1/(1+e^-1)]
        const RoutingPosterior p = compute_posterior({{0.0}, {1.0}}, {0.0});
        CHECK(p.scores[0] == 0.0);
        CHECK(p.scores[1] == -1.0);
        CHECK(p.posterior[0] == doctest::Approx(0.7310585786300049).epsilon(1e-9));
        CHECK(p.posterior[1] == doctest::Approx(0.2689414213699951).epsilon(1e-9));
    }
    std::mt19937_64 rng(91);
    std::normal_distribution<double> dist(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::vector<double>> forecasts(4, std::vector<double>(8));
        std::vector<double> truth(8);
        for (auto& f : forecasts)
            for (double& v : f) v = dist(rng);
        for (double& v : truth) v = dist(rng);
        const RoutingPosterior p = compute_posterior(forecasts, truth);
        // permutation equivariance
        std::vector<std::vector<double>> permuted = {forecasts[2], forecasts[0], forecasts[3], forecasts[1]};
        const RoutingPosterior q = compute_posterior(permuted, truth);
        CHECK(q.posterior[0] == doctest::Approx(p.posterior[2]).epsilon(1e-12));
        CHECK(q.posterior[1] == doctest::Approx(p.posterior[0]).epsilon(1e-12));
        CHECK(q.posterior[3] == doctest::Approx(p.posterior[1]).epsilon(1e-12));
        // monotonicity: smaller error => strictly larger posterior
        for (std::size_t a = 0; a < 4; ++a)
            for (std::size_t b = 0; b < 4; ++b)
                if (p.scores[a] > p.scores[b]) CHECK(p.posterior[a] > p.posterior[b]);
        double sum = 0.0;
        for (double v : p.posterior) sum += v;
        CHECK(std::fabs(sum - 1.0) < 1e-6);
    }
    // adding a constant to all scores leaves R unchanged: softmax identity
    // checked via the stabilized computation with a large common offset
    const RoutingPosterior base = compute_posterior({{0.5}, {1.5}, {2.}}, {0.0});
    std::vector<std::vector<double>> shifted_scores;  // emulate by direct softmax of shifted S
    (void)shifted_scores;
    std::vector<double> s = base.scores;
    for (double& v : s) v += 1234.5;
    // recompute softmax from shifted scores
    double mx = s[0];
    for (double v : s) mx = std::max(mx, v);
    double z = 0;
    std::vector<double> r(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) z += (r[i] = std::exp(s[i] - mx));
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(r[i] / z == doctest::Approx(base.posterior[i]).epsilon(1e-12));
}

TEST_CASE("experts: distinct outputs, contract shape, gradient through c, parameter disjointness") {
    MoeConfig mc;
    mc.k = 3;
    mc.expert_trunk = 12;
    mc.expert_decoder = 8;
    std::mt19937_64 rng(101);
    TmaMoe moe;
    moe.init(mc, 10, rng);

    Tensor c = random_tensor({2, 10}, rng);
    Tape t;
    const NodeId ci = t.leaf(c, true);
    const NodeId y0 = moe.expert_forward(t, ci, 0);
    const NodeId y1 = moe.expert_forward(t, ci, 1);
    CHECK(t.value(y0).dims() == std::vector<long>({2, kTargetSteps, 4}));
    double diff = 0.0;
    for (long i = 0; i < t.value(y0).numel(); ++i)
        diff = std::max(diff, std::fabs(t.value(y0)[static_cast<std::size_t>(i)] - t.value(y1)[static_cast<std::size_t>(i)]));
    CHECK(diff > 1e-9);
    CHECK_THROWS_AS(moe.expert_forward(t, ci, 3), ValidationError);
    CHECK_THROWS_AS(moe.expert_forward(t, ci, -1), ValidationError);

    // gradient w.r.t. c
    Tensor pw = random_tensor({2, kTargetSteps, 4}, rng);
    Tape t0;
    const NodeId c0 = t0.leaf(c, true);
    const NodeId out0 = moe.expert_forward(t0, c0, 1);
    const NodeId probe0 = t0.weighted_sum(out0, pw);
    t0.backward(probe0);
    auto eval = [&]() {
        Tape tt;
        const NodeId cc = tt.leaf(c, false);
        const NodeId yy = moe.expert_forward(tt, cc, 1);
        double acc = 0.0;
        for (long i = 0; i < pw.numel(); ++i) acc += tt.value(yy)[static_cast<std::size_t>(i)] * pw[static_cast<std::size_t>(i)];
        return acc;
    };
    CHECK(fd_check(eval, &c, t0.grad(c0), test::pick_indices(20, 10, rng)) < 1e-4);

    // disjoint parameters: perturbing expert 0 leaves expert 1's output bit-identical
    Tape t1;
    const Tensor before = t1.value(moe.expert_forward(t1, t1.constant(c), 1));
    std::vector<Param*> e0;
    moe.collect_expert(0, e0);
    for (Param* p : e0)
        for (long i = 0; i < p->numel(); ++i) p->value[static_cast<std::size_t>(i)] += 0.37;
    Tape t2;
    const Tensor after = t2.value(moe.expert_forward(t2, t2.constant(c), 1));
    CHECK(before.vec() == after.vec());
}

TEST_CASE("router gradcheck and disabled-router behavior") {
    MoeConfig mc;
    mc.k = 4;
    std::mt19937_64 rng(111);
    TmaMoe moe;
    moe.init(mc, 6, rng);
    Tensor c = random_tensor({3, 6}, rng);
    Tensor pw = random_tensor({3, 4}, rng);
    Tape t0;
    const NodeId ci = t0.leaf(c, true);
    const NodeId probe = t0.weighted_sum(moe.router_logits(t0, ci), pw);
    t0.backward(probe);
    auto eval = [&]() {
        Tape t;
        const NodeId cc = t.leaf(c, false);
        double acc = 0.0;
        const NodeId l = moe.router_logits(t, cc);
        for (long i = 0; i < pw.numel(); ++i) acc += t.value(l)[static_cast<std::size_t>(i)] * pw[static_cast<std::size_t>(i)];
        return acc;
    };
    CHECK(fd_check(eval, &c, t0.grad(ci), test::pick_indices(18, 10, rng)) < 1e-4);

    MoeConfig off;
    off.enabled = false;
    off.k = 4;
    std::mt19937_64 rng2(112);
    TmaMoe single;
    single.init(off, 6, rng2);
    CHECK(single.config().effective_k() == 1);
    const auto routes = single.route(c);
    for (const auto& r : routes) {
        CHECK(r.pi == std::vector<double>{1.0});
        CHECK(r.selected == 0);
    }
    Tape t;
    CHECK_THROWS_AS(single.router_logits(t, t.constant(c)), StateError);
}

// ------------------------------------------------------------------- losses

TEST_CASE("huber closed forms, continuity at the threshold, and bounds") {
    CHECK(huber_value(0.0, 0.5) == 0.0);
    CHECK(huber_value(0.3, 0.5) == doctest::Approx(0.045).epsilon(1e-12));
    CHECK(huber_value(1.0, 0.5) == doctest::Approx(0.375).epsilon(1e-12));
    CHECK(huber_value(-1.0, 0.5) == doctest::Approx(0.375).epsilon(1e-12));

    // value continuity at |e| = delta
    const double lo = huber_value(0.5 - 1e-6, 0.5), hi = huber_value(0.5 + 1e-6, 0.5);
    CHECK(std::fabs(hi - lo) < 1e-5);
    // derivative continuity at the seam (numerical slope on both sides)
    const double dl = (huber_value(0.5, 0.5) - huber_value(0.5 - 1e-6, 0.5)) / 1e-6;
    const double dr = (huber_value(0.5 + 1e-6, 0.5) - huber_value(0.5, 0.5)) / 1e-6;
    CHECK(std::fabs(dl - dr) < 1e-5);
    CHECK(dl == doctest::Approx(0.5).epsilon(1e-4));

    // quadratic bound inside, linear growth with slope delta outside
    for (double e = -3.0; e <= 3.0; e += 0.01) {
        const double h = huber_value(e, 0.5);
        if (std::fabs(e) <= 0.5) CHECK(h <= 0.5 * e * e + 1e-15);
        if (std::fabs(e) > 0.6) {
            const double slope = (huber_value(e + 1e-6 * (e > 0 ? 1 : -1), 0.5) - h) / 1e-6;
            CHECK(std::fabs(slope) == doctest::Approx(0.5).epsilon(1e-4));
        }
    }
    CHECK_THROWS_AS(huber_value(1.0, 0.0), ConfigError);
}

TEST_CASE("huber over 1e4 random errors matches the piecewise oracle to 1e-12") {
    std::mt19937_64 rng(121);
    std::normal_distribution<double> dist(0, 1.2);
    Tensor pred({1, 10000});
    Tensor target({1, 10000});
    for (long i = 0; i < 10000; ++i) {
        pred[static_cast<std::size_t>(i)] = dist(rng);
        target[static_cast<std::size_t>(i)] = dist(rng);
    }
    Tape t;
    const NodeId loss = huber_loss(t, t.constant(pred), target, 0.5);
    double oracle = 0.0;
    for (long i = 0; i < 10000; ++i) {
        const double e = pred[static_cast<std::size_t>(i)] - target[static_cast<std::size_t>(i)];
        const double ae = std::fabs(e);
        oracle += ae < 0.5 ? 0.5 * e * e : 0.5 * ae - 0.125;
    }
    oracle /= 10000.0;
    CHECK(std::fabs(t.value(loss)[0] - oracle) < 1e-12);
}

TEST_CASE("atmospheric mse: zero, offset, homogeneity") {
    std::mt19937_64 rng(131);
    Tensor a = random_tensor({2, 3, 4}, rng);
    Tape t;
    CHECK(t.value(atm_mse(t, t.constant(a), a))[0] == 0.0);

    Tensor b = a;
    for (long i = 0; i < b.numel(); ++i) b[static_cast<std::size_t>(i)] += 2.0;
    Tape t2;
    CHECK(t2.value(atm_mse(t2, t2.constant(b), a))[0] == doctest::Approx(4.0).epsilon(1e-12));

    Tensor a3 = a, b3 = b;
    for (long i = 0; i < a3.numel(); ++i) {
        a3[static_cast<std::size_t>(i)] *= 3.0;
        b3[static_cast<std::size_t>(i)] *= 3.0;
    }
    Tape t3;
    CHECK(t3.value(atm_mse(t3, t3.constant(b3), a3))[0] == doctest::Approx(36.0).epsilon(1e-12));
}

TEST_CASE("adversarial losses: closed forms at D=0.5, perfect D, batch-order invariance") {
    // untrained critic outputting exactly 0.5 everywhere: zero all parameters
    std::mt19937_64 rng(141);
    Discriminator d;
    d.init(kTargetSteps * 4, 0, 8, rng);
    std::vector<Param*> dp;
    d.collect(dp);
    for (Param* p : dp) p->value.fill(0.0);

    Tensor real = random_tensor({6, kTargetSteps * 4}, rng);
    Tensor fake = random_tensor({6, kTargetSteps * 4}, rng);
    Tape t;
    const NodeId d_real = d.forward(t, t.constant(real));
    const NodeId d_fake = d.forward(t, t.constant(fake));
    const NodeId loss_d = adversarial_loss_d(t, d_real, d_fake, 1e-7);
    CHECK(t.value(loss_d)[0] == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-9));

    // generator side at D(fake) = 0.5 -> ln 2
    Tensor w({6, 1});
    w.fill(1.0 / 6.0);
    Tensor scaled_w({6, 1});
    scaled_w.fill(1.0);
    const NodeId loss_g = adversarial_loss_g(t, d_fake, scaled_w, 1e-7);
    CHECK(t.value(loss_g)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-9));

    // perfect critic: direct probability leaves
    Tape t2;
    Tensor pr({4, 1});
    pr.fill(1.0 - 1e-7);
    Tensor pf({4, 1});
    pf.fill(1e-7);
    const NodeId ld = adversarial_loss_d(t2, t2.constant(pr), t2.constant(pf), 1e-7);
    CHECK(t2.value(ld)[0] == doctest::Approx(0.0).epsilon(1e-6));

    // shuffling both batches together leaves loss_d unchanged
    std::mt19937_64 rng2(142);
    Discriminator d2;
    d2.init(kTargetSteps * 4, 0, 8, rng2);
    auto loss_for = [&](const Tensor& r, const Tensor& f) {
        Tape tt;
        return tt.value(adversarial_loss_d(tt, d2.forward(tt, tt.constant(r)), d2.forward(tt, tt.constant(f)), 1e-7))[0];
    };
    Tensor real_s = real, fake_s = fake;
    const long row = kTargetSteps * 4;
    for (long i = 0; i < row; ++i) {
        std::swap(real_s[static_cast<std::size_t>(0 * row + i)], real_s[static_cast<std::size_t>(5 * row + i)]);
        std::swap(fake_s[static_cast<std::size_t>(2 * row + i)], fake_s[static_cast<std::size_t>(3 * row + i)]);
    }
    CHECK(loss_for(real, fake) == doctest::Approx(loss_for(real_s, fake_s)).epsilon(1e-12));
}

TEST_CASE("mode classification loss: uniform, one-hot, relabeling invariance") {
    std::mt19937_64 rng(151);
    ModeClassifier c;
    c.init(kTargetSteps * 4, 3, 8, rng);
    std::vector<Param*> cp;
    c.collect(cp);
    for (Param* p : cp) p->value.fill(0.0);  // uniform classifier

    Tensor tracks = random_tensor({5, kTargetSteps * 4}, rng);
    Tensor labels({5, 3});
    for (long i = 0; i < 5; ++i) labels[static_cast<std::size_t>(i * 3 + i % 3)] = 1.0;
    Tape t;
    const NodeId loss = mode_cls_loss(t, c.logits(t, t.constant(tracks)), labels);
    CHECK(t.value(loss)[0] == doctest::Approx(std::log(3.0)).epsilon(1e-9));

    // one-hot classifier on the true label -> ~0: feed logits directly
    Tape t2;
    Tensor logits({2, 3});
    logits[0] = 50.0;              // row 0 -> class 0
    logits[static_cast<std::size_t>(3 + 2)] = 50.0;  // row 1 -> class 2
    Tensor lab({2, 3});
    lab[0] = 1.0;
    lab[static_cast<std::size_t>(3 + 2)] = 1.0;
    CHECK(t2.value(mode_cls_loss(t2, t2.constant(logits), lab))[0] == doctest::Approx(0.0).epsilon(1e-9));

    // permuting expert labels together with classifier outputs is invariant
    std::mt19937_64 rng3(152);
    ModeClassifier c3;
    c3.init(kTargetSteps * 4, 3, 8, rng3);
    auto value_with = [&](const std::vector<int>& perm) {
        Tape tt;
        const NodeId raw = c3.logits(tt, tt.constant(tracks));
        // permute logit columns and labels identically
        Tensor plog({5, 3}), plab({5, 3});
        for (long i = 0; i < 5; ++i)
            for (int j = 0; j < 3; ++j) {
                plog[static_cast<std::size_t>(i * 3 + perm[static_cast<std::size_t>(j)])] = tt.value(raw)[static_cast<std::size_t>(i * 3 + j)];
                plab[static_cast<std::size_t>(i * 3 + perm[static_cast<std::size_t>(j)])] = labels[static_cast<std::size_t>(i * 3 + j)];
            }
        Tape t4;
        return t4.value(mode_cls_loss(t4, t4.constant(plog), plab))[0];
    };
    CHECK(value_with({0, 1, 2}) == doctest::Approx(value_with({2, 0, 1})).epsilon(1e-12));
}

TEST_CASE("routing entropy: closed forms and the Gibbs bound") {
    CHECK(routing_entropy_loss({1.0, 0.0}, {1.0, 0.0}) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(routing_entropy_loss({0.5, 0.5}, {0.5, 0.5}) == doctest::Approx(std::log(2.0)).epsilon(1e-9));

    // numeric minimum over a simplex grid sits at pi = R
    const std::vector<double> R = {0.6, 0.3, 0.1};
    double best = 1e18;
    std::vector<double> best_pi;
    for (double a = 0.01; a < 0.99; a += 0.01)
        for (double b = 0.01; a + b < 0.995; b += 0.01) {
            const std::vector<double> pi = {a, b, 1.0 - a - b};
            const double v = routing_entropy_loss(pi, R);
            if (v < best) {
                best = v;
                best_pi = pi;
            }
        }
    CHECK(std::fabs(best_pi[0] - 0.6) < 0.011);
    CHECK(std::fabs(best_pi[1] - 0.3) < 0.011);

    // Gibbs: loss >= entropy(R), equality iff pi == R
    std::mt19937_64 rng(161);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> pi(4), r(4);
        double sp = 0, sr = 0;
        for (int i = 0; i < 4; ++i) {
            pi[static_cast<std::size_t>(i)] = u(rng);
            r[static_cast<std::size_t>(i)] = u(rng);
            sp += pi[static_cast<std::size_t>(i)];
            sr += r[static_cast<std::size_t>(i)];
        }
        for (int i = 0; i < 4; ++i) {
            pi[static_cast<std::size_t>(i)] /= sp;
            r[static_cast<std::size_t>(i)] /= sr;
        }
        double entropy = 0.0;
        for (double v : r) entropy -= v * std::log(v);
        CHECK(routing_entropy_loss(pi, r) >= entropy - 1e-9);
        CHECK(routing_entropy_loss(r, r) == doctest::Approx(entropy).epsilon(1e-9));
    }
}

TEST_CASE("total loss: zero weights, identity, linearity; negative weight rejected") {
    TotalLossBreakdown parts;
    parts.huber = 0.7;
    parts.atm = 0.3;
    parts.adv_g = 0.2;
    parts.cls = 0.9;
    parts.route = 0.11;
    LossConfig cfg;
    cfg.w_huber = cfg.w_atm = cfg.w_adv = cfg.w_cls = cfg.w_route = 0.0;
    CHECK(total_loss(parts, cfg) == 0.0);

    cfg.w_huber = 1.0;
    CHECK(total_loss(parts, cfg) == doctest::Approx(0.7).epsilon(1e-15));

    LossConfig one;
    one.w_huber = 1;
    one.w_atm = 0.5;
    one.w_adv = 0.1;
    one.w_cls = 0.1;
    one.w_route = 1;
    LossConfig two = one;
    two.w_huber *= 2;
    two.w_atm *= 2;
    two.w_adv *= 2;
    two.w_cls *= 2;
    two.w_route *= 2;
    CHECK(total_loss(parts, two) == doctest::Approx(2.0 * total_loss(parts, one)).epsilon(1e-12));

    LossConfig bad;
    bad.w_adv = -0.1;
    CHECK_THROWS_AS(total_loss(parts, bad), ConfigError);
}

TEST_CASE("loss gradients w.r.t. model outputs match finite differences") {
    std::mt19937_64 rng(171);

    SUBCASE("huber gradient") {
        Tensor pred = random_tensor({3, 8}, rng);
        Tensor target = random_tensor({3, 8}, rng);
        Tape t0;
        const NodeId pi = t0.leaf(pred, true);
        t0.backward(huber_loss(t0, pi, target, 0.5));
        auto eval = [&]() {
            Tape t;
            return t.value(huber_loss(t, t.leaf(pred, false), target, 0.5))[0];
        };
        CHECK(fd_check(eval, &pred, t0.grad(pi), test::pick_indices(24, 10, rng)) < 1e-5);
    }
    SUBCASE("adversarial generator gradient through the critic") {
        Discriminator d;
        d.init(8, 0, 6, rng);
        Tensor fake = random_tensor({4, 8}, rng);
        Tensor w({4, 1});
        w.fill(1.0);
        Tape t0;
        const NodeId fi = t0.leaf(fake, true);
        t0.backward(adversarial_loss_g(t0, d.forward(t0, fi), w, 1e-7));
        auto eval = [&]() {
            Tape t;
            return t.value(adversarial_loss_g(t, d.forward(t, t.leaf(fake, false)), w, 1e-7))[0];
        };
        CHECK(fd_check(eval, &fake, t0.grad(fi), test::pick_indices(32, 10, rng)) < 1e-4);
    }
    SUBCASE("classification gradient through the classifier") {
        ModeClassifier c;
        c.init(8, 3, 6, rng);
        Tensor fake = random_tensor({4, 8}, rng);
        Tensor labels({4, 3});
        for (long i = 0; i < 4; ++i) labels[static_cast<std::size_t>(i * 3 + i % 3)] = 1.0;
        Tape t0;
        const NodeId fi = t0.leaf(fake, true);
        t0.backward(mode_cls_loss(t0, c.logits(t0, fi), labels));
        auto eval = [&]() {
            Tape t;
            return t.value(mode_cls_loss(t, c.logits(t, t.leaf(fake, false)), labels))[0];
        };
        CHECK(fd_check(eval, &fake, t0.grad(fi), test::pick_indices(32, 10, rng)) < 1e-4);
    }
    SUBCASE("routing entropy gradient w.r.t. logits") {
        Tensor logits = random_tensor({4, 3}, rng);
        Tensor posterior({4, 3});
        for (long i = 0; i < 4; ++i) {
            double z = 0;
            for (int j = 0; j < 3; ++j) z += (posterior[static_cast<std::size_t>(i * 3 + j)] = 0.2 + 0.3 * ((i + j) % 3));
            for (int j = 0; j < 3; ++j) posterior[static_cast<std::size_t>(i * 3 + j)] /= z;
        }
        Tape t0;
        const NodeId li = t0.leaf(logits, true);
        t0.backward(routing_entropy_from_logits(t0, li, posterior));
        auto eval = [&]() {
            Tape t;
            return t.value(routing_entropy_from_logits(t, t.leaf(logits, false), posterior))[0];
        };
        CHECK(fd_check(eval, &logits, t0.grad(li), test::pick_indices(12, 10, rng)) < 1e-5);
    }
    SUBCASE("weighted expert huber gradient") {
        Tensor a = random_tensor({3, kTargetSteps, 4}, rng);
        Tensor b = random_tensor({3, kTargetSteps, 4}, rng);
        Tensor target = random_tensor({3, kTargetSteps, 4}, rng);
        Tensor weights({3, 2});
        for (long i = 0; i < 3; ++i) {
            weights[static_cast<std::size_t>(i * 2)] = 0.3;
            weights[static_cast<std::size_t>(i * 2 + 1)] = 0.7;
        }
        Tape t0;
        const NodeId ai = t0.leaf(a, true);
        const NodeId bi = t0.leaf(b, true);
        t0.backward(huber_weighted_experts(t0, {ai, bi}, target, weights, 0.5));
        auto eval = [&]() {
            Tape t;
            return t.value(huber_weighted_experts(t, {t.leaf(a, false), t.leaf(b, false)}, target, weights, 0.5))[0];
        };
        CHECK(fd_check(eval, &a, t0.grad(ai), test::pick_indices(48, 8, rng)) < 1e-5);
        CHECK(fd_check(eval, &b, t0.grad(bi), test::pick_indices(48, 8, rng)) < 1e-5);
    }
}

TEST_CASE("discriminator and classifier parameter gradients") {
    std::mt19937_64 rng(181);
    Discriminator d;
    d.init(8, 0, 6, rng);
    Tensor real = random_tensor({4, 8}, rng);
    Tensor fake = random_tensor({4, 8}, rng);
    std::vector<Param*> dp;
    d.collect(dp);
    nn::zero_grads(dp);
    Tape t0;
    t0.backward(adversarial_loss_d(t0, d.forward(t0, t0.constant(real)), d.forward(t0, t0.constant(fake)), 1e-7));
    auto eval = [&]() {
        Tape t;
        return t.value(adversarial_loss_d(t, d.forward(t, t.constant(real)), d.forward(t, t.constant(fake)), 1e-7))[0];
    };
    for (int probe = 0; probe < 10; ++probe) {
        Param* p = dp[static_cast<std::size_t>(probe) % dp.size()];
        const auto idx = test::pick_indices(static_cast<std::size_t>(p->numel()), 1, rng);
        CHECK(fd_check(eval, &p->value, p->grad, idx) < 1e-4);
    }

    ModeClassifier c;
    c.init(8, 3, 6, rng);
    Tensor labels({4, 3});
    for (long i = 0; i < 4; ++i) labels[static_cast<std::size_t>(i * 3 + (i % 3))] = 1.0;
    std::vector<Param*> cp;
    c.collect(cp);
    nn::zero_grads(cp);
    Tape t1;
    t1.backward(mode_cls_loss(t1, c.logits(t1, t1.constant(real)), labels));
    auto eval_c = [&]() {
        Tape t;
        return t.value(mode_cls_loss(t, c.logits(t, t.constant(real)), labels))[0];
    };
    for (int probe = 0; probe < 10; ++probe) {
        Param* p = cp[static_cast<std::size_t>(probe) % cp.size()];
        const auto idx = test::pick_indices(static_cast<std::size_t>(p->numel()), 1, rng);
        CHECK(fd_check(eval_c, &p->value, p->grad, idx) < 1e-4);
    }
}

TEST_CASE("atmospheric encoder-decoder overfits a single zero sample (reconstruction loss -> ~0)") {
    EncoderConfig cfg = tiny_encoder_config(7);
    std::mt19937_64 rng(191);
    Encoders enc;
    enc.init(cfg, rng);
    std::vector<Param*> params;
    enc.collect(params);
    std::vector<Param*> atm_params;
    for (Param* p : params)
        if (p->name.rfind("encoders/atm_unet", 0) == 0) atm_params.push_back(p);
    REQUIRE(!atm_params.empty());

    const Tensor zeros({1, kAtmChannels, kHistorySteps, cfg.grid, cfg.grid});
    nn::Adam opt(nn::AdamConfig{1e-2, 0.9, 0.999, 1e-8});
    double loss = 1.0;
    for (int step = 0; step < 400 && loss >= 1e-4; ++step) {
        Tape t;
        const auto out = enc.encode_atm(t, t.constant(zeros));
        const NodeId l = atm_mse(t, out.recon, zeros);
        loss = t.value(l)[0];
        nn::zero_grads(atm_params);
        t.backward(l);
        opt.step(atm_params);
    }
    CHECK(loss < 1e-4);
}

TEST_CASE("expert jsd diagnostic: identical distributions give ~0, separated ones give > 0") {
    std::mt19937_64 rng(201);
    std::normal_distribution<double> dist(0, 1);
    std::vector<std::vector<double>> same_a, same_b, far;
    for (int i = 0; i < 400; ++i) {
        std::vector<double> row(4), row2(4), row3(4);
        for (int j = 0; j < 4; ++j) {
            row[static_cast<std::size_t>(j)] = dist(rng);
            row2[static_cast<std::size_t>(j)] = dist(rng);
            row3[static_cast<std::size_t>(j)] = dist(rng) + 6.0;
        }
        same_a.push_back(row);
        same_b.push_back(row2);
        far.push_back(row3);
    }
    const auto m = expert_jsd_matrix({same_a, same_b, far});
    CHECK(m[0][1] < 0.08);
    CHECK(m[0][2] > 0.4);
    CHECK(m[1][2] > 0.4);
    CHECK(m[0][2] == m[2][0]);
}
