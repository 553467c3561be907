#include "tcf/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "tcf/error.hpp"
#include "tcf/evaluation.hpp"
#include "tcf/geodesy.hpp"

namespace tcf {

namespace fs = std::filesystem;
using nn::NodeId;
using nn::Tape;
using nn::Tensor;

namespace {

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::vector<std::size_t> epoch_permutation(std::uint64_t seed, long epoch, std::size_t n) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(mix(seed ^ (0x5851f42d4c957f2dull * static_cast<std::uint64_t>(epoch + 1))));
    for (std::size_t i = n; i > 1; --i) {
        std::uniform_int_distribution<std::size_t> dist(0, i - 1);
        std::swap(perm[i - 1], perm[dist(rng)]);
    }
    return perm;
}

std::string rng_to_string(const std::mt19937_64& rng) {
    std::ostringstream oss;
    oss << rng;
    return oss.str();
}

void rng_from_string(std::mt19937_64* rng, const std::string& s) {
    if (s.empty()) return;
    std::istringstream iss(s);
    iss >> *rng;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (disc_hidden < 1 || cls_hidden < 1) throw ConfigError("critic widths must be positive");
    if (device != "cpu" && device != "auto") throw ConfigError("device must be 'cpu' or 'auto'");
    loss.validate();
    moe.validate();
    encoder.validate();
}

void TrainConfig::resolve_toggles() {
    encoder.enable_atm = use_atm;
    encoder.enable_terrain = use_terrain;
    encoder.enable_ocean = use_ocean;
    moe.enabled = use_moe;
}

TrainConfig TrainConfig::from_config(const Config& c) {
    TrainConfig t;
    t.learning_rate = c.get_double("training.learning_rate", t.learning_rate);
    t.batch_size = c.get_int("training.batch_size", t.batch_size);
    t.epochs = c.get_int("training.epochs", t.epochs);
    t.max_steps = c.get_long("training.max_steps", t.max_steps);
    t.seed = c.get_u64("training.seed", t.seed);
    t.checkpoint_every = c.get_int("training.checkpoint_every", t.checkpoint_every);
    t.device = c.get_string("training.device", t.device);
    t.use_atm = c.get_bool("training.use_atm", t.use_atm);
    t.use_moe = c.get_bool("training.use_moe", t.use_moe);
    t.use_ocean = c.get_bool("training.use_ocean", t.use_ocean);
    t.use_terrain = c.get_bool("training.use_terrain", t.use_terrain);

    t.moe.k = c.get_int("moe.k", t.moe.k);
    t.moe.expert_trunk = c.get_long("moe.expert_trunk", t.moe.expert_trunk);
    t.moe.expert_decoder = c.get_long("moe.expert_decoder", t.moe.expert_decoder);
    t.moe.router_hidden = c.get_long("moe.router_hidden", t.moe.router_hidden);

    EncoderConfig& e = t.encoder;
    e.tc_hidden = c.get_long("encoders.tc_hidden", e.tc_hidden);
    e.atm_c1 = c.get_long("encoders.atm_c1", e.atm_c1);
    e.atm_c2 = c.get_long("encoders.atm_c2", e.atm_c2);
    e.atm_c3 = c.get_long("encoders.atm_c3", e.atm_c3);
    e.atm_vec = c.get_long("encoders.atm_vec", e.atm_vec);
    e.terrain_vec = c.get_long("encoders.terrain_vec", e.terrain_vec);
    e.cat_hidden = c.get_long("encoders.cat_hidden", e.cat_hidden);
    e.cat_vec = c.get_long("encoders.cat_vec", e.cat_vec);
    e.cont_hidden = c.get_long("encoders.cont_hidden", e.cont_hidden);
    e.cont_vec = c.get_long("encoders.cont_vec", e.cont_vec);
    e.fusion_hidden = c.get_long("encoders.fusion_hidden", e.fusion_hidden);
    e.fused_width = c.get_long("encoders.fused_width", e.fused_width);
    e.include_intensity_category = c.get_bool("encoders.include_intensity_category", e.include_intensity_category);
    e.enable_cat = c.get_bool("encoders.enable_cat", e.enable_cat);
    e.enable_cont = c.get_bool("encoders.enable_cont", e.enable_cont);
    e.grid = c.get_int("encoders.grid", e.grid);
    if (c.has("encoders.terrain_channels")) {
        e.terrain_channels.clear();
        std::istringstream iss(c.get_string("encoders.terrain_channels", ""));
        std::string tok;
        while (std::getline(iss, tok, ',')) e.terrain_channels.push_back(std::stol(tok));
    }

    LossConfig& l = t.loss;
    l.huber_delta = c.get_double("loss.huber_delta", l.huber_delta);
    l.w_huber = c.get_double("loss.w_huber", l.w_huber);
    l.w_atm = c.get_double("loss.w_atm", l.w_atm);
    l.w_adv = c.get_double("loss.w_adv", l.w_adv);
    l.w_cls = c.get_double("loss.w_cls", l.w_cls);
    l.w_route = c.get_double("loss.w_route", l.w_route);
    l.conditional_discriminator = c.get_bool("loss.conditional_discriminator", l.conditional_discriminator);
    l.huber_all_experts = c.get_bool("loss.huber_all_experts", l.huber_all_experts);
    l.prob_eps = c.get_double("loss.prob_eps", l.prob_eps);
    t.disc_hidden = c.get_long("loss.disc_hidden", t.disc_hidden);
    t.cls_hidden = c.get_long("loss.cls_hidden", t.cls_hidden);

    t.resolve_toggles();
    t.validate();
    return t;
}

std::string TrainConfig::to_config_text() const {
    Config c;
    auto num = [](double v) {
        std::ostringstream oss;
        oss.precision(17);
        oss << v;
        return oss.str();
    };
    c.set("training.learning_rate", num(learning_rate));
    c.set("training.batch_size", std::to_string(batch_size));
    c.set("training.epochs", std::to_string(epochs));
    c.set("training.max_steps", std::to_string(max_steps));
    c.set("training.seed", std::to_string(seed));
    c.set("training.checkpoint_every", std::to_string(checkpoint_every));
    c.set("training.device", device);
    c.set("training.use_atm", use_atm ? "true" : "false");
    c.set("training.use_moe", use_moe ? "true" : "false");
    c.set("training.use_ocean", use_ocean ? "true" : "false");
    c.set("training.use_terrain", use_terrain ? "true" : "false");
    c.set("moe.k", std::to_string(moe.k));
    c.set("moe.expert_trunk", std::to_string(moe.expert_trunk));
    c.set("moe.expert_decoder", std::to_string(moe.expert_decoder));
    c.set("moe.router_hidden", std::to_string(moe.router_hidden));
    c.set("encoders.tc_hidden", std::to_string(encoder.tc_hidden));
    c.set("encoders.atm_c1", std::to_string(encoder.atm_c1));
    c.set("encoders.atm_c2", std::to_string(encoder.atm_c2));
    c.set("encoders.atm_c3", std::to_string(encoder.atm_c3));
    c.set("encoders.atm_vec", std::to_string(encoder.atm_vec));
    {
        std::string chans;
        for (std::size_t i = 0; i < encoder.terrain_channels.size(); ++i)
            chans += (i ? "," : "") + std::to_string(encoder.terrain_channels[i]);
        c.set("encoders.terrain_channels", chans);
    }
    c.set("encoders.terrain_vec", std::to_string(encoder.terrain_vec));
    c.set("encoders.cat_hidden", std::to_string(encoder.cat_hidden));
    c.set("encoders.cat_vec", std::to_string(encoder.cat_vec));
    c.set("encoders.cont_hidden", std::to_string(encoder.cont_hidden));
    c.set("encoders.cont_vec", std::to_string(encoder.cont_vec));
    c.set("encoders.fusion_hidden", std::to_string(encoder.fusion_hidden));
    c.set("encoders.fused_width", std::to_string(encoder.fused_width));
    c.set("encoders.include_intensity_category", encoder.include_intensity_category ? "true" : "false");
    c.set("encoders.enable_cat", encoder.enable_cat ? "true" : "false");
    c.set("encoders.enable_cont", encoder.enable_cont ? "true" : "false");
    c.set("encoders.grid", std::to_string(encoder.grid));
    c.set("loss.huber_delta", num(loss.huber_delta));
    c.set("loss.w_huber", num(loss.w_huber));
    c.set("loss.w_atm", num(loss.w_atm));
    c.set("loss.w_adv", num(loss.w_adv));
    c.set("loss.w_cls", num(loss.w_cls));
    c.set("loss.w_route", num(loss.w_route));
    c.set("loss.conditional_discriminator", loss.conditional_discriminator ? "true" : "false");
    c.set("loss.huber_all_experts", loss.huber_all_experts ? "true" : "false");
    c.set("loss.prob_eps", num(loss.prob_eps));
    c.set("loss.disc_hidden", std::to_string(disc_hidden));
    c.set("loss.cls_hidden", std::to_string(cls_hidden));
    return c.dump();
}

std::set<std::string> TrainConfig::known_keys() {
    return {
        "training.learning_rate", "training.batch_size", "training.epochs", "training.max_steps", "training.seed",
        "training.checkpoint_every", "training.device", "training.use_atm", "training.use_moe", "training.use_ocean",
        "training.use_terrain", "moe.k", "moe.expert_trunk", "moe.expert_decoder", "moe.router_hidden",
        "encoders.tc_hidden", "encoders.atm_c1", "encoders.atm_c2", "encoders.atm_c3", "encoders.atm_vec",
        "encoders.terrain_channels", "encoders.terrain_vec", "encoders.cat_hidden", "encoders.cat_vec",
        "encoders.cont_hidden", "encoders.cont_vec", "encoders.fusion_hidden", "encoders.fused_width",
        "encoders.include_intensity_category", "encoders.enable_cat", "encoders.enable_cont", "encoders.grid", "loss.huber_delta", "loss.w_huber", "loss.w_atm",
        "loss.w_adv", "loss.w_cls", "loss.w_route", "loss.conditional_discriminator", "loss.huber_all_experts",
        "loss.prob_eps", "loss.disc_hidden", "loss.cls_hidden",
        // dataset build / synthesis sections (consumed by the CLI pipelines)
        "data.grid", "data.half_width", "data.store", "data.train_frac", "data.val_frac", "data.ocean_tolerance_h",
        "synth.n_storms", "synth.mode_mix", "synth.noise_level", "synth.min_fixes", "synth.max_fixes",
        "synth.start_year", "synth.n_years", "synth.coupling", "synth.field_resolution", "synth.ocean_gain",
        "synth.terrain_turn_deg", "synth.coupling_start_step",
        // evaluation section
        "evaluate.rule", "evaluate.split", "evaluate.reference_file",
    };
}

// ----------------------------------------------------------------- Trainer

Trainer::Trainer(TrainConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.resolve_toggles();
    cfg_.validate();
    std::mt19937_64 init_rng(mix(cfg_.seed));
    encoders_.init(cfg_.encoder, init_rng);
    moe_.init(cfg_.moe, cfg_.encoder.fused_width, init_rng);
    const long track_width = kTargetSteps * 4;
    disc_.init(track_width, cfg_.loss.conditional_discriminator ? cfg_.encoder.fused_width : 0, cfg_.disc_hidden,
               init_rng);
    cls_.init(track_width, moe_.config().effective_k(), cfg_.cls_hidden, init_rng);
    const nn::AdamConfig adam{cfg_.learning_rate, 0.9, 0.999, 1e-8};
    opt_gen_ = nn::Adam(adam);
    opt_disc_ = nn::Adam(adam);
    opt_cls_ = nn::Adam(adam);
    train_rng_.seed(mix(cfg_.seed ^ 0x7ea3u));
}

std::vector<nn::Param*> Trainer::generator_params() {
    std::vector<nn::Param*> out;
    encoders_.collect(out);
    moe_.collect_all(out);
    return out;
}

std::vector<nn::Param*> Trainer::discriminator_params() {
    std::vector<nn::Param*> out;
    disc_.collect(out);
    return out;
}

std::vector<nn::Param*> Trainer::classifier_params() {
    std::vector<nn::Param*> out;
    cls_.collect(out);
    return out;
}

std::vector<nn::Param*> Trainer::all_params() {
    std::vector<nn::Param*> out = generator_params();
    for (nn::Param* p : discriminator_params()) out.push_back(p);
    for (nn::Param* p : classifier_params()) out.push_back(p);
    return out;
}

LossBreakdown Trainer::train_step(const std::vector<const TcSample*>& batch) {
    if (batch.empty()) throw ValidationError("train_step: empty batch");
    const int k = moe_.config().effective_k();
    const long n = static_cast<long>(batch.size());
    const bool moe_on = moe_.config().enabled && k > 1;

    const EncoderInputs inputs = make_encoder_inputs(batch, encoders_.config());
    const Tensor target = make_target_tensor(batch);
    const Tensor target_flat({n, kTargetSteps * 4L}, target.vec());

    // Pass 1: plain forward for fakes, routing and the posterior. No
    // backward is run on this tape.
    Tensor fused_values;
    std::vector<Tensor> member_values(static_cast<std::size_t>(k));
    {
        Tape t0;
        const auto enc = encoders_.forward(t0, inputs);
        for (int g = 0; g < k; ++g) member_values[static_cast<std::size_t>(g)] = t0.value(moe_.expert_forward(t0, enc.fused, g));
        fused_values = t0.value(enc.fused);
    }
    std::vector<RouterOutput> routes = moe_.route(fused_values);

    // Posterior over experts per sample, from normalized-space errors.
    Tensor posterior({n, static_cast<long>(k)});
    Tensor selected_mask({n, static_cast<long>(k)});
    for (long i = 0; i < n; ++i) {
        std::vector<std::vector<double>> forecasts;
        std::vector<double> truth(static_cast<std::size_t>(kTargetSteps * 4));
        for (int f = 0; f < kTargetSteps * 4; ++f) truth[static_cast<std::size_t>(f)] = target_flat[static_cast<std::size_t>(i * kTargetSteps * 4 + f)];
        for (int g = 0; g < k; ++g) {
            std::vector<double> row(static_cast<std::size_t>(kTargetSteps * 4));
            for (int f = 0; f < kTargetSteps * 4; ++f)
                row[static_cast<std::size_t>(f)] = member_values[static_cast<std::size_t>(g)][static_cast<std::size_t>(i * kTargetSteps * 4 + f)];
            forecasts.push_back(std::move(row));
        }
        const RoutingPosterior rp = compute_posterior(forecasts, truth);
        for (int g = 0; g < k; ++g) posterior[static_cast<std::size_t>(i * k + g)] = rp.posterior[static_cast<std::size_t>(g)];
        selected_mask[static_cast<std::size_t>(i * k + routes[static_cast<std::size_t>(i)].selected)] = 1.0;
    }

    LossBreakdown out;

    // Routed member values, flattened, as the discriminator's fake batch.
    Tensor fake_flat({n, kTargetSteps * 4});
    for (long i = 0; i < n; ++i) {
        const int g = routes[static_cast<std::size_t>(i)].selected;
        for (int f = 0; f < kTargetSteps * 4; ++f)
            fake_flat[static_cast<std::size_t>(i * kTargetSteps * 4 + f)] =
                member_values[static_cast<std::size_t>(g)][static_cast<std::size_t>(i * kTargetSteps * 4 + f)];
    }

    // (1) Discriminator step. Inputs are constants; only D parameters move.
    {
        Tape td;
        const NodeId cond = cfg_.loss.conditional_discriminator ? td.constant(fused_values) : -1;
        const NodeId d_real = disc_.forward(td, td.constant(target_flat), cond);
        const NodeId d_fake = disc_.forward(td, td.constant(fake_flat), cond);
        const NodeId loss_d = adversarial_loss_d(td, d_real, d_fake, cfg_.loss.prob_eps);
        out.adv_d = td.value(loss_d)[0];
        nn::zero_grads(discriminator_params());
        td.backward(loss_d);
        opt_disc_.step(discriminator_params());
    }

    // (2) Classifier step on (track, generating expert) pairs from every
    // expert, so the critic stays calibrated for rarely-routed experts.
    if (moe_on) {
        Tape tc;
        Tensor all_tracks({n * k, kTargetSteps * 4});
        Tensor labels({n * k, static_cast<long>(k)});
        for (int g = 0; g < k; ++g)
            for (long i = 0; i < n; ++i) {
                const long row = static_cast<long>(g) * n + i;
                for (int f = 0; f < kTargetSteps * 4; ++f)
                    all_tracks[static_cast<std::size_t>(row * kTargetSteps * 4 + f)] =
                        member_values[static_cast<std::size_t>(g)][static_cast<std::size_t>(i * kTargetSteps * 4 + f)];
                labels[static_cast<std::size_t>(row * k + g)] = 1.0;
            }
        const NodeId logits = cls_.logits(tc, tc.constant(all_tracks));
        const NodeId loss_c = mode_cls_loss(tc, logits, labels);
        out.cls_classifier = tc.value(loss_c)[0];
        nn::zero_grads(classifier_params());
        tc.backward(loss_c);
        opt_cls_.step(classifier_params());
    }

    // (3) Joint generator-side step with the updated critics.
    {
        Tape tg;
        const auto enc = encoders_.forward(tg, inputs);
        std::vector<NodeId> members;
        for (int g = 0; g < k; ++g) members.push_back(moe_.expert_forward(tg, enc.fused, g));

        const Tensor& huber_w = cfg_.loss.huber_all_experts ? posterior : selected_mask;
        const NodeId l_huber = huber_weighted_experts(tg, members, target, huber_w, cfg_.loss.huber_delta);
        out.huber = tg.value(l_huber)[0];
        NodeId total = tg.scale(l_huber, cfg_.loss.w_huber);

        if (cfg_.encoder.enable_atm) {
            const NodeId l_atm = atm_mse(tg, enc.atm_recon, inputs.atm);
            out.atm = tg.value(l_atm)[0];
            total = tg.add(total, tg.scale(l_atm, cfg_.loss.w_atm));
        }

        // Adversarial + classification terms act on the routed member only
        // (gradient reaches encoders and that expert).
        NodeId adv_acc = -1, cls_acc = -1;
        const NodeId cond = cfg_.loss.conditional_discriminator ? enc.fused : -1;
        for (int g = 0; g < k; ++g) {
            Tensor col({n, 1L});
            double mass = 0.0;
            for (long i = 0; i < n; ++i) {
                col[static_cast<std::size_t>(i)] = selected_mask[static_cast<std::size_t>(i * k + g)];
                mass += col[static_cast<std::size_t>(i)];
            }
            if (mass == 0.0) continue;
            const NodeId flat = tg.reshape(members[static_cast<std::size_t>(g)], {n, kTargetSteps * 4L});
            const NodeId d_fake = disc_.forward(tg, flat, cond);
            const NodeId log_fake = tg.log_act(tg.clamp(d_fake, cfg_.loss.prob_eps, 1.0 - cfg_.loss.prob_eps));
            const NodeId adv_term = tg.weighted_sum(log_fake, col);
            adv_acc = adv_acc < 0 ? adv_term : tg.add(adv_acc, adv_term);
            if (moe_on) {
                Tensor pick({n, static_cast<long>(k)});
                for (long i = 0; i < n; ++i)
                    if (col[static_cast<std::size_t>(i)] > 0.0) pick[static_cast<std::size_t>(i * k + g)] = 1.0;
                const NodeId logits = cls_.logits(tg, flat);
                const NodeId lsm = tg.log_softmax_last(logits);
                const NodeId cls_term = tg.weighted_sum(lsm, pick);
                cls_acc = cls_acc < 0 ? cls_term : tg.add(cls_acc, cls_term);
            }
        }
        if (adv_acc >= 0) {
            const NodeId l_adv = tg.scale(adv_acc, -1.0 / static_cast<double>(n));
            out.adv_g = tg.value(l_adv)[0];
            total = tg.add(total, tg.scale(l_adv, cfg_.loss.w_adv));
        }
        if (cls_acc >= 0) {
            const NodeId l_cls = tg.scale(cls_acc, -1.0 / static_cast<double>(n));
            out.cls = tg.value(l_cls)[0];
            total = tg.add(total, tg.scale(l_cls, cfg_.loss.w_cls));
        }

        if (moe_on) {
            const NodeId logits = moe_.router_logits(tg, enc.fused);
            const NodeId l_route = routing_entropy_from_logits(tg, logits, posterior);
            out.route = tg.value(l_route)[0];
            total = tg.add(total, tg.scale(l_route, cfg_.loss.w_route));
        }

        out.total = tg.value(total)[0];
        if (!std::isfinite(out.total)) {
            std::ostringstream oss;
            oss << "non-finite training loss at step " << global_step_ << ": huber=" << out.huber
                << " atm=" << out.atm << " adv_g=" << out.adv_g << " cls=" << out.cls << " route=" << out.route
                << " adv_d=" << out.adv_d;
            throw ComputeError(oss.str());
        }

        nn::zero_grads(generator_params());
        tg.backward(total);
        opt_gen_.step(generator_params());
        // Critic gradients accumulated through the generator graph are
        // discarded; each critic trains only in its own step.
        nn::zero_grads(discriminator_params());
        nn::zero_grads(classifier_params());
    }

    ++global_step_;
    return out;
}

double Trainer::validation_track24(const std::vector<TcSample>& normalized_val) {
    if (normalized_val.empty()) return -1.0;
    std::vector<double> errors;
    const std::size_t chunk = 64;
    for (std::size_t at = 0; at < normalized_val.size(); at += chunk) {
        std::vector<const TcSample*> batch;
        for (std::size_t i = at; i < std::min(at + chunk, normalized_val.size()); ++i)
            batch.push_back(&normalized_val[i]);
        const auto ensembles = assemble_ensemble(encoders_, moe_, stats_, batch);
        for (const auto& e : ensembles) {
            const auto& f = e.member_tracks[static_cast<std::size_t>(e.selected)][kTargetSteps - 1];
            const auto& y = e.truth[kTargetSteps - 1];
            errors.push_back(geo::haversine_km(f[0], f[1], y[0], y[1]));
        }
    }
    double acc = 0.0;
    for (double v : errors) acc += v;
    return acc / static_cast<double>(errors.size());
}

TrainRunResult Trainer::train(const SampleStore& store, const std::string& out_dir) {
    if (!store.has_split("train")) throw ConfigError("store has no 'train' split");
    if (store.grid() != cfg_.encoder.grid)
        throw ConfigError("store grid " + std::to_string(store.grid()) + " != encoder grid " +
                          std::to_string(cfg_.encoder.grid));
    fs::create_directories(out_dir);

    std::vector<TcSample> train_samples = store.load_split("train");
    if (train_samples.empty()) throw ConfigError("train split is empty");
    if (!stats_.fitted) stats_ = fit_normalization(train_samples);
    for (auto& s : train_samples) apply_normalization(&s, stats_);

    std::vector<TcSample> val_samples;
    if (store.has_split("val")) {
        val_samples = store.load_split("val");
        for (auto& s : val_samples) apply_normalization(&s, stats_);
    }

    std::ofstream log(fs::path(out_dir) / "train.log", std::ios::app);
    TrainRunResult result;
    result.last_checkpoint = (fs::path(out_dir) / "last.ckpt").string();
    result.best_checkpoint = (fs::path(out_dir) / "best.ckpt").string();

    const auto log_step = [&](const LossBreakdown& b) {
        nlohmann::json j;
        j["step"] = global_step_;
        j["epoch"] = epoch_;
        j["huber"] = b.huber;
        j["atm"] = b.atm;
        j["adv_g"] = b.adv_g;
        j["adv_d"] = b.adv_d;
        j["cls"] = b.cls;
        j["cls_classifier"] = b.cls_classifier;
        j["route"] = b.route;
        j["total"] = b.total;
        log << j.dump() << '\n';
    };

    bool stop = false;
    for (; epoch_ < cfg_.epochs && !stop; ++epoch_, step_in_epoch_ = 0) {
        const auto perm = epoch_permutation(cfg_.seed, epoch_, train_samples.size());
        const long batches = (static_cast<long>(perm.size()) + cfg_.batch_size - 1) / cfg_.batch_size;
        double loss_sum = 0.0;
        long loss_n = 0;
        for (; step_in_epoch_ < batches; ++step_in_epoch_) {
            if (cfg_.max_steps >= 0 && global_step_ >= cfg_.max_steps) {
                stop = true;
                break;
            }
            std::vector<const TcSample*> batch;
            const std::size_t begin = static_cast<std::size_t>(step_in_epoch_) * cfg_.batch_size;
            for (std::size_t i = begin; i < std::min(begin + cfg_.batch_size, perm.size()); ++i)
                batch.push_back(&train_samples[perm[i]]);
            const LossBreakdown b = train_step(batch);
            log_step(b);
            result.step_trace.push_back(b);
            loss_sum += b.total;
            ++loss_n;
        }
        EpochMetrics em;
        em.epoch = epoch_;
        em.train_loss_mean = loss_n ? loss_sum / loss_n : 0.0;
        em.val_track24_km = val_samples.empty() ? -1.0 : validation_track24(val_samples);
        result.epochs.push_back(em);
        if (em.val_track24_km >= 0 && (best_step_ < 0 || em.val_track24_km < best_metric_)) {
            best_metric_ = em.val_track24_km;
            best_step_ = global_step_;
            save(result.best_checkpoint);
        }
        if (cfg_.checkpoint_every > 0 && (epoch_ + 1) % cfg_.checkpoint_every == 0)
            save((fs::path(out_dir) / ("epoch_" + std::to_string(epoch_) + ".ckpt")).string());
        save(result.last_checkpoint);
    }
    if (cfg_.epochs == 0) save(result.last_checkpoint);
    result.steps_run = global_step_;
    return result;
}

void Trainer::save(const std::string& path) {
    CheckpointData data;
    data.config_text = cfg_.to_config_text();
    data.epoch = epoch_;
    data.global_step = global_step_;
    data.step_in_epoch = step_in_epoch_;
    data.best_metric = best_metric_;
    data.best_step = best_step_;
    data.train_rng_state = rng_to_string(train_rng_);
    data.adam_t_gen = opt_gen_.step_count();
    data.adam_t_disc = opt_disc_.step_count();
    data.adam_t_cls = opt_cls_.step_count();
    data.stats = stats_;
    const auto params = all_params();
    save_checkpoint(path, data, params);
}

void Trainer::resume_from(const std::string& checkpoint_path) {
    const CheckpointData peek = peek_checkpoint(checkpoint_path);
    const Config saved = Config::parse_string(peek.config_text);
    const Config current = Config::parse_string(cfg_.to_config_text());
    // Architecture keys must match exactly; the optimizer/loop keys may vary.
    static const char* critical_prefixes[] = {"moe.", "encoders.", "loss."};
    std::string mismatched;
    for (const auto& [key, value] : current.entries()) {
        bool critical = false;
        for (const char* p : critical_prefixes) critical = critical || key.rfind(p, 0) == 0;
        for (const char* p : {"training.use_atm", "training.use_moe", "training.use_ocean", "training.use_terrain"})
            critical = critical || key == p;
        if (!critical) continue;
        if (saved.get_string(key, "") != value) mismatched += (mismatched.empty() ? "" : ", ") + key;
    }
    if (!mismatched.empty()) throw IncompatibleError("checkpoint config differs on: " + mismatched);
    if (saved.get_string("training.batch_size", "") != std::to_string(cfg_.batch_size))
        std::cerr << "warning: resuming with batch_size " << cfg_.batch_size << " (checkpoint had "
                  << saved.get_string("training.batch_size", "?") << "); optimizer state preserved\n";

    const auto params = all_params();
    const CheckpointData data = load_checkpoint(checkpoint_path, params);
    epoch_ = data.epoch;
    global_step_ = data.global_step;
    step_in_epoch_ = data.step_in_epoch;
    best_metric_ = data.best_metric;
    best_step_ = data.best_step;
    stats_ = data.stats;
    rng_from_string(&train_rng_, data.train_rng_state);
    opt_gen_.set_step_count(data.adam_t_gen);
    opt_disc_.set_step_count(data.adam_t_disc);
    opt_cls_.set_step_count(data.adam_t_cls);
}

void write_fraction_splits(SampleStore* store, double train_frac, double val_frac, std::uint64_t seed) {
    const auto ids = store->storm_ids();
    std::vector<std::size_t> perm(ids.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(mix(seed ^ 0x51ee7u));
    for (std::size_t i = perm.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> dist(0, i - 1);
        std::swap(perm[i - 1], perm[dist(rng)]);
    }
    const std::size_t n = ids.size();
    const std::size_t n_train = static_cast<std::size_t>(std::lround(train_frac * n));
    const std::size_t n_val = static_cast<std::size_t>(std::lround(val_frac * n));
    std::vector<std::string> train, val, test;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string& id = ids[perm[i]];
        if (i < n_train)
            train.push_back(id);
        else if (i < n_train + n_val)
            val.push_back(id);
        else
            test.push_back(id);
    }
    store->write_split("train", train);
    store->write_split("val", val);
    store->write_split("test", test);
}

}  // namespace tcf
