#include "tcf/encoders.hpp"

#include <cmath>

#include "tcf/error.hpp"

namespace tcf {

using nn::NodeId;
using nn::Tape;
using nn::Tensor;

void EncoderConfig::validate() const {
    const long widths[] = {tc_hidden, atm_c1,     atm_c2,      atm_c3,       atm_vec,     terrain_vec,
                           cat_hidden, cat_vec,    cont_hidden, cont_vec,     fusion_hidden, fused_width};
    for (long w : widths)
        if (w <= 0) throw ConfigError("encoder widths must be positive");
    for (long c : terrain_channels)
        if (c <= 0) throw ConfigError("terrain channels must be positive");
    if (terrain_channels.empty()) throw ConfigError("terrain encoder needs at least one conv layer");
    if (grid < 3) throw ConfigError("window grid too small");
}

long EncoderConfig::concat_width() const {
    long w = tc_hidden;
    if (enable_atm) w += atm_vec;
    if (enable_terrain) w += terrain_vec;
    if (enable_cat) w += cat_vec;
    if (enable_cont) w += cont_vec;
    return w;
}

EncoderInputs make_encoder_inputs(const std::vector<const TcSample*>& batch, const EncoderConfig& cfg) {
    if (batch.empty()) throw ValidationError("empty batch");
    const long n = static_cast<long>(batch.size());
    const long g = cfg.grid;
    EncoderInputs in;
    in.n = n;
    in.history = Tensor({n, kHistorySteps, 4});
    in.atm = Tensor({n, kAtmChannels, kHistorySteps, g, g});
    in.terrain = Tensor({n, 1, g, g});
    in.cat = Tensor({n, cfg.cat_input_width()});
    in.cont = Tensor({n, cfg.cont_input_width()});

    for (long b = 0; b < n; ++b) {
        const TcSample& s = *batch[static_cast<std::size_t>(b)];
        if (!s.normalized) throw StateError("batch assembly expects normalized samples");
        if (s.env.grid != g) throw ValidationError("sample grid != encoder grid");
        for (int j = 0; j < kHistorySteps; ++j)
            for (int f = 0; f < 4; ++f)
                in.history[static_cast<std::size_t>(((b * kHistorySteps) + j) * 4 + f)] =
                    s.history[static_cast<std::size_t>(j)][static_cast<std::size_t>(f)];
        // Sample cube is [step][var][level][i][j]; the model consumes
        // channels-first [var*level][step][i][j].
        const std::size_t cells = static_cast<std::size_t>(g) * g;
        for (int ch = 0; ch < kAtmChannels; ++ch)
            for (int step = 0; step < kHistorySteps; ++step) {
                const float* src = s.env.atm.data() + s.env.atm_index(step, ch / kAtmLevels, ch % kAtmLevels, 0, 0);
                double* dst = in.atm.data() + ((static_cast<std::size_t>(b) * kAtmChannels + ch) * kHistorySteps + step) * cells;
                for (std::size_t k = 0; k < cells; ++k) dst[k] = static_cast<double>(src[k]);
            }
        double* tdst = in.terrain.data() + static_cast<std::size_t>(b) * cells;
        for (std::size_t k = 0; k < cells; ++k) tdst[k] = static_cast<double>(s.env.terrain[k]);

        if (s.env.month < 1 || s.env.month > 12)
            throw ValidationError("month " + std::to_string(s.env.month) + " out of vocabulary");
        double* crow = in.cat.data() + static_cast<std::size_t>(b) * cfg.cat_input_width();
        crow[s.env.month - 1] = 1.0;
        if (cfg.include_intensity_category) {
            if (s.env.intensity_category < 0 || s.env.intensity_category > 9)
                throw ValidationError("intensity category " + std::to_string(s.env.intensity_category) +
                                      " out of vocabulary");
            crow[12 + s.env.intensity_category] = 1.0;
        }
        const auto cv = s.env.cont_vector();
        double* vrow = in.cont.data() + static_cast<std::size_t>(b) * cfg.cont_input_width();
        for (long c = 0; c < cfg.cont_input_width(); ++c) vrow[c] = cv[static_cast<std::size_t>(c)];
    }
    if (!in.history.all_finite() || !in.atm.all_finite() || !in.terrain.all_finite() || !in.cont.all_finite())
        throw ComputeError("non-finite encoder input");
    return in;
}

nn::Tensor make_target_tensor(const std::vector<const TcSample*>& batch) {
    const long n = static_cast<long>(batch.size());
    Tensor y({n, kTargetSteps, 4});
    for (long b = 0; b < n; ++b) {
        const TcSample& s = *batch[static_cast<std::size_t>(b)];
        for (int j = 0; j < kTargetSteps; ++j)
            for (int f = 0; f < 4; ++f)
                y[static_cast<std::size_t>(((b * kTargetSteps) + j) * 4 + f)] =
                    s.target[static_cast<std::size_t>(j)][static_cast<std::size_t>(f)];
    }
    return y;
}

void Encoders::init(const EncoderConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    cfg_ = cfg;
    tc_cell_.init("encoders/tc_lstm", 4, cfg.tc_hidden, rng);
    if (cfg.enable_atm)
        atm_net_.init("encoders/atm_unet", kAtmChannels, cfg.atm_c1, cfg.atm_c2, cfg.atm_c3, cfg.atm_vec, rng);
    if (cfg.enable_terrain) terrain_net_.init("encoders/terrain", 1, cfg.terrain_channels, cfg.terrain_vec, rng);
    if (cfg.enable_cat) cat_mlp_.init("encoders/cat", {cfg.cat_input_width(), cfg.cat_hidden, cfg.cat_vec}, rng);
    if (cfg.enable_cont) cont_mlp_.init("encoders/cont", {cfg.cont_input_width(), cfg.cont_hidden, cfg.cont_vec}, rng);
    fusion_.init("encoders/fusion", {cfg.concat_width(), cfg.fusion_hidden, cfg.fused_width}, rng);
}

NodeId Encoders::encode_tc(Tape& t, NodeId history) {
    if (!t.value(history).all_finite()) throw ComputeError("encode_tc: non-finite input");
    const long n = t.value(history).dim(0);
    NodeId h = t.constant(Tensor({n, cfg_.tc_hidden}));
    NodeId c = t.constant(Tensor({n, cfg_.tc_hidden}));
    for (int step = 0; step < kHistorySteps; ++step) {
        NodeId x = t.reshape(t.slice(history, 1, step, 1), {n, 4});
        auto [h2, c2] = tc_cell_.forward(t, x, h, c);
        h = h2;
        c = c2;
    }
    return h;
}

Encoders::AtmOut Encoders::encode_atm(Tape& t, NodeId atm) {
    if (!cfg_.enable_atm) throw StateError("atmospheric branch disabled");
    if (!t.value(atm).all_finite()) throw ComputeError("encode_atm: non-finite input");
    const auto out = atm_net_.forward(t, atm);
    return {out.vec, out.recon};
}

NodeId Encoders::encode_terrain(Tape& t, NodeId terrain) {
    if (!cfg_.enable_terrain) throw StateError("terrain branch disabled");
    if (!t.value(terrain).all_finite()) throw ComputeError("encode_terrain: non-finite input");
    return terrain_net_.forward(t, terrain);
}

NodeId Encoders::encode_cat(Tape& t, NodeId cat) { return cat_mlp_.forward(t, cat); }

NodeId Encoders::encode_cont(Tape& t, NodeId cont) {
    if (!t.value(cont).all_finite()) throw ComputeError("encode_cont: non-finite input");
    return cont_mlp_.forward(t, cont);
}

NodeId Encoders::fuse(Tape& t, const std::vector<NodeId>& components) {
    if (components.empty()) throw ValidationError("fuse: no components");
    long width = 0;
    for (NodeId c : components) width += t.value(c).dim(1);
    if (width != cfg_.concat_width())
        throw ConfigError("fuse: concat width " + std::to_string(width) + " != configured " +
                          std::to_string(cfg_.concat_width()));
    return fusion_.forward(t, t.concat(components, 1));
}

Encoders::ForwardOut Encoders::forward_leaves(Tape& t, NodeId history, NodeId atm, NodeId terrain, NodeId cat,
                                              NodeId cont) {
    std::vector<NodeId> comps;
    ForwardOut out;
    comps.push_back(encode_tc(t, history));
    if (cfg_.enable_atm) {
        const AtmOut a = encode_atm(t, atm);
        comps.push_back(a.vec);
        out.atm_recon = a.recon;
    }
    if (cfg_.enable_terrain) comps.push_back(encode_terrain(t, terrain));
    if (cfg_.enable_cat) comps.push_back(encode_cat(t, cat));
    if (cfg_.enable_cont) comps.push_back(encode_cont(t, cont));
    out.fused = fuse(t, comps);
    return out;
}

Encoders::ForwardOut Encoders::forward(Tape& t, const EncoderInputs& in, bool* inputs_on_tape_leaves) {
    const NodeId history = t.constant(in.history);
    const NodeId atm = cfg_.enable_atm ? t.constant(in.atm) : -1;
    const NodeId terrain = cfg_.enable_terrain ? t.constant(in.terrain) : -1;
    const NodeId cat = t.constant(in.cat);
    const NodeId cont = t.constant(in.cont);
    if (inputs_on_tape_leaves) *inputs_on_tape_leaves = true;
    return forward_leaves(t, history, atm, terrain, cat, cont);
}

void Encoders::collect(std::vector<nn::Param*>& out) {
    tc_cell_.collect(out);
    if (cfg_.enable_atm) atm_net_.collect(out);
    if (cfg_.enable_terrain) terrain_net_.collect(out);
    if (cfg_.enable_cat) cat_mlp_.collect(out);
    if (cfg_.enable_cont) cont_mlp_.collect(out);
    fusion_.collect(out);
}

}  // namespace tcf
