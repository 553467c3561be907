#include "tcf/nn/modules.hpp"

#include <cmath>

#include "tcf/error.hpp"

namespace tcf::nn {

void xavier_init(Tensor* t, long fan_in, long fan_out, std::mt19937_64& rng) {
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-s, s);
    for (long i = 0; i < t->numel(); ++i) (*t)[static_cast<std::size_t>(i)] = dist(rng);
}

// ------------------------------------------------------------------ Linear

void Linear::init(const std::string& name, long in_features, long out_features, std::mt19937_64& rng) {
    W = Param(name + ".W", Tensor({out_features, in_features}));
    b = Param(name + ".b", Tensor({out_features}));
    xavier_init(&W.value, in_features, out_features, rng);
}

NodeId Linear::forward(Tape& t, NodeId x) { return t.linear(x, t.param(W), t.param(b)); }

void Linear::collect(std::vector<Param*>& out) {
    out.push_back(&W);
    out.push_back(&b);
}

// --------------------------------------------------------------------- Mlp

void Mlp::init(const std::string& name, const std::vector<long>& widths, std::mt19937_64& rng) {
    if (widths.size() < 2) throw ConfigError("Mlp needs at least in/out widths");
    layers.resize(widths.size() - 1);
    for (std::size_t i = 0; i + 1 < widths.size(); ++i)
        layers[i].init(name + ".l" + std::to_string(i), widths[i], widths[i + 1], rng);
}

NodeId Mlp::forward(Tape& t, NodeId x) {
    NodeId h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = layers[i].forward(t, h);
        if (i + 1 < layers.size()) h = t.relu(h);
    }
    return h;
}

void Mlp::collect(std::vector<Param*>& out) {
    for (auto& l : layers) l.collect(out);
}

// ---------------------------------------------------------------- LstmCell

void LstmCell::init(const std::string& name, long input, long hidden_width, std::mt19937_64& rng) {
    hidden = hidden_width;
    w_ih = Param(name + ".w_ih", Tensor({4 * hidden, input}));
    w_hh = Param(name + ".w_hh", Tensor({4 * hidden, hidden}));
    b_ih = Param(name + ".b_ih", Tensor({4 * hidden}));
    b_hh = Param(name + ".b_hh", Tensor({4 * hidden}));
    xavier_init(&w_ih.value, input, hidden, rng);
    xavier_init(&w_hh.value, hidden, hidden, rng);
    // Forget-gate bias starts at 1 so early training does not wash out state.
    for (long i = hidden; i < 2 * hidden; ++i) b_ih.value[static_cast<std::size_t>(i)] = 1.0;
}

std::pair<NodeId, NodeId> LstmCell::forward(Tape& t, NodeId x, NodeId h, NodeId c) {
    const NodeId gates = t.add(t.linear(x, t.param(w_ih), t.param(b_ih)), t.linear(h, t.param(w_hh), t.param(b_hh)));
    const NodeId i_g = t.sigmoid_act(t.slice(gates, 1, 0, hidden));
    const NodeId f_g = t.sigmoid_act(t.slice(gates, 1, hidden, hidden));
    const NodeId g_g = t.tanh_act(t.slice(gates, 1, 2 * hidden, hidden));
    const NodeId o_g = t.sigmoid_act(t.slice(gates, 1, 3 * hidden, hidden));
    const NodeId c_new = t.add(t.mul(f_g, c), t.mul(i_g, g_g));
    const NodeId h_new = t.mul(o_g, t.tanh_act(c_new));
    return {h_new, c_new};
}

void LstmCell::collect(std::vector<Param*>& out) {
    out.push_back(&w_ih);
    out.push_back(&w_hh);
    out.push_back(&b_ih);
    out.push_back(&b_hh);
}

// ------------------------------------------------------------------- convs

void Conv3dLayer::init(const std::string& name, long in_ch, long out_ch, int kd, int kh, int kw,
                       std::mt19937_64& rng) {
    w = Param(name + ".w", Tensor({out_ch, in_ch, kd, kh, kw}));
    b = Param(name + ".b", Tensor({out_ch}));
    const long k = static_cast<long>(kd) * kh * kw;
    xavier_init(&w.value, in_ch * k, out_ch * k, rng);
}

NodeId Conv3dLayer::forward(Tape& t, NodeId x) {
    return t.conv3d(x, t.param(w), t.param(b), sd, sh, sw, pd, ph, pw);
}

void Conv3dLayer::collect(std::vector<Param*>& out) {
    out.push_back(&w);
    out.push_back(&b);
}

void Conv2dLayer::init(const std::string& name, long in_ch, long out_ch, int kh, int kw, std::mt19937_64& rng) {
    w = Param(name + ".w", Tensor({out_ch, in_ch, kh, kw}));
    b = Param(name + ".b", Tensor({out_ch}));
    const long k = static_cast<long>(kh) * kw;
    xavier_init(&w.value, in_ch * k, out_ch * k, rng);
}

NodeId Conv2dLayer::forward(Tape& t, NodeId x) { return t.conv2d(x, t.param(w), t.param(b), sh, sw, ph, pw); }

void Conv2dLayer::collect(std::vector<Param*>& out) {
    out.push_back(&w);
    out.push_back(&b);
}

// ------------------------------------------------------------------ UNet3d

void UNet3d::init(const std::string& name, long in_ch, long c1, long c2, long c3, long vec_width,
                  std::mt19937_64& rng) {
    enc1.init(name + ".enc1", in_ch, c1, 3, 3, 3, rng);
    enc1.sd = 1;
    enc1.sh = enc1.sw = 2;
    enc2.init(name + ".enc2", c1, c2, 3, 3, 3, rng);
    enc2.sd = enc2.sh = enc2.sw = 2;
    enc3.init(name + ".enc3", c2, c3, 3, 3, 3, rng);
    enc3.sd = enc3.sh = enc3.sw = 2;
    dec3.init(name + ".dec3", c3 + c2, c2, 3, 3, 3, rng);
    dec2.init(name + ".dec2", c2 + c1, c1, 3, 3, 3, rng);
    dec1.init(name + ".dec1", c1, c1, 3, 3, 3, rng);
    out_proj.init(name + ".out", c1, in_ch, 1, 1, 1, rng);
    out_proj.pd = out_proj.ph = out_proj.pw = 0;
    bottleneck.init(name + ".bottleneck", c3, vec_width, rng);
}

UNet3d::Out UNet3d::forward(Tape& t, NodeId x) {
    // dims copied by value: pushing nodes may reallocate the tape
    const std::vector<long> xd = t.value(x).dims();
    const long D = xd[2], H = xd[3], W = xd[4];

    const NodeId s1 = t.relu(enc1.forward(t, x));
    const std::vector<long> d1 = t.value(s1).dims();
    const NodeId s2 = t.relu(enc2.forward(t, s1));
    const std::vector<long> d2 = t.value(s2).dims();
    const NodeId s3 = t.relu(enc3.forward(t, s2));

    const NodeId pooled = t.global_avg_pool(s3);
    const NodeId vec = bottleneck.forward(t, pooled);

    NodeId u3 = t.upsample3d_nearest(s3, 2, 2, 2);
    u3 = t.crop3d(u3, d2[2], d2[3], d2[4]);
    const NodeId m3 = t.relu(dec3.forward(t, t.concat({u3, s2}, 1)));

    NodeId u2 = t.upsample3d_nearest(m3, 2, 2, 2);
    u2 = t.crop3d(u2, d1[2], d1[3], d1[4]);
    const NodeId m2 = t.relu(dec2.forward(t, t.concat({u2, s1}, 1)));

    NodeId u1 = t.upsample3d_nearest(m2, 1, 2, 2);
    u1 = t.crop3d(u1, D, H, W);
    const NodeId m1 = t.relu(dec1.forward(t, u1));
    const NodeId recon = out_proj.forward(t, m1);
    return {vec, recon};
}

void UNet3d::collect(std::vector<Param*>& out) {
    enc1.collect(out);
    enc2.collect(out);
    enc3.collect(out);
    dec3.collect(out);
    dec2.collect(out);
    dec1.collect(out);
    out_proj.collect(out);
    bottleneck.collect(out);
}

// --------------------------------------------------------------- ConvNet2d

void ConvNet2d::init(const std::string& name, long in_ch, const std::vector<long>& channels, long vec_width,
                     std::mt19937_64& rng) {
    convs.resize(channels.size());
    long prev = in_ch;
    for (std::size_t i = 0; i < channels.size(); ++i) {
        convs[i].init(name + ".conv" + std::to_string(i), prev, channels[i], 3, 3, rng);
        convs[i].sh = convs[i].sw = 2;
        prev = channels[i];
    }
    head.init(name + ".head", prev, vec_width, rng);
}

NodeId ConvNet2d::forward(Tape& t, NodeId x) {
    NodeId h = x;
    for (auto& c : convs) h = t.relu(c.forward(t, h));
    return head.forward(t, t.global_avg_pool(h));
}

void ConvNet2d::collect(std::vector<Param*>& out) {
    for (auto& c : convs) c.collect(out);
    head.collect(out);
}

// -------------------------------------------------------------------- Adam

void Adam::step(const std::vector<Param*>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (Param* p : params) {
        for (long i = 0; i < p->numel(); ++i) {
            const std::size_t k = static_cast<std::size_t>(i);
            const double g = p->grad[k];
            p->m[k] = cfg_.beta1 * p->m[k] + (1.0 - cfg_.beta1) * g;
            p->v[k] = cfg_.beta2 * p->v[k] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = p->m[k] / bc1;
            const double vhat = p->v[k] / bc2;
            p->value[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

long total_param_count(const std::vector<Param*>& params) {
    long n = 0;
    for (const Param* p : params) n += p->numel();
    return n;
}

void zero_grads(const std::vector<Param*>& params) {
    for (Param* p : params) p->zero_grad();
}

}  // namespace tcf::nn
