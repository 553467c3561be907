#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tcf/nn/tape.hpp"

namespace tcf::nn {

using NodeId = Tape::NodeId;

// Xavier-uniform fill: U(-s, s) with s = sqrt(6 / (fan_in + fan_out)).
void xavier_init(Tensor* t, long fan_in, long fan_out, std::mt19937_64& rng);

struct Linear {
    Param W, b;

    void init(const std::string& name, long in_features, long out_features, std::mt19937_64& rng);
    NodeId forward(Tape& t, NodeId x);
    void collect(std::vector<Param*>& out);
    long in_features() const { return W.value.dim(1); }
    long out_features() const { return W.value.dim(0); }
};

// Fully connected stack with ReLU between layers; the last layer is linear.
struct Mlp {
    std::vector<Linear> layers;

    void init(const std::string& name, const std::vector<long>& widths, std::mt19937_64& rng);
    NodeId forward(Tape& t, NodeId x);
    void collect(std::vector<Param*>& out);
};

struct LstmCell {
    Param w_ih, w_hh, b_ih, b_hh;  // gates packed [i, f, g, o]
    long hidden = 0;

    void init(const std::string& name, long input, long hidden_width, std::mt19937_64& rng);
    // Returns (h', c').
    std::pair<NodeId, NodeId> forward(Tape& t, NodeId x, NodeId h, NodeId c);
    void collect(std::vector<Param*>& out);
};

struct Conv3dLayer {
    Param w, b;
    int sd = 1, sh = 1, sw = 1, pd = 1, ph = 1, pw = 1;

    void init(const std::string& name, long in_ch, long out_ch, int kd, int kh, int kw, std::mt19937_64& rng);
    NodeId forward(Tape& t, NodeId x);
    void collect(std::vector<Param*>& out);
};

struct Conv2dLayer {
    Param w, b;
    int sh = 1, sw = 1, ph = 1, pw = 1;

    void init(const std::string& name, long in_ch, long out_ch, int kh, int kw, std::mt19937_64& rng);
    NodeId forward(Tape& t, NodeId x);
    void collect(std::vector<Param*>& out);
};

// Three-level encoder-decoder over (time, lat, lon) with skip connections.
// The first level halves only the spatial axes; deeper levels halve time as
// well. The bottleneck is average-pooled and projected to a feature vector;
// the decoder mirrors the encoder and reconstructs the input cube.
struct UNet3d {
    Conv3dLayer enc1, enc2, enc3;
    Conv3dLayer dec3, dec2, dec1;
    Conv3dLayer out_proj;  // 1x1x1 back to input channels
    Linear bottleneck;

    void init(const std::string& name, long in_ch, long c1, long c2, long c3, long vec_width, std::mt19937_64& rng);
    struct Out {
        NodeId vec;    // [N, vec_width]
        NodeId recon;  // input shape
    };
    Out forward(Tape& t, NodeId x);
    void collect(std::vector<Param*>& out);
};

// Strided 2-D conv stack + global average pool + projection.
struct ConvNet2d {
    std::vector<Conv2dLayer> convs;
    Linear head;

    void init(const std::string& name, long in_ch, const std::vector<long>& channels, long vec_width,
              std::mt19937_64& rng);
    NodeId forward(Tape& t, NodeId x);  // [N,C,H,W] -> [N, vec_width]
    void collect(std::vector<Param*>& out);
};

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One optimizer instance per parameter group; moment state lives in Param.
class Adam {
  public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
    void step(const std::vector<Param*>& params);
    long step_count() const { return t_; }
    void set_step_count(long t) { t_ = t; }
    AdamConfig& config() { return cfg_; }
    const AdamConfig& config() const { return cfg_; }

  private:
    AdamConfig cfg_;
    long t_ = 0;
};

long total_param_count(const std::vector<Param*>& params);
void zero_grads(const std::vector<Param*>& params);

}  // namespace tcf::nn
