#pragma once

#include <random>
#include <vector>

#include "tcf/nn/modules.hpp"
#include "tcf/sample.hpp"

namespace tcf {

// Widths and toggles for every encoder branch. The A/O/T ablation axes map
// onto enable_atm / enable_ocean / enable_terrain; disabling a branch removes
// its parameters and its slice of the fused vector.
struct EncoderConfig {
    long tc_hidden = 128;  // recurrent width, = |c_TC|

    long atm_c1 = 32, atm_c2 = 64, atm_c3 = 128;  // encoder-decoder channels
    long atm_vec = 128;                           // |c_atm|

    std::vector<long> terrain_channels = {16, 32, 32};
    long terrain_vec = 32;

    long cat_hidden = 32, cat_vec = 16;
    long cont_hidden = 32, cont_vec = 16;

    long fusion_hidden = 256, fused_width = 128;

    bool enable_atm = true;
    bool enable_terrain = true;
    bool enable_ocean = true;
    bool enable_cat = true;   // categorical branch (month, category code)
    bool enable_cont = true;  // continuous-auxiliary branch
    bool include_intensity_category = true;

    int grid = 25;

    void validate() const;
    long cat_input_width() const { return include_intensity_category ? 12 + 10 : 12; }
    long cont_input_width() const { return enable_ocean ? kContChannels : kContChannels - 4; }
    long concat_width() const;
};

// Batch input tensors assembled from normalized samples.
struct EncoderInputs {
    nn::Tensor history;  // [N, kHistorySteps, 4]
    nn::Tensor atm;      // [N, kAtmChannels, kHistorySteps, g, g]
    nn::Tensor terrain;  // [N, 1, g, g]
    nn::Tensor cat;      // [N, cat_input_width] one-hot blocks
    nn::Tensor cont;     // [N, cont_input_width]
    long n = 0;
};

EncoderInputs make_encoder_inputs(const std::vector<const TcSample*>& batch, const EncoderConfig& cfg);
nn::Tensor make_target_tensor(const std::vector<const TcSample*>& batch);  // [N, kTargetSteps, 4]

class Encoders {
  public:
    void init(const EncoderConfig& cfg, std::mt19937_64& rng);
    const EncoderConfig& config() const { return cfg_; }

    // c_TC: final hidden state of the recurrent pass over the history rows.
    nn::NodeId encode_tc(nn::Tape& t, nn::NodeId history);
    struct AtmOut {
        nn::NodeId vec;    // c_atm
        nn::NodeId recon;  // decoder output, input shape
    };
    AtmOut encode_atm(nn::Tape& t, nn::NodeId atm);
    nn::NodeId encode_terrain(nn::Tape& t, nn::NodeId terrain);
    nn::NodeId encode_cat(nn::Tape& t, nn::NodeId cat);
    nn::NodeId encode_cont(nn::Tape& t, nn::NodeId cont);
    // Fixed component order: TC, atm, terrain, cat, cont (enabled ones only).
    nn::NodeId fuse(nn::Tape& t, const std::vector<nn::NodeId>& components);

    struct ForwardOut {
        nn::NodeId fused;
        nn::NodeId atm_recon = -1;  // -1 when the atmospheric branch is off
    };
    ForwardOut forward(nn::Tape& t, const EncoderInputs& in, bool* inputs_on_tape_leaves = nullptr);
    ForwardOut forward_leaves(nn::Tape& t, nn::NodeId history, nn::NodeId atm, nn::NodeId terrain, nn::NodeId cat,
                              nn::NodeId cont);

    void collect(std::vector<nn::Param*>& out);

  private:
    EncoderConfig cfg_;
    nn::LstmCell tc_cell_;
    nn::UNet3d atm_net_;
    nn::ConvNet2d terrain_net_;
    nn::Mlp cat_mlp_;
    nn::Mlp cont_mlp_;
    nn::Mlp fusion_;
};

}  // namespace tcf
