#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tcf/grid.hpp"
#include "tcf/index_table.hpp"
#include "tcf/track.hpp"

namespace tcf {

// Generator modes. Each mode has a distinct heading-curvature profile so the
// history window carries mode-discriminative signal:
//   straight      ~0 deg/step drift
//   right_recurve steady clockwise drift (smooth recurvature)
//   sharp_left    slight counterclockwise drift, then a scripted left turn
enum class TrackMode { straight = 0, right_recurve = 1, sharp_left = 2 };
const char* track_mode_name(TrackMode m);

// Optional target-only couplings used to build ablation stores. The coupled
// signal modifies the track only from `coupling_start_step` onward and is
// deliberately absent from the steering wind, so it is predictable only
// through the coupled input channel.
enum class SynthCoupling { none = 0, ocean = 1, terrain = 2 };

struct SynthConfig {
    int n_storms = 32;
    std::array<double, 3> mode_mix = {1.0, 1.0, 1.0};  // straight / right-recurve / sharp-left weights
    double noise_level = 1.0;                          // 0 disables all stochastic jitter
    std::uint64_t seed = 42;

    int min_fixes = 12;
    int max_fixes = 18;
    int start_year = 2008;
    int n_years = 10;

    double field_resolution_deg = 2.0;  // synthetic source-grid spacing
    double field_margin_deg = 16.0;     // domain margin beyond the track bbox

    SynthCoupling coupling = SynthCoupling::none;
    int coupling_start_step = 7;     // first move index affected by the coupling
    double ocean_gain = 0.15;        // speed factor per deg C of SST offset
    double terrain_turn_deg = 36.0;  // total scripted turn magnitude for terrain coupling
};

struct SynthStorm {
    TcTrack track;
    TrackMode mode;
    FieldLibrary fields;  // per-storm environment (atm levels, sst/sss, elevation)
};

struct SynthDataset {
    std::vector<SynthStorm> storms;
    IndexTable nino34;
};

// Deterministic under a fixed config (pure function of SynthConfig).
SynthDataset synthesize_dataset(const SynthConfig& config);

// Track whose measured 12 h headings are exact: two-step legs follow single
// great circles, so the bearing over any (t, t+12h) pair equals the scripted
// leg heading and the turn at the junction equals `turn_deg` to float
// round-off. Used as geometry oracle for the deflection detector.
TcTrack scripted_turn_track(double lat0, double lon0, double heading_deg, double turn_deg, int pre_legs,
                            int post_legs, double leg_km, const DateTime& start, const std::string& storm_id);

// Stand-in environment for forecasting without staged archives: steering
// wind derived from the observed motion, climatological SST/SSS, flat
// terrain. Deterministic for a given track.
FieldLibrary synthetic_stub_fields(const TcTrack& track);

}  // namespace tcf
