#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "tcf/grid.hpp"
#include "tcf/index_table.hpp"
#include "tcf/track.hpp"

namespace tcf {

// Fixed temporal geometry: 48 h of history at 6 h cadence predicts 24 h.
inline constexpr int kHistorySteps = 8;
inline constexpr int kTargetSteps = 4;
inline constexpr int kAtmVars = 3;    // z, u, v
inline constexpr int kAtmLevels = 4;  // 200/500/850/1000 hPa
inline constexpr int kAtmChannels = kAtmVars * kAtmLevels;
inline constexpr int kContChannels = 10;
inline constexpr std::array<double, kAtmLevels> kPressureLevels = {200.0, 500.0, 850.0, 1000.0};
inline constexpr std::array<GridVariable, kAtmVars> kAtmVariables = {GridVariable::geopotential, GridVariable::u_wind,
                                                                     GridVariable::v_wind};

// Gridded + scalar environment for one sample. The atmospheric cube is laid
// out [history_step][var][level][lat][lon]; scalar auxiliaries are stored
// raw and z-scored in place by apply_normalization.
struct EnvironmentStack {
    int grid = 25;
    // float storage: the cubes dominate sample memory and the source products
    // carry far less than float precision anyway
    std::vector<float> atm;      // kHistorySteps * kAtmChannels * grid * grid
    std::vector<float> terrain;  // grid * grid, metres

    double sst_center = 0.0, sst_mean = 0.0;  // deg C
    double sss_center = 0.0, sss_mean = 0.0;  // psu

    int month = 1;               // 1..12
    int intensity_category = 0;  // 0..9

    double translation_speed_kmh = 0.0;
    double heading_sin = 0.0, heading_cos = 1.0;
    double pressure_tendency = 0.0;  // hPa per 6 h, mean over the history window
    double wind_tendency = 0.0;      // m/s per 6 h
    double nino34 = 0.0;

    // Fixed channel order shared by normalization and the continuous encoder.
    std::array<double, kContChannels> cont_vector() const {
        return {translation_speed_kmh, heading_sin, heading_cos, pressure_tendency, wind_tendency,
                nino34,                sst_center,  sst_mean,    sss_center,        sss_mean};
    }
    void set_cont_vector(const std::array<double, kContChannels>& v) {
        translation_speed_kmh = v[0];
        heading_sin = v[1];
        heading_cos = v[2];
        pressure_tendency = v[3];
        wind_tendency = v[4];
        nino34 = v[5];
        sst_center = v[6];
        sst_mean = v[7];
        sss_center = v[8];
        sss_mean = v[9];
    }

    std::size_t atm_index(int step, int var, int level, int i, int j) const {
        return (((static_cast<std::size_t>(step) * kAtmVars + var) * kAtmLevels + level) * grid + i) * grid + j;
    }
};

// One training/inference example. Rows of history/target are
// (lat, lon, pressure, wind) when raw and (dlat, dlon, pressure, wind)
// z-scores once normalized.
struct TcSample {
    std::string storm_id;
    DateTime anchor_time;
    std::array<std::array<double, 4>, kHistorySteps> history{};
    std::array<std::array<double, 4>, kTargetSteps> target{};
    std::array<double, 4> anchor_fix{};  // raw last observed fix, kept for denormalization
    EnvironmentStack env;
    int mode_label = -1;  // synthetic generator mode; -1 = unlabeled
    bool normalized = false;
};

struct SampleBuildConfig {
    int grid = 25;                            // window points per axis
    double half_width = 12.5;                 // degrees
    double ocean_time_tolerance_h = 24 * 40;  // accept monthly-cadence ocean products
};

// km/h over the great circle; dt in hours.
double translation_speed(double lat_prev, double lon_prev, double lat_cur, double lon_cur, double dt_hours);

struct HeadingResult {
    double degrees = 0.0;  // [0, 360) clockwise from north
    double sin_val = 0.0;
    double cos_val = 1.0;
    bool defined = false;  // false for coincident points
};
HeadingResult heading(double lat_prev, double lon_prev, double lat_cur, double lon_cur);

// One sample per anchor with kHistorySteps preceding (inclusive) and
// kTargetSteps following fixes. Shorter tracks yield an empty list.
std::vector<TcSample> build_samples(const TcTrack& track, const FieldLibrary& fields, const IndexTable& nino34,
                                    const SampleBuildConfig& config, int mode_label = -1);

// Per-channel first/second moments for every continuous input channel.
// Positions are normalized as per-step deltas (dlat/dlon channels).
struct NormalizationStats {
    double dlat_mean = 0, dlat_std = 1;
    double dlon_mean = 0, dlon_std = 1;
    double pres_mean = 0, pres_std = 1;
    double wind_mean = 0, wind_std = 1;
    std::array<double, kAtmChannels> atm_mean{}, atm_std{};
    double terrain_mean = 0, terrain_std = 1;
    std::array<double, kContChannels> cont_mean{}, cont_std{};
    bool fitted = false;

    NormalizationStats() {
        atm_std.fill(1.0);
        cont_std.fill(1.0);
    }
};

// Fit on the training split only. Degenerate channels fall back to std = 1.
NormalizationStats fit_normalization(const std::vector<TcSample>& train_samples);

// In-place; throws StateError when the sample is already normalized.
void apply_normalization(TcSample* sample, const NormalizationStats& stats);

// Normalized (dlat, dlon, pressure, wind) rows -> absolute track anchored at
// the raw anchor fix (positions by cumulative sum of denormalized deltas).
std::array<std::array<double, 4>, kTargetSteps> invert_normalization(
    const std::array<std::array<double, 4>, kTargetSteps>& normalized_rows, const std::array<double, 4>& anchor_fix,
    const NormalizationStats& stats);

}  // namespace tcf
