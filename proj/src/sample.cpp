#include "tcf/sample.hpp"

#include <cmath>
#include <functional>

#include "tcf/error.hpp"
#include "tcf/geodesy.hpp"

namespace tcf {

double translation_speed(double lat_prev, double lon_prev, double lat_cur, double lon_cur, double dt_hours) {
    if (!(dt_hours > 0.0)) throw ValidationError("translation_speed: dt must be > 0");
    return geo::haversine_km(lat_prev, lon_prev, lat_cur, lon_cur) / dt_hours;
}

HeadingResult heading(double lat_prev, double lon_prev, double lat_cur, double lon_cur) {
    HeadingResult r;
    if (!geo::bearing_defined(lat_prev, lon_prev, lat_cur, lon_cur)) return r;
    r.degrees = geo::initial_bearing_deg(lat_prev, lon_prev, lat_cur, lon_cur);
    r.sin_val = std::sin(geo::deg2rad(r.degrees));
    r.cos_val = std::cos(geo::deg2rad(r.degrees));
    r.defined = true;
    return r;
}

namespace {

void require_regularized(const TcTrack& track) {
    validate_track(track, /*require_six_hour_grid=*/true);
    for (std::size_t i = 1; i < track.records.size(); ++i) {
        if (track.records[i].timestamp.hours_since_epoch() - track.records[i - 1].timestamp.hours_since_epoch() != 6)
            throw ValidationError("track " + track.storm_id + " not regularized to 6 h cadence at index " +
                                  std::to_string(i));
    }
}

void copy_window(const Window& w, float* dst) {
    for (std::size_t k = 0; k < w.values.size(); ++k) dst[k] = static_cast<float>(w.values[k]);
}

double window_mean(const Window& w) {
    double acc = 0.0;
    for (double v : w.values) acc += v;
    return acc / static_cast<double>(w.values.size());
}

}  // namespace

std::vector<TcSample> build_samples(const TcTrack& track, const FieldLibrary& fields, const IndexTable& nino34,
                                    const SampleBuildConfig& config, int mode_label) {
    require_regularized(track);
    const long n = static_cast<long>(track.records.size());
    std::vector<TcSample> samples;
    if (n < kHistorySteps + kTargetSteps) return samples;

    const std::size_t cells = static_cast<std::size_t>(config.grid) * config.grid;
    for (long anchor = kHistorySteps - 1; anchor + kTargetSteps < n; ++anchor) {
        TcSample s;
        s.storm_id = track.storm_id;
        s.mode_label = mode_label;
        const TcRecord& af = track.records[static_cast<std::size_t>(anchor)];
        s.anchor_time = af.timestamp;
        s.anchor_fix = {af.lat, af.lon, af.central_pressure, af.max_wind};
        for (int j = 0; j < kHistorySteps; ++j) {
            const TcRecord& r = track.records[static_cast<std::size_t>(anchor - kHistorySteps + 1 + j)];
            s.history[static_cast<std::size_t>(j)] = {r.lat, r.lon, r.central_pressure, r.max_wind};
        }
        for (int j = 0; j < kTargetSteps; ++j) {
            const TcRecord& r = track.records[static_cast<std::size_t>(anchor + 1 + j)];
            s.target[static_cast<std::size_t>(j)] = {r.lat, r.lon, r.central_pressure, r.max_wind};
        }

        // Windows are extracted at every history step, centered on the fix at
        // that step; everything in env is a function of data at t <= anchor.
        s.env.grid = config.grid;
        s.env.atm.resize(static_cast<std::size_t>(kHistorySteps) * kAtmChannels * cells);
        for (int j = 0; j < kHistorySteps; ++j) {
            const TcRecord& r = track.records[static_cast<std::size_t>(anchor - kHistorySteps + 1 + j)];
            for (int v = 0; v < kAtmVars; ++v)
                for (int l = 0; l < kAtmLevels; ++l) {
                    const GridField& f = fields.find(kAtmVariables[static_cast<std::size_t>(v)],
                                                     kPressureLevels[static_cast<std::size_t>(l)], r.timestamp);
                    const Window w = extract_window(f, r.lat, r.lon, config.half_width, config.grid);
                    copy_window(w, s.env.atm.data() + s.env.atm_index(j, v, l, 0, 0));
                }
        }

        const GridField& elev = fields.find_static(GridVariable::elevation);
        const Window terrain_w = extract_window(elev, af.lat, af.lon, config.half_width, config.grid);
        s.env.terrain.resize(cells);
        copy_window(terrain_w, s.env.terrain.data());

        const GridField& sst = fields.find_nearest(GridVariable::sst, kSurfaceLevel, af.timestamp,
                                                   config.ocean_time_tolerance_h);
        const GridField& sss = fields.find_nearest(GridVariable::sss, kSurfaceLevel, af.timestamp,
                                                   config.ocean_time_tolerance_h);
        s.env.sst_center = sample_bilinear(sst, af.lat, af.lon);
        s.env.sst_mean = window_mean(extract_window(sst, af.lat, af.lon, config.half_width, config.grid));
        s.env.sss_center = sample_bilinear(sss, af.lat, af.lon);
        s.env.sss_mean = window_mean(extract_window(sss, af.lat, af.lon, config.half_width, config.grid));

        s.env.month = af.timestamp.month();
        s.env.intensity_category = af.intensity_category;

        const TcRecord& prev = track.records[static_cast<std::size_t>(anchor - 1)];
        s.env.translation_speed_kmh = translation_speed(prev.lat, prev.lon, af.lat, af.lon, 6.0);
        // Stationary pairs carry the previous defined heading; 0 deg if none.
        HeadingResult hr;
        for (long i = anchor; i > anchor - kHistorySteps + 1; --i) {
            hr = heading(track.records[static_cast<std::size_t>(i - 1)].lat,
                         track.records[static_cast<std::size_t>(i - 1)].lon,
                         track.records[static_cast<std::size_t>(i)].lat,
                         track.records[static_cast<std::size_t>(i)].lon);
            if (hr.defined) break;
        }
        s.env.heading_sin = hr.defined ? hr.sin_val : 0.0;
        s.env.heading_cos = hr.defined ? hr.cos_val : 1.0;

        double dp = 0.0, dw = 0.0;
        for (int j = 1; j < kHistorySteps; ++j) {
            dp += s.history[static_cast<std::size_t>(j)][2] - s.history[static_cast<std::size_t>(j - 1)][2];
            dw += s.history[static_cast<std::size_t>(j)][3] - s.history[static_cast<std::size_t>(j - 1)][3];
        }
        s.env.pressure_tendency = dp / (kHistorySteps - 1);
        s.env.wind_tendency = dw / (kHistorySteps - 1);
        s.env.nino34 = nino34.lookup(af.timestamp.year(), af.timestamp.month());

        for (double v : s.env.cont_vector())
            if (!std::isfinite(v)) throw ComputeError("non-finite auxiliary feature in sample " + s.storm_id);

        samples.push_back(std::move(s));
    }
    return samples;
}

// ----------------------------------------------------------- normalization

namespace {

struct MeanStd {
    double sum = 0.0, sumsq = 0.0;
    long n = 0;
    void add(double x) {
        sum += x;
        sumsq += x * x;
        ++n;
    }
    double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
    double std_dev() const {
        if (!n) return 1.0;
        const double m = mean();
        const double var = std::max(0.0, sumsq / static_cast<double>(n) - m * m);
        const double s = std::sqrt(var);
        return s < 1e-12 ? 1.0 : s;
    }
};

// Position deltas for one sample: history steps use the previous history row,
// the first target step hangs off the anchor fix.
void for_each_delta(const TcSample& s, const std::function<void(double dlat, double dlon)>& fn) {
    for (int j = 1; j < kHistorySteps; ++j) {
        const auto& cur = s.history[static_cast<std::size_t>(j)];
        const auto& prev = s.history[static_cast<std::size_t>(j - 1)];
        fn(cur[0] - prev[0], geo::wrap_angle(cur[1] - prev[1]));
    }
    for (int j = 0; j < kTargetSteps; ++j) {
        const auto& cur = s.target[static_cast<std::size_t>(j)];
        const auto prev = j == 0 ? s.anchor_fix : s.target[static_cast<std::size_t>(j - 1)];
        fn(cur[0] - prev[0], geo::wrap_angle(cur[1] - prev[1]));
    }
}

}  // namespace

NormalizationStats fit_normalization(const std::vector<TcSample>& train_samples) {
    if (train_samples.empty()) throw ValidationError("fit_normalization: empty training set");
    NormalizationStats st;
    MeanStd dlat, dlon, pres, wind, terrain;
    std::array<MeanStd, kAtmChannels> atm;
    std::array<MeanStd, kContChannels> cont;

    for (const auto& s : train_samples) {
        if (s.normalized) throw StateError("fit_normalization: sample already normalized");
        for_each_delta(s, [&](double a, double b) {
            dlat.add(a);
            dlon.add(b);
        });
        for (const auto& row : s.history) {
            pres.add(row[2]);
            wind.add(row[3]);
        }
        for (const auto& row : s.target) {
            pres.add(row[2]);
            wind.add(row[3]);
        }
        const std::size_t cells = static_cast<std::size_t>(s.env.grid) * s.env.grid;
        for (int step = 0; step < kHistorySteps; ++step)
            for (int ch = 0; ch < kAtmChannels; ++ch) {
                const float* base = s.env.atm.data() + s.env.atm_index(step, ch / kAtmLevels, ch % kAtmLevels, 0, 0);
                for (std::size_t k = 0; k < cells; ++k) atm[static_cast<std::size_t>(ch)].add(base[k]);
            }
        for (float v : s.env.terrain) terrain.add(v);
        const auto cv = s.env.cont_vector();
        for (int c = 0; c < kContChannels; ++c) cont[static_cast<std::size_t>(c)].add(cv[static_cast<std::size_t>(c)]);
    }

    st.dlat_mean = dlat.mean();
    st.dlat_std = dlat.std_dev();
    st.dlon_mean = dlon.mean();
    st.dlon_std = dlon.std_dev();
    st.pres_mean = pres.mean();
    st.pres_std = pres.std_dev();
    st.wind_mean = wind.mean();
    st.wind_std = wind.std_dev();
    for (int ch = 0; ch < kAtmChannels; ++ch) {
        st.atm_mean[static_cast<std::size_t>(ch)] = atm[static_cast<std::size_t>(ch)].mean();
        st.atm_std[static_cast<std::size_t>(ch)] = atm[static_cast<std::size_t>(ch)].std_dev();
    }
    st.terrain_mean = terrain.mean();
    st.terrain_std = terrain.std_dev();
    for (int c = 0; c < kContChannels; ++c) {
        st.cont_mean[static_cast<std::size_t>(c)] = cont[static_cast<std::size_t>(c)].mean();
        st.cont_std[static_cast<std::size_t>(c)] = cont[static_cast<std::size_t>(c)].std_dev();
    }
    st.fitted = true;
    return st;
}

void apply_normalization(TcSample* sample, const NormalizationStats& stats) {
    if (!stats.fitted) throw StateError("apply_normalization: stats not fitted");
    TcSample& s = *sample;
    if (s.normalized) throw StateError("apply_normalization: sample already normalized");

    std::array<std::array<double, 4>, kHistorySteps> hist = s.history;
    for (int j = 0; j < kHistorySteps; ++j) {
        auto& row = s.history[static_cast<std::size_t>(j)];
        const double dlat = j == 0 ? 0.0 : hist[static_cast<std::size_t>(j)][0] - hist[static_cast<std::size_t>(j - 1)][0];
        const double dlon =
            j == 0 ? 0.0 : geo::wrap_angle(hist[static_cast<std::size_t>(j)][1] - hist[static_cast<std::size_t>(j - 1)][1]);
        row[0] = (dlat - stats.dlat_mean) / stats.dlat_std;
        row[1] = (dlon - stats.dlon_mean) / stats.dlon_std;
        row[2] = (row[2] - stats.pres_mean) / stats.pres_std;
        row[3] = (row[3] - stats.wind_mean) / stats.wind_std;
    }
    std::array<std::array<double, 4>, kTargetSteps> tgt = s.target;
    for (int j = 0; j < kTargetSteps; ++j) {
        auto& row = s.target[static_cast<std::size_t>(j)];
        const auto prev = j == 0 ? s.anchor_fix : tgt[static_cast<std::size_t>(j - 1)];
        const double dlat = tgt[static_cast<std::size_t>(j)][0] - prev[0];
        const double dlon = geo::wrap_angle(tgt[static_cast<std::size_t>(j)][1] - prev[1]);
        row[0] = (dlat - stats.dlat_mean) / stats.dlat_std;
        row[1] = (dlon - stats.dlon_mean) / stats.dlon_std;
        row[2] = (row[2] - stats.pres_mean) / stats.pres_std;
        row[3] = (row[3] - stats.wind_mean) / stats.wind_std;
    }

    const std::size_t cells = static_cast<std::size_t>(s.env.grid) * s.env.grid;
    for (int step = 0; step < kHistorySteps; ++step)
        for (int ch = 0; ch < kAtmChannels; ++ch) {
            float* base = s.env.atm.data() + s.env.atm_index(step, ch / kAtmLevels, ch % kAtmLevels, 0, 0);
            const double m = stats.atm_mean[static_cast<std::size_t>(ch)];
            const double sd = stats.atm_std[static_cast<std::size_t>(ch)];
            for (std::size_t k = 0; k < cells; ++k) base[k] = static_cast<float>((base[k] - m) / sd);
        }
    for (float& v : s.env.terrain) v = static_cast<float>((v - stats.terrain_mean) / stats.terrain_std);
    auto cv = s.env.cont_vector();
    for (int c = 0; c < kContChannels; ++c)
        cv[static_cast<std::size_t>(c)] = (cv[static_cast<std::size_t>(c)] - stats.cont_mean[static_cast<std::size_t>(c)]) /
                                          stats.cont_std[static_cast<std::size_t>(c)];
    s.env.set_cont_vector(cv);
    s.normalized = true;
}

std::array<std::array<double, 4>, kTargetSteps> invert_normalization(
    const std::array<std::array<double, 4>, kTargetSteps>& normalized_rows, const std::array<double, 4>& anchor_fix,
    const NormalizationStats& stats) {
    if (!stats.fitted) throw StateError("invert_normalization: stats not fitted");
    std::array<std::array<double, 4>, kTargetSteps> out{};
    double lat = anchor_fix[0];
    double lon = anchor_fix[1];
    for (int j = 0; j < kTargetSteps; ++j) {
        const auto& row = normalized_rows[static_cast<std::size_t>(j)];
        lat += row[0] * stats.dlat_std + stats.dlat_mean;
        lon = geo::wrap_lon(lon + row[1] * stats.dlon_std + stats.dlon_mean);
        out[static_cast<std::size_t>(j)][0] = lat;
        out[static_cast<std::size_t>(j)][1] = lon;
        out[static_cast<std::size_t>(j)][2] = row[2] * stats.pres_std + stats.pres_mean;
        out[static_cast<std::size_t>(j)][3] = row[3] * stats.wind_std + stats.wind_mean;
    }
    return out;
}

}  // namespace tcf
