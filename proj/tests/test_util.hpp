#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "tcf/grid.hpp"
#include "tcf/index_table.hpp"
#include "tcf/sample.hpp"
#include "tcf/geodesy.hpp"
#include "tcf/synth.hpp"

namespace tcf::test {

// Central finite-difference check of df/dx against an analytic gradient.
// `eval` must be a pure function of the coordinate vector.
inline double grad_rel_err(const std::function<double(const std::vector<double>&)>& eval, std::vector<double> x,
                           const std::vector<double>& analytic, const std::vector<std::size_t>& probe_indices,
                           double h = 1e-5) {
    double worst = 0.0;
    for (std::size_t idx : probe_indices) {
        const double keep = x[idx];
        x[idx] = keep + h;
        const double fp = eval(x);
        x[idx] = keep - h;
        const double fm = eval(x);
        x[idx] = keep;
        const double fd = (fp - fm) / (2.0 * h);
        const double ad = analytic[idx];
        const double err = std::fabs(fd - ad) / std::max({std::fabs(fd), std::fabs(ad), 1e-6});
        worst = std::max(worst, err);
    }
    return worst;
}

inline std::vector<std::size_t> pick_indices(std::size_t n, std::size_t count, std::mt19937_64& rng) {
    std::vector<std::size_t> out;
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    for (std::size_t i = 0; i < count; ++i) out.push_back(dist(rng));
    return out;
}

// A minimal single-storm environment: constant-ish analytic fields covering
// a generous domain, suitable for fast sample building in unit tests.
inline FieldLibrary tiny_fields(const TcTrack& track) { return synthetic_stub_fields(track); }

inline IndexTable tiny_nino(int year_lo, int year_hi, double value = 0.3) {
    IndexTable t("nino34");
    for (int y = year_lo; y <= year_hi; ++y)
        for (int m = 1; m <= 12; ++m) t.insert(y, m, value);
    return t;
}

// Straight-moving storm on the 6 h grid with format-precision fields.
inline TcTrack straight_track(int n_fixes, double lat0 = 15.0, double lon0 = 140.0, double heading = 285.0,
                              double step_km = 110.0) {
    TcTrack track;
    track.storm_id = "TEST01";
    track.name = "TEST";
    double lat = lat0, lon = lon0;
    for (int i = 0; i < n_fixes; ++i) {
        TcRecord r;
        r.timestamp = DateTime(2015, 8, 1, 0).plus_hours(6 * i);
        r.lat = std::round(lat * 10.0) / 10.0;
        r.lon = std::round(lon * 10.0) / 10.0;
        r.central_pressure = 990.0;
        r.max_wind = 25.0;
        r.intensity_category = 3;
        track.records.push_back(r);
        double nlat, nlon;
        geo::destination_point(lat, lon, heading, step_km, &nlat, &nlon);
        lat = nlat;
        lon = nlon;
    }
    return track;
}

inline SampleBuildConfig tiny_build_config(int grid = 7) {
    SampleBuildConfig cfg;
    cfg.grid = grid;
    cfg.half_width = 6.0;
    return cfg;
}

}  // namespace tcf::test
