#include "tcf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tcf/error.hpp"
#include "tcf/geodesy.hpp"
#include "tcf/sample.hpp"

namespace tcf {

const char* track_mode_name(TrackMode m) {
    switch (m) {
        case TrackMode::straight: return "straight";
        case TrackMode::right_recurve: return "right_recurve";
        case TrackMode::sharp_left: return "sharp_left";
    }
    return "?";
}

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

struct Rng {
    explicit Rng(std::uint64_t seed) : engine(seed) {}
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine); }
    double normal(double mean, double sd) { return std::normal_distribution<double>(mean, sd)(engine); }
    long integer(long lo, long hi) { return std::uniform_int_distribution<long>(lo, hi)(engine); }
    std::mt19937_64 engine;
};

int category_from_wind(double wind) {
    if (wind >= 51.0) return 6;
    if (wind >= 41.5) return 5;
    if (wind >= 32.7) return 4;
    if (wind >= 24.5) return 3;
    if (wind >= 17.2) return 2;
    if (wind >= 10.8) return 1;
    return 0;
}

double round_to(double v, double step) { return std::round(v / step) * step; }

// Quantize to 0.1 deg exactly the way the best-track parser reconstructs it
// (integer tenths divided by 10), so writer/parser round-trips bit-exactly.
double quantize_tenth(double v) { return static_cast<double>(std::llround(v * 10.0)) / 10.0; }

// Deterministic largest-remainder apportionment of storms to modes, then a
// seeded Fisher-Yates shuffle (std::shuffle is implementation-defined).
std::vector<TrackMode> assign_modes(const SynthConfig& cfg, Rng* rng) {
    double total = cfg.mode_mix[0] + cfg.mode_mix[1] + cfg.mode_mix[2];
    if (!(total > 0.0)) throw ConfigError("mode_mix weights must not all be zero");
    std::array<double, 3> exact{};
    std::array<long, 3> count{};
    long assigned = 0;
    for (int m = 0; m < 3; ++m) {
        exact[static_cast<std::size_t>(m)] = cfg.n_storms * cfg.mode_mix[static_cast<std::size_t>(m)] / total;
        count[static_cast<std::size_t>(m)] = static_cast<long>(std::floor(exact[static_cast<std::size_t>(m)]));
        assigned += count[static_cast<std::size_t>(m)];
    }
    while (assigned < cfg.n_storms) {
        int best = 0;
        double best_rem = -1.0;
        for (int m = 0; m < 3; ++m) {
            const double rem = exact[static_cast<std::size_t>(m)] - count[static_cast<std::size_t>(m)];
            if (rem > best_rem + 1e-12) {
                best_rem = rem;
                best = m;
            }
        }
        ++count[static_cast<std::size_t>(best)];
        ++assigned;
    }
    std::vector<TrackMode> modes;
    for (int m = 0; m < 3; ++m)
        for (long i = 0; i < count[static_cast<std::size_t>(m)]; ++i) modes.push_back(static_cast<TrackMode>(m));
    for (long i = static_cast<long>(modes.size()) - 1; i > 0; --i)
        std::swap(modes[static_cast<std::size_t>(i)], modes[static_cast<std::size_t>(rng->integer(0, i))]);
    return modes;
}

struct StormPlan {
    TrackMode mode;
    int n_fixes;
    DateTime start;
    double lat0, lon0;
    double base_heading, base_speed;  // deg, km/h
    double curvature;                 // deg per move
    int turn_move = -1;               // first move of a scripted 2-move turn
    double turn_total = 0.0;          // signed deg, clockwise positive
    double sst_offset = 0.0;
    double island_height = 0.0;       // 0 = no island
    double island_lat = 0.0, island_lon = 0.0, island_sigma = 1.5;
    double texture_phase1 = 0.0, texture_phase2 = 0.0;
    double z_mode_tilt = 0.0;  // gpm per deg lon
};

StormPlan plan_storm(const SynthConfig& cfg, int index, TrackMode mode, Rng* rng) {
    StormPlan p;
    p.mode = mode;
    p.n_fixes = static_cast<int>(rng->integer(cfg.min_fixes, cfg.max_fixes));
    const int year = cfg.start_year + index % cfg.n_years;
    const int month = static_cast<int>(rng->integer(6, 10));
    const int day = static_cast<int>(rng->integer(1, 25));
    const int hour = 6 * static_cast<int>(rng->integer(0, 3));
    p.start = DateTime(year, month, day, hour);
    p.lat0 = quantize_tenth(rng->uniform(10.0, 22.0));
    p.lon0 = quantize_tenth(rng->uniform(130.0, 158.0));
    switch (mode) {
        case TrackMode::straight:
            p.base_heading = rng->uniform(265.0, 300.0);
            p.base_speed = rng->uniform(18.0, 26.0);
            p.curvature = 0.0;
            p.z_mode_tilt = 0.0;
            break;
        case TrackMode::right_recurve:
            p.base_heading = rng->uniform(290.0, 320.0);
            p.base_speed = rng->uniform(14.0, 22.0);
            p.curvature = rng->uniform(5.0, 9.0);
            p.z_mode_tilt = 4.0;
            break;
        case TrackMode::sharp_left:
            p.base_heading = rng->uniform(270.0, 300.0);
            p.base_speed = rng->uniform(12.0, 20.0);
            p.curvature = -rng->uniform(1.5, 3.0);
            p.z_mode_tilt = -4.0;
            break;
    }
    const int n_moves = p.n_fixes - 1;
    if (mode == TrackMode::sharp_left) {
        p.turn_move = std::clamp(static_cast<int>(std::lround(n_moves * 0.65)), kHistorySteps - 1, n_moves - 2);
        p.turn_total = -rng->uniform(40.0, 65.0);
    }
    if (cfg.coupling == SynthCoupling::ocean) {
        const double magnitude = rng->uniform(0.8, 2.0);
        p.sst_offset = (index % 2 == 0 ? 1.0 : -1.0) * magnitude;
    } else {
        p.sst_offset = rng->uniform(-0.3, 0.3);
    }
    if (cfg.coupling == SynthCoupling::terrain) {
        p.turn_move = cfg.coupling_start_step + 1;
        const double sign = index % 2 == 0 ? -1.0 : 1.0;  // left for island on the left bow, right otherwise
        p.turn_total = sign * cfg.terrain_turn_deg;
        p.island_height = rng->uniform(1800.0, 3200.0);
    } else if (mode == TrackMode::sharp_left) {
        p.island_height = rng->uniform(1800.0, 3200.0);
    }
    p.texture_phase1 = rng->uniform(0.0, 2.0 * kPi);
    p.texture_phase2 = rng->uniform(0.0, 2.0 * kPi);
    return p;
}

struct GeneratedStorm {
    TcTrack track;
    std::vector<double> steer_heading;  // per move, coupling-free
    std::vector<double> steer_speed;    // km/h
};

GeneratedStorm generate_track(const SynthConfig& cfg, const StormPlan& plan, int index, Rng* rng) {
    GeneratedStorm out;
    const int n_moves = plan.n_fixes - 1;
    std::vector<double> heading(static_cast<std::size_t>(n_moves));
    std::vector<double> speed(static_cast<std::size_t>(n_moves));
    out.steer_heading.resize(static_cast<std::size_t>(n_moves));
    out.steer_speed.resize(static_cast<std::size_t>(n_moves));

    double h = plan.base_heading;
    for (int i = 0; i < n_moves; ++i) {
        const double jitter = cfg.noise_level > 0.0 ? rng->normal(0.0, 2.5 * cfg.noise_level) : 0.0;
        const double sj = cfg.noise_level > 0.0 ? rng->normal(0.0, 0.04 * cfg.noise_level) : 0.0;
        double base_h = h + jitter;
        double sp = plan.base_speed * (1.0 + sj);

        double actual_h = base_h;
        double actual_sp = sp;
        if (plan.turn_move >= 0 && (i == plan.turn_move || i == plan.turn_move + 1))
            actual_h += plan.turn_total / 2.0 * (i - plan.turn_move + 1);
        if (cfg.coupling == SynthCoupling::ocean && i >= cfg.coupling_start_step)
            actual_sp *= 1.0 + cfg.ocean_gain * plan.sst_offset;
        heading[static_cast<std::size_t>(i)] = actual_h;
        speed[static_cast<std::size_t>(i)] = actual_sp;
        // The steering wind follows the realized motion, except that the
        // coupled component of an ablation store is withheld from it: the
        // coupled signal must be recoverable only through its own channel.
        out.steer_heading[static_cast<std::size_t>(i)] = cfg.coupling == SynthCoupling::terrain ? base_h : actual_h;
        out.steer_speed[static_cast<std::size_t>(i)] = cfg.coupling == SynthCoupling::ocean ? sp : actual_sp;
        h += plan.curvature;  // drift applies to the underlying base heading
        if (plan.turn_move >= 0 && i == plan.turn_move + 1) h += plan.turn_total;
    }

    TcTrack track;
    track.storm_id = "SYN" + std::to_string(1000 + index);
    track.name = "SYNTH" + std::to_string(index);
    const double depth = rng->uniform(20.0, 60.0);

    double lat = plan.lat0, lon = plan.lon0;
    for (int i = 0; i < plan.n_fixes; ++i) {
        TcRecord rec;
        rec.timestamp = plan.start.plus_hours(6 * i);
        rec.lat = quantize_tenth(lat);
        rec.lon = geo::wrap_lon(quantize_tenth(lon));
        const double phase = plan.n_fixes > 1 ? static_cast<double>(i) / (plan.n_fixes - 1) : 0.0;
        double pressure = 1005.0 - depth * std::sin(kPi * phase);
        pressure = std::clamp(round_to(pressure, 1.0), 850.0, 1050.0);
        double wind = 6.3 * std::sqrt(std::max(0.0, 1010.0 - pressure));
        wind = std::max(0.0, round_to(wind, 1.0));
        rec.central_pressure = pressure;
        rec.max_wind = wind;
        rec.intensity_category = category_from_wind(wind);
        track.records.push_back(rec);
        if (i < n_moves) {
            const double dist = speed[static_cast<std::size_t>(i)] * 6.0;
            double nlat, nlon;
            geo::destination_point(lat, lon, heading[static_cast<std::size_t>(i)], dist, &nlat, &nlon);
            lat = nlat;
            lon = nlon;
        }
    }
    out.track = std::move(track);
    return out;
}

std::vector<double> build_axis(double lo, double hi, double res) {
    std::vector<double> axis;
    const double start = std::floor(lo / res) * res;
    for (double v = start; v <= hi + res; v += res) axis.push_back(v);
    return axis;
}

double level_base_z(double level) {
    if (level == 200.0) return 12400.0;
    if (level == 500.0) return 5880.0;
    if (level == 850.0) return 1500.0;
    return 110.0;
}

double level_steer_scale(double level) {
    if (level == 200.0) return 0.6;
    if (level == 500.0) return 1.0;
    if (level == 850.0) return 0.8;
    return 0.5;
}

FieldLibrary generate_fields(const StormPlan& plan, const GeneratedStorm& storm, const SynthConfig& cfg) {
    FieldLibrary lib;
    const auto& recs = storm.track.records;
    double lat_lo = recs.front().lat, lat_hi = recs.front().lat;
    double lon_lo = recs.front().lon, lon_hi = recs.front().lon;
    for (const auto& r : recs) {
        lat_lo = std::min(lat_lo, r.lat);
        lat_hi = std::max(lat_hi, r.lat);
        lon_lo = std::min(lon_lo, r.lon);
        lon_hi = std::max(lon_hi, r.lon);
    }
    const std::vector<double> lat_axis =
        build_axis(lat_lo - cfg.field_margin_deg, lat_hi + cfg.field_margin_deg, cfg.field_resolution_deg);
    const std::vector<double> lon_axis =
        build_axis(lon_lo - cfg.field_margin_deg, lon_hi + cfg.field_margin_deg, cfg.field_resolution_deg);

    auto make_field = [&](GridVariable var, double level, std::optional<DateTime> time) {
        GridField f;
        f.variable = var;
        f.level = level;
        f.valid_time = time;
        f.lat_axis = lat_axis;
        f.lon_axis = lon_axis;
        f.values.assign(lat_axis.size() * lon_axis.size(), 0.0);
        return f;
    };
    auto texture = [&](double lat, double lon, double amp) {
        return amp * std::sin(2.0 * kPi * lat / 25.0 + plan.texture_phase1) *
               std::cos(2.0 * kPi * lon / 40.0 + plan.texture_phase2);
    };

    const int n_moves = static_cast<int>(recs.size()) - 1;
    for (int i = 0; i < static_cast<int>(recs.size()); ++i) {
        const int move = std::min(i, n_moves - 1);
        const double steer_h = storm.steer_heading[static_cast<std::size_t>(std::max(0, move))];
        const double steer_ms = storm.steer_speed[static_cast<std::size_t>(std::max(0, move))] / 3.6;
        const double he = std::sin(geo::deg2rad(steer_h)) * steer_ms;
        const double hn = std::cos(geo::deg2rad(steer_h)) * steer_ms;
        const double ridge_lat = recs[static_cast<std::size_t>(i)].lat + 12.0;
        const double lon_c = recs[static_cast<std::size_t>(i)].lon;

        for (int v = 0; v < kAtmVars; ++v)
            for (int l = 0; l < kAtmLevels; ++l) {
                const double level = kPressureLevels[static_cast<std::size_t>(l)];
                GridField f = make_field(kAtmVariables[static_cast<std::size_t>(v)], level,
                                         recs[static_cast<std::size_t>(i)].timestamp);
                const double scale = level_steer_scale(level);
                for (std::size_t a = 0; a < lat_axis.size(); ++a)
                    for (std::size_t b = 0; b < lon_axis.size(); ++b) {
                        const double la = lat_axis[a], lo = lon_axis[b];
                        double val = 0.0;
                        if (kAtmVariables[static_cast<std::size_t>(v)] == GridVariable::u_wind)
                            val = scale * he + texture(la, lo, 1.2);
                        else if (kAtmVariables[static_cast<std::size_t>(v)] == GridVariable::v_wind)
                            val = scale * hn + texture(la + 7.0, lo, 1.2);
                        else
                            val = level_base_z(level) - 10.0 * (la - ridge_lat) +
                                  plan.z_mode_tilt * geo::wrap_angle(lo - lon_c) + texture(la, lo + 11.0, 8.0);
                        f.at(a, b) = val;
                    }
                lib.add(std::move(f));
            }
    }

    GridField sst = make_field(GridVariable::sst, kSurfaceLevel, recs.front().timestamp);
    GridField sss = make_field(GridVariable::sss, kSurfaceLevel, recs.front().timestamp);
    for (std::size_t a = 0; a < lat_axis.size(); ++a)
        for (std::size_t b = 0; b < lon_axis.size(); ++b) {
            const double la = lat_axis[a], lo = lon_axis[b];
            sst.at(a, b) = 29.5 - 0.10 * (la - 15.0) - 0.015 * geo::wrap_angle(lo - 140.0) + plan.sst_offset +
                           texture(la, lo + 3.0, 0.2);
            sss.at(a, b) = 34.0 + 0.02 * (la - 15.0) + texture(la + 2.0, lo, 0.1);
        }
    lib.add(std::move(sst));
    lib.add(std::move(sss));

    GridField elev = make_field(GridVariable::elevation, kSurfaceLevel, std::nullopt);
    if (plan.island_height > 0.0) {
        for (std::size_t a = 0; a < lat_axis.size(); ++a)
            for (std::size_t b = 0; b < lon_axis.size(); ++b) {
                const double dla = lat_axis[a] - plan.island_lat;
                const double dlo = geo::wrap_angle(lon_axis[b] - plan.island_lon);
                elev.at(a, b) =
                    plan.island_height * std::exp(-(dla * dla + dlo * dlo) / (2.0 * plan.island_sigma * plan.island_sigma));
            }
    }
    lib.add(std::move(elev));
    return lib;
}

SynthStorm synthesize_storm_impl(const SynthConfig& cfg, int index, TrackMode mode) {
    Rng rng(splitmix64(cfg.seed * 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(index) + 1));
    StormPlan plan = plan_storm(cfg, index, mode, &rng);
    GeneratedStorm gen = generate_track(cfg, plan, index, &rng);

    // Island sits on the left (or right) bow of the pre-turn track, placed
    // relative to the actual turn location so the terrain patch is
    // informative before the turn happens.
    if (plan.island_height > 0.0) {
        const int anchor_move = plan.turn_move >= 0 ? plan.turn_move : kHistorySteps - 1;
        const std::size_t ref = static_cast<std::size_t>(std::min<int>(anchor_move, static_cast<int>(gen.track.records.size()) - 1));
        const TcRecord& r = gen.track.records[ref];
        const double side = plan.turn_total <= 0.0 ? -90.0 : 90.0;  // left of heading for left turns
        double ilat, ilon;
        geo::destination_point(r.lat, r.lon, plan.base_heading + side * 0.6, 260.0, &ilat, &ilon);
        plan.island_lat = ilat;
        plan.island_lon = ilon;
    }

    SynthStorm storm;
    storm.mode = mode;
    storm.fields = generate_fields(plan, gen, cfg);
    storm.track = std::move(gen.track);
    return storm;
}

}  // namespace

SynthDataset synthesize_dataset(const SynthConfig& config) {
    if (config.n_storms <= 0) throw ConfigError("n_storms must be positive");
    if (config.min_fixes < kHistorySteps + kTargetSteps)
        throw ConfigError("min_fixes must be >= " + std::to_string(kHistorySteps + kTargetSteps));
    if (config.max_fixes < config.min_fixes) throw ConfigError("max_fixes < min_fixes");
    if (config.noise_level < 0.0) throw ConfigError("noise_level must be >= 0");

    SynthDataset ds;
    Rng master(splitmix64(config.seed));
    const std::vector<TrackMode> modes = assign_modes(config, &master);
    for (int i = 0; i < config.n_storms; ++i)
        ds.storms.push_back(synthesize_storm_impl(config, i, modes[static_cast<std::size_t>(i)]));

    IndexTable nino("nino34");
    Rng nino_rng(splitmix64(config.seed ^ 0xabcdef12345ull));
    const double phase1 = nino_rng.uniform(0.0, 2.0 * kPi);
    const double phase2 = nino_rng.uniform(0.0, 2.0 * kPi);
    int t = 0;
    for (int year = config.start_year - 1; year <= config.start_year + config.n_years; ++year)
        for (int month = 1; month <= 12; ++month, ++t) {
            const double v =
                0.9 * std::sin(2.0 * kPi * t / 56.0 + phase1) + 0.4 * std::sin(2.0 * kPi * t / 17.0 + phase2);
            nino.insert(year, month, std::round(v * 100.0) / 100.0);
        }
    ds.nino34 = std::move(nino);
    return ds;
}

FieldLibrary synthetic_stub_fields(const TcTrack& track) {
    if (track.records.empty()) throw ValidationError("synthetic_stub_fields: empty track");
    StormPlan plan;
    plan.mode = TrackMode::straight;
    plan.n_fixes = static_cast<int>(track.records.size());
    plan.sst_offset = 0.0;
    plan.island_height = 0.0;
    plan.z_mode_tilt = 0.0;
    plan.texture_phase1 = 0.7;
    plan.texture_phase2 = 2.1;

    GeneratedStorm gen;
    gen.track = track;
    const int n_moves = plan.n_fixes - 1;
    gen.steer_heading.resize(static_cast<std::size_t>(std::max(1, n_moves)), 270.0);
    gen.steer_speed.resize(static_cast<std::size_t>(std::max(1, n_moves)), 15.0);
    for (int i = 0; i < n_moves; ++i) {
        const auto& a = track.records[static_cast<std::size_t>(i)];
        const auto& b = track.records[static_cast<std::size_t>(i + 1)];
        const double dt = static_cast<double>(b.timestamp.hours_since_epoch() - a.timestamp.hours_since_epoch());
        if (geo::bearing_defined(a.lat, a.lon, b.lat, b.lon))
            gen.steer_heading[static_cast<std::size_t>(i)] = geo::initial_bearing_deg(a.lat, a.lon, b.lat, b.lon);
        else if (i > 0)
            gen.steer_heading[static_cast<std::size_t>(i)] = gen.steer_heading[static_cast<std::size_t>(i - 1)];
        gen.steer_speed[static_cast<std::size_t>(i)] =
            dt > 0 ? geo::haversine_km(a.lat, a.lon, b.lat, b.lon) / dt : 0.0;
    }
    SynthConfig cfg;
    return generate_fields(plan, gen, cfg);
}

TcTrack scripted_turn_track(double lat0, double lon0, double heading_deg, double turn_deg, int pre_legs,
                            int post_legs, double leg_km, const DateTime& start, const std::string& storm_id) {
    if (pre_legs < 1 || post_legs < 1) throw ValidationError("scripted_turn_track needs >= 1 leg each side");
    TcTrack track;
    track.storm_id = storm_id;
    track.name = "SCRIPTED";
    double lat = lat0, lon = lon0;
    int fix = 0;
    auto push = [&](double la, double lo) {
        TcRecord r;
        r.timestamp = start.plus_hours(6 * fix++);
        r.lat = la;
        r.lon = lo;
        r.central_pressure = 1000.0;
        r.max_wind = 20.0;
        r.intensity_category = 2;
        track.records.push_back(r);
    };
    push(lat, lon);
    for (int leg = 0; leg < pre_legs + post_legs; ++leg) {
        const double h = leg < pre_legs ? heading_deg : heading_deg + turn_deg;
        double mlat, mlon, elat, elon;
        geo::destination_point(lat, lon, h, leg_km / 2.0, &mlat, &mlon);
        geo::destination_point(lat, lon, h, leg_km, &elat, &elon);
        push(mlat, mlon);
        push(elat, elon);
        lat = elat;
        lon = elon;
    }
    return track;
}

}  // namespace tcf
