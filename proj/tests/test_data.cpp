#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "tcf/best_track.hpp"
#include "tcf/config.hpp"
#include "tcf/error.hpp"
#include "tcf/geodesy.hpp"
#include "tcf/grid.hpp"
#include "tcf/hash.hpp"
#include "tcf/index_table.hpp"
#include "tcf/sample.hpp"
#include "tcf/store.hpp"
#include "tcf/synth.hpp"
#include "test_util.hpp"

using namespace tcf;
namespace fs = std::filesystem;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("datetime parses and round-trips YYYYMMDDHH") {
    const DateTime t = DateTime::parse_ymdh("2024090618");
    CHECK(t.year() == 2024);
    CHECK(t.month() == 9);
    CHECK(t.day() == 6);
    CHECK(t.hour() == 18);
    CHECK(t.on_six_hour_grid());
    CHECK(t.to_ymdh() == "2024090618");
    CHECK(t.plus_hours(6).to_ymdh() == "2024090700");
    CHECK_FALSE(DateTime::parse_ymdh("2024090603").on_six_hour_grid());
    CHECK_THROWS_AS(DateTime::parse_ymdh("2024139900"), ParseError);
}

TEST_CASE("haversine matches analytic great-circle values") {
    CHECK(geo::haversine_km(12.3, 140.0, 12.3, 140.0) == 0.0);
    // quarter circumference and one meridian degree
    CHECK(std::fabs(geo::haversine_km(0, 0, 0, 90) - kPi * geo::kEarthRadiusKm / 2.0) < 0.01);
    CHECK(std::fabs(geo::haversine_km(0, 0, 1, 0) - kPi * geo::kEarthRadiusKm / 180.0) < 0.01);
}

TEST_CASE("haversine symmetry and triangle inequality on random points") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> lat(-80, 80), lon(0, 360);
    for (int i = 0; i < 2000; ++i) {
        const double a1 = lat(rng), o1 = lon(rng), a2 = lat(rng), o2 = lon(rng), a3 = lat(rng), o3 = lon(rng);
        const double ab = geo::haversine_km(a1, o1, a2, o2);
        const double ba = geo::haversine_km(a2, o2, a1, o1);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
        CHECK(ab >= 0.0);
        const double ac = geo::haversine_km(a1, o1, a3, o3);
        const double cb = geo::haversine_km(a3, o3, a2, o2);
        CHECK(ab <= ac + cb + 1e-9);
    }
}

TEST_CASE("bearing special cases and independent vector oracle") {
    CHECK(geo::initial_bearing_deg(10, 140, 11, 140) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(geo::initial_bearing_deg(0, 140, 0, 141) == doctest::Approx(90.0).epsilon(1e-12));

    // Independent oracle: tangent-plane decomposition with Cartesian vectors.
    auto vector_bearing = [](double lat1, double lon1, double lat2, double lon2) {
        const double p1 = geo::deg2rad(lat1), l1 = geo::deg2rad(lon1);
        const double p2 = geo::deg2rad(lat2), l2 = geo::deg2rad(lon2);
        const double ax = std::cos(p1) * std::cos(l1), ay = std::cos(p1) * std::sin(l1), az = std::sin(p1);
        const double bx = std::cos(p2) * std::cos(l2), by = std::cos(p2) * std::sin(l2), bz = std::sin(p2);
        // north and east unit vectors at A
        const double nx = -std::sin(p1) * std::cos(l1), ny = -std::sin(p1) * std::sin(l1), nz = std::cos(p1);
        const double ex = -std::sin(l1), ey = std::cos(l1), ez = 0.0;
        // component of B orthogonal to A = direction of travel
        const double dot = ax * bx + ay * by + az * bz;
        const double tx = bx - dot * ax, ty = by - dot * ay, tz = bz - dot * az;
        const double north = tx * nx + ty * ny + tz * nz;
        const double east = tx * ex + ty * ey + tz * ez;
        double deg = geo::rad2deg(std::atan2(east, north));
        if (deg < 0) deg += 360.0;
        return deg;
    };
    const double expect = vector_bearing(10, 130, 11, 131);
    CHECK(geo::initial_bearing_deg(10, 130, 11, 131) == doctest::Approx(expect).epsilon(1e-10));
    CHECK(expect == doctest::Approx(44.43).epsilon(0.01));  // magnitude sanity (independent oracle)

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> lat(-70, 70), lon(0, 360);
    for (int i = 0; i < 200; ++i) {
        const double a = lat(rng), o = lon(rng), b = lat(rng), p = lon(rng);
        if (a == b && o == p) continue;
        CHECK(geo::initial_bearing_deg(a, o, b, p) == doctest::Approx(vector_bearing(a, o, b, p)).epsilon(1e-8));
    }
}

TEST_CASE("destination_point inverts bearing/distance") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> lat(-60, 60), lon(0, 360), brg(0, 360), dist(1, 2000);
    for (int i = 0; i < 500; ++i) {
        const double a = lat(rng), o = lon(rng), h = brg(rng), d = dist(rng);
        double b, p;
        geo::destination_point(a, o, h, d, &b, &p);
        CHECK(geo::haversine_km(a, o, b, p) == doctest::Approx(d).epsilon(1e-9));
        CHECK(geo::initial_bearing_deg(a, o, b, p) == doctest::Approx(h).epsilon(1e-6));
    }
}

// ---------------------------------------------------------------- best track

TEST_CASE("best-track round-trip: writer output parses back identically") {
    SynthConfig cfg;
    cfg.n_storms = 2;
    cfg.min_fixes = 12;
    cfg.max_fixes = 12;
    cfg.seed = 5;
    const SynthDataset ds = synthesize_dataset(cfg);
    std::vector<TcTrack> tracks;
    for (const auto& s : ds.storms) tracks.push_back(s.track);
    // truncate to 5 fixes each to match the documented example shape
    for (auto& t : tracks) t.records.resize(5);
    const std::string text = write_best_track(tracks);
    const auto parsed = parse_best_track(text);
    REQUIRE(parsed.size() == tracks.size());
    CHECK(parsed == tracks);
}

TEST_CASE("best-track property: random invariant-satisfying tracks round-trip") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> lat(-850, 850), lon(0, 3599), pres(850, 1050), wind(0, 80);
    std::uniform_int_distribution<int> cat(0, 9), n_fix(1, 20), hour(0, 3);
    std::vector<TcTrack> tracks;
    for (int s = 0; s < 100; ++s) {
        TcTrack t;
        t.storm_id = "R" + std::to_string(1000 + s);
        t.name = "RND" + std::to_string(s);
        DateTime time(2001 + s % 20, 1 + s % 12, 1 + s % 27, 6 * hour(rng));
        const int n = n_fix(rng);
        for (int i = 0; i < n; ++i) {
            TcRecord r;
            r.timestamp = time;
            time = time.plus_hours(6);
            r.lat = std::floor(lat(rng)) / 10.0;
            r.lon = std::floor(lon(rng)) / 10.0;
            r.central_pressure = std::round(pres(rng));
            r.max_wind = std::round(wind(rng));
            r.intensity_category = cat(rng);
            t.records.push_back(r);
        }
        tracks.push_back(std::move(t));
    }
    const auto parsed = parse_best_track(write_best_track(tracks));
    CHECK(parsed == tracks);
}

TEST_CASE("best-track parser edge cases") {
    CHECK(parse_best_track(std::string("")).empty());
    CHECK(parse_best_track(std::string("\n\n")).empty());

    // header declares 5 but block has 4
    TcTrack t = test::straight_track(4);
    std::string text = write_best_track({t});
    const auto pos = text.find(" 4 ");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 3, " 5 ");
    CHECK_THROWS_AS(parse_best_track(text), StructuralError);

    // out-of-range latitude names the field and line
    try {
        parse_best_track(std::string("66666 X 1 NAME\n2015080100 2 950 1400 990 25\n"));
        FAIL("expected validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("lat") != std::string::npos);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }

    // single record example from the contract
    TcTrack one;
    one.storm_id = "2501";
    one.name = "ALPHA";
    TcRecord r;
    r.timestamp = DateTime(2025, 7, 1, 0);
    r.lat = 15.0;
    r.lon = 135.0;
    r.central_pressure = 1002;
    r.max_wind = 18;
    r.intensity_category = 2;
    one.records.push_back(r);
    const auto back = parse_best_track(write_best_track({one}));
    REQUIRE(back.size() == 1);
    CHECK(back[0] == one);

    CHECK(write_best_track(std::vector<TcTrack>{}).empty());

    TcTrack bad = one;
    bad.records[0].lat = 95.0;
    CHECK_THROWS_AS(write_best_track({bad}), ValidationError);

    // data line outside any block
    CHECK_THROWS_AS(parse_best_track(std::string("2015080100 2 150 1400 990 25\n")), StructuralError);
    // malformed header
    CHECK_THROWS_AS(parse_best_track(std::string("66666 X\n")), ParseError);
}

TEST_CASE("regularize keeps the longest contiguous 6-hourly run") {
    TcTrack t = test::straight_track(10);
    // poke a 3-hourly fix into the middle and delete one fix to split runs
    TcRecord off = t.records[4];
    off.timestamp = off.timestamp.plus_hours(3);
    TcTrack messy;
    messy.storm_id = t.storm_id;
    messy.name = t.name;
    for (int i = 0; i < 4; ++i) messy.records.push_back(t.records[static_cast<std::size_t>(i)]);
    messy.records.push_back(off);  // off-grid
    for (int i = 5; i < 10; ++i) messy.records.push_back(t.records[static_cast<std::size_t>(i)]);
    const TcTrack reg = regularize_six_hourly(messy);
    // dropping the off-grid fix leaves runs of length 5 (idx 0..4 minus #4 -> 4) and 5 (idx 5..9)
    CHECK(reg.records.size() == 5);
    for (std::size_t i = 1; i < reg.records.size(); ++i)
        CHECK(reg.records[i].timestamp.hours_since_epoch() - reg.records[i - 1].timestamp.hours_since_epoch() == 6);
}

// --------------------------------------------------------------------- grid

namespace {

GridField constant_field(double value, double lat_lo = -10, double lat_hi = 50, double lon_lo = 90,
                         double lon_hi = 200, double res = 1.0) {
    GridField f;
    f.variable = GridVariable::sst;
    for (double la = lat_lo; la <= lat_hi; la += res) f.lat_axis.push_back(la);
    for (double lo = lon_lo; lo <= lon_hi; lo += res) f.lon_axis.push_back(lo);
    f.values.assign(f.n_lat() * f.n_lon(), value);
    return f;
}

}  // namespace

TEST_CASE("extract_window of a constant field is constant") {
    const GridField f = constant_field(7.0);
    for (double center_lat : {0.0, 20.0, 48.0})
        for (double center_lon : {100.0, 145.0, 199.0}) {
            const Window w = extract_window(f, center_lat, center_lon, 12.5, 25);
            CHECK(w.n() == 25);
            for (double v : w.values) CHECK(v == doctest::Approx(7.0).epsilon(1e-15));
        }
}

TEST_CASE("extract_window of a lat-linear field reproduces row latitudes") {
    GridField f = constant_field(0.0);
    for (std::size_t i = 0; i < f.n_lat(); ++i)
        for (std::size_t j = 0; j < f.n_lon(); ++j) f.at(i, j) = f.lat_axis[i];
    const Window w = extract_window(f, 20.0, 140.0, 12.5, 25);
    for (std::size_t i = 0; i < w.n(); ++i) {
        double row_mean = 0.0;
        for (std::size_t j = 0; j < w.n(); ++j) row_mean += w.at(i, j);
        row_mean /= w.n();
        CHECK(std::fabs(row_mean - w.lat_axis[i]) < 1e-9);
    }
}

TEST_CASE("longitude wrap: window across the 0/360 seam matches a rotated-field oracle") {
    // global field on [0, 359] with smooth values
    GridField f;
    f.variable = GridVariable::u_wind;
    for (double la = -30; la <= 60; la += 1.0) f.lat_axis.push_back(la);
    for (double lo = 0; lo < 360; lo += 1.0) f.lon_axis.push_back(lo);
    f.values.resize(f.n_lat() * f.n_lon());
    auto fn = [](double lat, double lon) {
        return std::cos(geo::deg2rad(lon)) * 3.0 + std::sin(geo::deg2rad(lat)) + 0.25 * std::cos(2 * geo::deg2rad(lon));
    };
    for (std::size_t i = 0; i < f.n_lat(); ++i)
        for (std::size_t j = 0; j < f.n_lon(); ++j) f.at(i, j) = fn(f.lat_axis[i], f.lon_axis[j]);

    // independent oracle: rotate the field 180 degrees so the seam moves away,
    // then sample the same physical window
    GridField rotated = f;
    for (std::size_t j = 0; j < rotated.n_lon(); ++j) rotated.lon_axis[j] = geo::wrap_lon(f.lon_axis[j] + 180.0);
    for (std::size_t i = 0; i < rotated.n_lat(); ++i)
        for (std::size_t j = 0; j < rotated.n_lon(); ++j)
            rotated.at(i, j) = fn(rotated.lat_axis[i], geo::wrap_lon(rotated.lon_axis[j]));
    canonicalize_field(&rotated);
    // rotated holds identical physical content: value at physical lon q equals fn(lat, q)

    const Window w = extract_window(f, 20.0, 0.5, 12.5, 25);
    CHECK(geo::wrap_lon(w.lon_axis.front()) == doctest::Approx(348.0));
    CHECK(geo::wrap_lon(w.lon_axis.back()) == doctest::Approx(13.0));
    for (std::size_t i = 0; i < w.n(); ++i)
        for (std::size_t j = 0; j < w.n(); ++j) {
            const double expect = sample_bilinear(rotated, w.lat_axis[i], w.lon_axis[j]);
            CHECK(w.at(i, j) == doctest::Approx(expect).epsilon(1e-10));
        }
}

TEST_CASE("window shape depends only on target resolution, and edges pad by replication") {
    const GridField f = constant_field(1.5, 0, 30, 100, 160);
    const Window w1 = extract_window(f, 5.0, 110.0, 12.5, 25);   // overflows south & west
    const Window w2 = extract_window(f, 25.0, 150.0, 12.5, 25);  // overflows north & east
    CHECK(w1.n() == w2.n());
    CHECK(w1.values.size() == w2.values.size());
    for (double v : w1.values) CHECK(v == 1.5);
    // centered far outside latitude span -> coverage error
    CHECK_THROWS_AS(extract_window(f, 80.0, 130.0, 12.5, 25), CoverageError);
}

TEST_CASE("imputation fills NaN with nearest valid values") {
    GridField f = constant_field(2.0, 0, 10, 100, 110);
    f.at(3, 4) = std::nan("");
    f.at(3, 5) = std::nan("");
    impute_missing_nearest(&f);
    for (double v : f.values) CHECK(std::isfinite(v));
    CHECK(f.at(3, 4) == 2.0);
}

TEST_CASE("gridpack round-trips in both storage orders") {
    GridField f = constant_field(0.0, 5, 15, 120, 135, 1.0);
    for (std::size_t i = 0; i < f.n_lat(); ++i)
        for (std::size_t j = 0; j < f.n_lon(); ++j) f.at(i, j) = 100.0 * static_cast<double>(i) + static_cast<double>(j);
    f.variable = GridVariable::geopotential;
    f.level = 500.0;
    f.valid_time = DateTime(2019, 9, 1, 6);

    const std::string dir = (fs::temp_directory_path() / "tcf_gridpack_test").string();
    fs::create_directories(dir);
    for (bool lon_major : {false, true}) {
        GridPackWriteOptions opts;
        opts.float32_payload = false;
        opts.lon_major = lon_major;
        const std::string path = dir + "/pack" + (lon_major ? "_lonmajor" : "_latmajor") + ".gridpack";
        write_gridpack({f}, path, opts);
        const auto fields = read_gridpack(path);
        REQUIRE(fields.size() == 1);
        CHECK(fields[0].variable == GridVariable::geopotential);
        CHECK(fields[0].level == 500.0);
        REQUIRE(fields[0].valid_time.has_value());
        CHECK(*fields[0].valid_time == *f.valid_time);
        REQUIRE(fields[0].values.size() == f.values.size());
        for (std::size_t k = 0; k < f.values.size(); ++k) CHECK(fields[0].values[k] == f.values[k]);
    }
}

TEST_CASE("canonicalize flips descending latitude and rotates longitudes") {
    GridField f;
    f.lat_axis = {30, 20, 10};
    f.lon_axis = {350, 0, 10};
    f.values = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    canonicalize_field(&f);
    CHECK(f.lat_axis == std::vector<double>({10, 20, 30}));
    CHECK(f.lon_axis == std::vector<double>({0, 10, 350}));
    // original (lat=30, lon=350) value 1 must now sit at (row 2, col 2)
    CHECK(f.at(2, 2) == 1.0);
    CHECK(f.at(0, 0) == 8.0);  // (lat=10, lon=0)
}

// -------------------------------------------------------------- index table

TEST_CASE("index table: exact lookups only") {
    IndexTable t("nino34");
    t.insert(2024, 9, 0.2);
    CHECK(t.lookup(2024, 9) == 0.2);
    CHECK_THROWS_AS(t.lookup(2024, 10), LookupError);

    std::istringstream in("# header\n2000-01 0.5\n2000-02 -0.25\n2000-03 1.125\n");
    const IndexTable parsed = IndexTable::parse(in, "nino34");
    CHECK(parsed.size() == 3);
    CHECK(parsed.lookup(2000, 1) == 0.5);
    CHECK(parsed.lookup(2000, 2) == -0.25);
    CHECK(parsed.lookup(2000, 3) == 1.125);

    std::istringstream gap("2000-01 0.5\n2000-03 1.0\n");
    CHECK_THROWS_AS(IndexTable::parse(gap, "nino34"), ValidationError);
}

// -------------------------------------------------------------------- synth

TEST_CASE("synthesize_dataset is deterministic under a fixed config") {
    SynthConfig cfg;
    cfg.n_storms = 6;
    cfg.seed = 42;
    const SynthDataset a = synthesize_dataset(cfg);
    const SynthDataset b = synthesize_dataset(cfg);
    REQUIRE(a.storms.size() == b.storms.size());
    for (std::size_t i = 0; i < a.storms.size(); ++i) {
        CHECK(a.storms[i].track == b.storms[i].track);
        CHECK(a.storms[i].mode == b.storms[i].mode);
        REQUIRE(a.storms[i].fields.size() == b.storms[i].fields.size());
        const auto& fa = a.storms[i].fields.fields().front();
        const auto& fb = b.storms[i].fields.fields().front();
        CHECK(fa.values == fb.values);
    }
}

TEST_CASE("synth config validation") {
    SynthConfig cfg;
    cfg.n_storms = 0;
    CHECK_THROWS_AS(synthesize_dataset(cfg), ConfigError);
    cfg.n_storms = 1;
    cfg.min_fixes = 6;
    CHECK_THROWS_AS(synthesize_dataset(cfg), ConfigError);
}

TEST_CASE("straight mode with zero noise yields near-constant heading") {
    SynthConfig cfg;
    cfg.n_storms = 4;
    cfg.mode_mix = {1, 0, 0};
    cfg.noise_level = 0.0;
    cfg.seed = 9;
    const SynthDataset ds = synthesize_dataset(cfg);
    for (const auto& storm : ds.storms) {
        CHECK(storm.mode == TrackMode::straight);
        const auto& recs = storm.track.records;
        std::vector<double> bearings;
        for (std::size_t i = 1; i < recs.size(); ++i)
            bearings.push_back(geo::initial_bearing_deg(recs[i - 1].lat, recs[i - 1].lon, recs[i].lat, recs[i].lon));
        // 0.1 deg position quantization wobbles measured bearings slightly
        for (std::size_t i = 1; i < bearings.size(); ++i)
            CHECK(std::fabs(geo::wrap_angle(bearings[i] - bearings[0])) < 6.0);
    }
}

TEST_CASE("sharp-left mode with zero noise turns hard left at the scripted point") {
    SynthConfig cfg;
    cfg.n_storms = 6;
    cfg.mode_mix = {0, 0, 1};
    cfg.noise_level = 0.0;
    cfg.seed = 17;
    const SynthDataset ds = synthesize_dataset(cfg);
    for (const auto& storm : ds.storms) {
        CHECK(storm.mode == TrackMode::sharp_left);
        const auto& recs = storm.track.records;
        // 12 h turning angles from the generator's own waypoints
        double sharpest = 0.0;
        for (std::size_t i = 2; i + 2 < recs.size(); ++i) {
            const double in_b =
                geo::initial_bearing_deg(recs[i - 2].lat, recs[i - 2].lon, recs[i].lat, recs[i].lon);
            const double out_b =
                geo::initial_bearing_deg(recs[i].lat, recs[i].lon, recs[i + 2].lat, recs[i + 2].lon);
            sharpest = std::min(sharpest, geo::turn_angle_deg(in_b, out_b));
        }
        CHECK(sharpest < -30.0);
    }
}

TEST_CASE("mode apportionment follows the mix weights") {
    SynthConfig cfg;
    cfg.n_storms = 30;
    cfg.mode_mix = {2, 1, 0};
    cfg.seed = 4;
    const SynthDataset ds = synthesize_dataset(cfg);
    std::array<int, 3> counts{};
    for (const auto& s : ds.storms) counts[static_cast<std::size_t>(s.mode)]++;
    CHECK(counts[0] == 20);
    CHECK(counts[1] == 10);
    CHECK(counts[2] == 0);
}

// ------------------------------------------------------------ sample builder

TEST_CASE("build_samples yields one sample per valid anchor") {
    const IndexTable nino = test::tiny_nino(2014, 2016);
    for (const auto& [n_fixes, expected] : std::vector<std::pair<int, long>>{{12, 1}, {15, 4}, {11, 0}, {20, 9}}) {
        const TcTrack track = test::straight_track(n_fixes);
        const FieldLibrary fields = test::tiny_fields(track);
        const auto samples = build_samples(track, fields, nino, test::tiny_build_config());
        // brute-force enumeration of anchors with 8 history and 4 target fixes
        long brute = 0;
        for (int a = 0; a < n_fixes; ++a)
            if (a + 1 >= kHistorySteps && n_fixes - 1 - a >= kTargetSteps) ++brute;
        CHECK(brute == expected);
        CHECK(static_cast<long>(samples.size()) == expected);
    }
}

TEST_CASE("samples carry leak-free environments") {
    const TcTrack track = test::straight_track(14);
    const FieldLibrary fields = test::tiny_fields(track);
    const IndexTable nino = test::tiny_nino(2014, 2016);
    const auto base = build_samples(track, fields, nino, test::tiny_build_config());
    REQUIRE(!base.empty());

    // mutate all target-window fixes and zero every field after each anchor:
    // environments must not move
    for (std::size_t idx = 0; idx < base.size(); ++idx) {
        const TcSample& s = base[idx];
        TcTrack mutated = track;
        FieldLibrary mutated_fields;
        for (const auto& f : fields.fields()) {
            GridField g = f;
            if (g.valid_time && g.valid_time->hours_since_epoch() > s.anchor_time.hours_since_epoch())
                std::fill(g.values.begin(), g.values.end(), 0.0);
            mutated_fields.add(std::move(g));
        }
        for (auto& rec : mutated.records)
            if (rec.timestamp > s.anchor_time) {
                rec.lat += 1.0;
                rec.central_pressure += 5.0;
            }
        const auto rebuilt = build_samples(mutated, mutated_fields, nino, test::tiny_build_config());
        const TcSample& r = rebuilt[idx];
        CHECK(r.env.atm == s.env.atm);
        CHECK(r.env.terrain == s.env.terrain);
        CHECK(r.env.cont_vector() == s.env.cont_vector());
        CHECK(r.env.month == s.env.month);
    }
}

TEST_CASE("translation speed matches the haversine oracle") {
    CHECK(translation_speed(20, 130, 20, 130, 6) == 0.0);
    const double half_deg = kPi * geo::kEarthRadiusKm / 360.0;  // 0.5 deg meridian arc
    CHECK(translation_speed(20, 130, 20.5, 130, 6) == doctest::Approx(half_deg / 6.0).epsilon(1e-9));
    CHECK(translation_speed(20, 130, 20.5, 130, 6) == doctest::Approx(9.27).epsilon(1e-3));
    const double quarter = kPi * geo::kEarthRadiusKm / 2.0;
    CHECK(translation_speed(0, 0, 0, 90, 6) == doctest::Approx(quarter / 6.0).epsilon(1e-12));
    CHECK_THROWS_AS(translation_speed(0, 0, 1, 1, 0), ValidationError);
}

TEST_CASE("heading features and the stationary-fix rule") {
    const HeadingResult north = heading(10, 140, 11, 140);
    CHECK(north.defined);
    CHECK(north.degrees == doctest::Approx(0.0));
    CHECK(north.sin_val == doctest::Approx(0.0));
    CHECK(north.cos_val == doctest::Approx(1.0));
    const HeadingResult east = heading(0, 140, 0, 141);
    CHECK(east.degrees == doctest::Approx(90.0));
    CHECK_FALSE(heading(5, 5, 5, 5).defined);

    // east motion bearing is invariant under rotation about the axis
    for (double shift : {10.0, 77.0, 200.0})
        CHECK(heading(0, geo::wrap_lon(140 + shift), 0, geo::wrap_lon(141 + shift)).degrees == doctest::Approx(90.0));
}

TEST_CASE("normalization round-trips and flags double application") {
    const TcTrack track = test::straight_track(16);
    const FieldLibrary fields = test::tiny_fields(track);
    const IndexTable nino = test::tiny_nino(2014, 2016);
    auto samples = build_samples(track, fields, nino, test::tiny_build_config());
    REQUIRE(samples.size() >= 2);
    const auto raw = samples;
    const NormalizationStats stats = fit_normalization(samples);
    CHECK(stats.fitted);
    CHECK(stats.dlat_std > 0);

    apply_normalization(&samples[0], stats);
    CHECK(samples[0].normalized);
    CHECK_THROWS_AS(apply_normalization(&samples[0], stats), StateError);

    const auto inverted = invert_normalization(samples[0].target, samples[0].anchor_fix, stats);
    for (int j = 0; j < kTargetSteps; ++j)
        for (int f = 0; f < 4; ++f)
            CHECK(std::fabs(inverted[static_cast<std::size_t>(j)][static_cast<std::size_t>(f)] -
                            raw[0].target[static_cast<std::size_t>(j)][static_cast<std::size_t>(f)]) < 1e-9);
}

TEST_CASE("degenerate channels fall back to unit std") {
    const TcTrack track = test::straight_track(12);
    const FieldLibrary fields = test::tiny_fields(track);
    const IndexTable nino = test::tiny_nino(2014, 2016, 0.42);
    auto samples = build_samples(track, fields, nino, test::tiny_build_config());
    const NormalizationStats stats = fit_normalization(samples);
    // single sample, constant nino channel: std falls back to 1, mean removes it
    CHECK(stats.cont_std[5] == 1.0);
    apply_normalization(&samples[0], stats);
    CHECK(samples[0].env.nino34 == doctest::Approx(0.0));
}

TEST_CASE("normalization stats Monte-Carlo oracle on a N(5,2) channel") {
    const TcTrack track = test::straight_track(12);
    const FieldLibrary fields = test::tiny_fields(track);
    const IndexTable nino = test::tiny_nino(2014, 2016);
    const auto proto = build_samples(track, fields, nino, test::tiny_build_config(3));
    REQUIRE(proto.size() == 1);
    std::vector<TcSample> population(10000, proto[0]);
    std::mt19937_64 rng(123);
    std::normal_distribution<double> dist(5.0, 2.0);
    for (auto& s : population) s.env.nino34 = dist(rng);
    const NormalizationStats stats = fit_normalization(population);
    CHECK(std::fabs(stats.cont_mean[5] - 5.0) < 0.1);
    CHECK(std::fabs(stats.cont_std[5] - 2.0) < 0.1);
}

// -------------------------------------------------------------------- store

TEST_CASE("sample store round-trips storms, splits and metadata") {
    const std::string dir = (fs::temp_directory_path() / "tcf_store_test").string();
    fs::remove_all(dir);
    const TcTrack track = test::straight_track(14);
    const FieldLibrary fields = test::tiny_fields(track);
    const IndexTable nino = test::tiny_nino(2014, 2016);
    const auto samples = build_samples(track, fields, nino, test::tiny_build_config());

    SampleStore store = SampleStore::create(dir, 7, 6.0);
    store.add_storm("TEST", 1, samples);
    store.write_split("train", {track.storm_id});
    store.set_source_checksum("unit", "deadbeef");
    store.finalize();

    const SampleStore opened = SampleStore::open(dir);
    CHECK(opened.grid() == 7);
    REQUIRE(opened.storms().size() == 1);
    CHECK(opened.storms()[0].mode_label == 1);
    CHECK(opened.storms()[0].n_samples == static_cast<long>(samples.size()));
    const auto loaded = opened.load_storm(track.storm_id);
    REQUIRE(loaded.size() == samples.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].anchor_time == samples[i].anchor_time);
        CHECK(loaded[i].history == samples[i].history);
        CHECK(loaded[i].target == samples[i].target);
        CHECK(loaded[i].env.atm == samples[i].env.atm);
        CHECK(loaded[i].env.cont_vector() == samples[i].env.cont_vector());
    }
    const auto split = opened.load_split("train");
    CHECK(split.size() == samples.size());
    CHECK_THROWS_AS(opened.load_split("nope"), ConfigError);
}

// ------------------------------------------------------------------- config

TEST_CASE("config parsing, overrides, and schema validation") {
    const Config cfg = Config::parse_string("[training]\nbatch_size = 16 # comment\nseed = 7\n[loss]\nw_adv = 0.25\n");
    CHECK(cfg.get_int("training.batch_size", 0) == 16);
    CHECK(cfg.get_u64("training.seed", 0) == 7);
    CHECK(cfg.get_double("loss.w_adv", 0) == 0.25);
    CHECK(cfg.get_string("missing.key", "fallback") == "fallback");

    Config over = cfg;
    over.apply_overrides({"training.batch_size=32", "moe.k = 3"});
    CHECK(over.get_int("training.batch_size", 0) == 32);
    CHECK(over.get_int("moe.k", 0) == 3);

    CHECK_THROWS_AS(Config::parse_string("[x]\nno_equals_here\n"), ParseError);
    CHECK_THROWS_AS(cfg.require_known_keys({"training.batch_size"}), ConfigError);

    const Config dumped = Config::parse_string(over.dump());
    CHECK(dumped.entries() == over.entries());

    CHECK_THROWS_AS(cfg.get_int("loss.w_adv", 0), ConfigError);  // not an integer
}

TEST_CASE("hashing is stable") {
    CHECK(hex64(fnv1a64(std::string("abc"))) == hex64(fnv1a64(std::string("abc"))));
    CHECK(hex64(fnv1a64(std::string("abc"))) != hex64(fnv1a64(std::string("abd"))));
}
