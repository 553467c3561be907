#include "tcf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "tcf/error.hpp"
#include "tcf/geodesy.hpp"
#include "tcf/plot.hpp"

namespace tcf {

namespace fs = std::filesystem;

const char* score_rule_name(ScoreRule r) {
    switch (r) {
        case ScoreRule::top1: return "top1";
        case ScoreRule::weighted_mean: return "weighted-mean";
        case ScoreRule::best_of_k: return "best-of-k";
    }
    return "?";
}

namespace {

std::array<std::array<double, 4>, kTargetSteps> member_for_rule(const ForecastEnsemble& e, ScoreRule rule) {
    switch (rule) {
        case ScoreRule::top1:
            return e.member_tracks.at(static_cast<std::size_t>(e.selected));
        case ScoreRule::weighted_mean: {
            std::array<std::array<double, 4>, kTargetSteps> avg{};
            const double lon0 = e.member_tracks[0][0][1];
            for (std::size_t g = 0; g < e.member_tracks.size(); ++g) {
                const double w = e.pi.at(g);
                for (int s = 0; s < kTargetSteps; ++s) {
                    const auto& row = e.member_tracks[g][static_cast<std::size_t>(s)];
                    auto& acc = avg[static_cast<std::size_t>(s)];
                    acc[0] += w * row[0];
                    acc[1] += w * (lon0 + geo::wrap_angle(row[1] - lon0));  // circular-safe mean
                    acc[2] += w * row[2];
                    acc[3] += w * row[3];
                }
            }
            for (auto& row : avg) row[1] = geo::wrap_lon(row[1]);
            return avg;
        }
        case ScoreRule::best_of_k: {
            std::size_t best = 0;
            double best_err = std::numeric_limits<double>::infinity();
            for (std::size_t g = 0; g < e.member_tracks.size(); ++g) {
                const auto& last = e.member_tracks[g][kTargetSteps - 1];
                const auto& truth = e.truth[kTargetSteps - 1];
                const double err = geo::haversine_km(last[0], last[1], truth[0], truth[1]);
                if (err < best_err) {
                    best_err = err;
                    best = g;
                }
            }
            return e.member_tracks[best];
        }
    }
    throw ValidationError("unknown scoring rule");
}

MetricsReport score_tracks(const std::vector<ForecastEnsemble>& ensembles,
                           const std::function<std::array<std::array<double, 4>, kTargetSteps>(const ForecastEnsemble&)>&
                               member_of,
                           ScoreRule rule) {
    MetricsReport rep;
    rep.rule = rule;
    if (ensembles.empty()) return rep;
    for (const auto& e : ensembles) {
        const auto member = member_of(e);
        for (int s = 0; s < kTargetSteps; ++s) {
            const auto& f = member[static_cast<std::size_t>(s)];
            const auto& y = e.truth[static_cast<std::size_t>(s)];
            rep.track_km[static_cast<std::size_t>(s)] += geo::haversine_km(f[0], f[1], y[0], y[1]);
            rep.pres_mae[static_cast<std::size_t>(s)] += std::fabs(f[2] - y[2]);
            rep.wind_mae[static_cast<std::size_t>(s)] += std::fabs(f[3] - y[3]);
        }
        ++rep.count;
    }
    for (int s = 0; s < kTargetSteps; ++s) {
        rep.track_km[static_cast<std::size_t>(s)] /= rep.count;
        rep.pres_mae[static_cast<std::size_t>(s)] /= rep.count;
        rep.wind_mae[static_cast<std::size_t>(s)] /= rep.count;
    }
    return rep;
}

}  // namespace

MetricsReport score(const std::vector<ForecastEnsemble>& ensembles, ScoreRule rule) {
    for (const auto& e : ensembles)
        if (e.member_tracks.empty() || e.pi.size() != e.member_tracks.size())
            throw ValidationError("score: malformed ensemble");
    return score_tracks(
        ensembles, [rule](const ForecastEnsemble& e) { return member_for_rule(e, rule); }, rule);
}

MetricsReport score_persistence(const std::vector<ForecastEnsemble>& ensembles) {
    MetricsReport rep = score_tracks(
        ensembles,
        [](const ForecastEnsemble& e) {
            std::array<std::array<double, 4>, kTargetSteps> persist{};
            for (auto& row : persist) row = e.anchor_fix;
            return persist;
        },
        ScoreRule::top1);
    rep.stratum = "persistence";
    return rep;
}

std::vector<DeflectionLabel> detect_deflection(const TcTrack& track, const DeflectionConfig& cfg) {
    std::vector<DeflectionLabel> labels;
    const auto& recs = track.records;
    const long n = static_cast<long>(recs.size());
    const long span = cfg.metric == TurnMetric::twelve_hour_bearings ? 2 : 1;
    for (long i = span; i + span < n; ++i) {
        const auto& a = recs[static_cast<std::size_t>(i - span)];
        const auto& b = recs[static_cast<std::size_t>(i)];
        const auto& c = recs[static_cast<std::size_t>(i + span)];
        if (!geo::bearing_defined(a.lat, a.lon, b.lat, b.lon) || !geo::bearing_defined(b.lat, b.lon, c.lat, c.lon))
            continue;
        const double in_bearing = geo::initial_bearing_deg(a.lat, a.lon, b.lat, b.lon);
        const double out_bearing = geo::initial_bearing_deg(b.lat, b.lon, c.lat, c.lon);
        const double angle = geo::turn_angle_deg(in_bearing, out_bearing);
        if (angle > cfg.right_threshold_deg + cfg.angle_eps)
            labels.push_back({b.timestamp, TurnDirection::right, angle});
        else if (angle < -(cfg.left_threshold_deg + cfg.angle_eps))
            labels.push_back({b.timestamp, TurnDirection::left, angle});
    }
    return labels;
}

std::pair<MetricsReport, MetricsReport> stratified_report(
    const std::vector<ForecastEnsemble>& ensembles,
    const std::map<std::string, std::vector<DeflectionLabel>>& labels_by_storm, ScoreRule rule) {
    std::vector<ForecastEnsemble> abnormal, normal;
    for (const auto& e : ensembles) {
        bool is_abnormal = false;
        const auto it = labels_by_storm.find(e.storm_id);
        if (it != labels_by_storm.end()) {
            for (const auto& label : it->second) {
                const auto dh = label.anchor.hours_since_epoch() - e.anchor_time.hours_since_epoch();
                if (dh > 0 && dh <= kHorizonsH.back()) {
                    is_abnormal = true;
                    break;
                }
            }
        }
        (is_abnormal ? abnormal : normal).push_back(e);
    }
    MetricsReport rep_ab = abnormal.empty() ? MetricsReport{} : score(abnormal, rule);
    MetricsReport rep_no = normal.empty() ? MetricsReport{} : score(normal, rule);
    rep_ab.rule = rep_no.rule = rule;
    rep_ab.stratum = "abnormal";
    rep_no.stratum = "normal";
    rep_ab.count = static_cast<long>(abnormal.size());
    rep_no.count = static_cast<long>(normal.size());
    return {rep_ab, rep_no};
}

std::vector<ReferenceRow> load_reference_rows(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open reference file '" + path + "'");
    std::vector<ReferenceRow> rows;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream iss(line);
        ReferenceRow row;
        std::string tok;
        std::vector<std::string> toks;
        while (std::getline(iss, tok, ',')) toks.push_back(tok);
        if (toks.size() != 2 + kTargetSteps) throw ParseError("reference row needs source,metric,4 values", line_no);
        row.source = toks[0];
        row.metric = toks[1];
        for (int s = 0; s < kTargetSteps; ++s) {
            const std::string& v = toks[static_cast<std::size_t>(2 + s)];
            row.values[static_cast<std::size_t>(s)] = v.empty() || v == "-" ? -1.0 : std::stod(v);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void emit_tables(const std::vector<MetricsReport>& reports, const std::vector<ReferenceRow>& references,
                 const std::string& out_dir) {
    fs::create_directories(out_dir);
    {
        std::ofstream csv(fs::path(out_dir) / "metrics.csv");
        if (!csv) throw IoError("cannot write metrics.csv");
        csv << "stratum,rule,horizon_h,track_km,pres_mae,wind_mae,count\n";
        char buf[256];
        for (const auto& r : reports)
            for (int s = 0; s < kTargetSteps; ++s) {
                std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.17g,%.17g,%.17g,%ld\n", r.stratum.c_str(),
                              score_rule_name(r.rule), kHorizonsH[static_cast<std::size_t>(s)],
                              r.track_km[static_cast<std::size_t>(s)], r.pres_mae[static_cast<std::size_t>(s)],
                              r.wind_mae[static_cast<std::size_t>(s)], r.count);
                csv << buf;
            }
    }
    {
        std::ofstream txt(fs::path(out_dir) / "metrics.txt");
        if (!txt) throw IoError("cannot write metrics.txt");
        char buf[256];
        txt << "forecast verification (per horizon: 6h / 12h / 18h / 24h)\n\n";
        txt << "stratum      rule           n      track error (km)              pressure MAE (hPa)        wind MAE (m/s)\n";
        for (const auto& r : reports) {
            std::snprintf(buf, sizeof(buf),
                          "%-12s %-13s %5ld  %7.2f %7.2f %7.2f %7.2f  %6.2f %6.2f %6.2f %6.2f  %5.2f %5.2f %5.2f %5.2f\n",
                          r.stratum.c_str(), score_rule_name(r.rule), r.count, r.track_km[0], r.track_km[1],
                          r.track_km[2], r.track_km[3], r.pres_mae[0], r.pres_mae[1], r.pres_mae[2], r.pres_mae[3],
                          r.wind_mae[0], r.wind_mae[1], r.wind_mae[2], r.wind_mae[3]);
            txt << buf;
        }
        if (!references.empty()) {
            txt << "\nreference values (published operational verification; '-' = not published)\n";
            for (const auto& ref : references) {
                txt << "  " << ref.source << " [" << ref.metric << "]: ";
                for (int s = 0; s < kTargetSteps; ++s) {
                    if (ref.values[static_cast<std::size_t>(s)] < 0)
                        txt << "-";
                    else
                        txt << ref.values[static_cast<std::size_t>(s)];
                    txt << (s + 1 < kTargetSteps ? " / " : "\n");
                }
            }
        }
    }
}

std::vector<MetricsReport> parse_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty metrics.csv");
    std::map<std::pair<std::string, std::string>, MetricsReport> acc;
    std::vector<std::pair<std::string, std::string>> order;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream iss(line);
        std::string tok;
        std::vector<std::string> toks;
        while (std::getline(iss, tok, ',')) toks.push_back(tok);
        if (toks.size() != 7) throw ParseError("metrics.csv row needs 7 fields", line_no);
        const std::pair<std::string, std::string> key{toks[0], toks[1]};
        if (!acc.count(key)) order.push_back(key);
        MetricsReport& r = acc[key];
        r.stratum = toks[0];
        for (int rr = 0; rr < 3; ++rr)
            if (toks[1] == score_rule_name(static_cast<ScoreRule>(rr))) r.rule = static_cast<ScoreRule>(rr);
        const int horizon = std::stoi(toks[2]);
        int s = -1;
        for (int i = 0; i < kTargetSteps; ++i)
            if (kHorizonsH[static_cast<std::size_t>(i)] == horizon) s = i;
        if (s < 0) throw ParseError("unknown horizon in metrics.csv", line_no);
        r.track_km[static_cast<std::size_t>(s)] = std::stod(toks[3]);
        r.pres_mae[static_cast<std::size_t>(s)] = std::stod(toks[4]);
        r.wind_mae[static_cast<std::size_t>(s)] = std::stod(toks[5]);
        r.count = std::stol(toks[6]);
    }
    std::vector<MetricsReport> out;
    for (const auto& key : order) out.push_back(acc[key]);
    return out;
}

void plot_ensemble(const ForecastEnsemble& e, const std::vector<std::array<double, 2>>& history_points,
                   const std::string& png_path) {
    // Collect all points to frame the map.
    std::vector<std::array<double, 2>> pts = history_points;
    for (const auto& row : e.truth) pts.push_back({row[0], row[1]});
    for (const auto& m : e.member_tracks)
        for (const auto& row : m) pts.push_back({row[0], row[1]});
    if (pts.empty()) throw ValidationError("plot_ensemble: nothing to draw");
    double lat_lo = pts[0][0], lat_hi = pts[0][0];
    const double lon_ref = pts[0][1];
    double dlon_lo = 0, dlon_hi = 0;
    for (const auto& p : pts) {
        lat_lo = std::min(lat_lo, p[0]);
        lat_hi = std::max(lat_hi, p[0]);
        const double d = geo::wrap_angle(p[1] - lon_ref);
        dlon_lo = std::min(dlon_lo, d);
        dlon_hi = std::max(dlon_hi, d);
    }
    const double margin = 1.0;
    lat_lo -= margin;
    lat_hi += margin;
    dlon_lo -= margin;
    dlon_hi += margin;

    const int W = 640, H = 480;
    Canvas canvas(W, H);
    auto px = [&](double lat, double lon) {
        const double dx = (geo::wrap_angle(lon - lon_ref) - dlon_lo) / (dlon_hi - dlon_lo);
        const double dy = (lat - lat_lo) / (lat_hi - lat_lo);
        return std::array<double, 2>{dx * (W - 1), (1.0 - dy) * (H - 1)};
    };

    // Light graticule every 2 degrees.
    const std::array<std::uint8_t, 3> grey = {225, 225, 225};
    for (double la = std::ceil(lat_lo / 2) * 2; la <= lat_hi; la += 2) {
        const auto a = px(la, lon_ref + dlon_lo), b = px(la, lon_ref + dlon_hi);
        canvas.draw_line(a[0], a[1], b[0], b[1], grey);
    }
    for (double dl = std::ceil(dlon_lo / 2) * 2; dl <= dlon_hi; dl += 2) {
        const auto a = px(lat_lo, lon_ref + dl), b = px(lat_hi, lon_ref + dl);
        canvas.draw_line(a[0], a[1], b[0], b[1], grey);
    }

    const std::array<std::uint8_t, 3> red = {200, 40, 40};
    const std::array<std::uint8_t, 3> blue = {40, 70, 200};
    const std::array<std::uint8_t, 3> green = {30, 150, 60};
    const std::array<std::uint8_t, 3> shade = {170, 220, 180};

    auto polyline = [&](const std::vector<std::array<double, 2>>& line, std::array<std::uint8_t, 3> color,
                        int thickness) {
        for (std::size_t i = 1; i < line.size(); ++i) {
            const auto a = px(line[i - 1][0], line[i - 1][1]);
            const auto b = px(line[i][0], line[i][1]);
            canvas.draw_line(a[0], a[1], b[0], b[1], color, thickness);
        }
        for (const auto& p : line) {
            const auto q = px(p[0], p[1]);
            canvas.draw_disc(q[0], q[1], thickness + 1.0, color);
        }
    };

    // Ensemble shading first (non-selected members), then truth, then top-1.
    for (std::size_t g = 0; g < e.member_tracks.size(); ++g) {
        if (static_cast<int>(g) == e.selected) continue;
        std::vector<std::array<double, 2>> line = {{e.anchor_fix[0], e.anchor_fix[1]}};
        for (const auto& row : e.member_tracks[g]) line.push_back({row[0], row[1]});
        polyline(line, shade, 1);
    }
    if (!history_points.empty()) polyline(history_points, red, 2);
    {
        std::vector<std::array<double, 2>> line = {{e.anchor_fix[0], e.anchor_fix[1]}};
        for (const auto& row : e.truth) line.push_back({row[0], row[1]});
        polyline(line, blue, 2);
    }
    {
        std::vector<std::array<double, 2>> line = {{e.anchor_fix[0], e.anchor_fix[1]}};
        for (const auto& row : e.member_tracks[static_cast<std::size_t>(e.selected)]) line.push_back({row[0], row[1]});
        polyline(line, green, 2);
    }
    canvas.save_png(png_path);
}

RoutingSummary routing_summary(const std::vector<ForecastEnsemble>& ensembles, int k) {
    RoutingSummary out;
    out.routed_fraction.assign(static_cast<std::size_t>(k), 0.0);
    out.confusion.assign(3, std::vector<long>(static_cast<std::size_t>(k), 0));
    long labeled = 0;
    for (const auto& e : ensembles) {
        if (e.selected >= 0 && e.selected < k) out.routed_fraction[static_cast<std::size_t>(e.selected)] += 1.0;
        if (e.mode_label >= 0 && e.mode_label < 3) {
            ++labeled;
            out.confusion[static_cast<std::size_t>(e.mode_label)][static_cast<std::size_t>(e.selected)] += 1;
        }
    }
    if (!ensembles.empty())
        for (double& f : out.routed_fraction) f /= static_cast<double>(ensembles.size());
    if (labeled == 0 || k < 1) return out;

    // Best assignment of modes to experts over all permutations (k <= 8).
    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    long best = 0;
    do {
        long hits = 0;
        for (int m = 0; m < 3 && m < k; ++m) hits += out.confusion[static_cast<std::size_t>(m)][static_cast<std::size_t>(perm[static_cast<std::size_t>(m)])];
        best = std::max(best, hits);
    } while (std::next_permutation(perm.begin(), perm.end()));
    out.purity = static_cast<double>(best) / static_cast<double>(labeled);
    return out;
}

}  // namespace tcf
