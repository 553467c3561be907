#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "tcf/moe.hpp"
#include "tcf/track.hpp"

namespace tcf {

// Forecast horizons, hours.
inline constexpr std::array<int, kTargetSteps> kHorizonsH = {6, 12, 18, 24};

enum class ScoreRule { top1, weighted_mean, best_of_k };
const char* score_rule_name(ScoreRule r);

struct MetricsReport {
    std::array<double, kTargetSteps> track_km{};   // mean great-circle error per horizon
    std::array<double, kTargetSteps> pres_mae{};   // hPa
    std::array<double, kTargetSteps> wind_mae{};   // m/s
    long count = 0;                                // samples scored
    ScoreRule rule = ScoreRule::top1;
    std::string stratum = "all";
};

// Per-horizon means of haversine track error and absolute pressure/wind
// errors over the member chosen by `rule`. best_of_k selects, per sample,
// the member minimizing the 24 h track error.
MetricsReport score(const std::vector<ForecastEnsemble>& ensembles, ScoreRule rule);

// Persistence baseline: the anchor fix repeated at every horizon.
MetricsReport score_persistence(const std::vector<ForecastEnsemble>& ensembles);

enum class TurnDirection { left, right };

struct DeflectionLabel {
    DateTime anchor;
    TurnDirection direction;
    double angle_deg;  // signed, clockwise (rightward) positive
};

enum class TurnMetric {
    twelve_hour_bearings,  // bearings over the 12 h spans ending/starting at the anchor
    six_hour_chords        // consecutive 6 h motion vectors at the anchor
};

struct DeflectionConfig {
    double right_threshold_deg = 45.0;
    double left_threshold_deg = 30.0;
    TurnMetric metric = TurnMetric::twelve_hour_bearings;
    // Strict exceedance with a tiny guard so constructed exact-threshold
    // turns do not flip on the last float bit.
    double angle_eps = 1e-9;
};

// Labels every anchor whose turning angle strictly exceeds the thresholds.
// Anchors without the required surrounding fixes yield no label.
std::vector<DeflectionLabel> detect_deflection(const TcTrack& track, const DeflectionConfig& cfg = {});

// A sample is "abnormal" when any label on its storm falls inside its 24 h
// target window. Returns {abnormal, normal}; empty strata keep count 0.
std::pair<MetricsReport, MetricsReport> stratified_report(
    const std::vector<ForecastEnsemble>& ensembles,
    const std::map<std::string, std::vector<DeflectionLabel>>& labels_by_storm, ScoreRule rule);

// Static comparison rows (operational-agency verification statistics) read
// from a bundled delimited file; '#' lines are provenance comments.
struct ReferenceRow {
    std::string source;
    std::string metric;  // "track_km", "pres_mae", "wind_mae"
    std::array<double, kTargetSteps> values{};  // <0 = not published
};
std::vector<ReferenceRow> load_reference_rows(const std::string& path);

// Writes metrics.csv (machine) and metrics.txt (aligned, with optional
// reference rows). The CSV round-trips exactly via parse_metrics_csv.
void emit_tables(const std::vector<MetricsReport>& reports, const std::vector<ReferenceRow>& references,
                 const std::string& out_dir);
std::vector<MetricsReport> parse_metrics_csv(const std::string& path);

// Track-map plot (history red, truth blue, predictions green, non-selected
// members shaded): one PNG per ensemble entry.
void plot_ensemble(const ForecastEnsemble& ensemble, const std::vector<std::array<double, 2>>& history_points,
                   const std::string& png_path);

// Routing-quality summary for labeled (synthetic) data.
struct RoutingSummary {
    double purity = 0.0;                     // best label permutation match rate
    std::vector<double> routed_fraction;     // share of samples routed to each expert
    std::vector<std::vector<long>> confusion;  // [mode][expert]
};
RoutingSummary routing_summary(const std::vector<ForecastEnsemble>& ensembles, int k);

}  // namespace tcf
