#include "tcf/track.hpp"

#include <cmath>

#include "tcf/error.hpp"

namespace tcf {

namespace {
std::string at_line(long line) { return line >= 0 ? " (line " + std::to_string(line) + ")" : ""; }
}  // namespace

void validate_record(const TcRecord& rec, long line, bool require_six_hour_grid) {
    if (!(rec.lat >= -90.0 && rec.lat <= 90.0))
        throw ValidationError("lat " + std::to_string(rec.lat) + " outside [-90, 90]" + at_line(line));
    if (!(rec.lon >= 0.0 && rec.lon < 360.0))
        throw ValidationError("lon " + std::to_string(rec.lon) + " outside [0, 360)" + at_line(line));
    if (!(rec.central_pressure >= 850.0 && rec.central_pressure <= 1050.0))
        throw ValidationError("central_pressure " + std::to_string(rec.central_pressure) + " outside [850, 1050] hPa" +
                              at_line(line));
    if (!(rec.max_wind >= 0.0))
        throw ValidationError("max_wind " + std::to_string(rec.max_wind) + " negative" + at_line(line));
    if (rec.intensity_category < 0 || rec.intensity_category > 9)
        throw ValidationError("intensity_category " + std::to_string(rec.intensity_category) + " outside 0..9" +
                              at_line(line));
    if (require_six_hour_grid && (!rec.timestamp.on_six_hour_grid()))
        throw ValidationError("timestamp " + rec.timestamp.to_ymdh() + " not on the 00/06/12/18 UTC grid" +
                              at_line(line));
}

void validate_track(const TcTrack& track, bool require_six_hour_grid) {
    if (track.records.empty()) throw ValidationError("track " + track.storm_id + " has no records");
    for (const auto& rec : track.records) validate_record(rec, -1, require_six_hour_grid);
    for (std::size_t i = 1; i < track.records.size(); ++i) {
        if (!(track.records[i - 1].timestamp < track.records[i].timestamp))
            throw ValidationError("track " + track.storm_id + " timestamps not strictly increasing at index " +
                                  std::to_string(i));
    }
}

TcTrack regularize_six_hourly(const TcTrack& track) {
    std::vector<TcRecord> on_grid;
    on_grid.reserve(track.records.size());
    for (const auto& rec : track.records)
        if (rec.timestamp.on_six_hour_grid()) on_grid.push_back(rec);

    TcTrack out;
    out.storm_id = track.storm_id;
    out.name = track.name;
    if (on_grid.empty()) return out;

    std::size_t best_begin = 0, best_len = 1;
    std::size_t run_begin = 0;
    for (std::size_t i = 1; i <= on_grid.size(); ++i) {
        const bool contiguous =
            i < on_grid.size() &&
            on_grid[i].timestamp.hours_since_epoch() - on_grid[i - 1].timestamp.hours_since_epoch() == 6;
        if (!contiguous) {
            const std::size_t len = i - run_begin;
            if (len > best_len) {
                best_len = len;
                best_begin = run_begin;
            }
            run_begin = i;
        }
    }
    out.records.assign(on_grid.begin() + static_cast<long>(best_begin),
                       on_grid.begin() + static_cast<long>(best_begin + best_len));
    return out;
}

bool operator==(const TcRecord& a, const TcRecord& b) {
    return a.timestamp == b.timestamp && a.lat == b.lat && a.lon == b.lon &&
           a.intensity_category == b.intensity_category && a.central_pressure == b.central_pressure &&
           a.max_wind == b.max_wind;
}

bool operator==(const TcTrack& a, const TcTrack& b) {
    return a.storm_id == b.storm_id && a.name == b.name && a.records == b.records;
}

}  // namespace tcf
