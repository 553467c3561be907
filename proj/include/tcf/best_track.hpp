#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tcf/track.hpp"

namespace tcf {

// Plain-text best-track format (one block per storm):
//
//   66666 <storm_id> <record_count> <name>
//   YYYYMMDDHH <category> <lat_tenths_deg> <lon_tenths_deg> <pressure_hPa> <wind_mps>
//   ...
//
// Latitude/longitude are integers in tenths of a degree (lon east, 0..3599),
// pressure in whole hPa, wind in whole m/s. Header lines are keyed by the
// sentinel 66666; the declared record count must match the data lines that
// follow. Multiple blocks may be concatenated in one file.
inline constexpr const char* kBestTrackSentinel = "66666";

std::vector<TcTrack> parse_best_track(std::istream& in);
std::vector<TcTrack> parse_best_track(const std::string& text);
std::vector<TcTrack> parse_best_track_file(const std::string& path);

// Inverse of parse_best_track: round-trips bit-exactly for tracks whose
// fields respect the format precision (0.1 deg, 1 hPa, 1 m/s). Validates
// invariants before writing.
void write_best_track(const std::vector<TcTrack>& tracks, std::ostream& out);
std::string write_best_track(const std::vector<TcTrack>& tracks);
void write_best_track_file(const std::vector<TcTrack>& tracks, const std::string& path);

}  // namespace tcf
