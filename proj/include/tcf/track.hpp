#pragma once

#include <string>
#include <vector>

#include "tcf/datetime.hpp"

namespace tcf {

// One best-track fix. Longitude is kept in the canonical [0, 360) range
// everywhere inside the library; converters live at the I/O boundary.
struct TcRecord {
    DateTime timestamp;
    double lat = 0.0;              // degrees north, 0.1 deg precision in source data
    double lon = 0.0;              // degrees east in [0, 360)
    int intensity_category = 0;    // agency code 0..9
    double central_pressure = 0;   // hPa
    double max_wind = 0;           // m/s
};

struct TcTrack {
    std::string storm_id;
    std::string name;
    std::vector<TcRecord> records;  // ordered by time
};

// Throws ValidationError naming the offending field. `line` (when >= 0)
// is appended to the message for parser call sites.
void validate_record(const TcRecord& rec, long line = -1, bool require_six_hour_grid = true);

// Throws ValidationError/StructuralError if the track violates its invariants
// (non-empty, strictly increasing timestamps).
void validate_track(const TcTrack& track, bool require_six_hour_grid = true);

// Returns the longest contiguous run of fixes that sit on the 00/06/12/18 UTC
// grid with uniform 6 h spacing (ties resolved toward the earliest run).
// Off-grid fixes are dropped, never interpolated.
TcTrack regularize_six_hourly(const TcTrack& track);

bool operator==(const TcRecord& a, const TcRecord& b);
bool operator==(const TcTrack& a, const TcTrack& b);

}  // namespace tcf
