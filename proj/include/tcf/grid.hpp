#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tcf/datetime.hpp"

namespace tcf {

enum class GridVariable { geopotential, u_wind, v_wind, sst, sss, elevation };

const char* variable_name(GridVariable v);
GridVariable variable_from_name(const std::string& name);

// Level marker for surface / single-level fields.
inline constexpr double kSurfaceLevel = 0.0;

// One gridded 2-D field. Values are row-major (lat, lon); both axes are
// strictly increasing after canonicalize_field. Longitudes canonical [0, 360).
struct GridField {
    GridVariable variable = GridVariable::geopotential;
    double level = kSurfaceLevel;            // hPa, or kSurfaceLevel
    std::optional<DateTime> valid_time;      // nullopt for static fields (terrain)
    std::vector<double> lat_axis;
    std::vector<double> lon_axis;
    std::vector<double> values;              // size = lat_axis.size() * lon_axis.size()

    std::size_t n_lat() const { return lat_axis.size(); }
    std::size_t n_lon() const { return lon_axis.size(); }
    double& at(std::size_t i_lat, std::size_t i_lon) { return values[i_lat * n_lon() + i_lon]; }
    double at(std::size_t i_lat, std::size_t i_lon) const { return values[i_lat * n_lon() + i_lon]; }
};

// Sorts axes ascending (flipping data rows/columns as needed), wraps
// longitudes into [0, 360) and rotates columns so the lon axis is strictly
// increasing. Throws ValidationError on shape mismatch or duplicate
// coordinates.
void canonicalize_field(GridField* field);

// Replaces NaN cells by the value of the nearest valid cell (grid metric,
// multi-source BFS; row-major tie-break). Throws ValidationError if the
// field contains no valid cell at all.
void impute_missing_nearest(GridField* field);

// Bilinear point sample. Latitude queries outside the axis span clamp to the
// edge (replication padding). Longitude wraps across 0/360 when the axis
// covers the full circle, otherwise clamps like latitude.
double sample_bilinear(const GridField& field, double lat, double lon);

// A fixed-shape square window re-sampled around a center point.
struct Window {
    std::vector<double> lat_axis;  // size n, ascending
    std::vector<double> lon_axis;  // size n, follows the window west->east (may wrap 360->0)
    std::vector<double> values;    // row-major (lat, lon), size n*n

    std::size_t n() const { return lat_axis.size(); }
    double at(std::size_t i, std::size_t j) const { return values[i * lat_axis.size() + j]; }
};

// Extracts [center +- half_width] in both axes onto a regular n_points x
// n_points grid via bilinear resampling. Cells outside the source domain are
// edge-padded; longitude wrap at 0/360 is handled. Throws CoverageError when
// the center is farther than half_width outside the source latitude span.
Window extract_window(const GridField& field, double center_lat, double center_lon, double half_width, int n_points);

// In-memory lookup of fields by (variable, level, time).
class FieldLibrary {
  public:
    void add(GridField field);
    // Throws LookupError when absent.
    const GridField& find(GridVariable var, double level, const DateTime& time) const;
    const GridField& find_static(GridVariable var) const;
    // Closest-in-time field within max_dh hours (for coarse-cadence products).
    const GridField& find_nearest(GridVariable var, double level, const DateTime& time, double max_dh) const;
    bool contains(GridVariable var, double level, const DateTime& time) const;
    bool contains_static(GridVariable var) const;
    std::size_t size() const { return fields_.size(); }
    const std::vector<GridField>& fields() const { return fields_; }

  private:
    using Key = std::tuple<int, double, std::int64_t>;  // variable, level, hours (or min int for static)
    std::vector<GridField> fields_;
    std::map<Key, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Self-describing container file ("gridpack"): a JSON header naming each
// variable with its coordinate axes, dimension order and payload location,
// followed by a raw little-endian payload. The reader accepts either
// (lat, lon) or (lon, lat) storage order and transposes to canonical form.
// ---------------------------------------------------------------------------

struct GridPackWriteOptions {
    bool float32_payload = true;  // halves file size; source data precision is coarser anyway
    bool lon_major = false;       // store (lon, lat) order; readers must cope with both
};

void write_gridpack(const std::vector<GridField>& fields, const std::string& path,
                    const GridPackWriteOptions& opts = {});
std::vector<GridField> read_gridpack(const std::string& path);

}  // namespace tcf
