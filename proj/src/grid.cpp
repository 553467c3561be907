#include "tcf/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "tcf/error.hpp"
#include "tcf/geodesy.hpp"

namespace tcf {

using nlohmann::json;

const char* variable_name(GridVariable v) {
    switch (v) {
        case GridVariable::geopotential: return "z";
        case GridVariable::u_wind: return "u";
        case GridVariable::v_wind: return "v";
        case GridVariable::sst: return "sst";
        case GridVariable::sss: return "sss";
        case GridVariable::elevation: return "elevation";
    }
    return "?";
}

GridVariable variable_from_name(const std::string& name) {
    if (name == "z") return GridVariable::geopotential;
    if (name == "u") return GridVariable::u_wind;
    if (name == "v") return GridVariable::v_wind;
    if (name == "sst") return GridVariable::sst;
    if (name == "sss") return GridVariable::sss;
    if (name == "elevation") return GridVariable::elevation;
    throw ValidationError("unknown grid variable '" + name + "'");
}

namespace {

void check_axis_strictly_monotone(const std::vector<double>& axis, const char* which) {
    if (axis.empty()) throw ValidationError(std::string(which) + " axis is empty");
    for (std::size_t i = 1; i < axis.size(); ++i)
        if (!(axis[i] > axis[i - 1]))
            throw ValidationError(std::string(which) + " axis not strictly increasing at index " + std::to_string(i));
}

// Index of the cell interval containing q on an ascending axis, clamped to
// [0, n-2]; t is the interpolation weight in [0, 1] (clamped for queries
// outside the span, which realizes edge replication).
void bracket_clamped(const std::vector<double>& axis, double q, std::size_t* i0, double* t) {
    const std::size_t n = axis.size();
    if (n == 1) {
        *i0 = 0;
        *t = 0.0;
        return;
    }
    if (q <= axis.front()) {
        *i0 = 0;
        *t = 0.0;
        return;
    }
    if (q >= axis.back()) {
        *i0 = n - 2;
        *t = 1.0;
        return;
    }
    const auto it = std::upper_bound(axis.begin(), axis.end(), q);
    *i0 = static_cast<std::size_t>(it - axis.begin()) - 1;
    if (*i0 > n - 2) *i0 = n - 2;
    *t = (q - axis[*i0]) / (axis[*i0 + 1] - axis[*i0]);
}

bool lon_axis_periodic(const std::vector<double>& axis) {
    if (axis.size() < 3) return false;
    double max_step = 0.0;
    for (std::size_t i = 1; i < axis.size(); ++i) max_step = std::max(max_step, axis[i] - axis[i - 1]);
    const double gap = 360.0 - (axis.back() - axis.front());
    return gap <= 2.0 * max_step + 1e-12;
}

}  // namespace

void canonicalize_field(GridField* field) {
    GridField& f = *field;
    if (f.values.size() != f.n_lat() * f.n_lon())
        throw ValidationError("grid values size " + std::to_string(f.values.size()) + " != " +
                              std::to_string(f.n_lat()) + "x" + std::to_string(f.n_lon()));
    // Latitude: allow descending input, flip rows to ascending.
    if (f.lat_axis.size() >= 2 && f.lat_axis.front() > f.lat_axis.back()) {
        std::reverse(f.lat_axis.begin(), f.lat_axis.end());
        const std::size_t nl = f.n_lat(), nn = f.n_lon();
        for (std::size_t i = 0; i < nl / 2; ++i)
            for (std::size_t j = 0; j < nn; ++j) std::swap(f.values[i * nn + j], f.values[(nl - 1 - i) * nn + j]);
    }
    // Longitude: wrap into [0, 360) and rotate columns so the axis ascends.
    for (double& lon : f.lon_axis) lon = geo::wrap_lon(lon);
    if (!f.lon_axis.empty()) {
        std::vector<std::size_t> order(f.lon_axis.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return f.lon_axis[a] < f.lon_axis[b]; });
        bool already = true;
        for (std::size_t j = 0; j < order.size(); ++j) already = already && order[j] == j;
        if (!already) {
            std::vector<double> new_lon(f.lon_axis.size());
            std::vector<double> new_vals(f.values.size());
            const std::size_t nn = f.n_lon();
            for (std::size_t j = 0; j < nn; ++j) {
                new_lon[j] = f.lon_axis[order[j]];
                for (std::size_t i = 0; i < f.n_lat(); ++i) new_vals[i * nn + j] = f.values[i * nn + order[j]];
            }
            f.lon_axis = std::move(new_lon);
            f.values = std::move(new_vals);
        }
    }
    check_axis_strictly_monotone(f.lat_axis, "lat");
    check_axis_strictly_monotone(f.lon_axis, "lon");
}

void impute_missing_nearest(GridField* field) {
    GridField& f = *field;
    const std::size_t nl = f.n_lat(), nn = f.n_lon();
    std::deque<std::pair<std::size_t, std::size_t>> queue;
    std::vector<char> valid(nl * nn, 0);
    bool any_nan = false;
    for (std::size_t i = 0; i < nl; ++i)
        for (std::size_t j = 0; j < nn; ++j) {
            if (std::isfinite(f.at(i, j))) {
                valid[i * nn + j] = 1;
                queue.emplace_back(i, j);
            } else {
                any_nan = true;
            }
        }
    if (queue.empty()) throw ValidationError("field has no valid cell to impute from");
    if (!any_nan) return;
    while (!queue.empty()) {
        auto [i, j] = queue.front();
        queue.pop_front();
        const long di[4] = {-1, 1, 0, 0};
        const long dj[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
            const long ni = static_cast<long>(i) + di[k], nj = static_cast<long>(j) + dj[k];
            if (ni < 0 || nj < 0 || ni >= static_cast<long>(nl) || nj >= static_cast<long>(nn)) continue;
            const std::size_t idx = static_cast<std::size_t>(ni) * nn + static_cast<std::size_t>(nj);
            if (!valid[idx]) {
                f.values[idx] = f.at(i, j);
                valid[idx] = 1;
                queue.emplace_back(static_cast<std::size_t>(ni), static_cast<std::size_t>(nj));
            }
        }
    }
}

double sample_bilinear(const GridField& field, double lat, double lon) {
    std::size_t i0;
    double ty;
    bracket_clamped(field.lat_axis, lat, &i0, &ty);

    const std::vector<double>& lx = field.lon_axis;
    const double q = geo::wrap_lon(lon);
    std::size_t j0, j1;
    double tx;
    if (lon_axis_periodic(lx) && (q < lx.front() || q > lx.back())) {
        // Interpolate across the seam between the last and first columns.
        const double span = lx.front() + 360.0 - lx.back();
        const double qq = q >= lx.back() ? q : q + 360.0;
        j0 = lx.size() - 1;
        j1 = 0;
        tx = (qq - lx.back()) / span;
    } else {
        bracket_clamped(lx, q, &j0, &tx);
        j1 = std::min(j0 + 1, lx.size() - 1);
    }
    const std::size_t i1 = std::min(i0 + 1, field.lat_axis.size() - 1);
    const double v00 = field.at(i0, j0), v01 = field.at(i0, j1);
    const double v10 = field.at(i1, j0), v11 = field.at(i1, j1);
    const double a = v00 + tx * (v01 - v00);
    const double b = v10 + tx * (v11 - v10);
    return a + ty * (b - a);
}

Window extract_window(const GridField& field, double center_lat, double center_lon, double half_width, int n_points) {
    if (half_width <= 0.0) throw ValidationError("half_width must be > 0");
    if (n_points < 1) throw ValidationError("window n_points must be >= 1");
    if (center_lat < field.lat_axis.front() - half_width || center_lat > field.lat_axis.back() + half_width)
        throw CoverageError("window center lat " + std::to_string(center_lat) +
                            " beyond field latitude span [" + std::to_string(field.lat_axis.front()) + ", " +
                            std::to_string(field.lat_axis.back()) + "] by more than half_width");

    Window w;
    const std::size_t n = static_cast<std::size_t>(n_points);
    w.lat_axis.resize(n);
    w.lon_axis.resize(n);
    w.values.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        const double frac = n == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(n - 1);
        w.lat_axis[i] = center_lat - half_width + 2.0 * half_width * frac;
        w.lon_axis[i] = geo::wrap_lon(center_lon - half_width + 2.0 * half_width * frac);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) w.values[i * n + j] = sample_bilinear(field, w.lat_axis[i], w.lon_axis[j]);
    return w;
}

void FieldLibrary::add(GridField field) {
    const Key key{static_cast<int>(field.variable), field.level,
                  field.valid_time ? field.valid_time->hours_since_epoch() : std::numeric_limits<std::int64_t>::min()};
    const auto it = index_.find(key);
    if (it != index_.end()) {
        fields_[it->second] = std::move(field);
        return;
    }
    index_[key] = fields_.size();
    fields_.push_back(std::move(field));
}

const GridField& FieldLibrary::find(GridVariable var, double level, const DateTime& time) const {
    const auto it = index_.find(Key{static_cast<int>(var), level, time.hours_since_epoch()});
    if (it == index_.end())
        throw LookupError(std::string("no field ") + variable_name(var) + "@" + std::to_string(level) + " at " +
                          time.to_iso());
    return fields_[it->second];
}

const GridField& FieldLibrary::find_nearest(GridVariable var, double level, const DateTime& time,
                                            double max_dh) const {
    const GridField* best = nullptr;
    double best_dh = max_dh;
    for (const auto& f : fields_) {
        if (f.variable != var || f.level != level || !f.valid_time) continue;
        const double dh =
            std::abs(static_cast<double>(f.valid_time->hours_since_epoch() - time.hours_since_epoch()));
        if (dh <= best_dh) {
            best_dh = dh;
            best = &f;
        }
    }
    if (!best)
        throw LookupError(std::string("no field ") + variable_name(var) + "@" + std::to_string(level) + " within " +
                          std::to_string(max_dh) + " h of " + time.to_iso());
    return *best;
}

const GridField& FieldLibrary::find_static(GridVariable var) const {
    const auto it =
        index_.find(Key{static_cast<int>(var), kSurfaceLevel, std::numeric_limits<std::int64_t>::min()});
    if (it == index_.end()) throw LookupError(std::string("no static field ") + variable_name(var));
    return fields_[it->second];
}

bool FieldLibrary::contains(GridVariable var, double level, const DateTime& time) const {
    return index_.count(Key{static_cast<int>(var), level, time.hours_since_epoch()}) > 0;
}

bool FieldLibrary::contains_static(GridVariable var) const {
    return index_.count(Key{static_cast<int>(var), kSurfaceLevel, std::numeric_limits<std::int64_t>::min()}) > 0;
}

// --------------------------------------------------------------------- I/O

namespace {
constexpr char kGridMagic[8] = {'T', 'C', 'F', 'G', 'R', 'D', '1', '\n'};
}

void write_gridpack(const std::vector<GridField>& fields, const std::string& path, const GridPackWriteOptions& opts) {
    json header;
    header["version"] = 1;
    header["payload_dtype"] = opts.float32_payload ? "f32" : "f64";
    json jfields = json::array();
    std::size_t offset = 0;
    const std::size_t elem = opts.float32_payload ? 4 : 8;
    for (const auto& f : fields) {
        if (f.values.size() != f.n_lat() * f.n_lon()) throw ValidationError("grid values size mismatch on write");
        json jf;
        jf["variable"] = variable_name(f.variable);
        jf["level"] = f.level;
        if (f.valid_time)
            jf["time"] = f.valid_time->to_ymdh();
        else
            jf["time"] = nullptr;
        jf["dims"] = opts.lon_major ? json::array({"lon", "lat"}) : json::array({"lat", "lon"});
        jf["lat_axis"] = f.lat_axis;
        jf["lon_axis"] = f.lon_axis;
        jf["offset"] = offset;
        jf["count"] = f.values.size();
        offset += f.values.size() * elem;
        jfields.push_back(std::move(jf));
    }
    header["fields"] = std::move(jfields);
    const std::string htext = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(kGridMagic, sizeof(kGridMagic));
    const std::uint64_t hlen = htext.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    for (const auto& f : fields) {
        const std::size_t nl = f.n_lat(), nn = f.n_lon();
        if (opts.float32_payload) {
            std::vector<float> buf(f.values.size());
            if (opts.lon_major) {
                for (std::size_t j = 0; j < nn; ++j)
                    for (std::size_t i = 0; i < nl; ++i) buf[j * nl + i] = static_cast<float>(f.at(i, j));
            } else {
                for (std::size_t k = 0; k < f.values.size(); ++k) buf[k] = static_cast<float>(f.values[k]);
            }
            out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
        } else {
            std::vector<double> buf(f.values.size());
            if (opts.lon_major) {
                for (std::size_t j = 0; j < nn; ++j)
                    for (std::size_t i = 0; i < nl; ++i) buf[j * nl + i] = f.at(i, j);
            } else {
                buf = f.values;
            }
            out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 8));
        }
    }
    if (!out) throw IoError("short write to '" + path + "'");
}

std::vector<GridField> read_gridpack(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open gridpack '" + path + "'");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kGridMagic, sizeof(magic)) != 0)
        throw ParseError("'" + path + "' is not a gridpack file (bad magic)");
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string htext(hlen, '\0');
    in.read(htext.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw ParseError("'" + path + "' truncated header");
    json header;
    try {
        header = json::parse(htext);
    } catch (const std::exception& e) {
        throw ParseError("gridpack header: " + std::string(e.what()));
    }
    const std::string dtype = header.at("payload_dtype").get<std::string>();
    if (dtype != "f32" && dtype != "f64") throw ParseError("gridpack payload_dtype '" + dtype + "' unknown");
    const std::size_t elem = dtype == "f32" ? 4 : 8;
    const std::streampos payload_base = in.tellg();

    std::vector<GridField> out;
    for (const auto& jf : header.at("fields")) {
        GridField f;
        f.variable = variable_from_name(jf.at("variable").get<std::string>());
        f.level = jf.at("level").get<double>();
        if (!jf.at("time").is_null()) f.valid_time = DateTime::parse_ymdh(jf.at("time").get<std::string>());
        f.lat_axis = jf.at("lat_axis").get<std::vector<double>>();
        f.lon_axis = jf.at("lon_axis").get<std::vector<double>>();
        const auto dims = jf.at("dims").get<std::vector<std::string>>();
        if (dims.size() != 2 || ((dims[0] != "lat" || dims[1] != "lon") && (dims[0] != "lon" || dims[1] != "lat")))
            throw ParseError("gridpack dims must be [lat,lon] or [lon,lat]");
        const bool lon_major = dims[0] == "lon";
        const std::size_t count = jf.at("count").get<std::size_t>();
        if (count != f.lat_axis.size() * f.lon_axis.size())
            throw StructuralError("gridpack field count " + std::to_string(count) + " != axis product");
        const std::size_t offset = jf.at("offset").get<std::size_t>();
        in.seekg(payload_base + static_cast<std::streamoff>(offset));
        std::vector<double> raw(count);
        if (elem == 4) {
            std::vector<float> buf(count);
            in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * 4));
            for (std::size_t k = 0; k < count; ++k) raw[k] = static_cast<double>(buf[k]);
        } else {
            in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * 8));
        }
        if (!in) throw StructuralError("gridpack payload truncated for " + std::string(variable_name(f.variable)));
        if (lon_major) {
            const std::size_t nl = f.lat_axis.size(), nn = f.lon_axis.size();
            f.values.resize(count);
            for (std::size_t j = 0; j < nn; ++j)
                for (std::size_t i = 0; i < nl; ++i) f.values[i * nn + j] = raw[j * nl + i];
        } else {
            f.values = std::move(raw);
        }
        canonicalize_field(&f);
        impute_missing_nearest(&f);
        out.push_back(std::move(f));
    }
    return out;
}

}  // namespace tcf
