#include "tcf/best_track.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "tcf/error.hpp"

namespace tcf {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream iss(line);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

long parse_long(const std::string& tok, const char* field, long line) {
    try {
        std::size_t pos = 0;
        long v = std::stol(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError(std::string("field '") + field + "' is not an integer: '" + tok + "'", line);
    }
}

TcRecord parse_data_line(const std::vector<std::string>& toks, long line) {
    if (toks.size() != 6) throw ParseError("expected 6 fields on data line, got " + std::to_string(toks.size()), line);
    TcRecord rec;
    try {
        rec.timestamp = DateTime::parse_ymdh(toks[0]);
    } catch (const Error& e) {
        throw ParseError(std::string("bad timestamp: ") + e.what(), line);
    }
    rec.intensity_category = static_cast<int>(parse_long(toks[1], "category", line));
    rec.lat = static_cast<double>(parse_long(toks[2], "lat", line)) / 10.0;
    rec.lon = static_cast<double>(parse_long(toks[3], "lon", line)) / 10.0;
    rec.central_pressure = static_cast<double>(parse_long(toks[4], "pressure", line));
    rec.max_wind = static_cast<double>(parse_long(toks[5], "wind", line));
    // Range validation only; off-grid hours are tolerated here and dropped
    // later by regularize_six_hourly.
    validate_record(rec, line, /*require_six_hour_grid=*/false);
    return rec;
}

}  // namespace

std::vector<TcTrack> parse_best_track(std::istream& in) {
    std::vector<TcTrack> tracks;
    std::string line;
    long line_no = 0;
    long expected = 0;  // remaining data lines for the open block
    TcTrack current;
    bool open = false;

    auto close_block = [&]() {
        if (!open) return;
        if (expected != 0)
            throw StructuralError("block '" + current.storm_id + "' declares " +
                                  std::to_string(current.records.size() + static_cast<std::size_t>(expected)) +
                                  " records but contains " + std::to_string(current.records.size()));
        tracks.push_back(std::move(current));
        current = TcTrack{};
        open = false;
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto toks = split_ws(line);
        if (toks.empty()) continue;
        if (toks[0] == kBestTrackSentinel) {
            close_block();
            if (toks.size() < 4) throw ParseError("header needs 'storm_id record_count name'", line_no);
            current.storm_id = toks[1];
            expected = parse_long(toks[2], "record_count", line_no);
            if (expected < 0) throw ParseError("record_count is negative", line_no);
            current.name = toks[3];
            open = true;
        } else {
            if (!open) throw StructuralError("data line outside a block at line " + std::to_string(line_no));
            if (expected == 0)
                throw StructuralError("block '" + current.storm_id + "' contains more records than declared (line " +
                                      std::to_string(line_no) + ")");
            TcRecord rec = parse_data_line(toks, line_no);
            if (!current.records.empty() && !(current.records.back().timestamp < rec.timestamp))
                throw ValidationError("timestamps not strictly increasing in block '" + current.storm_id + "' (line " +
                                      std::to_string(line_no) + ")");
            current.records.push_back(rec);
            --expected;
        }
    }
    close_block();
    return tracks;
}

std::vector<TcTrack> parse_best_track(const std::string& text) {
    std::istringstream iss(text);
    return parse_best_track(iss);
}

std::vector<TcTrack> parse_best_track_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open best-track file '" + path + "'");
    return parse_best_track(in);
}

void write_best_track(const std::vector<TcTrack>& tracks, std::ostream& out) {
    for (const auto& track : tracks) {
        validate_track(track, /*require_six_hour_grid=*/false);
        // The header is whitespace-delimited, so ids/names must be single tokens.
        for (const std::string* tok : {&track.storm_id, &track.name}) {
            if (tok->empty() || tok->find_first_of(" \t\r\n") != std::string::npos)
                throw ValidationError("storm id/name must be a non-empty single token, got '" + *tok + "'");
        }
        out << kBestTrackSentinel << ' ' << track.storm_id << ' ' << track.records.size() << ' ' << track.name << '\n';
        for (const auto& rec : track.records) {
            out << rec.timestamp.to_ymdh() << ' ' << rec.intensity_category << ' ' << std::llround(rec.lat * 10.0)
                << ' ' << std::llround(rec.lon * 10.0) << ' ' << std::llround(rec.central_pressure) << ' '
                << std::llround(rec.max_wind) << '\n';
        }
    }
}

std::string write_best_track(const std::vector<TcTrack>& tracks) {
    std::ostringstream oss;
    write_best_track(tracks, oss);
    return oss.str();
}

void write_best_track_file(const std::vector<TcTrack>& tracks, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_best_track(tracks, out);
}

}  // namespace tcf
