#include "tcf/store.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "tcf/error.hpp"

namespace tcf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kSampleMagic[8] = {'T', 'C', 'F', 'S', 'M', 'P', '1', '\n'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T* v) {
    in.read(reinterpret_cast<char*>(v), sizeof(T));
}

}  // namespace

SampleStore SampleStore::create(const std::string& dir, int grid, double half_width) {
    SampleStore store;
    store.dir_ = dir;
    store.grid_ = grid;
    store.half_width_ = half_width;
    store.writable_ = true;
    fs::create_directories(fs::path(dir) / "samples");
    fs::create_directories(fs::path(dir) / "splits");
    return store;
}

void SampleStore::add_storm(const std::string& name, int mode_label, const std::vector<TcSample>& samples) {
    if (!writable_) throw StateError("sample store opened read-only");
    if (samples.empty()) throw ValidationError("add_storm: no samples");
    const std::string storm_id = samples.front().storm_id;
    for (const auto& s : samples) {
        if (s.storm_id != storm_id) throw ValidationError("add_storm: mixed storm ids");
        if (s.normalized) throw ValidationError("add_storm: store holds raw samples only");
        if (s.env.grid != grid_) throw ValidationError("add_storm: sample grid != store grid");
    }

    const fs::path path = fs::path(dir_) / "samples" / (storm_id + ".bin");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(kSampleMagic, sizeof(kSampleMagic));
    write_pod<std::uint32_t>(out, 1);  // version
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(samples.size()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(grid_));
    for (const auto& s : samples) {
        write_pod<std::int64_t>(out, s.anchor_time.hours_since_epoch());
        write_pod<std::int32_t>(out, s.mode_label);
        for (double v : s.anchor_fix) write_pod(out, v);
        for (const auto& row : s.history)
            for (double v : row) write_pod(out, v);
        for (const auto& row : s.target)
            for (double v : row) write_pod(out, v);
        write_pod(out, s.env.sst_center);
        write_pod(out, s.env.sst_mean);
        write_pod(out, s.env.sss_center);
        write_pod(out, s.env.sss_mean);
        write_pod<std::int32_t>(out, s.env.month);
        write_pod<std::int32_t>(out, s.env.intensity_category);
        write_pod(out, s.env.translation_speed_kmh);
        write_pod(out, s.env.heading_sin);
        write_pod(out, s.env.heading_cos);
        write_pod(out, s.env.pressure_tendency);
        write_pod(out, s.env.wind_tendency);
        write_pod(out, s.env.nino34);
        out.write(reinterpret_cast<const char*>(s.env.atm.data()),
                  static_cast<std::streamsize>(s.env.atm.size() * sizeof(float)));
        out.write(reinterpret_cast<const char*>(s.env.terrain.data()),
                  static_cast<std::streamsize>(s.env.terrain.size() * sizeof(float)));
    }
    if (!out) throw IoError("short write to '" + path.string() + "'");

    StormMeta meta;
    meta.storm_id = storm_id;
    meta.name = name;
    meta.mode_label = mode_label;
    meta.n_samples = static_cast<long>(samples.size());
    meta.first_time = samples.front().anchor_time.to_ymdh();
    meta.last_time = samples.back().anchor_time.to_ymdh();
    storms_.push_back(std::move(meta));
}

void SampleStore::set_source_checksum(const std::string& source, const std::string& checksum) {
    source_checksums_[source] = checksum;
}

void SampleStore::write_split(const std::string& split_name, const std::vector<std::string>& ids) {
    if (!writable_) throw StateError("sample store opened read-only");
    const fs::path path = fs::path(dir_) / "splits" / (split_name + ".txt");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "'");
    for (const auto& id : ids) out << id << '\n';
}

void SampleStore::finalize() {
    if (!writable_) throw StateError("sample store opened read-only");
    json j;
    j["version"] = 1;
    j["grid"] = grid_;
    j["half_width"] = half_width_;
    j["source_checksums"] = source_checksums_;
    json jstorms = json::array();
    for (const auto& m : storms_) {
        json js;
        js["storm_id"] = m.storm_id;
        js["name"] = m.name;
        js["mode_label"] = m.mode_label;
        js["n_samples"] = m.n_samples;
        js["first_time"] = m.first_time;
        js["last_time"] = m.last_time;
        jstorms.push_back(std::move(js));
    }
    j["storms"] = std::move(jstorms);
    std::ofstream out(fs::path(dir_) / "manifest.json");
    if (!out) throw IoError("cannot write store manifest");
    out << j.dump(2) << '\n';
}

SampleStore SampleStore::open(const std::string& dir) {
    SampleStore store;
    store.dir_ = dir;
    store.writable_ = false;
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw IoError("no sample store manifest under '" + dir + "'");
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError("store manifest: " + std::string(e.what()));
    }
    store.grid_ = j.at("grid").get<int>();
    store.half_width_ = j.at("half_width").get<double>();
    for (const auto& js : j.at("storms")) {
        StormMeta m;
        m.storm_id = js.at("storm_id").get<std::string>();
        m.name = js.at("name").get<std::string>();
        m.mode_label = js.at("mode_label").get<int>();
        m.n_samples = js.at("n_samples").get<long>();
        m.first_time = js.at("first_time").get<std::string>();
        m.last_time = js.at("last_time").get<std::string>();
        store.storms_.push_back(std::move(m));
    }
    return store;
}

std::vector<std::string> SampleStore::storm_ids() const {
    std::vector<std::string> ids;
    ids.reserve(storms_.size());
    for (const auto& m : storms_) ids.push_back(m.storm_id);
    return ids;
}

std::vector<TcSample> SampleStore::load_storm(const std::string& storm_id) const {
    const fs::path path = fs::path(dir_) / "samples" / (storm_id + ".bin");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kSampleMagic, sizeof(magic)) != 0)
        throw ParseError("'" + path.string() + "' is not a sample file");
    std::uint32_t version = 0, count = 0, grid = 0;
    read_pod(in, &version);
    read_pod(in, &count);
    read_pod(in, &grid);
    if (version != 1) throw StructuralError("unsupported sample file version");

    const std::size_t cells = static_cast<std::size_t>(grid) * grid;
    std::vector<TcSample> samples(count);
    for (auto& s : samples) {
        s.storm_id = storm_id;
        std::int64_t hours = 0;
        read_pod(in, &hours);
        s.anchor_time = DateTime(hours);
        read_pod(in, &s.mode_label);
        for (double& v : s.anchor_fix) read_pod(in, &v);
        for (auto& row : s.history)
            for (double& v : row) read_pod(in, &v);
        for (auto& row : s.target)
            for (double& v : row) read_pod(in, &v);
        read_pod(in, &s.env.sst_center);
        read_pod(in, &s.env.sst_mean);
        read_pod(in, &s.env.sss_center);
        read_pod(in, &s.env.sss_mean);
        std::int32_t month = 0, cat = 0;
        read_pod(in, &month);
        read_pod(in, &cat);
        s.env.month = month;
        s.env.intensity_category = cat;
        read_pod(in, &s.env.translation_speed_kmh);
        read_pod(in, &s.env.heading_sin);
        read_pod(in, &s.env.heading_cos);
        read_pod(in, &s.env.pressure_tendency);
        read_pod(in, &s.env.wind_tendency);
        read_pod(in, &s.env.nino34);
        s.env.grid = static_cast<int>(grid);
        s.env.atm.resize(static_cast<std::size_t>(kHistorySteps) * kAtmChannels * cells);
        s.env.terrain.resize(cells);
        in.read(reinterpret_cast<char*>(s.env.atm.data()),
                static_cast<std::streamsize>(s.env.atm.size() * sizeof(float)));
        in.read(reinterpret_cast<char*>(s.env.terrain.data()),
                static_cast<std::streamsize>(s.env.terrain.size() * sizeof(float)));
        if (!in) throw StructuralError("truncated sample file '" + path.string() + "'");
    }
    return samples;
}

bool SampleStore::has_split(const std::string& split_name) const {
    return fs::exists(fs::path(dir_) / "splits" / (split_name + ".txt"));
}

std::vector<std::string> SampleStore::split_ids(const std::string& split_name) const {
    const fs::path path = fs::path(dir_) / "splits" / (split_name + ".txt");
    std::ifstream in(path);
    if (!in) throw ConfigError("store has no split '" + split_name + "'");
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) ids.push_back(line);
    }
    return ids;
}

std::vector<TcSample> SampleStore::load_split(const std::string& split_name) const {
    std::vector<TcSample> all;
    for (const auto& id : split_ids(split_name)) {
        auto samples = load_storm(id);
        for (auto& s : samples) all.push_back(std::move(s));
    }
    return all;
}

}  // namespace tcf
