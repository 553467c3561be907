#include "tcf/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "tcf/error.hpp"

namespace tcf {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'T', 'C', 'F', 'C', 'K', 'P', 'T', '1'};

json stats_to_json(const NormalizationStats& s) {
    json j;
    j["fitted"] = s.fitted;
    j["dlat"] = {s.dlat_mean, s.dlat_std};
    j["dlon"] = {s.dlon_mean, s.dlon_std};
    j["pres"] = {s.pres_mean, s.pres_std};
    j["wind"] = {s.wind_mean, s.wind_std};
    j["terrain"] = {s.terrain_mean, s.terrain_std};
    j["atm_mean"] = s.atm_mean;
    j["atm_std"] = s.atm_std;
    j["cont_mean"] = s.cont_mean;
    j["cont_std"] = s.cont_std;
    return j;
}

NormalizationStats stats_from_json(const json& j) {
    NormalizationStats s;
    s.fitted = j.at("fitted").get<bool>();
    auto pair = [&](const char* key, double* m, double* sd) {
        const auto v = j.at(key).get<std::vector<double>>();
        *m = v.at(0);
        *sd = v.at(1);
    };
    pair("dlat", &s.dlat_mean, &s.dlat_std);
    pair("dlon", &s.dlon_mean, &s.dlon_std);
    pair("pres", &s.pres_mean, &s.pres_std);
    pair("wind", &s.wind_mean, &s.wind_std);
    pair("terrain", &s.terrain_mean, &s.terrain_std);
    const auto am = j.at("atm_mean").get<std::vector<double>>();
    const auto as = j.at("atm_std").get<std::vector<double>>();
    const auto cm = j.at("cont_mean").get<std::vector<double>>();
    const auto cs = j.at("cont_std").get<std::vector<double>>();
    std::copy(am.begin(), am.end(), s.atm_mean.begin());
    std::copy(as.begin(), as.end(), s.atm_std.begin());
    std::copy(cm.begin(), cm.end(), s.cont_mean.begin());
    std::copy(cs.begin(), cs.end(), s.cont_std.begin());
    return s;
}

json header_json(const CheckpointData& data, const std::vector<nn::Param*>& params) {
    json j;
    j["version"] = 1;
    j["config"] = data.config_text;
    j["epoch"] = data.epoch;
    j["global_step"] = data.global_step;
    j["step_in_epoch"] = data.step_in_epoch;
    j["best_metric"] = data.best_metric;
    j["best_step"] = data.best_step;
    j["train_rng"] = data.train_rng_state;
    j["adam_t"] = {{"gen", data.adam_t_gen}, {"disc", data.adam_t_disc}, {"cls", data.adam_t_cls}};
    j["stats"] = stats_to_json(data.stats);
    json jp = json::array();
    std::size_t offset = 0;
    for (const nn::Param* p : params) {
        json e;
        e["name"] = p->name;
        e["dims"] = p->value.dims();
        e["offset"] = offset;
        offset += static_cast<std::size_t>(p->value.numel()) * 3;  // value, m, v
        jp.push_back(std::move(e));
    }
    j["params"] = std::move(jp);
    return j;
}

CheckpointData data_from_json(const json& j) {
    CheckpointData d;
    d.config_text = j.at("config").get<std::string>();
    d.epoch = j.at("epoch").get<long>();
    d.global_step = j.at("global_step").get<long>();
    d.step_in_epoch = j.at("step_in_epoch").get<long>();
    d.best_metric = j.at("best_metric").get<double>();
    d.best_step = j.at("best_step").get<long>();
    d.train_rng_state = j.at("train_rng").get<std::string>();
    d.adam_t_gen = j.at("adam_t").at("gen").get<long>();
    d.adam_t_disc = j.at("adam_t").at("disc").get<long>();
    d.adam_t_cls = j.at("adam_t").at("cls").get<long>();
    d.stats = stats_from_json(j.at("stats"));
    return d;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointData& data, const std::vector<nn::Param*>& params) {
    const std::string header = header_json(data, params).dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint '" + path + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t hlen = header.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const nn::Param* p : params) {
        const auto n = static_cast<std::streamsize>(p->value.numel() * static_cast<long>(sizeof(double)));
        out.write(reinterpret_cast<const char*>(p->value.data()), n);
        out.write(reinterpret_cast<const char*>(p->m.data()), n);
        out.write(reinterpret_cast<const char*>(p->v.data()), n);
    }
    if (!out) throw IoError("short write to checkpoint '" + path + "'");
}

namespace {

json read_header(std::ifstream& in, const std::string& path) {
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw ParseError("'" + path + "' is not a checkpoint (bad magic)");
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string text(hlen, '\0');
    in.read(text.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw ParseError("checkpoint '" + path + "' truncated header");
    try {
        return json::parse(text);
    } catch (const std::exception& e) {
        throw ParseError("checkpoint header: " + std::string(e.what()));
    }
}

}  // namespace

CheckpointData peek_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    return data_from_json(read_header(in, path));
}

CheckpointData load_checkpoint(const std::string& path, const std::vector<nn::Param*>& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    const json j = read_header(in, path);
    const std::streampos payload_base = in.tellg();

    std::map<std::string, nn::Param*> by_name;
    for (nn::Param* p : params) {
        if (!by_name.emplace(p->name, p).second) throw StateError("duplicate parameter name " + p->name);
    }
    std::map<std::string, bool> seen;
    for (const auto& [name, p] : by_name) seen[name] = false;

    for (const auto& e : j.at("params")) {
        const std::string name = e.at("name").get<std::string>();
        const auto dims = e.at("dims").get<std::vector<long>>();
        const std::size_t offset = e.at("offset").get<std::size_t>();
        const auto it = by_name.find(name);
        if (it == by_name.end()) throw IncompatibleError("checkpoint has parameter '" + name + "' unknown to this model");
        nn::Param* p = it->second;
        if (p->value.dims() != dims)
            throw IncompatibleError("parameter '" + name + "' shape " + p->value.shape_str() + " != checkpoint shape");
        seen[name] = true;
        in.seekg(payload_base + static_cast<std::streamoff>(offset * sizeof(double)));
        const auto n = static_cast<std::streamsize>(p->value.numel() * static_cast<long>(sizeof(double)));
        in.read(reinterpret_cast<char*>(p->value.data()), n);
        in.read(reinterpret_cast<char*>(p->m.data()), n);
        in.read(reinterpret_cast<char*>(p->v.data()), n);
        if (!in) throw StructuralError("checkpoint payload truncated at '" + name + "'");
        p->zero_grad();
    }
    for (const auto& [name, was_seen] : seen)
        if (!was_seen) throw IncompatibleError("checkpoint is missing parameter '" + name + "'");
    return data_from_json(j);
}

}  // namespace tcf
