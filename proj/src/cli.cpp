#include "tcf/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tcf/best_track.hpp"
#include "tcf/config.hpp"
#include "tcf/error.hpp"
#include "tcf/evaluation.hpp"
#include "tcf/hash.hpp"
#include "tcf/store.hpp"
#include "tcf/synth.hpp"
#include "tcf/training.hpp"

namespace tcf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir = "out";
    std::string device;
    long seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
    cmd->add_option("--config", args->config_path, "configuration file");
    cmd->add_option("--set", args->overrides, "dotted-key override, key=value (repeatable)");
    cmd->add_option("--out", args->out_dir, "output directory");
    cmd->add_option("--seed", args->seed, "seed override");
    cmd->add_option("--device", args->device, "compute device (cpu)");
}

std::string resolve_data_path(const std::string& path) {
    if (path.empty() || fs::path(path).is_absolute()) return path;
    const char* root = std::getenv("TCF_DATA_ROOT");
    if (root && *root && !fs::exists(path)) return (fs::path(root) / path).string();
    return path;
}

Config load_config(const CommonArgs& args) {
    Config cfg = args.config_path.empty() ? Config() : Config::parse_file(resolve_data_path(args.config_path));
    cfg.apply_overrides(args.overrides);
    if (args.seed >= 0) {
        cfg.set("training.seed", std::to_string(args.seed));
        cfg.set("synth.seed", std::to_string(args.seed));
    }
    if (!args.device.empty()) cfg.set("training.device", args.device);
    auto known = TrainConfig::known_keys();
    known.insert({"synth.seed", "data.best_track", "data.fields_dir", "data.nino34", "data.labels",
                  "data.train_years", "data.val_years", "data.test_years"});
    cfg.require_known_keys(known);
    return cfg;
}

SynthConfig synth_config_from(const Config& cfg) {
    SynthConfig s;
    s.n_storms = cfg.get_int("synth.n_storms", s.n_storms);
    if (cfg.has("synth.mode_mix")) {
        std::istringstream iss(cfg.get_string("synth.mode_mix", "1,1,1"));
        std::string tok;
        for (double& w : s.mode_mix) {
            if (!std::getline(iss, tok, ',')) throw ConfigError("synth.mode_mix needs 3 comma-separated weights");
            w = std::stod(tok);
        }
    }
    s.noise_level = cfg.get_double("synth.noise_level", s.noise_level);
    s.seed = cfg.get_u64("synth.seed", cfg.get_u64("training.seed", s.seed));
    s.min_fixes = cfg.get_int("synth.min_fixes", s.min_fixes);
    s.max_fixes = cfg.get_int("synth.max_fixes", s.max_fixes);
    s.start_year = cfg.get_int("synth.start_year", s.start_year);
    s.n_years = cfg.get_int("synth.n_years", s.n_years);
    s.field_resolution_deg = cfg.get_double("synth.field_resolution", s.field_resolution_deg);
    const std::string coupling = cfg.get_string("synth.coupling", "none");
    if (coupling == "none")
        s.coupling = SynthCoupling::none;
    else if (coupling == "ocean")
        s.coupling = SynthCoupling::ocean;
    else if (coupling == "terrain")
        s.coupling = SynthCoupling::terrain;
    else
        throw ConfigError("synth.coupling must be none|ocean|terrain");
    s.ocean_gain = cfg.get_double("synth.ocean_gain", s.ocean_gain);
    s.terrain_turn_deg = cfg.get_double("synth.terrain_turn_deg", s.terrain_turn_deg);
    s.coupling_start_step = cfg.get_int("synth.coupling_start_step", s.coupling_start_step);
    return s;
}

void write_manifest(const std::string& out_dir, const std::string& command, const Config& cfg,
                    std::uint64_t seed, const std::map<std::string, std::string>& input_checksums) {
    json j;
    j["command"] = command;
    j["config_hash"] = hex64(fnv1a64(cfg.dump()));
    j["seed"] = seed;
    j["inputs"] = input_checksums;
    std::ofstream out(fs::path(out_dir) / "manifest.json");
    out << j.dump(2) << '\n';
}

void build_store_from_dataset(const Config& cfg, const SynthConfig& synth_cfg, const std::string& store_dir) {
    const int grid = cfg.get_int("data.grid", 25);
    const double half_width = cfg.get_double("data.half_width", 12.5);
    SampleBuildConfig build_cfg;
    build_cfg.grid = grid;
    build_cfg.half_width = half_width;
    build_cfg.ocean_time_tolerance_h = cfg.get_double("data.ocean_tolerance_h", build_cfg.ocean_time_tolerance_h);

    SampleStore store = SampleStore::create(store_dir, grid, half_width);
    const SynthDataset ds = synthesize_dataset(synth_cfg);
    for (const auto& storm : ds.storms) {
        const TcTrack regular = regularize_six_hourly(storm.track);
        auto samples = build_samples(regular, storm.fields, ds.nino34, build_cfg, static_cast<int>(storm.mode));
        if (samples.empty()) continue;
        store.add_storm(storm.track.name, static_cast<int>(storm.mode), samples);
    }
    store.set_source_checksum("synth_config", hex64(fnv1a64(cfg.dump())));
    write_fraction_splits(&store, cfg.get_double("data.train_frac", 0.7), cfg.get_double("data.val_frac", 0.15),
                          synth_cfg.seed);
    store.finalize();
}

void year_splits(SampleStore* store, const Config& cfg) {
    auto parse_range = [](const std::string& text) {
        const auto dash = text.find('-');
        if (dash == std::string::npos) throw ConfigError("year range must be YYYY-YYYY: " + text);
        return std::pair<int, int>{std::stoi(text.substr(0, dash)), std::stoi(text.substr(dash + 1))};
    };
    const auto train = parse_range(cfg.get_string("data.train_years", ""));
    const auto val = parse_range(cfg.get_string("data.val_years", ""));
    const auto test = parse_range(cfg.get_string("data.test_years", ""));
    std::vector<std::string> tr, va, te;
    for (const auto& m : store->storms()) {
        const int year = std::stoi(m.first_time.substr(0, 4));
        if (year >= train.first && year <= train.second) tr.push_back(m.storm_id);
        if (year >= val.first && year <= val.second) va.push_back(m.storm_id);
        if (year >= test.first && year <= test.second) te.push_back(m.storm_id);
    }
    store->write_split("train", tr);
    store->write_split("val", va);
    store->write_split("test", te);
}

int cmd_synth(const CommonArgs& common, bool emit_fields) {
    const Config cfg = load_config(common);
    const SynthConfig synth_cfg = synth_config_from(cfg);
    fs::create_directories(common.out_dir);
    const SynthDataset ds = synthesize_dataset(synth_cfg);

    std::vector<TcTrack> tracks;
    for (const auto& storm : ds.storms) tracks.push_back(storm.track);
    write_best_track_file(tracks, (fs::path(common.out_dir) / "best_track.txt").string());
    ds.nino34.write_file((fs::path(common.out_dir) / "nino34.txt").string());
    {
        std::ofstream labels(fs::path(common.out_dir) / "labels.txt");
        for (const auto& storm : ds.storms)
            labels << storm.track.storm_id << ' ' << static_cast<int>(storm.mode) << ' '
                   << track_mode_name(storm.mode) << '\n';
    }
    if (emit_fields) {
        fs::create_directories(fs::path(common.out_dir) / "fields");
        for (const auto& storm : ds.storms)
            write_gridpack(storm.fields.fields(),
                           (fs::path(common.out_dir) / "fields" / (storm.track.storm_id + ".gridpack")).string());
    }
    write_manifest(common.out_dir, "synth", cfg, synth_cfg.seed, {});
    std::cout << "synthesized " << ds.storms.size() << " storms -> " << common.out_dir << '\n';
    return 0;
}

int cmd_build_data(const CommonArgs& common) {
    const Config cfg = load_config(common);
    const std::string store_dir =
        cfg.has("data.store") ? resolve_data_path(cfg.get_string("data.store", "")) : common.out_dir + "/store";
    fs::create_directories(common.out_dir);

    if (!cfg.has("data.best_track")) {
        // No staged archive: build straight from the synthetic generator.
        build_store_from_dataset(cfg, synth_config_from(cfg), store_dir);
        write_manifest(common.out_dir, "build-data", cfg, cfg.get_u64("synth.seed", 42), {});
        std::cout << "sample store written to " << store_dir << '\n';
        return 0;
    }

    const std::string bt_path = resolve_data_path(cfg.get_string("data.best_track", ""));
    const std::string fields_dir = resolve_data_path(cfg.get_string("data.fields_dir", ""));
    const std::string nino_path = resolve_data_path(cfg.get_string("data.nino34", ""));
    const auto tracks = parse_best_track_file(bt_path);
    const IndexTable nino = IndexTable::parse_file(nino_path, "nino34");
    std::map<std::string, int> labels;
    if (cfg.has("data.labels")) {
        std::ifstream in(resolve_data_path(cfg.get_string("data.labels", "")));
        std::string id;
        int mode;
        std::string name;
        while (in >> id >> mode >> name) labels[id] = mode;
    }

    SampleBuildConfig build_cfg;
    build_cfg.grid = cfg.get_int("data.grid", 25);
    build_cfg.half_width = cfg.get_double("data.half_width", 12.5);
    build_cfg.ocean_time_tolerance_h = cfg.get_double("data.ocean_tolerance_h", build_cfg.ocean_time_tolerance_h);

    SampleStore store = SampleStore::create(store_dir, build_cfg.grid, build_cfg.half_width);
    std::map<std::string, std::string> checksums;
    checksums["best_track"] = hex64(fnv1a64_file(bt_path));
    checksums["nino34"] = hex64(fnv1a64_file(nino_path));
    long built = 0, skipped = 0;
    for (const auto& track : tracks) {
        const fs::path field_file = fs::path(fields_dir) / (track.storm_id + ".gridpack");
        if (!fs::exists(field_file)) {
            std::cerr << "warning: no fields for storm " << track.storm_id << ", skipped\n";
            ++skipped;
            continue;
        }
        FieldLibrary fields;
        for (auto& f : read_gridpack(field_file.string())) fields.add(std::move(f));
        const TcTrack regular = regularize_six_hourly(track);
        if (regular.records.empty()) {
            ++skipped;
            continue;
        }
        const int mode = labels.count(track.storm_id) ? labels[track.storm_id] : -1;
        auto samples = build_samples(regular, fields, nino, build_cfg, mode);
        if (samples.empty()) {
            ++skipped;
            continue;
        }
        store.add_storm(track.name, mode, samples);
        ++built;
    }
    for (const auto& [k, v] : checksums) store.set_source_checksum(k, v);
    if (cfg.has("data.train_years"))
        year_splits(&store, cfg);
    else
        write_fraction_splits(&store, cfg.get_double("data.train_frac", 0.7), cfg.get_double("data.val_frac", 0.15),
                              cfg.get_u64("training.seed", 42));
    store.finalize();
    write_manifest(common.out_dir, "build-data", cfg, cfg.get_u64("training.seed", 42), checksums);
    std::cout << "store: " << built << " storms built, " << skipped << " skipped -> " << store_dir << '\n';
    return 0;
}

int cmd_train(const CommonArgs& common, const std::string& store_dir, const std::string& resume_path) {
    const Config cfg = load_config(common);
    const std::string store_path = !store_dir.empty() ? store_dir : resolve_data_path(cfg.get_string("data.store", ""));
    if (store_path.empty()) throw ConfigError("train needs --store or data.store");
    SampleStore store = SampleStore::open(store_path);

    TrainConfig tc = TrainConfig::from_config(cfg);
    tc.encoder.grid = store.grid();
    Trainer trainer(tc);
    if (!resume_path.empty()) trainer.resume_from(resume_path);
    const TrainRunResult result = trainer.train(store, common.out_dir);

    write_manifest(common.out_dir, "train", cfg, tc.seed,
                   {{"store", hex64(fnv1a64((fs::path(store_path) / "manifest.json").string()))}});
    const auto& last = result.epochs.empty() ? EpochMetrics{} : result.epochs.back();
    std::cout << "trained " << result.steps_run << " steps over " << result.epochs.size()
              << " epochs; final mean loss " << last.train_loss_mean;
    if (last.val_track24_km >= 0) std::cout << "; val 24h track error " << last.val_track24_km << " km";
    std::cout << "\ncheckpoints: " << result.last_checkpoint << '\n';
    return 0;
}

Trainer trainer_from_checkpoint(const std::string& ckpt_path, int grid) {
    const CheckpointData head = peek_checkpoint(ckpt_path);
    TrainConfig tc = TrainConfig::from_config(Config::parse_string(head.config_text));
    tc.encoder.grid = grid;
    Trainer trainer(tc);
    trainer.resume_from(ckpt_path);
    return trainer;
}

int cmd_evaluate(const CommonArgs& common, const std::string& store_dir, const std::string& ckpt_path) {
    const Config cfg = load_config(common);
    if (ckpt_path.empty() || !fs::exists(ckpt_path))
        throw ValidationError("evaluate needs --checkpoint pointing at a trained model (missing: '" + ckpt_path +
                              "')");
    const std::string store_path = !store_dir.empty() ? store_dir : resolve_data_path(cfg.get_string("data.store", ""));
    SampleStore store = SampleStore::open(store_path);
    Trainer trainer = trainer_from_checkpoint(ckpt_path, store.grid());

    const std::string split = cfg.get_string("evaluate.split", "test");
    std::vector<TcSample> samples = store.load_split(split);
    if (samples.empty()) throw ValidationError("split '" + split + "' has no samples");
    for (auto& s : samples) apply_normalization(&s, trainer.stats());

    std::vector<ForecastEnsemble> ensembles;
    const std::size_t chunk = 64;
    for (std::size_t at = 0; at < samples.size(); at += chunk) {
        std::vector<const TcSample*> batch;
        for (std::size_t i = at; i < std::min(at + chunk, samples.size()); ++i) batch.push_back(&samples[i]);
        for (auto& e : assemble_ensemble(trainer.encoders(), trainer.moe(), trainer.stats(), batch))
            ensembles.push_back(std::move(e));
    }

    std::vector<MetricsReport> reports;
    for (ScoreRule rule : {ScoreRule::top1, ScoreRule::weighted_mean, ScoreRule::best_of_k})
        reports.push_back(score(ensembles, rule));
    reports.push_back(score_persistence(ensembles));

    // Deflection stratification against the split's truth tracks.
    std::map<std::string, std::vector<DeflectionLabel>> labels;
    for (const auto& id : store.split_ids(split)) {
        const auto storm_samples = store.load_storm(id);
        // Rebuild the truth track from target rows (6 h cadence guaranteed).
        TcTrack truth;
        truth.storm_id = id;
        for (const auto& s : storm_samples) {
            if (truth.records.empty()) {
                for (int j = 0; j < kHistorySteps; ++j) {
                    TcRecord r;
                    r.timestamp = s.anchor_time.plus_hours(6 * (j - kHistorySteps + 1));
                    r.lat = s.history[static_cast<std::size_t>(j)][0];
                    r.lon = s.history[static_cast<std::size_t>(j)][1];
                    r.central_pressure = s.history[static_cast<std::size_t>(j)][2];
                    r.max_wind = s.history[static_cast<std::size_t>(j)][3];
                    truth.records.push_back(r);
                }
            }
            const TcRecord& last = truth.records.back();
            for (int j = 0; j < kTargetSteps; ++j) {
                const auto t = s.anchor_time.plus_hours(6 * (j + 1));
                if (t <= last.timestamp) continue;
                TcRecord r;
                r.timestamp = t;
                r.lat = s.target[static_cast<std::size_t>(j)][0];
                r.lon = s.target[static_cast<std::size_t>(j)][1];
                r.central_pressure = s.target[static_cast<std::size_t>(j)][2];
                r.max_wind = s.target[static_cast<std::size_t>(j)][3];
                truth.records.push_back(r);
            }
        }
        labels[id] = detect_deflection(truth);
    }
    const auto strat = stratified_report(ensembles, labels, ScoreRule::top1);
    reports.push_back(strat.first);
    reports.push_back(strat.second);

    std::vector<ReferenceRow> refs;
    if (cfg.has("evaluate.reference_file"))
        refs = load_reference_rows(resolve_data_path(cfg.get_string("evaluate.reference_file", "")));
    emit_tables(reports, refs, common.out_dir);

    const RoutingSummary routing = routing_summary(ensembles, trainer.moe().config().effective_k());
    {
        json j;
        j["routing_purity"] = routing.purity;
        j["routed_fraction"] = routing.routed_fraction;
        j["confusion"] = routing.confusion;
        std::ofstream out(fs::path(common.out_dir) / "routing.json");
        out << j.dump(2) << '\n';
    }
    write_manifest(common.out_dir, "evaluate", cfg, 0, {{"checkpoint", hex64(fnv1a64_file(ckpt_path))}});
    std::cout << "evaluated " << ensembles.size() << " samples from split '" << split << "' -> " << common.out_dir
              << '\n';
    return 0;
}

int cmd_forecast(const CommonArgs& common, const std::string& ckpt_path, const std::string& bt_path,
                 const std::string& anchor_text, const std::string& storm_id, const std::string& fields_path,
                 bool synthetic_env) {
    const Config cfg = load_config(common);
    if (ckpt_path.empty() || !fs::exists(ckpt_path))
        throw ValidationError("forecast needs --checkpoint (missing: '" + ckpt_path + "')");
    const auto tracks = parse_best_track_file(resolve_data_path(bt_path));
    if (tracks.empty()) throw ValidationError("best-track file contains no storms");
    const TcTrack* chosen = &tracks.front();
    if (!storm_id.empty()) {
        chosen = nullptr;
        for (const auto& t : tracks)
            if (t.storm_id == storm_id) chosen = &t;
        if (!chosen) throw ValidationError("storm '" + storm_id + "' not in file");
    }
    TcTrack track = regularize_six_hourly(*chosen);
    const DateTime anchor = DateTime::parse_ymdh(anchor_text);
    long anchor_idx = -1;
    for (std::size_t i = 0; i < track.records.size(); ++i)
        if (track.records[i].timestamp == anchor) anchor_idx = static_cast<long>(i);
    if (anchor_idx < 0) throw ValidationError("anchor time " + anchor_text + " not on the regularized track");
    if (anchor_idx + 1 < kHistorySteps)
        throw ValidationError("anchor needs " + std::to_string(kHistorySteps) + " history fixes, found " +
                              std::to_string(anchor_idx + 1));

    // Extend with persistence fixes when the file ends before anchor+24 h;
    // those fabricated rows are never reported as truth.
    const bool truth_available = anchor_idx + kTargetSteps < static_cast<long>(track.records.size());
    while (static_cast<long>(track.records.size()) <= anchor_idx + kTargetSteps) {
        TcRecord r = track.records.back();
        r.timestamp = r.timestamp.plus_hours(6);
        track.records.push_back(r);
    }

    FieldLibrary fields;
    if (synthetic_env) {
        fields = synthetic_stub_fields(track);
    } else {
        if (fields_path.empty()) throw ValidationError("forecast needs --fields or --synthetic-env");
        for (auto& f : read_gridpack(resolve_data_path(fields_path))) fields.add(std::move(f));
    }
    IndexTable nino("nino34");  // stub table covering the track's months
    for (int year = track.records.front().timestamp.year() - 1; year <= track.records.back().timestamp.year() + 1;
         ++year)
        for (int month = 1; month <= 12; ++month) nino.insert(year, month, 0.0);

    SampleBuildConfig build_cfg;
    const CheckpointData head = peek_checkpoint(ckpt_path);
    const Config saved_cfg = Config::parse_string(head.config_text);
    build_cfg.grid = saved_cfg.get_int("encoders.grid", 25);
    build_cfg.half_width = cfg.get_double("data.half_width", 12.5);
    auto samples = build_samples(track, fields, nino, build_cfg);
    TcSample* sample = nullptr;
    for (auto& s : samples)
        if (s.anchor_time == anchor) sample = &s;
    if (!sample) throw ValidationError("could not build a sample at the anchor");

    Trainer trainer = trainer_from_checkpoint(ckpt_path, build_cfg.grid);
    apply_normalization(sample, trainer.stats());
    auto ensembles =
        assemble_ensemble(trainer.encoders(), trainer.moe(), trainer.stats(), {sample}, EnsembleMode::select);
    ForecastEnsemble& e = ensembles.front();

    fs::create_directories(common.out_dir);
    {
        std::ofstream out(fs::path(common.out_dir) / "ensemble.csv");
        out << "storm_id,anchor_time,expert,step_h,lat,lon,pressure,wind,pi,selected\n";
        char buf[256];
        for (std::size_t g = 0; g < e.member_tracks.size(); ++g)
            for (int s = 0; s < kTargetSteps; ++s) {
                const auto& row = e.member_tracks[g][static_cast<std::size_t>(s)];
                std::snprintf(buf, sizeof(buf), "%s,%s,%zu,%d,%.4f,%.4f,%.1f,%.1f,%.6f,%d\n", e.storm_id.c_str(),
                              e.anchor_time.to_ymdh().c_str(), g, kHorizonsH[static_cast<std::size_t>(s)], row[0],
                              row[1], row[2], row[3], e.pi[g], static_cast<int>(g) == e.selected ? 1 : 0);
                out << buf;
            }
    }
    std::vector<std::array<double, 2>> history_points;
    for (long i = anchor_idx - kHistorySteps + 1; i <= anchor_idx; ++i)
        history_points.push_back({track.records[static_cast<std::size_t>(i)].lat,
                                  track.records[static_cast<std::size_t>(i)].lon});
    if (!truth_available) e.truth = {};  // suppress fabricated truth in the plot
    plot_ensemble(e, history_points, (fs::path(common.out_dir) / "forecast.png").string());
    write_manifest(common.out_dir, "forecast", cfg, 0, {{"checkpoint", hex64(fnv1a64_file(ckpt_path))}});
    std::cout << "forecast ensemble (" << e.member_tracks.size() << " members) -> " << common.out_dir << '\n';
    return 0;
}

int cmd_report(const CommonArgs& common, const std::vector<std::string>& metrics_files,
               const std::string& reference_path) {
    const Config cfg = load_config(common);
    std::vector<MetricsReport> reports;
    for (const auto& f : metrics_files)
        for (auto& r : parse_metrics_csv(resolve_data_path(f))) reports.push_back(std::move(r));
    std::vector<ReferenceRow> refs;
    std::string ref = reference_path;
    if (ref.empty() && cfg.has("evaluate.reference_file")) ref = cfg.get_string("evaluate.reference_file", "");
    if (!ref.empty()) refs = load_reference_rows(resolve_data_path(ref));
    emit_tables(reports, refs, common.out_dir);
    write_manifest(common.out_dir, "report", cfg, 0, {});
    std::cout << "report tables -> " << common.out_dir << '\n';
    return 0;
}

}  // namespace

int cli_run(const std::vector<std::string>& args) {
    CLI::App app{"tropical-cyclone track & intensity forecasting toolkit"};
    app.require_subcommand(1);

    CommonArgs synth_args, build_args, train_args, eval_args, fc_args, report_args;
    bool synth_no_fields = false;
    std::string train_store, train_resume;
    std::string eval_store, eval_ckpt;
    std::string fc_ckpt, fc_bt, fc_anchor, fc_storm, fc_fields;
    bool fc_synth_env = false;
    std::vector<std::string> report_metrics;
    std::string report_reference;

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset tree");
    add_common(synth, &synth_args);
    synth->add_flag("--no-fields", synth_no_fields, "skip writing per-storm field files");

    CLI::App* build = app.add_subcommand("build-data", "build the sample store from staged or synthetic data");
    add_common(build, &build_args);

    CLI::App* train = app.add_subcommand("train", "train the forecasting model");
    add_common(train, &train_args);
    train->add_option("--store", train_store, "sample store directory");
    train->add_option("--resume", train_resume, "checkpoint to resume from");

    CLI::App* evaluate = app.add_subcommand("evaluate", "score a trained model on a split");
    add_common(evaluate, &eval_args);
    evaluate->add_option("--store", eval_store, "sample store directory");
    evaluate->add_option("--checkpoint", eval_ckpt, "trained checkpoint");

    CLI::App* forecast = app.add_subcommand("forecast", "ensemble forecast from a best-track file");
    add_common(forecast, &fc_args);
    forecast->add_option("--checkpoint", fc_ckpt, "trained checkpoint");
    forecast->add_option("--best-track", fc_bt, "best-track file")->required();
    forecast->add_option("--anchor", fc_anchor, "anchor time YYYYMMDDHH")->required();
    forecast->add_option("--storm", fc_storm, "storm id (default: first in file)");
    forecast->add_option("--fields", fc_fields, "gridpack with environment fields");
    forecast->add_flag("--synthetic-env", fc_synth_env, "use the synthetic environment stub");

    CLI::App* report = app.add_subcommand("report", "merge metric tables and reference rows");
    add_common(report, &report_args);
    report->add_option("--metrics", report_metrics, "metrics.csv files (repeatable)");
    report->add_option("--reference", report_reference, "reference-values file");

    std::vector<std::string> argv_vec = args;
    std::vector<char*> argv;
    std::string prog = "tcf";
    argv.push_back(prog.data());
    for (auto& a : argv_vec) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) return cmd_synth(synth_args, !synth_no_fields);
        if (build->parsed()) return cmd_build_data(build_args);
        if (train->parsed()) return cmd_train(train_args, train_store, train_resume);
        if (evaluate->parsed()) return cmd_evaluate(eval_args, eval_store, eval_ckpt);
        if (forecast->parsed())
            return cmd_forecast(fc_args, fc_ckpt, fc_bt, fc_anchor, fc_storm, fc_fields, fc_synth_env);
        if (report->parsed()) return cmd_report(report_args, report_metrics, report_reference);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const IncompatibleError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        std::cerr << "runtime failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

}  // namespace tcf
