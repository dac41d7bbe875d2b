#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "mcn/harness/report.hpp"
#include "mcn/synth/synth.hpp"

namespace fs = std::filesystem;
using namespace mcn;

namespace {

KvConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    KvConfig kv = path.empty() ? KvConfig() : KvConfig::load(path);
    for (const auto& kvpair : overrides) {
        const auto eq = kvpair.find('=');
        if (eq == std::string::npos)
            throw InputError("--set expects key=value, got '" + kvpair + "'");
        kv.set(kvpair.substr(0, eq), kvpair.substr(eq + 1));
    }
    return kv;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path);
    os << text;
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read " + path);
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(path + ": " + e.what());
    }
}

const ClipInfo& find_clip(const Dataset& ds, const std::string& clip_id) {
    for (const auto& info : ds.clips)
        if (info.clip_id == clip_id) return info;
    throw InputError("clip '" + clip_id + "' not found in " + ds.root);
}

int cmd_synth(const std::string& out, const KvConfig& kv, int workers) {
    const SynthSpec spec = SynthSpec::from_kv(kv);
    const SynthResult res = generate_dataset(spec, out, workers);
    std::cout << "wrote " << res.clips.size() << " clips (" << spec.n_verbs * spec.n_nouns
              << " classes) to " << out << "\n"
              << "fingerprint " << dataset_fingerprint(out) << "\n";
    return 0;
}

int cmd_train(const std::string& data, const std::string& out, const KvConfig& kv,
              const std::string& log_path) {
    const Dataset ds = load_dataset_index(data);
    KvConfig mkv = kv;
    if (!mkv.has("n_actions")) mkv.set("n_actions", std::to_string(ds.n_actions));
    const ModelConfig mc = model_config_from_kv(mkv);
    if (ds.n_actions > mc.n_actions)
        throw ConfigError("dataset has " + std::to_string(ds.n_actions) +
                          " actions but the model only " + std::to_string(mc.n_actions));
    const TrainConfig tc = TrainConfig::from_kv(kv);
    const uint64_t model_seed =
        static_cast<uint64_t>(kv.get_int("model_seed", static_cast<int>(tc.seed)));

    McnModel model(mc, model_seed);
    Trainer trainer(model, ds, tc);
    const TrainResult res = trainer.run([](const EpochRecord& r) {
        std::cout << "stage " << r.stage << " epoch " << r.epoch << " loss " << r.loss << "\n";
    });
    save_checkpoint(out, model, res.provenance);
    std::cout << "checkpoint written to " << out << "\n";
    if (!log_path.empty()) write_text(log_path, train_result_to_json(res).dump(2) + "\n");
    return 0;
}

int cmd_eval(const std::string& data, const std::string& ckpt, const std::string& out,
             const KvConfig& kv, bool table) {
    const Dataset ds = load_dataset_index(data);
    const McnModel model = load_checkpoint(ckpt);
    const EvalConfig ec = EvalConfig::from_kv(kv);
    const EvalReport rep = evaluate(model, ds, ec);
    if (!out.empty()) write_text(out, report_to_json(rep).dump(2) + "\n");
    if (table || out.empty()) std::cout << render_report_table(rep);
    return 0;
}

int cmd_infer(const std::string& data, const std::string& ckpt, const std::string& clip_id,
              const KvConfig& kv, const std::string& trace_path, const std::string& heatmap_dir) {
    const Dataset ds = load_dataset_index(data);
    const McnModel model = load_checkpoint(ckpt);
    InferenceConfig icfg;
    icfg.e_threshold = kv.get_double("e_threshold", icfg.e_threshold);
    icfg.max_iter = kv.get_int("max_iter", icfg.max_iter);
    icfg.flip_average = kv.get_int("flip_average", icfg.flip_average ? 1 : 0) != 0;

    const ClipSample s = prepare_eval_sample(load_clip(ds.root, find_clip(ds, clip_id)), model.cfg);
    const InferenceResult res = joint_infer(s, model, icfg);
    const int pred = argmax_index(res.l);
    std::cout << "clip " << clip_id << ": action " << pred << " (gt " << s.action_id << "), "
              << res.trace.iterations.size() << " iterations, " << res.trace.terminated_by << "\n";
    for (const auto& p : predict_gaze_point(res.g))
        std::cout << "frame " << p.frame_idx << ": gaze (" << p.x << ", " << p.y << ")\n";
    if (!trace_path.empty()) write_text(trace_path, serialize_trace(res.trace));
    if (!heatmap_dir.empty()) {
        fs::create_directories(heatmap_dir);
        for (int f = 0; f < s.n_frames(); ++f)
            png::write_file((fs::path(heatmap_dir) / (mcn::detail::frame_name(f) + ".png")).string(),
                            heatmap_overlay(s.rgb, f, res.g));
    }
    return 0;
}

int cmd_affinity(const std::string& data, const std::string& ckpt, const std::string& out,
                 const KvConfig& kv, bool table) {
    const Dataset ds = load_dataset_index(data);
    const McnModel model = load_checkpoint(ckpt);
    const AffinityResult res =
        action_gaze_affinity(model, ds, kv.get_str("split", "test"), kv.get_int("workers", 0),
                             kv.get_int("limit", 0), kv.get_int("top_m", 0));
    if (!out.empty()) write_text(out, affinity_to_json(res).dump(2) + "\n");
    if (table || out.empty()) std::cout << render_affinity_table(res);
    return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out, bool table) {
    std::vector<EvalReport> parts;
    for (const auto& path : inputs) {
        EvalReport rep = report_from_json(read_json(path));
        verify_report(rep);
        parts.push_back(std::move(rep));
    }
    const EvalReport merged = parts.size() == 1 ? parts.front() : merge_reports(parts);
    if (!out.empty()) write_text(out, report_to_json(merged).dump(2) + "\n");
    if (table || out.empty()) std::cout << render_report_table(merged);
    std::cout << "verified " << parts.size() << " report" << (parts.size() == 1 ? "" : "s")
              << ": summaries match their per-frame records\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint egocentric gaze and action estimation toolkit"};
    app.require_subcommand(1);

    std::string config_path, data, out, ckpt, clip_id, trace_path, heatmap_dir, log_path;
    std::string variants_csv, split_name;
    std::vector<std::string> overrides, report_inputs;
    int workers = 0, top_m = 0;
    double fov = 0.0;
    bool table = false, flip_avg = false;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth->add_option("--out", out, "Dataset directory")->required();
    synth->add_option("--config", config_path, "key=value config file");
    synth->add_option("--set", overrides, "Override a config key (key=value)");
    synth->add_option("--workers", workers, "Worker threads (0 = hardware)");

    auto* train = app.add_subcommand("train", "Train a model on a dataset");
    train->add_option("--data", data, "Dataset directory")->required();
    train->add_option("--out", out, "Checkpoint output path")->required();
    train->add_option("--config", config_path, "key=value config file");
    train->add_option("--set", overrides, "Override a config key (key=value)");
    train->add_option("--log", log_path, "Write per-epoch losses as JSON");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval->add_option("--data", data, "Dataset directory")->required();
    eval->add_option("--checkpoint", ckpt, "Checkpoint path")->required();
    eval->add_option("--out", out, "Report JSON output path");
    eval->add_option("--config", config_path, "key=value config file");
    eval->add_option("--set", overrides, "Override a config key (key=value)");
    eval->add_option("--variants", variants_csv, "Comma-separated variant list, or 'all'");
    eval->add_option("--split", split_name, "Dataset split to evaluate");
    eval->add_option("--fov", fov, "Horizontal field of view in degrees");
    eval->add_flag("--flip-average", flip_avg, "Average predictions with the mirrored clip");
    eval->add_flag("--table", table, "Print the text table");

    auto* infer = app.add_subcommand("infer", "Joint inference on one clip");
    infer->add_option("--data", data, "Dataset directory")->required();
    infer->add_option("--checkpoint", ckpt, "Checkpoint path")->required();
    infer->add_option("--clip", clip_id, "Clip id")->required();
    infer->add_option("--config", config_path, "key=value config file");
    infer->add_option("--set", overrides, "Override a config key (key=value)");
    infer->add_option("--trace,--trace-out", trace_path, "Write the iteration trace");
    infer->add_option("--heatmaps,--heatmaps-out", heatmap_dir, "Write per-frame gaze overlays");

    auto* affinity = app.add_subcommand("affinity", "Cross-conditioned action-gaze affinity");
    affinity->add_option("--data", data, "Dataset directory")->required();
    affinity->add_option("--checkpoint", ckpt, "Checkpoint path")->required();
    affinity->add_option("--out", out, "Affinity JSON output path");
    affinity->add_option("--config", config_path, "key=value config file");
    affinity->add_option("--set", overrides, "Override a config key (key=value)");
    affinity->add_option("--split", split_name, "Dataset split to analyse");
    affinity->add_option("--top-m", top_m, "Restrict to the m most frequent classes");
    affinity->add_flag("--table", table, "Print the text table");

    auto* report = app.add_subcommand("report", "Verify, merge and render eval reports");
    report->add_option("--in", report_inputs, "Eval report JSON inputs")->required();
    report->add_option("--out", out, "Merged report output path");
    report->add_flag("--table", table, "Print the text table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    if (!variants_csv.empty()) overrides.push_back("variants=" + variants_csv);
    if (!split_name.empty()) overrides.push_back("split=" + split_name);
    if (fov > 0.0) overrides.push_back("fov=" + std::to_string(fov));
    if (flip_avg) overrides.push_back("flip_average=1");
    if (top_m > 0) overrides.push_back("top_m=" + std::to_string(top_m));

    try {
        const KvConfig kv = load_config(config_path, overrides);
        if (synth->parsed()) return cmd_synth(out, kv, workers);
        if (train->parsed()) return cmd_train(data, out, kv, log_path);
        if (eval->parsed()) return cmd_eval(data, ckpt, out, kv, table);
        if (infer->parsed()) return cmd_infer(data, ckpt, clip_id, kv, trace_path, heatmap_dir);
        if (affinity->parsed()) return cmd_affinity(data, ckpt, out, kv, table);
        if (report->parsed()) return cmd_report(report_inputs, out, table);
        return 1;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const IntegrityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
