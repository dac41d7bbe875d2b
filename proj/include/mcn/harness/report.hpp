#pragma once

#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "mcn/harness/eval.hpp"
#include "mcn/harness/trainer.hpp"

namespace mcn {

inline nlohmann::json report_to_json(const EvalReport& rep) {
    nlohmann::json j;
    j["dataset"] = {{"root", rep.dataset_root},
                    {"fingerprint", rep.fingerprint},
                    {"split", rep.split},
                    {"preset", rep.preset},
                    {"n_actions", rep.n_actions}};
    j["config"] = {{"variants", rep.config.variants}, {"split", rep.config.split},
                   {"flip_average", rep.config.flip_average},
                   {"e_threshold", rep.config.e_threshold}, {"max_iter", rep.config.max_iter},
                   {"limit", rep.config.limit}};
    nlohmann::json variants = nlohmann::json::object();
    for (const auto& vr : rep.variants) {
        nlohmann::json v;
        v["loop"] = vr.loop;
        nlohmann::json summary = {{"aae_deg", vr.aae_deg},
                                  {"auc", vr.auc},
                                  {"acc_instance", vr.acc_instance},
                                  {"acc_class", vr.acc_class},
                                  {"frames_scored", vr.frames_scored}};
        if (vr.loop) {
            summary["convergence_rate"] = vr.convergence_rate;
            nlohmann::json hist = nlohmann::json::object();
            for (const auto& [iters, count] : vr.iteration_hist) hist[std::to_string(iters)] = count;
            summary["iteration_hist"] = hist;
        }
        v["summary"] = summary;
        nlohmann::json clips = nlohmann::json::array();
        for (const auto& cs : vr.clips) {
            nlohmann::json c = {{"clip_id", cs.clip_id},
                                {"action_gt", cs.action_gt},
                                {"action_pred", cs.action_pred},
                                {"iterations", cs.iterations},
                                {"converged", cs.converged}};
            nlohmann::json frames = nlohmann::json::array();
            for (const auto& fr : cs.frames) {
                nlohmann::json f = {{"frame", fr.frame},
                                    {"pred_x", fr.pred_x},
                                    {"pred_y", fr.pred_y},
                                    {"gt_valid", fr.gt_valid}};
                if (fr.gt_valid) {
                    f["gt_x"] = fr.gt_x;
                    f["gt_y"] = fr.gt_y;
                    f["aae_deg"] = fr.aae_deg;
                    f["auc"] = fr.auc;
                }
                frames.push_back(std::move(f));
            }
            c["frames"] = std::move(frames);
            clips.push_back(std::move(c));
        }
        v["clips"] = std::move(clips);
        variants[vr.name] = std::move(v);
    }
    j["variants"] = std::move(variants);
    return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport rep;
    try {
        const auto& d = j.at("dataset");
        rep.dataset_root = d.at("root").get<std::string>();
        rep.fingerprint = d.at("fingerprint").get<std::string>();
        rep.split = d.at("split").get<std::string>();
        rep.preset = d.at("preset").get<std::string>();
        rep.n_actions = d.at("n_actions").get<int>();
        const auto& c = j.at("config");
        rep.config.variants = c.at("variants").get<std::vector<std::string>>();
        rep.config.split = c.at("split").get<std::string>();
        rep.config.flip_average = c.at("flip_average").get<bool>();
        rep.config.e_threshold = c.at("e_threshold").get<double>();
        rep.config.max_iter = c.at("max_iter").get<int>();
        rep.config.limit = c.at("limit").get<int>();
        for (const auto& [name, v] : j.at("variants").items()) {
            VariantResult vr;
            vr.name = name;
            vr.loop = v.at("loop").get<bool>();
            const auto& s = v.at("summary");
            vr.aae_deg = s.at("aae_deg").get<double>();
            vr.auc = s.at("auc").get<double>();
            vr.acc_instance = s.at("acc_instance").get<double>();
            vr.acc_class = s.at("acc_class").get<double>();
            vr.frames_scored = s.at("frames_scored").get<int64_t>();
            if (vr.loop) {
                vr.convergence_rate = s.at("convergence_rate").get<double>();
                for (const auto& [k, n] : s.at("iteration_hist").items())
                    vr.iteration_hist[std::stoi(k)] = n.get<int64_t>();
            }
            for (const auto& c2 : v.at("clips")) {
                ClipScore cs;
                cs.clip_id = c2.at("clip_id").get<std::string>();
                cs.action_gt = c2.at("action_gt").get<int>();
                cs.action_pred = c2.at("action_pred").get<int>();
                cs.iterations = c2.at("iterations").get<int>();
                cs.converged = c2.at("converged").get<bool>();
                for (const auto& f : c2.at("frames")) {
                    FrameScore fr;
                    fr.frame = f.at("frame").get<int>();
                    fr.pred_x = f.at("pred_x").get<double>();
                    fr.pred_y = f.at("pred_y").get<double>();
                    fr.gt_valid = f.at("gt_valid").get<bool>();
                    if (fr.gt_valid) {
                        fr.gt_x = f.at("gt_x").get<double>();
                        fr.gt_y = f.at("gt_y").get<double>();
                        fr.aae_deg = f.at("aae_deg").get<double>();
                        fr.auc = f.at("auc").get<double>();
                    }
                    cs.frames.push_back(fr);
                }
                vr.clips.push_back(std::move(cs));
            }
            rep.variants.push_back(std::move(vr));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("malformed eval report: ") + e.what());
    }
    return rep;
}

/// Recompute every summary from the per-frame dump and require agreement
/// with the stored figures to within tol.
inline void verify_report(const EvalReport& rep, double tol = 1e-9) {
    for (const auto& vr : rep.variants) {
        VariantResult re = vr;
        summarize_variant(re, rep.n_actions);
        const auto close = [tol](double a, double b) { return std::abs(a - b) <= tol; };
        if (!close(re.aae_deg, vr.aae_deg) || !close(re.auc, vr.auc) ||
            !close(re.acc_instance, vr.acc_instance) || !close(re.acc_class, vr.acc_class) ||
            re.frames_scored != vr.frames_scored ||
            (vr.loop && (!close(re.convergence_rate, vr.convergence_rate) ||
                         re.iteration_hist != vr.iteration_hist)))
            throw IntegrityError("report: stored summary for variant '" + vr.name +
                                 "' does not match its per-frame records");
    }
}

/// Concatenate the clip records of reports over the same dataset and variant
/// set (e.g. sharded runs) and recompute the summaries.
inline EvalReport merge_reports(const std::vector<EvalReport>& parts) {
    if (parts.empty()) throw InputError("report merge: no inputs");
    EvalReport out = parts.front();
    for (size_t i = 1; i < parts.size(); ++i) {
        const EvalReport& p = parts[i];
        if (p.fingerprint != out.fingerprint || p.preset != out.preset ||
            p.n_actions != out.n_actions)
            throw IntegrityError("report merge: reports come from different datasets or models");
        if (p.variants.size() != out.variants.size())
            throw IntegrityError("report merge: variant sets differ");
        for (size_t v = 0; v < out.variants.size(); ++v) {
            if (p.variants[v].name != out.variants[v].name)
                throw IntegrityError("report merge: variant sets differ");
            out.variants[v].clips.insert(out.variants[v].clips.end(), p.variants[v].clips.begin(),
                                         p.variants[v].clips.end());
        }
        if (p.split != out.split) out.split += "+" + p.split;
    }
    for (auto& vr : out.variants) summarize_variant(vr, out.n_actions);
    return out;
}

inline std::string render_report_table(const EvalReport& rep) {
    std::ostringstream os;
    os << "dataset " << rep.dataset_root << " (split " << rep.split << ", fingerprint "
       << rep.fingerprint << ", " << rep.n_actions << " actions)\n";
    os << std::left << std::setw(14) << "variant" << std::right << std::setw(10) << "AAE(deg)"
       << std::setw(8) << "AUC" << std::setw(11) << "acc(inst)" << std::setw(12) << "acc(class)"
       << std::setw(8) << "conv" << std::setw(8) << "frames" << "\n";
    os << std::string(71, '-') << "\n";
    os << std::fixed;
    for (const auto& vr : rep.variants) {
        os << std::left << std::setw(14) << vr.name << std::right << std::setprecision(3)
           << std::setw(10) << vr.aae_deg << std::setw(8) << vr.auc << std::setw(11)
           << vr.acc_instance << std::setw(12) << vr.acc_class;
        if (vr.loop)
            os << std::setw(8) << std::setprecision(2) << vr.convergence_rate;
        else
            os << std::setw(8) << "-";
        os << std::setw(8) << vr.frames_scored << "\n";
    }
    return os.str();
}

inline nlohmann::json affinity_to_json(const AffinityResult& res) {
    const int n = res.aae.dim(0);
    nlohmann::json j;
    j["classes"] = res.classes;
    nlohmann::json aae = nlohmann::json::array(), aff = nlohmann::json::array();
    for (int i = 0; i < n; ++i) {
        nlohmann::json r1 = nlohmann::json::array(), r2 = nlohmann::json::array();
        for (int k = 0; k < n; ++k) {
            r1.push_back(res.aae[int64_t(i) * n + k]);
            r2.push_back(res.affinity[int64_t(i) * n + k]);
        }
        aae.push_back(std::move(r1));
        aff.push_back(std::move(r2));
    }
    j["aae"] = std::move(aae);
    j["affinity"] = std::move(aff);
    j["frames_per_class"] = res.frames_per_class;
    return j;
}

inline std::string render_affinity_table(const AffinityResult& res) {
    const int n = res.affinity.dim(0);
    std::ostringstream os;
    os << "action affinity (rows: conditioned action, cols: true class)\n";
    os << std::fixed << std::setprecision(2);
    os << "      ";
    for (int k = 0; k < n; ++k) os << std::setw(6) << res.classes[k];
    os << "\n";
    for (int i = 0; i < n; ++i) {
        os << std::setw(4) << res.classes[i] << " |";
        for (int k = 0; k < n; ++k) os << std::setw(6) << res.affinity[int64_t(i) * n + k];
        os << "\n";
    }
    double diag = 0.0, off = 0.0;
    int offn = 0;
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            if (i == k)
                diag += res.affinity[int64_t(i) * n + k];
            else {
                off += res.affinity[int64_t(i) * n + k];
                ++offn;
            }
        }
    os << "mean diagonal " << std::setprecision(3) << diag / n << ", mean off-diagonal "
       << (offn ? off / offn : 0.0) << "\n";
    return os.str();
}

inline nlohmann::json train_result_to_json(const TrainResult& res) {
    nlohmann::json j;
    j["provenance"] = {{"stages", res.provenance.stages},
                       {"epoch", res.provenance.epoch},
                       {"seed", res.provenance.seed}};
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& r : res.epochs)
        epochs.push_back({{"stage", r.stage}, {"epoch", r.epoch}, {"loss", r.loss}});
    j["epochs"] = std::move(epochs);
    return j;
}

}  // namespace mcn
