// Integration gate for the full pipeline. Each criterion prints exactly one
// PASS/FAIL line (plus indented detail); the exit code is the failure count.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mcn/harness/checkpoint.hpp"
#include "mcn/harness/report.hpp"
#include "mcn/harness/trainer.hpp"
#include "mcn/infer/inference.hpp"
#include "mcn/model/mcn.hpp"
#include "mcn/synth/synth.hpp"
#include "test_util.hpp"

using namespace mcn;
namespace fs = std::filesystem;

namespace {

// Training schedule for the synthetic-corpus criteria.
constexpr int kStage1Epochs = 4;
constexpr int kStage2Epochs = 2;
constexpr int kStage3Epochs = 2;
constexpr int kBatch = 4;
constexpr double kLrAction = 1e-3;
constexpr double kLrGaze = 1e-3;
const std::vector<uint64_t> kSeeds = {1, 2, 3};
const std::vector<std::string> kVariants = {"full",     "saliency",    "action",     "action_gt",
                                            "wo_gaze",  "center_bias", "gaze_region"};
constexpr double kEThreshold = 0.7;  // degrees; one compact-grid cell at this scale
constexpr int kMaxIter = 10;

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::runtime_error(msg);
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<char> slurp_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    require(bool(f), "cannot open " + p.string());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

bool trees_identical(const fs::path& a, const fs::path& b, std::string* why) {
    auto list = [](const fs::path& root) {
        std::vector<fs::path> rel;
        for (const auto& e : fs::recursive_directory_iterator(root))
            if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), root));
        std::sort(rel.begin(), rel.end());
        return rel;
    };
    const auto la = list(a), lb = list(b);
    if (la != lb) {
        *why = "file lists differ";
        return false;
    }
    for (const auto& r : la)
        if (slurp_bytes(a / r) != slurp_bytes(b / r)) {
            *why = "bytes differ: " + r.string();
            return false;
        }
    return true;
}

// ---------------------------------------------------------------------------
// Shared corpus + trained models for the end-to-end criteria. Built once,
// lazily, so earlier criteria stay fast and a training failure surfaces in
// every criterion that depends on it.

struct SharedSetup {
    std::unique_ptr<testutil::TempDir> dir;
    SynthSpec spec;
    Dataset data;
    std::vector<std::unique_ptr<McnModel>> models;
    std::vector<Provenance> provs;
    std::vector<EvalReport> reports;
    double build_seconds = 0.0;
    std::vector<std::string> train_notes;
};

SharedSetup& shared_setup() {
    static SharedSetup s;
    static std::string error;
    static bool attempted = false;
    if (attempted) {
        if (!error.empty()) throw std::runtime_error("shared setup failed earlier: " + error);
        return s;
    }
    attempted = true;
    try {
        const auto t0 = std::chrono::steady_clock::now();
        s.dir = std::make_unique<testutil::TempDir>("acceptance");
        const std::string root = s.dir->sub("corpus");
        generate_dataset(s.spec, root);
        s.data = load_dataset_index(root);

        EvalConfig ec;
        ec.variants = kVariants;
        ec.split = "test";
        ec.e_threshold = kEThreshold;
        ec.max_iter = kMaxIter;

        for (uint64_t seed : kSeeds) {
            auto model = std::make_unique<McnModel>(toy_config(), 1000 + seed);
            TrainConfig tc;
            tc.stage1_epochs = kStage1Epochs;
            tc.stage2_epochs = kStage2Epochs;
            tc.stage3_epochs = kStage3Epochs;
            tc.batch = kBatch;
            tc.lr_action = kLrAction;
            tc.lr_gaze = kLrGaze;
            tc.seed = seed;
            Trainer trainer(*model, s.data, tc);
            const TrainResult tr = trainer.run();
            std::ostringstream note;
            note << "seed " << seed << " losses:";
            for (const auto& ep : tr.epochs)
                note << " s" << ep.stage << "e" << ep.epoch << "=" << fmt("%.3f", ep.loss);
            s.train_notes.push_back(note.str());
            s.provs.push_back(tr.provenance);
            s.reports.push_back(evaluate(*model, s.data, ec));
            s.models.push_back(std::move(model));
        }
        s.build_seconds = seconds_since(t0);
        return s;
    } catch (const std::exception& e) {
        error = e.what();
        s.dir.reset();
        throw std::runtime_error("shared setup failed: " + error);
    }
}

const VariantResult& variant_of(const EvalReport& rep, const std::string& name) {
    for (const auto& v : rep.variants)
        if (v.name == name) return v;
    throw std::runtime_error("report lacks variant " + name);
}

// ---------------------------------------------------------------------------
// Criterion 1: two-way pooling against an independent brute-force oracle.

void criterion_pooling(std::vector<std::string>& notes) {
    const auto t0 = std::chrono::steady_clock::now();

    Tensor ex({1, 1, 4, 4});
    for (int i = 0; i < 16; ++i) ex[i] = i + 1;
    Tensor vg, vn;
    two_way_pool(ex, {GazeCell{1, 1}}, 1, vg, vn);
    require(std::abs(vg[0] - 6.0) <= 1e-12, "worked example gaze mean");
    require(std::abs(vn[0] - 82.0 / 7.0) <= 1e-12, "worked example non-gaze mean");

    Tensor cmap({3, 2, 5, 5});
    cmap.fill(3.25);
    two_way_pool(cmap, {GazeCell{2, 2}, GazeCell{0, 4}}, 1, vg, vn);
    for (int64_t i = 0; i < vg.numel(); ++i) {
        require(vg[i] == 3.25, "constant map: gaze mean must be exact");
        require(vn[i] == 3.25, "constant map: non-gaze mean must be exact");
    }

    Rng rng(77);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        int c, tp, hp, wp, r;
        std::vector<GazeCell> cells;
        for (;;) {
            c = rng.uniform_int(1, 5);
            tp = rng.uniform_int(1, 4);
            hp = rng.uniform_int(2, 9);
            wp = rng.uniform_int(2, 9);
            r = rng.uniform_int(1, 3);
            cells.clear();
            bool ok = true;
            for (int t = 0; t < tp; ++t) {
                cells.push_back({rng.uniform_int(0, wp - 1), rng.uniform_int(0, hp - 1)});
                if (region_counts(hp, wp, cells.back(), r).rest == 0) ok = false;
            }
            if (ok) break;
        }
        const Tensor fp = testutil::random_tensor({c, tp, hp, wp}, rng, -5.0, 5.0);
        two_way_pool(fp, cells, r, vg, vn);
        for (int t = 0; t < tp; ++t) {
            const int y0 = std::max(0, cells[t].y - r), y1 = std::min(hp - 1, cells[t].y + r);
            const int x0 = std::max(0, cells[t].x - r), x1 = std::min(wp - 1, cells[t].x + r);
            for (int ch = 0; ch < c; ++ch) {
                double win = 0.0, rest = 0.0;
                int win_n = 0, rest_n = 0;
                for (int i = 0; i < hp; ++i)
                    for (int j = 0; j < wp; ++j) {
                        const double v = fp[((int64_t(ch) * tp + t) * hp + i) * wp + j];
                        if (i >= y0 && i <= y1 && j >= x0 && j <= x1)
                            win += v, ++win_n;
                        else
                            rest += v, ++rest_n;
                    }
                worst = std::max(worst, std::abs(vg[int64_t(ch) * tp + t] - win / win_n));
                worst = std::max(worst, std::abs(vn[int64_t(ch) * tp + t] - rest / rest_n));
            }
        }
    }
    require(worst <= 1e-9, fmt("brute-force mismatch %.3g", worst));
    const double secs = seconds_since(t0);
    notes.push_back(fmt("1000 random instances, worst |diff| %.2e, %.2fs", worst, secs));
    require(secs < 10.0, fmt("too slow: %.1fs (limit 10s)", secs));
}

// ---------------------------------------------------------------------------
// Criterion 2: full-scale forward pass, every stage shape-checked.

void require_shape(const Tensor& t, const std::vector<int>& want, const std::string& what) {
    if (t.shape() == want) return;
    std::ostringstream os;
    os << what << " shape (";
    for (size_t i = 0; i < t.shape().size(); ++i) os << (i ? "," : "") << t.shape()[i];
    os << ") want (";
    for (size_t i = 0; i < want.size(); ++i) os << (i ? "," : "") << want[i];
    os << ")";
    throw std::runtime_error(os.str());
}

void criterion_full_scale(std::vector<std::string>& notes) {
    const auto t0 = std::chrono::steady_clock::now();
    const ModelConfig cfg = paper_scale_config();
    McnModel model(cfg, 5);
    require(model.dims.pool_kernel == std::array<int, 3>{8, 32, 32}, "pooling kernel dims");

    Rng rng(6);
    const Tensor rgb = testutil::random_tensor({3, cfg.n_frames, cfg.height, cfg.width}, rng, 0.0, 1.0);
    const Tensor flow =
        testutil::random_tensor({2, cfg.n_frames, cfg.height, cfg.width}, rng, 0.0, 255.0);

    const Tensor f = model.encoder.encode_eval(rgb, flow);
    require_shape(f, {1024, 6, 14, 14}, "joint features");
    const Tensor fc = model.encoder.encode_compact_eval(f);
    require_shape(fc, {1024, 3, 7, 7}, "compact features");

    const Tensor gs = model.predict_saliency(f);
    require_shape(gs, {cfg.n_frames, cfg.height, cfg.width}, "saliency maps");

    Tensor l({cfg.n_actions});
    l.fill(1.0 / cfg.n_actions);
    const Tensor bank = model.kgen.forward(l, nullptr);
    require_shape(bank, {64, 1024, 3, 5, 5}, "kernel bank");
    const Tensor ftil = apply_action_kernels(bank, f);
    require_shape(ftil, {64, 6, 14, 14}, "action-filtered features");

    const Tensor ga = model.predict_action_gaze(l, f);
    require_shape(ga, {cfg.n_frames, cfg.height, cfg.width}, "action-conditioned maps");
    const Tensor g = model.fuse(gs, ga);
    require_shape(g, {cfg.n_frames, cfg.height, cfg.width}, "fused maps");
    for (int64_t i = 0; i < g.numel(); ++i)
        require(g[i] >= 0.0 && g[i] <= 1.0, "fused map must stay in [0,1]");

    const PooledGaze pg = extract_gaze_points(g, model.dims.compact);
    require_shape(pg.pooled, {3, 7, 7}, "pooled gaze");
    require(static_cast<int>(pg.cells.size()) == 3, "one gaze cell per temporal slice");
    Tensor vg, vn;
    two_way_pool(fc, pg.cells, cfg.pool_radius, vg, vn);
    require_shape(vg, {1024, 3}, "gaze-pooled features");

    const Tensor lhat = model.classify_from_gaze(g, fc);
    require_shape(lhat, {cfg.n_actions}, "action likelihood");
    double sum = 0.0;
    for (int64_t i = 0; i < lhat.numel(); ++i) sum += lhat[i];
    require(std::abs(sum - 1.0) <= 1e-9, "likelihood must normalize");

    std::map<std::string, std::vector<int>> widths;
    model.classifier.visit_params(
        "clf", [&](const std::string& n, Tensor& v, Tensor&) { widths[n] = v.shape(); });
    require(widths.at("clf.fg.w") == std::vector<int>{256, 1024}, "gaze branch width");
    require(widths.at("clf.fn.w") == std::vector<int>{128, 1024}, "non-gaze branch width");
    require(widths.at("clf.flogit.w") == std::vector<int>{106, 384}, "logit head width");

    const double secs = seconds_since(t0);
    notes.push_back(fmt("full pipeline on (%d,%d,%d) frames in %.1fs", cfg.n_frames, cfg.height,
                        cfg.width, secs));
    require(secs < 120.0, fmt("too slow: %.1fs (limit 120s)", secs));
}

// ---------------------------------------------------------------------------
// Criterion 3: analytic gradients vs finite differences on the toy preset.

void criterion_gradients(std::vector<std::string>& notes) {
    {
        McnModel model(toy_config(), 31);
        Rng rng(32);
        const Tensor rgb = testutil::random_tensor({3, 8, 32, 32}, rng, 0.0, 1.0);
        const Tensor flow = testutil::random_tensor({2, 8, 32, 32}, rng, 0.0, 255.0);
        const std::vector<GazeCell> cells(model.dims.compact[0], GazeCell{1, 2});
        const int label = 7;

        auto params = testutil::collect_module_params(model.encoder, "encoder");
        auto clf = testutil::collect_module_params(model.classifier, "classifier");
        params.insert(params.end(), clf.begin(), clf.end());

        auto loss_fn = [&]() {
            TwoStreamEncoder::Cache ecache;
            nn::ConvBlock::Cache ccache;
            const Tensor f = model.encoder.encode(rgb, flow, &ecache, true);
            const Tensor fc = model.encoder.encode_compact(f, &ccache, true);
            Tensor v_g, v_n;
            two_way_pool(fc, cells, model.cfg.pool_radius, v_g, v_n);
            const Tensor logits = model.classifier.forward(v_g, v_n, nullptr);
            return nn::cross_entropy_with_logits(logits, label, nullptr);
        };
        auto compute = [&]() {
            for (auto& p : params) p.grad->fill(0.0);
            TwoStreamEncoder::Cache ecache;
            nn::ConvBlock::Cache ccache;
            ActionClassifier::Cache clcache;
            const Tensor f = model.encoder.encode(rgb, flow, &ecache, true);
            const Tensor fc = model.encoder.encode_compact(f, &ccache, true);
            Tensor v_g, v_n;
            two_way_pool(fc, cells, model.cfg.pool_radius, v_g, v_n);
            const Tensor logits = model.classifier.forward(v_g, v_n, &clcache);
            Tensor gz;
            nn::cross_entropy_with_logits(logits, label, &gz);
            auto [gv_g, gv_n] = model.classifier.backward(gz, clcache);
            const Tensor gfc = two_way_pool_backward(gv_g, gv_n, cells, model.cfg.pool_radius,
                                                     {fc.dim(0), fc.dim(1), fc.dim(2), fc.dim(3)});
            const Tensor gf = model.encoder.compact_backward(gfc, ccache);
            model.encoder.backward(gf, ecache);
        };
        const auto rep = testutil::fd_check(params, loss_fn, compute, 110, rng);
        notes.push_back(fmt("action path: %d coords, worst rel %.2e (%s), %d kinks skipped",
                            rep.checked, rep.worst_rel, rep.worst_coord.c_str(), rep.skipped));
        require(rep.checked >= 100, "action path: fewer than 100 clean coordinates");
        require(rep.failed == 0, fmt("action path: %d coords disagree", rep.failed));
    }
    {
        McnModel model(toy_config(), 33);
        Rng rng(34);
        const Tensor f = testutil::random_tensor({64, 2, 8, 8}, rng);
        Tensor l = testutil::random_tensor({20}, rng, 0.0, 1.0);
        Tensor gl({20});
        std::vector<GazeGt> gaze(8);
        for (int i = 0; i < 8; ++i) gaze[i] = {10.0 + i, 20.0, true};
        Tensor valid;
        const Tensor gt = make_gt_map_stack(gaze, 32, 32, model.cfg.sigma_gt, &valid);

        auto params = testutil::collect_module_params(model.kgen, "kgen");
        params.push_back(testutil::ParamRef{"l", &l, &gl});

        auto loss_fn = [&]() {
            const Tensor bank = model.kgen.forward(l, nullptr);
            const Tensor logits = model.action_dec.forward(apply_action_kernels(bank, f), nullptr, true);
            return gaze_map_loss(logits, gt, valid, nullptr).loss;
        };
        auto compute = [&]() {
            for (auto& p : params) p.grad->fill(0.0);
            KernelGenerator::Cache kcache;
            GazeDecoder::Cache dcache;
            const Tensor bank = model.kgen.forward(l, &kcache);
            const Tensor ftil = apply_action_kernels(bank, f);
            const Tensor logits = model.action_dec.forward(ftil, &dcache, true);
            Tensor g_logits;
            gaze_map_loss(logits, gt, valid, &g_logits);
            const Tensor g_ftil = model.action_dec.backward(g_logits, dcache);
            const Tensor g_bank = apply_action_kernels_backward_bank(f, g_ftil, bank);
            gl = model.kgen.backward(g_bank, kcache);
        };
        const auto rep = testutil::fd_check(params, loss_fn, compute, 110, rng);
        notes.push_back(fmt("kernel path: %d coords, worst rel %.2e (%s), %d kinks skipped",
                            rep.checked, rep.worst_rel, rep.worst_coord.c_str(), rep.skipped));
        require(rep.checked >= 100, "kernel path: fewer than 100 clean coordinates");
        require(rep.failed == 0, fmt("kernel path: %d coords disagree", rep.failed));
    }
}

// ---------------------------------------------------------------------------
// Criterion 4: metric oracles with hand-computed answers.

void criterion_metrics(std::vector<std::string>& notes) {
    const CameraModel cam{1280, 960, 60.0};
    const double aae = angular_error_deg(640.0, 480.0, 835.5, 480.0, cam);
    require(std::abs(aae - 10.0) <= 0.05, fmt("angular error %.4f, want 10 +- 0.05", aae));

    Tensor delta({64, 64});
    delta.fill(0.0);
    delta[int64_t(20) * 64 + 33] = 1.0;
    require(std::abs(auc_single_fixation(delta, 33.0, 20.0) - 1.0) <= 1e-12, "delta map AUC");
    Tensor uniform({64, 64});
    uniform.fill(0.125);
    require(std::abs(auc_single_fixation(uniform, 10.0, 50.0) - 0.5) <= 1e-12, "uniform map AUC");

    const auto [inst, cls] = accuracy({0, 0, 1}, {0, 1, 1}, 2);
    require(std::abs(inst - 2.0 / 3.0) <= 1e-15, "instance accuracy");
    require(std::abs(cls - 0.75) <= 1e-15, "class-mean accuracy");

    Tensor row({1, 2});
    row[0] = 2.0;
    row[1] = 4.0;
    const Tensor aff = affinity_from_aae(row);
    require(aff[0] == 1.0 && aff[1] == 0.0, "affinity normalization");
    Tensor flat({1, 2});
    flat.fill(3.0);
    const Tensor aff2 = affinity_from_aae(flat);
    require(aff2[0] == 0.5 && aff2[1] == 0.5, "flat affinity row");

    Tensor ex({1, 1, 4, 4});
    for (int i = 0; i < 16; ++i) ex[i] = i + 1;
    Tensor vg, vn;
    two_way_pool(ex, {GazeCell{1, 1}}, 1, vg, vn);
    require(std::abs(vg[0] - 6.0) <= 1e-12 && std::abs(vn[0] - 82.0 / 7.0) <= 1e-12,
            "pooling worked example");

    Tensor logits({7});
    logits.fill(0.4);
    require(std::abs(nn::cross_entropy_with_logits(logits, 3, nullptr) - std::log(7.0)) <= 1e-12,
            "uniform cross-entropy");

    notes.push_back("angular error, AUC, accuracy, affinity, pooling, cross-entropy all exact");
}

// ---------------------------------------------------------------------------
// Criterion 5: the alternating loop converges quickly and traces replay.

void criterion_inference(std::vector<std::string>& notes) {
    SharedSetup& s = shared_setup();
    const VariantResult& full = variant_of(s.reports[0], "full");

    int64_t within3 = 0, total = 0, max_iter_seen = 0;
    for (const auto& [iters, count] : full.iteration_hist) {
        total += count;
        if (iters <= 3) within3 += count;
        max_iter_seen = std::max<int64_t>(max_iter_seen, iters);
    }
    require(total == static_cast<int64_t>(full.clips.size()), "iteration histogram covers all clips");
    require(max_iter_seen <= kMaxIter, "iteration cap respected");
    const double frac = double(within3) / double(total);
    notes.push_back(fmt("%lld/%lld clips settle within 3 iterations (%.1f%%), max seen %lld",
                        (long long)within3, (long long)total, 100.0 * frac,
                        (long long)max_iter_seen));
    require(frac >= 0.8, fmt("only %.1f%% within 3 iterations (need 80%%)", 100.0 * frac));

    const McnModel& model = *s.models[0];
    const InferenceConfig icfg{kEThreshold, kMaxIter, false};
    const std::vector<ClipInfo> test = s.data.split("test");
    const int n_traces = std::min<int>(20, static_cast<int>(test.size()));
    double worst = 0.0;
    for (int i = 0; i < n_traces; ++i) {
        const ClipSample sample = prepare_eval_sample(load_clip(s.data.root, test[i]), model.cfg);
        const InferenceResult res = joint_infer(sample, model, icfg);
        const CameraModel cam{sample.width(), sample.height(), model.cfg.horizontal_fov_deg};
        const std::vector<double> replay = replay_trace_errors(res.trace, cam);
        require(replay.size() == res.trace.iterations.size(), "replay length");
        for (size_t k = 0; k < replay.size(); ++k)
            worst = std::max(worst, std::abs(replay[k] - res.trace.iterations[k].e));
        const InferenceTrace back = parse_trace(serialize_trace(res.trace));
        const std::vector<double> replay2 = replay_trace_errors(back, cam);
        for (size_t k = 0; k < replay2.size(); ++k)
            worst = std::max(worst, std::abs(replay2[k] - res.trace.iterations[k].e));
    }
    notes.push_back(fmt("%d traces replayed, worst |e diff| %.2e", n_traces, worst));
    require(worst <= 1e-9, fmt("trace replay drift %.3g", worst));
}

// ---------------------------------------------------------------------------
// Criterion 6: trained-model orderings, averaged over seeds.

void criterion_orderings(std::vector<std::string>& notes) {
    SharedSetup& s = shared_setup();
    for (const auto& n : s.train_notes) notes.push_back(n);

    std::map<std::string, double> aae, acc;
    for (const auto& rep : s.reports) {
        std::ostringstream line;
        line << "seed " << (&rep - s.reports.data() + 1) << ":";
        for (const auto& name : kVariants) {
            const VariantResult& v = variant_of(rep, name);
            aae[name] += v.aae_deg / double(s.reports.size());
            acc[name] += v.acc_instance / double(s.reports.size());
            line << " " << name << " aae=" << fmt("%.2f", v.aae_deg)
                 << " acc=" << fmt("%.2f", v.acc_instance);
        }
        notes.push_back(line.str());
    }
    notes.push_back(fmt("means: full aae %.3f vs saliency %.3f; action_gt %.3f vs action %.3f",
                        aae["full"], aae["saliency"], aae["action_gt"], aae["action"]));
    notes.push_back(fmt("means: full acc %.3f vs wo_gaze %.3f, center_bias %.3f, gaze_region %.3f",
                        acc["full"], acc["wo_gaze"], acc["center_bias"], acc["gaze_region"]));

    require(aae["full"] < aae["saliency"],
            fmt("fused gaze %.3f not better than saliency alone %.3f", aae["full"], aae["saliency"]));
    require(aae["action_gt"] <= aae["action"],
            fmt("true-action conditioning %.3f worse than predicted %.3f", aae["action_gt"],
                aae["action"]));
    require(acc["full"] > acc["wo_gaze"],
            fmt("full acc %.3f not above gaze-blind %.3f", acc["full"], acc["wo_gaze"]));
    require(acc["full"] > acc["center_bias"],
            fmt("full acc %.3f not above center-pinned %.3f", acc["full"], acc["center_bias"]));
    require(acc["full"] > acc["gaze_region"],
            fmt("full acc %.3f not above gaze-window-only %.3f", acc["full"], acc["gaze_region"]));

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const double budget = 1800.0 * 4.0 / hw;
    notes.push_back(fmt("corpus+train+eval %.0fs wall on %u threads (budget %.0fs)",
                        s.build_seconds, hw, budget));
    require(s.build_seconds <= budget, fmt("over budget: %.0fs > %.0fs", s.build_seconds, budget));
}

// ---------------------------------------------------------------------------
// Criterion 7: gaze generated under the true action beats other actions.

void criterion_affinity(std::vector<std::string>& notes) {
    SharedSetup& s = shared_setup();
    const AffinityResult res = action_gaze_affinity(*s.models[0], s.data, "test");
    const int m = static_cast<int>(res.classes.size());
    require(m == s.data.n_actions, "every class must appear in the test split");

    double diag = 0.0, off = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            (i == j ? diag : off) += res.aae[int64_t(i) * m + j];
    diag /= m;
    off /= double(m) * (m - 1);
    notes.push_back(fmt("mean matched-action error %.3f deg vs mismatched %.3f deg", diag, off));
    require(diag < off, fmt("matched %.3f not below mismatched %.3f", diag, off));

    std::istringstream table(render_affinity_table(res));
    std::string line;
    while (std::getline(table, line)) notes.push_back(line);
}

// ---------------------------------------------------------------------------
// Criterion 8: artifacts are bitwise deterministic.

void criterion_determinism(std::vector<std::string>& notes) {
    SharedSetup& s = shared_setup();
    testutil::TempDir dir("determinism");

    const std::string p1 = dir.sub("a.ckpt"), p2 = dir.sub("b.ckpt"), p3 = dir.sub("c.ckpt");
    save_checkpoint(p1, *s.models[0], s.provs[0]);
    save_checkpoint(p2, *s.models[0], s.provs[0]);
    require(slurp_bytes(p1) == slurp_bytes(p2), "checkpoint save not reproducible");
    McnModel loaded = load_checkpoint(p1);
    save_checkpoint(p3, loaded, s.provs[0]);
    require(slurp_bytes(p1) == slurp_bytes(p3), "checkpoint changed across load/save");
    notes.push_back("checkpoint save/load/save byte-identical");

    const std::string regen = dir.sub("corpus2");
    generate_dataset(s.spec, regen);
    std::string why;
    require(trees_identical(s.dir->sub("corpus"), regen, &why), "corpus regeneration: " + why);
    notes.push_back("synthetic corpus regenerates byte-identically");

    EvalConfig ec;
    ec.variants = {"full", "saliency"};
    ec.split = "test";
    ec.e_threshold = kEThreshold;
    ec.max_iter = kMaxIter;
    ec.limit = 40;
    const std::string d1 = report_to_json(evaluate(*s.models[0], s.data, ec)).dump(2);
    const std::string d2 = report_to_json(evaluate(*s.models[0], s.data, ec)).dump(2);
    require(d1 == d2, "evaluation reports differ across runs");
    notes.push_back(fmt("repeated 40-clip evaluation bit-identical (%zu bytes)", d1.size()));
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<void(std::vector<std::string>&)> fn;
    };
    const std::vector<Criterion> criteria = {
        {1, "two-way pooling matches brute force", criterion_pooling},
        {2, "full-scale forward pass shape fidelity", criterion_full_scale},
        {3, "analytic gradients match finite differences", criterion_gradients},
        {4, "metric oracles", criterion_metrics},
        {5, "alternating inference converges and replays", criterion_inference},
        {6, "trained-model orderings on the synthetic corpus", criterion_orderings},
        {7, "gaze affinity separates action classes", criterion_affinity},
        {8, "bitwise determinism of artifacts", criterion_determinism},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        std::vector<std::string> notes;
        const auto t0 = std::chrono::steady_clock::now();
        std::string error;
        try {
            c.fn(notes);
        } catch (const std::exception& e) {
            error = e.what();
        }
        const double secs = seconds_since(t0);
        std::printf("%s criterion %d: %s (%.1fs)\n", error.empty() ? "PASS" : "FAIL", c.id, c.name,
                    secs);
        for (const auto& n : notes) std::printf("    %s\n", n.c_str());
        if (!error.empty()) {
            std::printf("    error: %s\n", error.c_str());
            ++failures;
        }
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
    return failures;
}
