#include <catch2/catch_amalgamated.hpp>

#include "mcn/harness/report.hpp"
#include "mcn/synth/synth.hpp"
#include "test_util.hpp"

using namespace mcn;

namespace {

struct Fixture {
    testutil::TempDir dir{"eval"};
    Dataset ds;
    McnModel model{micro_config(), 101};

    Fixture() {
        const SynthSpec spec = testutil::tiny_synth_spec(3, 102);
        generate_dataset(spec, dir.path().string(), 0);
        ds = load_dataset_index(dir.path().string());
    }
};

}  // namespace

TEST_CASE("variant catalogue and lookup") {
    const auto& vs = eval_variants();
    REQUIRE(vs.size() == 8);
    REQUIRE(variant_by_name("full").loop);
    REQUIRE(!variant_by_name("saliency").loop);
    REQUIRE(variant_by_name("wo_gaze").mode == PoolMode::global);
    try {
        variant_by_name("bogus");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        REQUIRE(msg.find("known:") != std::string::npos);
        REQUIRE(msg.find("center_bias") != std::string::npos);
    }
}

TEST_CASE("eval config parses variant lists") {
    EvalConfig ec = EvalConfig::from_kv(KvConfig::parse("variants = full, saliency,action_gt\n"));
    REQUIRE(ec.variants == std::vector<std::string>({"full", "saliency", "action_gt"}));
    ec = EvalConfig::from_kv(KvConfig::parse("variants = all\n"));
    REQUIRE(ec.variants.size() == eval_variants().size());

    ec = EvalConfig{};
    ec.variants = {"nope"};
    REQUIRE_THROWS_AS(ec.validate(), ConfigError);
    ec = EvalConfig{};
    ec.fov = 200.0;
    REQUIRE_THROWS_AS(ec.validate(), ConfigError);
    ec = EvalConfig{};
    ec.limit = -1;
    REQUIRE_THROWS_AS(ec.validate(), ConfigError);
    ec = EvalConfig{};
    ec.variants.clear();
    REQUIRE_THROWS_AS(ec.validate(), ConfigError);
}

TEST_CASE("evaluation produces internally consistent reports") {
    Fixture fx;
    EvalConfig ec;
    ec.variants = {"full", "saliency", "wo_gaze", "center_bias"};
    ec.workers = 1;

    const EvalReport rep = evaluate(fx.model, fx.ds, ec);
    REQUIRE(rep.preset == "micro");
    REQUIRE(rep.n_actions == 4);
    REQUIRE(rep.split == "test");
    REQUIRE(rep.fingerprint == dataset_fingerprint(fx.ds.root));
    REQUIRE(rep.variants.size() == 4);

    for (const auto& vr : rep.variants) {
        REQUIRE(vr.clips.size() == 4);  // one test clip per class
        REQUIRE(vr.aae_deg >= 0.0);
        REQUIRE(vr.auc >= 0.0);
        REQUIRE(vr.auc <= 1.0);
        REQUIRE(vr.acc_instance >= 0.0);
        REQUIRE(vr.acc_instance <= 1.0);
        int64_t valid = 0;
        for (const auto& cs : vr.clips)
            for (const auto& fr : cs.frames)
                if (fr.gt_valid) ++valid;
        REQUIRE(vr.frames_scored == valid);  // crop can push border gaze out
        REQUIRE(vr.frames_scored >= 1);
        REQUIRE(vr.frames_scored <= 4 * fx.model.cfg.n_frames);
        for (const auto& cs : vr.clips) {
            REQUIRE(static_cast<int>(cs.frames.size()) == fx.model.cfg.n_frames);
            REQUIRE(cs.action_pred >= 0);
            REQUIRE(cs.action_pred < 4);
            if (vr.loop) {
                REQUIRE(cs.iterations >= 1);
                REQUIRE(cs.iterations <= ec.max_iter);
            } else {
                REQUIRE(cs.iterations == 0);
            }
        }
    }

    REQUIRE_NOTHROW(verify_report(rep));

    EvalReport tampered = rep;
    tampered.variants[0].aae_deg += 0.5;
    REQUIRE_THROWS_AS(verify_report(tampered), IntegrityError);
    tampered = rep;
    tampered.variants[1].frames_scored -= 1;
    REQUIRE_THROWS_AS(verify_report(tampered), IntegrityError);

    const std::string table = render_report_table(rep);
    REQUIRE(table.find("full") != std::string::npos);
    REQUIRE(table.find("center_bias") != std::string::npos);
    REQUIRE(table.find("AAE(deg)") != std::string::npos);
}

TEST_CASE("reports round-trip through JSON bytes") {
    Fixture fx;
    EvalConfig ec;
    ec.variants = {"full", "saliency"};
    ec.workers = 1;
    ec.limit = 3;

    const EvalReport rep = evaluate(fx.model, fx.ds, ec);
    REQUIRE(rep.variants[0].clips.size() == 3);

    const std::string dump = report_to_json(rep).dump(2);
    const EvalReport back = report_from_json(nlohmann::json::parse(dump));
    REQUIRE(report_to_json(back).dump(2) == dump);
    REQUIRE_NOTHROW(verify_report(back));

    nlohmann::json broken = nlohmann::json::parse(dump);
    broken.erase("variants");
    REQUIRE_THROWS_AS(report_from_json(broken), IntegrityError);
}

TEST_CASE("evaluation is reproducible across worker counts") {
    Fixture fx;
    EvalConfig ec;
    ec.variants = {"full", "action"};
    ec.workers = 1;
    const EvalReport a = evaluate(fx.model, fx.ds, ec);
    ec.workers = 3;
    const EvalReport b = evaluate(fx.model, fx.ds, ec);
    REQUIRE(report_to_json(a).dump() == report_to_json(b).dump());
}

TEST_CASE("camera override rescales angular errors") {
    Fixture fx;
    EvalConfig ec;
    ec.variants = {"saliency"};
    ec.workers = 1;

    const EvalReport base = evaluate(fx.model, fx.ds, ec);
    ec.fov = fx.model.cfg.horizontal_fov_deg;
    const EvalReport same = evaluate(fx.model, fx.ds, ec);
    REQUIRE(report_to_json(same).dump() == report_to_json(base).dump());

    ec.fov = 20.0;
    const EvalReport narrow = evaluate(fx.model, fx.ds, ec);
    REQUIRE(narrow.variants[0].aae_deg != base.variants[0].aae_deg);
    REQUIRE(narrow.variants[0].aae_deg < base.variants[0].aae_deg);
}

TEST_CASE("report merge concatenates shards") {
    Fixture fx;
    EvalConfig ec;
    ec.variants = {"saliency", "action"};
    ec.workers = 1;
    const EvalReport whole = evaluate(fx.model, fx.ds, ec);

    EvalReport p1 = whole, p2 = whole;
    for (auto& vr : p1.variants) {
        vr.clips.resize(2);
        summarize_variant(vr, whole.n_actions);
    }
    for (auto& vr : p2.variants) {
        vr.clips.erase(vr.clips.begin(), vr.clips.begin() + 2);
        summarize_variant(vr, whole.n_actions);
    }

    const EvalReport merged = merge_reports({p1, p2});
    REQUIRE(merged.variants.size() == whole.variants.size());
    for (size_t v = 0; v < merged.variants.size(); ++v) {
        REQUIRE(merged.variants[v].clips.size() == whole.variants[v].clips.size());
        REQUIRE(merged.variants[v].aae_deg ==
                Catch::Approx(whole.variants[v].aae_deg).margin(1e-12));
        REQUIRE(merged.variants[v].acc_instance ==
                Catch::Approx(whole.variants[v].acc_instance).margin(1e-12));
    }
    REQUIRE_NOTHROW(verify_report(merged));

    EvalReport alien = p2;
    alien.fingerprint = "0000000000000000";
    REQUIRE_THROWS_AS(merge_reports({p1, alien}), IntegrityError);
    EvalReport fewer = p2;
    fewer.variants.pop_back();
    REQUIRE_THROWS_AS(merge_reports({p1, fewer}), IntegrityError);
    REQUIRE_THROWS_AS(merge_reports({}), InputError);
}

TEST_CASE("eval input validation") {
    Fixture fx;
    EvalConfig ec;
    ec.split = "nope";
    REQUIRE_THROWS_AS(evaluate(fx.model, fx.ds, ec), InputError);
}

TEST_CASE("affinity study covers the labeled classes") {
    Fixture fx;
    const AffinityResult res = action_gaze_affinity(fx.model, fx.ds, "test", 1);
    REQUIRE(res.classes == std::vector<int>({0, 1, 2, 3}));
    REQUIRE(res.aae.shape() == std::vector<int>({4, 4}));
    REQUIRE(res.affinity.shape() == std::vector<int>({4, 4}));
    REQUIRE(res.frames_per_class.size() == 4);
    for (int64_t f : res.frames_per_class) {
        REQUIRE(f >= 1);  // valid frames only; the crop can drop border gaze
        REQUIRE(f <= fx.model.cfg.n_frames);
    }
    for (int64_t i = 0; i < res.aae.numel(); ++i) {
        REQUIRE(std::isfinite(res.aae[i]));
        REQUIRE(res.aae[i] >= 0.0);
        REQUIRE(res.affinity[i] >= 0.0);
        REQUIRE(res.affinity[i] <= 1.0);
    }
    // row-wise normalization: every row of the affinity matrix spans [0, 1]
    for (int i = 0; i < 4; ++i) {
        double lo = 1.0, hi = 0.0;
        for (int j = 0; j < 4; ++j) {
            lo = std::min(lo, res.affinity[int64_t(i) * 4 + j]);
            hi = std::max(hi, res.affinity[int64_t(i) * 4 + j]);
        }
        REQUIRE(lo == 0.0);
        REQUIRE(hi == 1.0);
    }

    const std::string table = render_affinity_table(res);
    REQUIRE(table.find("mean diagonal") != std::string::npos);
    const nlohmann::json j = affinity_to_json(res);
    REQUIRE(j.at("classes").size() == 4);
    REQUIRE(j.at("aae").size() == 4);
    REQUIRE(j.at("affinity")[0].size() == 4);
}

TEST_CASE("affinity keeps the most frequent classes under top-m") {
    Fixture fx;
    // drop one class's clips so counts differ: class 3 keeps only train rows
    Dataset ds = fx.ds;
    std::vector<ClipInfo> kept;
    for (const auto& c : ds.clips)
        if (!(c.split == "test" && c.action_id == 3)) kept.push_back(c);
    ds.clips = kept;

    const AffinityResult res = action_gaze_affinity(fx.model, ds, "test", 1, 0, 2);
    REQUIRE(res.classes.size() == 2);
    REQUIRE(std::is_sorted(res.classes.begin(), res.classes.end()));
    for (int c : res.classes) REQUIRE(c != 3);
    REQUIRE(res.aae.shape() == std::vector<int>({2, 2}));

    REQUIRE_THROWS_AS(action_gaze_affinity(fx.model, ds, "nope", 1), InputError);
}

TEST_CASE("training summary serializes") {
    TrainResult tr;
    tr.provenance.stages = {1, 2, 3};
    tr.provenance.epoch = 1;
    tr.provenance.seed = 9;
    tr.epochs = {{1, 0, 0.5}, {1, 1, 0.4}, {2, 0, 0.3}, {3, 0, 0.2}};
    const nlohmann::json j = train_result_to_json(tr);
    REQUIRE(j.at("provenance").at("stages") == nlohmann::json({1, 2, 3}));
    REQUIRE(j.at("epochs").size() == 4);
    REQUIRE(j.at("epochs")[2].at("loss") == 0.3);
}

TEST_CASE("heatmap overlay keeps geometry and blends the peak") {
    Rng rng(103);
    const Tensor rgb = testutil::random_tensor({3, 2, 8, 8}, rng, 0.2, 0.4);
    Tensor g({2, 8, 8});
    g.fill(0.0);
    g[int64_t(0) * 64 + 3 * 8 + 5] = 1.0;
    const png::Image img = heatmap_overlay(rgb, 0, g);
    REQUIRE(img.width == 8);
    REQUIRE(img.height == 8);
    REQUIRE(img.channels == 3);
    // the hot pixel gains red relative to an untouched one
    const uint8_t* hot = img.pixels.data() + (3 * 8 + 5) * 3;
    const uint8_t* cold = img.pixels.data() + (0 * 8 + 0) * 3;
    REQUIRE(int(hot[0]) > int(cold[0]));
}
