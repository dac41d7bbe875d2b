#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mcn/harness/trainer.hpp"
#include "mcn/synth/synth.hpp"
#include "test_util.hpp"

using namespace mcn;

namespace {

/// Flat per-module parameter snapshots keyed by module label.
std::map<std::string, std::vector<double>> module_snapshots(McnModel& m) {
    std::map<std::string, std::vector<double>> out;
    auto grab = [&out](const std::string& label, auto& module) {
        auto& dst = out[label];
        module.visit_params(label, [&dst](const std::string&, Tensor& v, Tensor&) {
            dst.insert(dst.end(), v.data(), v.data() + v.numel());
        });
    };
    grab("encoder", m.encoder);
    grab("saliency", m.saliency_dec);
    grab("kgen", m.kgen);
    grab("action_decoder", m.action_dec);
    grab("fusion", m.fusion);
    grab("classifier", m.classifier);
    return out;
}

Dataset make_corpus(testutil::TempDir& dir, int clips_per_class, uint64_t seed) {
    const SynthSpec spec = testutil::tiny_synth_spec(clips_per_class, seed);
    generate_dataset(spec, dir.path().string(), 0);
    return load_dataset_index(dir.path().string());
}

}  // namespace

TEST_CASE("gaze map loss matches a direct pixel-wise computation") {
    Rng rng(81);
    const Tensor logits = testutil::random_tensor({2, 3, 3}, rng, -2.0, 2.0);
    Tensor gt({2, 3, 3});
    for (int64_t i = 0; i < gt.numel(); ++i) gt[i] = (i % 3) / 2.0;
    Tensor valid({2});
    valid.fill(1.0);

    Tensor grad;
    const GazeLossResult res = gaze_map_loss(logits, gt, valid, &grad);
    REQUIRE(!res.all_invalid);

    double expect = 0.0;
    for (int64_t i = 0; i < logits.numel(); ++i) {
        const double z = logits[i], t = gt[i];
        expect += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
    }
    expect /= static_cast<double>(logits.numel());
    REQUIRE(res.loss == Catch::Approx(expect).margin(1e-12));
    for (int64_t i = 0; i < logits.numel(); ++i) {
        const double p = 1.0 / (1.0 + std::exp(-logits[i]));
        REQUIRE(grad[i] == Catch::Approx((p - gt[i]) / logits.numel()).margin(1e-12));
    }
}

TEST_CASE("gaze map loss drops invalid frames from loss and gradient") {
    Rng rng(82);
    const Tensor logits = testutil::random_tensor({3, 2, 2}, rng, -1.0, 1.0);
    const Tensor gt = testutil::random_tensor({3, 2, 2}, rng, 0.0, 1.0);
    Tensor valid({3});
    valid[0] = 1.0;
    valid[1] = 0.0;
    valid[2] = 1.0;

    Tensor grad;
    const GazeLossResult res = gaze_map_loss(logits, gt, valid, &grad);

    double expect = 0.0;
    for (const int f : {0, 2})
        for (int64_t i = 0; i < 4; ++i) {
            const double z = logits[f * 4 + i], t = gt[f * 4 + i];
            expect += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
        }
    REQUIRE(res.loss == Catch::Approx(expect / 8.0).margin(1e-12));
    for (int64_t i = 0; i < 4; ++i) REQUIRE(grad[4 + i] == 0.0);

    valid.fill(0.0);
    const GazeLossResult none = gaze_map_loss(logits, gt, valid, &grad);
    REQUIRE(none.all_invalid);
    REQUIRE(none.loss == 0.0);
    for (int64_t i = 0; i < grad.numel(); ++i) REQUIRE(grad[i] == 0.0);

    Tensor short_valid({2});
    REQUIRE_THROWS_AS(gaze_map_loss(logits, gt, short_valid, nullptr), InputError);
}

TEST_CASE("action loss oracle values") {
    Tensor uniform({5});
    uniform.fill(0.37);
    Tensor grad;
    REQUIRE(action_loss(uniform, 2, &grad) == Catch::Approx(std::log(5.0)).margin(1e-12));
    double gsum = 0.0;
    for (int64_t i = 0; i < 5; ++i) gsum += grad[i];
    REQUIRE(gsum == Catch::Approx(0.0).margin(1e-12));

    Tensor peaked({4});
    peaked.fill(0.0);
    peaked[1] = 60.0;
    REQUIRE(action_loss(peaked, 1, nullptr) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(action_loss(peaked, 0, nullptr) > 10.0);
}

TEST_CASE("optimizer first step follows the bias-corrected rule") {
    Tensor w({2}), g({2});
    w[0] = 1.0;
    w[1] = -2.0;
    g[0] = 0.3;
    g[1] = -4.0;
    Adam opt;
    opt.add_param("w", w, g, 0.01);
    REQUIRE(opt.n_params() == 1);
    opt.step();
    for (int i = 0; i < 2; ++i) {
        const double expect = (i == 0 ? 1.0 : -2.0) -
                              0.01 * g[i] / (std::abs(g[i]) + 1e-8);
        REQUIRE(w[i] == Catch::Approx(expect).margin(1e-12));
    }

    Tensor w2({1}), g2({1});
    REQUIRE_THROWS_AS(opt.add_param("bad", w2, g2, 0.0), ConfigError);
}

TEST_CASE("optimizer minimizes a quadratic") {
    Tensor w({3}), g({3}), target({3});
    Rng rng(83);
    for (int i = 0; i < 3; ++i) {
        w[i] = rng.uniform(-1.0, 1.0);
        target[i] = rng.uniform(-1.0, 1.0);
    }
    Adam opt;
    opt.add_param("w", w, g, 0.05);
    for (int it = 0; it < 800; ++it) {
        opt.zero_grads();
        for (int i = 0; i < 3; ++i) g[i] = 2.0 * (w[i] - target[i]);
        opt.step();
    }
    for (int i = 0; i < 3; ++i) REQUIRE(std::abs(w[i] - target[i]) < 1e-3);
}

TEST_CASE("gaze cells average valid frames per temporal slice") {
    McnModel model(toy_config(), 84);
    // toy grid: one temporal slice of 4x4 cells, 8-px cells over 32 px
    std::vector<GazeGt> gaze(8);
    for (int i = 0; i < 8; ++i) gaze[i] = {17.0, 9.0, true};
    auto cells = gt_gaze_cells(gaze, model.dims);
    REQUIRE(cells.size() == 1);
    REQUIRE(cells[0].x == 2);
    REQUIRE(cells[0].y == 1);

    for (int i = 0; i < 8; ++i) gaze[i].valid = false;
    cells = gt_gaze_cells(gaze, model.dims);
    REQUIRE(cells[0].x == 2);
    REQUIRE(cells[0].y == 2);

    // means, not per-frame picks: half the frames at x=0, half at x=31
    for (int i = 0; i < 8; ++i) {
        gaze[i].valid = true;
        gaze[i].x = (i % 2 == 0) ? 0.0 : 31.0;
        gaze[i].y = 31.0;
    }
    cells = gt_gaze_cells(gaze, model.dims);
    REQUIRE(cells[0].x == 1);
    REQUIRE(cells[0].y == 3);
}

TEST_CASE("temporal window cuts deterministically and validates length") {
    Rng rng(85);
    ClipSample s;
    s.clip_id = "clip_w";
    s.action_id = 0;
    s.rgb = testutil::random_tensor({3, 8, 4, 4}, rng);
    s.flow = testutil::random_tensor({2, 8, 4, 4}, rng, 0.0, 255.0);
    s.gaze_gt.resize(8);
    for (int i = 0; i < 8; ++i) s.gaze_gt[i] = {double(i), double(i), true};

    const ClipSample centered = temporal_window(s, 4, nullptr);
    REQUIRE(centered.rgb.shape() == std::vector<int>({3, 4, 4, 4}));
    REQUIRE(centered.gaze_gt[0].x == 2.0);
    for (int64_t i = 0; i < 16; ++i) REQUIRE(centered.rgb[i] == s.rgb[2 * 16 + i]);

    const ClipSample same = temporal_window(s, 8, nullptr);
    REQUIRE(testutil::bitwise_equal(same.rgb, s.rgb));

    REQUIRE_THROWS_AS(temporal_window(s, 9, nullptr), IntegrityError);
}

TEST_CASE("each training stage only moves its own parameters") {
    testutil::TempDir dir("train_freeze");
    const Dataset ds = make_corpus(dir, 2, 86);

    TrainConfig tc;
    tc.stage1_epochs = 1;
    tc.stage2_epochs = 0;
    tc.stage3_epochs = 0;
    tc.batch = 2;
    tc.lr_action = 1e-3;
    tc.lr_gaze = 1e-3;
    tc.seed = 5;

    McnModel model(micro_config(), 87);
    const auto before = module_snapshots(model);
    Trainer t1(model, ds, tc);
    const TrainResult r1 = t1.run();
    auto after = module_snapshots(model);
    REQUIRE(r1.provenance.stages == std::vector<int>{1});
    REQUIRE(after.at("encoder") != before.at("encoder"));
    REQUIRE(after.at("saliency") != before.at("saliency"));
    REQUIRE(after.at("classifier") != before.at("classifier"));
    REQUIRE(after.at("kgen") == before.at("kgen"));
    REQUIRE(after.at("action_decoder") == before.at("action_decoder"));
    REQUIRE(after.at("fusion") == before.at("fusion"));

    TrainConfig tc2 = tc;
    tc2.stage1_epochs = 0;
    tc2.stage2_epochs = 1;
    const auto mid = module_snapshots(model);
    Trainer t2(model, ds, tc2);
    const TrainResult r2 = t2.run();
    after = module_snapshots(model);
    REQUIRE(r2.provenance.stages == std::vector<int>{2});
    REQUIRE(after.at("encoder") == mid.at("encoder"));
    REQUIRE(after.at("saliency") == mid.at("saliency"));
    REQUIRE(after.at("classifier") == mid.at("classifier"));
    REQUIRE(after.at("kgen") != mid.at("kgen"));
    REQUIRE(after.at("action_decoder") != mid.at("action_decoder"));
    REQUIRE(after.at("fusion") == mid.at("fusion"));

    TrainConfig tc3 = tc;
    tc3.stage1_epochs = 0;
    tc3.stage3_epochs = 1;
    const auto mid2 = module_snapshots(model);
    Trainer t3(model, ds, tc3);
    const TrainResult r3 = t3.run();
    after = module_snapshots(model);
    REQUIRE(r3.provenance.stages == std::vector<int>{3});
    REQUIRE(after.at("fusion") != mid2.at("fusion"));
    REQUIRE(after.at("encoder") == mid2.at("encoder"));
    REQUIRE(after.at("kgen") == mid2.at("kgen"));
}

TEST_CASE("training is deterministic for a fixed seed") {
    testutil::TempDir dir("train_det");
    const Dataset ds = make_corpus(dir, 2, 88);

    TrainConfig tc;
    tc.stage1_epochs = 1;
    tc.stage2_epochs = 1;
    tc.stage3_epochs = 1;
    tc.batch = 3;
    tc.lr_action = 1e-3;
    tc.lr_gaze = 1e-3;
    tc.seed = 6;

    McnModel a(micro_config(), 90);
    McnModel b(micro_config(), 90);
    Trainer ta(a, ds, tc), tb(b, ds, tc);
    const TrainResult ra = ta.run(), rb = tb.run();

    REQUIRE(ra.provenance.stages == std::vector<int>{1, 2, 3});
    REQUIRE(ra.epochs.size() == rb.epochs.size());
    for (size_t i = 0; i < ra.epochs.size(); ++i) {
        REQUIRE(ra.epochs[i].stage == rb.epochs[i].stage);
        REQUIRE(ra.epochs[i].loss == rb.epochs[i].loss);
    }
    REQUIRE(testutil::snapshot_params(a) == testutil::snapshot_params(b));
}

TEST_CASE("an absurd learning rate raises a divergence error") {
    testutil::TempDir dir("train_div");
    const Dataset ds = make_corpus(dir, 2, 89);

    TrainConfig tc;
    tc.stage1_epochs = 4;
    tc.stage2_epochs = 0;
    tc.stage3_epochs = 0;
    tc.batch = 1;
    tc.lr_action = 1e18;
    tc.lr_gaze = 1e18;
    tc.seed = 5;

    McnModel model(micro_config(), 91);
    Trainer t(model, ds, tc);
    REQUIRE_THROWS_AS(t.run(), DivergenceError);
}

TEST_CASE("training requires a train split") {
    testutil::TempDir dir("train_empty");
    std::vector<ClipInfo> infos = {{"clip_00000", "test", 0, 8}};
    write_index(dir.path().string(), infos);
    const Dataset ds = load_dataset_index(dir.path().string());
    McnModel model(micro_config(), 92);
    TrainConfig tc;
    REQUIRE_THROWS_AS(Trainer(model, ds, tc), InputError);
}
