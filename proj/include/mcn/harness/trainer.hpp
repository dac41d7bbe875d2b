#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "mcn/core/dataset.hpp"
#include "mcn/core/kvconfig.hpp"
#include "mcn/core/preprocess.hpp"
#include "mcn/harness/adam.hpp"
#include "mcn/harness/checkpoint.hpp"
#include "mcn/harness/losses.hpp"
#include "mcn/model/mcn.hpp"

namespace mcn {

/// Staged training schedule. Stage 1 fits the encoder, the saliency decoder
/// and the classifier (the classifier pools around ground-truth gaze cells);
/// stage 2 fits the kernel generator and the action-gaze decoder on top of
/// the frozen stage-1 path; stage 3 fits the fusion network. Freezing is by
/// construction: only the stage's parameters are registered with the
/// optimizer, and frozen modules run in inference mode.
struct TrainConfig {
    int stage1_epochs = 6;
    int stage2_epochs = 3;
    int stage3_epochs = 3;
    int batch = 4;            // clips per optimizer step (gradient accumulation)
    double lr_action = 1e-4;  // encoder + classifier
    double lr_gaze = 1e-7;    // map decoders, kernel generator, fusion
    uint64_t seed = 7;
    bool cache_clips = true;  // hold the decoded train split in memory

    void validate() const {
        if (stage1_epochs < 0 || stage2_epochs < 0 || stage3_epochs < 0)
            throw ConfigError("train: epoch counts must be non-negative");
        if (stage1_epochs + stage2_epochs + stage3_epochs == 0)
            throw ConfigError("train: at least one stage needs epochs");
        if (batch < 1) throw ConfigError("train: batch must be >= 1");
        if (lr_action <= 0.0 || lr_gaze <= 0.0) throw ConfigError("train: learning rates must be positive");
    }

    static TrainConfig from_kv(const KvConfig& kv) {
        TrainConfig t;
        t.stage1_epochs = kv.get_int("stage1_epochs", t.stage1_epochs);
        t.stage2_epochs = kv.get_int("stage2_epochs", t.stage2_epochs);
        t.stage3_epochs = kv.get_int("stage3_epochs", t.stage3_epochs);
        t.batch = kv.get_int("batch", t.batch);
        t.lr_action = kv.get_double("lr_action", t.lr_action);
        t.lr_gaze = kv.get_double("lr_gaze", t.lr_gaze);
        t.seed = static_cast<uint64_t>(kv.get_int("seed", static_cast<int>(t.seed)));
        t.cache_clips = kv.get_int("cache_clips", t.cache_clips ? 1 : 0) != 0;
        return t;
    }
};

struct EpochRecord {
    int stage = 0;
    int epoch = 0;      // within the stage
    double loss = 0.0;  // mean per-clip loss of the heads active in the stage
};

struct TrainResult {
    Provenance provenance;
    std::vector<EpochRecord> epochs;
};

/// Ground-truth gaze mapped onto compact-grid cells, one per temporal slice:
/// the mean of the valid gaze positions inside the slice's frame window,
/// floor-divided by the cell extent. Slices without valid gaze fall back to
/// the grid center.
inline std::vector<GazeCell> gt_gaze_cells(const std::vector<GazeGt>& gaze, const ModelDims& dims) {
    const int tp = dims.compact[0], hp = dims.compact[1], wp = dims.compact[2];
    const int kt = dims.pool_kernel[0], kh = dims.pool_kernel[1], kw = dims.pool_kernel[2];
    std::vector<GazeCell> cells(tp, GazeCell{wp / 2, hp / 2});
    for (int t = 0; t < tp; ++t) {
        double sx = 0.0, sy = 0.0;
        int cnt = 0;
        for (int f = t * kt; f < (t + 1) * kt && f < static_cast<int>(gaze.size()); ++f)
            if (gaze[f].valid) {
                sx += gaze[f].x;
                sy += gaze[f].y;
                ++cnt;
            }
        if (cnt == 0) continue;
        cells[t].x = std::clamp(static_cast<int>(sx / cnt / kw), 0, wp - 1);
        cells[t].y = std::clamp(static_cast<int>(sy / cnt / kh), 0, hp - 1);
    }
    return cells;
}

/// Per-clip losses are O(ln n_actions + 1); anything near this bound means
/// the optimizer has blown up even if the arithmetic stayed finite.
inline constexpr double kLossExplosionBound = 1e12;

class Trainer {
public:
    using EpochHook = std::function<void(const EpochRecord&)>;

    Trainer(McnModel& model, const Dataset& data, const TrainConfig& tc)
        : model_(model), data_(data), tc_(tc) {
        tc_.validate();
        train_ = data.split("train");
        if (train_.empty()) throw InputError("training requires a non-empty train split");
        if (tc_.cache_clips) {
            cache_.reserve(train_.size());
            for (const auto& info : train_) cache_.push_back(load_clip(data_.root, info));
        }
    }

    TrainResult run(const EpochHook& hook = nullptr) {
        TrainResult res;
        res.provenance.seed = tc_.seed;
        run_stage(1, tc_.stage1_epochs, res, hook);
        run_stage(2, tc_.stage2_epochs, res, hook);
        run_stage(3, tc_.stage3_epochs, res, hook);
        return res;
    }

private:
    static uint64_t pack(int stage, int epoch, uint64_t item) {
        return (uint64_t(stage) << 56) | (uint64_t(epoch) << 36) | item;
    }

    Adam make_optimizer(int stage) {
        Adam opt;
        const auto reg = [&opt](double lr) {
            return [&opt, lr](const std::string& n, Tensor& v, Tensor& g) { opt.add_param(n, v, g, lr); };
        };
        switch (stage) {
            case 1:
                model_.encoder.visit_params("encoder", reg(tc_.lr_action));
                model_.saliency_dec.visit_params("saliency", reg(tc_.lr_gaze));
                model_.classifier.visit_params("classifier", reg(tc_.lr_action));
                break;
            case 2:
                model_.kgen.visit_params("kgen", reg(tc_.lr_gaze));
                model_.action_dec.visit_params("action_decoder", reg(tc_.lr_gaze));
                break;
            case 3:
                model_.fusion.visit_params("fusion", reg(tc_.lr_gaze));
                break;
            default:
                throw ConfigError("unknown training stage");
        }
        return opt;
    }

    void run_stage(int stage, int epochs, TrainResult& res, const EpochHook& hook) {
        if (epochs <= 0) return;
        Adam opt = make_optimizer(stage);
        for (int epoch = 0; epoch < epochs; ++epoch) {
            const EpochRecord rec{stage, epoch, run_epoch(stage, epoch, opt)};
            res.epochs.push_back(rec);
            if (hook) hook(rec);
        }
        res.provenance.stages.push_back(stage);
        res.provenance.epoch = epochs - 1;
    }

    double run_epoch(int stage, int epoch, Adam& opt) {
        std::vector<size_t> order(train_.size());
        std::iota(order.begin(), order.end(), size_t{0});
        Rng order_rng = Rng::derive(tc_.seed, pack(stage, epoch, 0xFFFFFFFFull));
        std::shuffle(order.begin(), order.end(), order_rng.engine());
        double total = 0.0;
        size_t done = 0;
        while (done < order.size()) {
            const size_t take = std::min<size_t>(tc_.batch, order.size() - done);
            const double gscale = 1.0 / static_cast<double>(take);
            opt.zero_grads();
            for (size_t b = 0; b < take; ++b, ++done) {
                const size_t idx = order[done];
                Rng clip_rng = Rng::derive(tc_.seed, pack(stage, epoch, idx));
                const ClipSample& raw = tc_.cache_clips ? cache_[idx] : (scratch_ = load_clip(data_.root, train_[idx]), scratch_);
                const ClipSample s = augment_sample(temporal_window(raw, model_.cfg.n_frames, &clip_rng),
                                                    model_.cfg.resize_dim, model_.cfg.height, clip_rng, true);
                const double loss = step_clip(stage, s, gscale);
                if (!std::isfinite(loss) || loss > kLossExplosionBound)
                    throw DivergenceError("stage " + std::to_string(stage) + " epoch " +
                                          std::to_string(epoch) + " clip " + s.clip_id +
                                          ": loss " + std::to_string(loss) + " diverged");
                total += loss;
            }
            opt.step();
        }
        return total / static_cast<double>(order.size());
    }

    double step_clip(int stage, const ClipSample& s, double gscale) {
        switch (stage) {
            case 1: return step_stage1(s, gscale);
            case 2: return step_stage2(s, gscale);
            default: return step_stage3(s, gscale);
        }
    }

    // Encoder + saliency decoder + classifier; gaze supervision on the
    // saliency map, class supervision through pooling at GT gaze cells.
    double step_stage1(const ClipSample& s, double gscale) {
        TwoStreamEncoder::Cache enc_cache;
        const Tensor f = model_.encoder.encode(s.rgb, s.flow, &enc_cache, true);
        GazeDecoder::Cache sal_cache;
        const Tensor zs = model_.saliency_dec.forward(f, &sal_cache, true);
        Tensor valid;
        const Tensor gt = make_gt_map_stack(s.gaze_gt, s.height(), s.width(), model_.cfg.sigma_gt, &valid);
        Tensor gzs;
        const GazeLossResult gl = gaze_map_loss(zs, gt, valid, &gzs);

        nn::ConvBlock::Cache comp_cache;
        const Tensor fc = model_.encoder.encode_compact(f, &comp_cache, true);
        const std::vector<GazeCell> cells = gt_gaze_cells(s.gaze_gt, model_.dims);
        Tensor v_g, v_n;
        two_way_pool(fc, cells, model_.cfg.pool_radius, v_g, v_n);
        ActionClassifier::Cache cls_cache;
        const Tensor logits = model_.classifier.forward(v_g, v_n, &cls_cache);
        Tensor glogits;
        const double al = action_loss(logits, s.action_id, &glogits);

        gzs *= gscale;
        glogits *= gscale;
        Tensor gf = model_.saliency_dec.backward(gzs, sal_cache);
        auto [gvg, gvn] = model_.classifier.backward(glogits, cls_cache);
        const Tensor gfc = two_way_pool_backward(gvg, gvn, cells, model_.cfg.pool_radius,
                                                 {fc.dim(0), fc.dim(1), fc.dim(2), fc.dim(3)});
        gf += model_.encoder.compact_backward(gfc, comp_cache);
        model_.encoder.backward(gf, enc_cache);
        return gl.loss + al;
    }

    // Kernel generator + action-gaze decoder on the frozen stage-1 path; the
    // conditioning likelihood comes from the saliency-gaze classification,
    // matching what inference feeds the generator.
    double step_stage2(const ClipSample& s, double gscale) {
        const Tensor f = model_.encoder.encode_eval(s.rgb, s.flow);
        const Tensor fc = model_.encoder.encode_compact_eval(f);
        const Tensor gs = model_.predict_saliency(f);
        const Tensor l = model_.classify_from_gaze(gs, fc);
        KernelGenerator::Cache kg_cache;
        const Tensor bank = model_.kgen.forward(l, &kg_cache);
        const Tensor ft = apply_action_kernels(bank, f);
        GazeDecoder::Cache dec_cache;
        const Tensor za = model_.action_dec.forward(ft, &dec_cache, true);
        Tensor valid;
        const Tensor gt = make_gt_map_stack(s.gaze_gt, s.height(), s.width(), model_.cfg.sigma_gt, &valid);
        Tensor gza;
        const GazeLossResult gl = gaze_map_loss(za, gt, valid, &gza);

        gza *= gscale;
        const Tensor gft = model_.action_dec.backward(gza, dec_cache);
        const Tensor gbank = apply_action_kernels_backward_bank(f, gft, bank);
        model_.kgen.backward(gbank, kg_cache);
        return gl.loss;
    }

    // Fusion network over the two frozen gaze maps.
    double step_stage3(const ClipSample& s, double gscale) {
        const Tensor f = model_.encoder.encode_eval(s.rgb, s.flow);
        const Tensor fc = model_.encoder.encode_compact_eval(f);
        const Tensor gs = model_.predict_saliency(f);
        const Tensor l = model_.classify_from_gaze(gs, fc);
        const Tensor ga = model_.predict_action_gaze(l, f);
        FusionNet::Cache fu_cache;
        const Tensor zf = model_.fusion.forward(gs, ga, &fu_cache, true);
        Tensor valid;
        const Tensor gt = make_gt_map_stack(s.gaze_gt, s.height(), s.width(), model_.cfg.sigma_gt, &valid);
        Tensor gzf;
        const GazeLossResult gl = gaze_map_loss(zf, gt, valid, &gzf);

        gzf *= gscale;
        model_.fusion.backward(gzf, fu_cache);
        return gl.loss;
    }

    McnModel& model_;
    const Dataset& data_;
    TrainConfig tc_;
    std::vector<ClipInfo> train_;
    std::vector<ClipSample> cache_;
    ClipSample scratch_;
};

}  // namespace mcn
