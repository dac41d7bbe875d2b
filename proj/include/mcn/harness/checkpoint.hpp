#pragma once

#include <cstring>
#include <fstream>

#include "mcn/model/mcn.hpp"

namespace mcn {

/// Where a checkpoint came from: completed stages in order, last epoch of the
/// last stage, and the training seed.
struct Provenance {
    std::vector<int> stages;
    int epoch = 0;
    uint64_t seed = 0;
};

namespace ckpt_detail {

inline void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
inline void write_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
inline void write_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), 8); }
inline void write_str(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline uint32_t read_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
inline uint64_t read_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
inline double read_f64(std::istream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
inline std::string read_str(std::istream& is) {
    const uint32_t n = read_u32(is);
    std::string s(n, '\0');
    is.read(s.data(), n);
    return s;
}

inline void write_tensor_block(std::ostream& os, const std::string& name, const Tensor& t) {
    write_str(os, name);
    write_u32(os, static_cast<uint32_t>(t.rank()));
    for (int d = 0; d < t.rank(); ++d) write_u32(os, static_cast<uint32_t>(t.dim(d)));
    os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * 8));
}

}  // namespace ckpt_detail

inline constexpr uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, McnModel& model, const Provenance& prov) {
    using namespace ckpt_detail;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("checkpoint: cannot open for write: " + path);
    os.write("MCNC", 4);
    write_u32(os, kCheckpointVersion);
    write_str(os, model.cfg.preset);
    write_u32(os, static_cast<uint32_t>(model.cfg.n_actions));
    write_f64(os, model.cfg.horizontal_fov_deg);
    write_f64(os, model.cfg.sigma_gt);
    write_u32(os, static_cast<uint32_t>(prov.stages.size()));
    for (int s : prov.stages) write_u32(os, static_cast<uint32_t>(s));
    write_u32(os, static_cast<uint32_t>(prov.epoch));
    write_u64(os, prov.seed);

    std::vector<std::pair<std::string, const Tensor*>> params, buffers;
    model.visit_params([&](const std::string& n, Tensor& v, Tensor&) { params.emplace_back(n, &v); });
    model.visit_buffers([&](const std::string& n, Tensor& v) { buffers.emplace_back(n, &v); });
    write_u32(os, static_cast<uint32_t>(params.size()));
    for (const auto& [n, t] : params) write_tensor_block(os, n, *t);
    write_u32(os, static_cast<uint32_t>(buffers.size()));
    for (const auto& [n, t] : buffers) write_tensor_block(os, n, *t);
    if (!os) throw IoError("checkpoint: write failed: " + path);
}

inline McnModel load_checkpoint(const std::string& path, Provenance* prov = nullptr) {
    using namespace ckpt_detail;
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IntegrityError("checkpoint: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "MCNC", 4) != 0)
        throw IntegrityError("checkpoint: bad magic: " + path);
    const uint32_t version = read_u32(is);
    if (version != kCheckpointVersion)
        throw IntegrityError("checkpoint: unsupported version " + std::to_string(version));
    ModelConfig cfg = model_config_for(read_str(is));
    cfg.n_actions = static_cast<int>(read_u32(is));
    cfg.horizontal_fov_deg = read_f64(is);
    cfg.sigma_gt = read_f64(is);
    Provenance p;
    const uint32_t n_stages = read_u32(is);
    for (uint32_t i = 0; i < n_stages; ++i) p.stages.push_back(static_cast<int>(read_u32(is)));
    p.epoch = static_cast<int>(read_u32(is));
    p.seed = read_u64(is);

    McnModel model(cfg, 0);
    auto load_section = [&](auto&& visit) {
        std::map<std::string, Tensor> stored;
        const uint32_t count = read_u32(is);
        for (uint32_t i = 0; i < count; ++i) {
            const std::string name = read_str(is);
            const uint32_t rank = read_u32(is);
            std::vector<int> shape(rank);
            for (auto& d : shape) d = static_cast<int>(read_u32(is));
            Tensor t(shape);
            is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * 8));
            stored.emplace(name, std::move(t));
        }
        if (!is) throw IntegrityError("checkpoint: truncated: " + path);
        size_t used = 0;
        visit([&](const std::string& name, Tensor& dst) {
            auto it = stored.find(name);
            if (it == stored.end()) throw IntegrityError("checkpoint: missing entry " + name);
            if (it->second.shape() != dst.shape())
                throw IntegrityError("checkpoint: shape mismatch for " + name);
            dst = std::move(it->second);
            ++used;
        });
        if (used != stored.size()) throw IntegrityError("checkpoint: unexpected extra entries");
    };
    load_section([&](auto&& fn) {
        model.visit_params([&](const std::string& n, Tensor& v, Tensor&) { fn(n, v); });
    });
    load_section([&](auto&& fn) { model.visit_buffers([&](const std::string& n, Tensor& v) { fn(n, v); }); });
    if (prov) *prov = p;
    return model;
}

}  // namespace mcn
