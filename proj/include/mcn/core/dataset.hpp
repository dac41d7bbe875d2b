#pragma once

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mcn/core/png.hpp"
#include "mcn/core/preprocess.hpp"
#include "mcn/core/types.hpp"

namespace mcn {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

/// Dataset root contents: index rows plus the class count implied by them.
struct Dataset {
    std::string root;
    std::vector<ClipInfo> clips;
    int n_actions = 0;

    std::vector<ClipInfo> split(const std::string& name) const {
        std::vector<ClipInfo> out;
        for (const auto& c : clips)
            if (c.split == name) out.push_back(c);
        return out;
    }
};

namespace detail {

inline std::string frame_name(int idx) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05d", idx);
    return buf;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f << text;
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace detail

/// Raw flow container: magic "MCNF", u32 N,H,W, then f32 LE N*H*W*2 values
/// interleaved (u,v) per pixel.
inline void write_flow_file(const std::string& path, const Tensor& raw_flow) {
    if (raw_flow.rank() != 4 || raw_flow.dim(3) != 2)
        throw InputError("flow container expects (N,H,W,2)");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    const uint32_t n = raw_flow.dim(0), h = raw_flow.dim(1), w = raw_flow.dim(2);
    f.write("MCNF", 4);
    f.write(reinterpret_cast<const char*>(&n), 4);
    f.write(reinterpret_cast<const char*>(&h), 4);
    f.write(reinterpret_cast<const char*>(&w), 4);
    std::vector<float> buf(raw_flow.numel());
    for (int64_t i = 0; i < raw_flow.numel(); ++i) buf[i] = static_cast<float>(raw_flow[i]);
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
    if (!f) throw IoError("write failed: " + path);
}

inline Tensor read_flow_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IntegrityError("missing flow file: " + path);
    char magic[4];
    uint32_t n = 0, h = 0, w = 0;
    f.read(magic, 4);
    f.read(reinterpret_cast<char*>(&n), 4);
    f.read(reinterpret_cast<char*>(&h), 4);
    f.read(reinterpret_cast<char*>(&w), 4);
    if (!f || std::memcmp(magic, "MCNF", 4) != 0)
        throw IntegrityError("bad flow container header: " + path);
    Tensor out({static_cast<int>(n), static_cast<int>(h), static_cast<int>(w), 2});
    std::vector<float> buf(out.numel());
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
    if (!f) throw IntegrityError("truncated flow container: " + path);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = buf[i];
    return out;
}

inline void write_gaze_csv(const std::string& path, const std::vector<GazeGt>& gaze) {
    std::ostringstream ss;
    ss << "frame_idx,x,y,valid\n";
    char buf[96];
    for (size_t i = 0; i < gaze.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%d\n", i, gaze[i].x, gaze[i].y,
                      gaze[i].valid ? 1 : 0);
        ss << buf;
    }
    detail::write_text_file(path, ss.str());
}

inline std::vector<GazeGt> read_gaze_csv(const std::string& path, int n_frames) {
    std::ifstream f(path);
    if (!f) throw IntegrityError("missing gaze file: " + path);
    std::vector<GazeGt> gaze(n_frames);
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line.rfind("frame_idx", 0) == 0) continue;
        std::istringstream ls(line);
        std::string tok;
        int idx = -1;
        GazeGt g;
        int field = 0, valid_int = 0;
        while (std::getline(ls, tok, ',')) {
            switch (field++) {
                case 0: idx = std::stoi(tok); break;
                case 1: g.x = std::stod(tok); break;
                case 2: g.y = std::stod(tok); break;
                case 3: valid_int = std::stoi(tok); break;
                default: throw IntegrityError("extra gaze fields: " + path);
            }
        }
        if (field != 4) throw IntegrityError("malformed gaze row: " + path);
        g.valid = valid_int != 0;
        if (idx < 0 || idx >= n_frames) throw IntegrityError("gaze frame index out of range: " + path);
        gaze[idx] = g;
    }
    return gaze;
}

inline void write_index(const std::string& root, const std::vector<ClipInfo>& clips) {
    std::ostringstream ss;
    ss << "clip_id\tsplit\taction_id\tn_frames\n";
    for (const auto& c : clips)
        ss << c.clip_id << '\t' << c.split << '\t' << c.action_id << '\t' << c.n_frames << '\n';
    detail::write_text_file(root + "/index.tsv", ss.str());
}

inline Dataset load_dataset_index(const std::string& root) {
    std::ifstream f(root + "/index.tsv");
    if (!f) throw IntegrityError("missing index.tsv under " + root);
    Dataset ds;
    ds.root = root;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line.rfind("clip_id", 0) == 0) continue;
        std::istringstream ls(line);
        ClipInfo info;
        if (!(ls >> info.clip_id >> info.split >> info.action_id >> info.n_frames))
            throw IntegrityError("malformed index row: " + line);
        if (info.split != "train" && info.split != "test")
            throw IntegrityError("unknown split '" + info.split + "' in index");
        ds.n_actions = std::max(ds.n_actions, info.action_id + 1);
        ds.clips.push_back(std::move(info));
    }
    if (ds.clips.empty()) throw IntegrityError("index.tsv has no rows: " + root);
    return ds;
}

/// Write one clip in the standard layout. Frames are 8-bit RGB; flow is the
/// raw (N,H,W,2) field in px/frame, stored unclamped.
inline void write_clip(const std::string& root, const std::string& clip_id,
                       const std::vector<png::Image>& frames, const Tensor& raw_flow,
                       const std::vector<GazeGt>& gaze) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(root) / clip_id;
    fs::create_directories(dir / "frames");
    fs::create_directories(dir / "flow");
    for (size_t i = 0; i < frames.size(); ++i)
        png::write_file((dir / "frames" / (detail::frame_name(static_cast<int>(i)) + ".png")).string(),
                        frames[i]);
    write_flow_file((dir / "flow" / "00000.npyish").string(), raw_flow);
    write_gaze_csv((dir / "gaze.csv").string(), gaze);
}

/// Load one clip: PNG frames to [0,1] RGB, flow shards through the clamp and
/// rescale preprocessing, gaze CSV as-is. Throws IntegrityError on any
/// mismatch with the index row.
inline ClipSample load_clip(const std::string& root, const ClipInfo& info) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(root) / info.clip_id;
    ClipSample s;
    s.clip_id = info.clip_id;
    s.action_id = info.action_id;

    int h = 0, w = 0;
    for (int i = 0; i < info.n_frames; ++i) {
        const std::string path = (dir / "frames" / (detail::frame_name(i) + ".png")).string();
        if (!fs::exists(path)) throw IntegrityError("missing frame: " + path);
        const png::Image img = png::read_file(path);
        if (img.channels != 3) throw IntegrityError("frame is not RGB: " + path);
        if (i == 0) {
            h = img.height;
            w = img.width;
            s.rgb = Tensor({3, info.n_frames, h, w});
        } else if (img.height != h || img.width != w) {
            throw IntegrityError("frame size differs within clip: " + path);
        }
        for (int c = 0; c < 3; ++c) {
            double* dst = s.rgb.data() + (int64_t(c) * info.n_frames + i) * h * w;
            for (int64_t p = 0; p < int64_t(h) * w; ++p) dst[p] = img.pixels[p * 3 + c] / 255.0;
        }
    }

    // flow shards concatenate in numeric order; total maps must cover frames
    Tensor raw({2, info.n_frames, h, w});
    int have = 0;
    for (int shard = 0; have < info.n_frames; ++shard) {
        const std::string path = (dir / "flow" / (detail::frame_name(shard) + ".npyish")).string();
        if (!fs::exists(path))
            throw IntegrityError("flow maps missing: " + info.clip_id + " has " +
                                 std::to_string(have) + " of " + std::to_string(info.n_frames));
        const Tensor part = read_flow_file(path);
        if (part.dim(1) != h || part.dim(2) != w)
            throw IntegrityError("flow size differs from frames: " + path);
        if (have + part.dim(0) > info.n_frames) throw IntegrityError("excess flow maps: " + path);
        for (int i = 0; i < part.dim(0); ++i)
            for (int c = 0; c < 2; ++c) {
                double* dst = raw.data() + (int64_t(c) * info.n_frames + have + i) * h * w;
                const double* src = part.data() + int64_t(i) * h * w * 2;
                for (int64_t p = 0; p < int64_t(h) * w; ++p) dst[p] = src[p * 2 + c];
            }
        have += part.dim(0);
    }
    s.flow = preprocess_flow(raw);
    s.gaze_gt = read_gaze_csv((dir / "gaze.csv").string(), info.n_frames);
    return s;
}

/// Content hash of the index file (FNV-1a over its bytes), reported alongside
/// evaluation results so runs can be tied to their inputs.
inline std::string dataset_fingerprint(const std::string& root) {
    std::ifstream f(root + "/index.tsv", std::ios::binary);
    if (!f) throw IntegrityError("missing index.tsv under " + root);
    uint64_t hash = 1469598103934665603ull;
    char c;
    while (f.get(c)) {
        hash ^= static_cast<uint8_t>(c);
        hash *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

}  // namespace mcn
