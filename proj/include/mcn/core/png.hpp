#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "mcn/core/errors.hpp"

namespace mcn::png {

struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;  // 1, 3 or 4
    std::vector<uint8_t> pixels;  // row-major, interleaved
};

namespace detail {

inline void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

inline uint32_t get_u32_be(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

inline void append_chunk(std::vector<uint8_t>& out, const char type[4], const uint8_t* data,
                         size_t len) {
    put_u32_be(out, static_cast<uint32_t>(len));
    const size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    if (len) out.insert(out.end(), data, data + len);
    const uint32_t crc =
        crc32(0, out.data() + start, static_cast<uInt>(out.size() - start));
    put_u32_be(out, crc);
}

inline int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    return pb <= pc ? b : c;
}

}  // namespace detail

inline std::vector<uint8_t> encode(const Image& img) {
    if (img.channels != 1 && img.channels != 3 && img.channels != 4)
        throw InputError("png: unsupported channel count");
    if (img.pixels.size() != size_t(img.width) * img.height * img.channels)
        throw InputError("png: pixel buffer size mismatch");
    const size_t stride = size_t(img.width) * img.channels;
    std::vector<uint8_t> raw((stride + 1) * img.height);
    for (int y = 0; y < img.height; ++y) {
        raw[y * (stride + 1)] = 0;  // filter: none
        std::memcpy(raw.data() + y * (stride + 1) + 1, img.pixels.data() + y * stride, stride);
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw IoError("png: deflate failed");
    comp.resize(comp_len);

    std::vector<uint8_t> out{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    uint8_t ihdr[13];
    ihdr[0] = static_cast<uint8_t>(uint32_t(img.width) >> 24);
    ihdr[1] = static_cast<uint8_t>(uint32_t(img.width) >> 16);
    ihdr[2] = static_cast<uint8_t>(uint32_t(img.width) >> 8);
    ihdr[3] = static_cast<uint8_t>(img.width);
    ihdr[4] = static_cast<uint8_t>(uint32_t(img.height) >> 24);
    ihdr[5] = static_cast<uint8_t>(uint32_t(img.height) >> 16);
    ihdr[6] = static_cast<uint8_t>(uint32_t(img.height) >> 8);
    ihdr[7] = static_cast<uint8_t>(img.height);
    ihdr[8] = 8;  // bit depth
    ihdr[9] = img.channels == 1 ? 0 : (img.channels == 3 ? 2 : 6);
    ihdr[10] = 0;
    ihdr[11] = 0;
    ihdr[12] = 0;  // no interlace
    detail::append_chunk(out, "IHDR", ihdr, sizeof(ihdr));
    detail::append_chunk(out, "IDAT", comp.data(), comp.size());
    detail::append_chunk(out, "IEND", nullptr, 0);
    return out;
}

inline Image decode(const uint8_t* bytes, size_t len) {
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (len < 8 || std::memcmp(bytes, sig, 8) != 0) throw IoError("png: bad signature");
    Image img;
    int bit_depth = 0, interlace = 0;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    while (pos + 12 <= len) {
        const uint32_t clen = detail::get_u32_be(bytes + pos);
        const char* type = reinterpret_cast<const char*>(bytes + pos + 4);
        const uint8_t* data = bytes + pos + 8;
        if (pos + 12 + clen > len) throw IoError("png: truncated chunk");
        if (std::memcmp(type, "IHDR", 4) == 0) {
            img.width = static_cast<int>(detail::get_u32_be(data));
            img.height = static_cast<int>(detail::get_u32_be(data + 4));
            bit_depth = data[8];
            switch (data[9]) {
                case 0: img.channels = 1; break;
                case 2: img.channels = 3; break;
                case 6: img.channels = 4; break;
                default: throw IoError("png: unsupported color type");
            }
            interlace = data[12];
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + clen);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + clen;
    }
    if (img.width <= 0 || img.height <= 0) throw IoError("png: missing IHDR");
    if (bit_depth != 8 || interlace != 0) throw IoError("png: only 8-bit non-interlaced supported");

    const size_t stride = size_t(img.width) * img.channels;
    std::vector<uint8_t> raw((stride + 1) * img.height);
    uLongf raw_len = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size())
        throw IoError("png: inflate failed");

    img.pixels.resize(stride * img.height);
    const int bpp = img.channels;
    for (int y = 0; y < img.height; ++y) {
        const uint8_t filter = raw[y * (stride + 1)];
        const uint8_t* src = raw.data() + y * (stride + 1) + 1;
        uint8_t* cur = img.pixels.data() + y * stride;
        const uint8_t* up = y > 0 ? cur - stride : nullptr;
        for (size_t i = 0; i < stride; ++i) {
            const int a = i >= size_t(bpp) ? cur[i - bpp] : 0;
            const int b = up ? up[i] : 0;
            const int c = (up && i >= size_t(bpp)) ? up[i - bpp] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += detail::paeth(a, b, c); break;
                default: throw IoError("png: unknown filter");
            }
            cur[i] = static_cast<uint8_t>(v & 0xff);
        }
    }
    return img;
}

inline void write_file(const std::string& path, const Image& img) {
    const std::vector<uint8_t> bytes = encode(img);
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("png: cannot open for write: " + path);
    const size_t n = std::fwrite(bytes.data(), 1, bytes.size(), f);
    std::fclose(f);
    if (n != bytes.size()) throw IoError("png: short write: " + path);
}

inline Image read_file(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("png: cannot open: " + path);
    std::fseek(f, 0, SEEK_END);
    const long sz = std::ftell(f);
    std::fseek(f, 0, SEEK_SET);
    std::vector<uint8_t> bytes(static_cast<size_t>(sz));
    const size_t n = std::fread(bytes.data(), 1, bytes.size(), f);
    std::fclose(f);
    if (n != bytes.size()) throw IoError("png: short read: " + path);
    return decode(bytes.data(), bytes.size());
}

}  // namespace mcn::png
