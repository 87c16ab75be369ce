#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "neurograph/errors.hpp"

// Little-endian primitives shared by the checkpoint and activation snapshot
// containers. Byte-by-byte so the on-disk layout is host-independent.
namespace neurograph::io {

inline void write_u32(std::ostream& out, std::uint32_t v) {
    const char b[4] = {
        static_cast<char>(v & 0xFF),
        static_cast<char>((v >> 8) & 0xFF),
        static_cast<char>((v >> 16) & 0xFF),
        static_cast<char>((v >> 24) & 0xFF),
    };
    out.write(b, 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
    write_u32(out, static_cast<std::uint32_t>(v & 0xFFFFFFFFu));
    write_u32(out, static_cast<std::uint32_t>(v >> 32));
}

inline void write_f32(std::ostream& out, float v) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    write_u32(out, bits);
}

inline std::uint32_t read_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) {
        throw pipeline_error(path + ": truncated file");
    }
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t read_u64(std::istream& in, const std::string& path) {
    const std::uint64_t lo = read_u32(in, path);
    const std::uint64_t hi = read_u32(in, path);
    return lo | (hi << 32);
}

inline float read_f32(std::istream& in, const std::string& path) {
    const std::uint32_t bits = read_u32(in, path);
    float v = 0.0f;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

}  // namespace neurograph::io
