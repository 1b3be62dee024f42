#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphssl/errors.hpp"
#include "graphssl/params.hpp"
#include "graphssl/tensor.hpp"

namespace graphssl {

// Binary checkpoint, version 1, little-endian throughout:
//   magic "GSSLCKPT" | u32 version | u32 meta_len | meta (UTF-8 JSON)
//   u64 n_params | per param: u32 name_len | name | u32 rank | u64 dims[rank]
//   | f64 values (row-major, IEEE-754 bit patterns)
// Doubles are moved via their bit patterns, so save/load round-trips are
// bit-exact.

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f64(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(out, bits);
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw ParseError("checkpoint truncated");
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        }
        pos += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        }
        pos += 8;
        return v;
    }

    double f64() {
        const std::uint64_t bits = u64();
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace detail

inline constexpr char kCheckpointMagic[9] = "GSSLCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::string encode_checkpoint(const ParamStore& params, const nlohmann::ordered_json& meta) {
    std::string out(kCheckpointMagic, 8);
    detail::put_u32(out, kCheckpointVersion);
    const std::string meta_str = meta.dump();
    detail::put_u32(out, static_cast<std::uint32_t>(meta_str.size()));
    out += meta_str;
    detail::put_u64(out, params.size());
    for (const auto& [name, tensor] : params) {
        detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        detail::put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
        for (std::size_t d : tensor.shape()) detail::put_u64(out, d);
        for (std::size_t i = 0; i < tensor.size(); ++i) detail::put_f64(out, tensor[i]);
    }
    return out;
}

struct Checkpoint {
    nlohmann::ordered_json meta;
    ParamStore params;
};

inline Checkpoint decode_checkpoint(const std::string& buf) {
    detail::Reader r{buf};
    if (r.bytes(8) != std::string(kCheckpointMagic, 8)) {
        throw ParseError("not a checkpoint file (bad magic)");
    }
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw ParseError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ck;
    const std::uint32_t meta_len = r.u32();
    const std::string meta_str = r.bytes(meta_len);
    try {
        ck.meta = nlohmann::ordered_json::parse(meta_str);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("checkpoint metadata: ") + e.what());
    }
    const std::uint64_t count = r.u64();
    for (std::uint64_t k = 0; k < count; ++k) {
        const std::uint32_t name_len = r.u32();
        const std::string name = r.bytes(name_len);
        const std::uint32_t rank = r.u32();
        if (rank > 2) throw ParseError("checkpoint tensor rank > 2");
        std::vector<std::size_t> shape;
        std::size_t total = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            shape.push_back(static_cast<std::size_t>(r.u64()));
            total *= shape.back();
        }
        Tensor t = Tensor::zeros(shape);
        for (std::size_t i = 0; i < total; ++i) t[i] = r.f64();
        ck.params.raw()[name] = std::move(t);
    }
    if (r.pos != buf.size()) throw ParseError("checkpoint has trailing bytes");
    return ck;
}

inline void save_checkpoint(const std::string& path, const ParamStore& params,
                            const nlohmann::ordered_json& meta) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot open checkpoint for writing: " + path);
    const std::string buf = encode_checkpoint(params, meta);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw ParseError("checkpoint write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(buf);
}

}  // namespace graphssl
