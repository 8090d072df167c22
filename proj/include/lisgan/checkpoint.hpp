#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "common.hpp"
#include "network.hpp"

namespace lisgan {

// Checkpoint container ("LISC"): magic, u32 version, u8 role tag, tensor
// table (count; per tensor: u16 name length + UTF-8 name, u8 rank, u32 dims,
// f32 values), trailing CRC-32 of all preceding bytes. Everything is
// little-endian regardless of host. The network architecture itself is
// stored as a reserved rank-1 tensor named "__netspec__" so a checkpoint is
// loadable without any side-channel configuration.

struct CheckpointError : IoError {
    enum class Code { bad_magic, bad_version, bad_crc, bad_structure };
    Code code;
    CheckpointError(Code c, const std::string& msg) : IoError(msg), code(c) {}
};

constexpr std::uint32_t kCheckpointVersion = 1;

inline std::uint32_t crc32_ieee(const unsigned char* data, std::size_t len) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t crc = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

namespace detail {

inline void put_u16(std::vector<unsigned char>& b, std::uint16_t v) {
    b.push_back(static_cast<unsigned char>(v & 0xFF));
    b.push_back(static_cast<unsigned char>(v >> 8));
}

inline void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

inline void put_f32(std::vector<unsigned char>& b, float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(b, v);
}

struct Reader {
    const std::vector<unsigned char>& buf;
    std::size_t pos = 0;
    std::size_t limit = 0;

    void need(std::size_t n) {
        if (limit - pos < n)
            throw CheckpointError(CheckpointError::Code::bad_structure,
                                  "checkpoint: structure overruns payload at offset " + std::to_string(pos));
    }
    std::uint8_t u8() {
        need(1);
        return buf[pos++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(buf[pos] | (buf[pos + 1] << 8));
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos + static_cast<std::size_t>(i)]) << (8 * i);
        pos += 4;
        return v;
    }
    float f32() {
        std::uint32_t v = u32();
        float f;
        std::memcpy(&f, &v, 4);
        return f;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(buf.begin() + static_cast<std::ptrdiff_t>(pos),
                      buf.begin() + static_cast<std::ptrdiff_t>(pos + n));
        pos += n;
        return s;
    }
};

// Architecture encoding inside the reserved tensor. Integers are stored as
// exact small floats.
inline std::vector<float> encode_netspec(const NetworkSpec& s) {
    std::vector<float> v;
    auto push = [&](double x) { v.push_back(static_cast<float>(x)); };
    push(1); // netspec encoding version
    push(static_cast<int>(s.role));
    push(s.n_z);
    push(s.n_r);
    push(static_cast<double>(s.input.size()));
    for (int d : s.input) push(d);
    push(static_cast<double>(s.tail.size()));
    for (const auto& l : s.tail) {
        push(static_cast<int>(l.kind));
        push(static_cast<int>(l.wn));
        push(l.units);
        push(l.k);
        push(l.stride);
        push(l.pad);
        push(l.rate);
        push(static_cast<double>(l.reshape_to.size()));
        for (int d : l.reshape_to) push(d);
    }
    return v;
}

inline NetworkSpec decode_netspec(const std::vector<float>& v) {
    std::size_t pos = 0;
    auto next = [&]() -> double {
        if (pos >= v.size())
            throw CheckpointError(CheckpointError::Code::bad_structure,
                                  "checkpoint: architecture record truncated");
        return v[pos++];
    };
    auto next_int = [&](const char* what) {
        double d = next();
        int i = static_cast<int>(d);
        if (static_cast<double>(i) != d)
            throw CheckpointError(CheckpointError::Code::bad_structure,
                                  std::string("checkpoint: non-integer ") + what + " in architecture record");
        return i;
    };
    if (next_int("encoding version") != 1)
        throw CheckpointError(CheckpointError::Code::bad_structure,
                              "checkpoint: unknown architecture encoding version");
    NetworkSpec s;
    int role = next_int("role");
    if (role < 0 || role > 2)
        throw CheckpointError(CheckpointError::Code::bad_structure, "checkpoint: bad role value");
    s.role = static_cast<Role>(role);
    s.n_z = next_int("n_z");
    s.n_r = next_int("n_r");
    int in_rank = next_int("input rank");
    for (int i = 0; i < in_rank; ++i) s.input.push_back(next_int("input dim"));
    int layers = next_int("layer count");
    for (int li = 0; li < layers; ++li) {
        LayerSpec l;
        int kind = next_int("layer kind");
        if (kind < 0 || kind > 6)
            throw CheckpointError(CheckpointError::Code::bad_structure,
                                  "checkpoint: unknown layer kind " + std::to_string(kind));
        l.kind = static_cast<LayerSpec::Kind>(kind);
        int wn = next_int("weight-norm mode");
        if (wn < 0 || wn > 2)
            throw CheckpointError(CheckpointError::Code::bad_structure, "checkpoint: bad weight-norm mode");
        l.wn = static_cast<WnMode>(wn);
        l.units = next_int("units");
        l.k = next_int("kernel");
        l.stride = next_int("stride");
        l.pad = next_int("pad");
        l.rate = next();
        int rr = next_int("reshape rank");
        for (int i = 0; i < rr; ++i) l.reshape_to.push_back(next_int("reshape dim"));
        s.tail.push_back(std::move(l));
    }
    if (pos != v.size())
        throw CheckpointError(CheckpointError::Code::bad_structure,
                              "checkpoint: trailing data in architecture record");
    return s;
}

} // namespace detail

inline std::vector<unsigned char> encode_checkpoint(NetworkParams& net) {
    std::vector<unsigned char> b;
    b.push_back('L');
    b.push_back('I');
    b.push_back('S');
    b.push_back('C');
    detail::put_u32(b, kCheckpointVersion);
    b.push_back(static_cast<unsigned char>(net.spec.role));
    auto named = named_params(net);
    detail::put_u32(b, static_cast<std::uint32_t>(named.size() + 1));

    auto put_tensor = [&](const std::string& name, const std::vector<int>& dims,
                          const std::vector<float>& vals) {
        if (name.size() > 0xFFFF) throw IoError("checkpoint: tensor name too long");
        detail::put_u16(b, static_cast<std::uint16_t>(name.size()));
        b.insert(b.end(), name.begin(), name.end());
        b.push_back(static_cast<unsigned char>(dims.size()));
        for (int d : dims) detail::put_u32(b, static_cast<std::uint32_t>(d));
        for (float f : vals) detail::put_f32(b, f);
    };

    std::vector<float> spec_vals = detail::encode_netspec(net.spec);
    put_tensor("__netspec__", {static_cast<int>(spec_vals.size())}, spec_vals);
    for (auto& [name, p] : named) put_tensor(name, p->value.shape, p->value.v);

    detail::put_u32(b, crc32_ieee(b.data(), b.size()));
    return b;
}

inline void save_checkpoint(const std::string& path, NetworkParams& net) {
    auto bytes = encode_checkpoint(net);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("checkpoint: cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("checkpoint: write failed: " + path);
}

inline NetworkParams decode_checkpoint(const std::vector<unsigned char>& buf) {
    if (buf.size() < 4 || buf[0] != 'L' || buf[1] != 'I' || buf[2] != 'S' || buf[3] != 'C')
        throw CheckpointError(CheckpointError::Code::bad_magic,
                              "checkpoint: magic bytes 'LISC' missing");
    if (buf.size() < 8)
        throw CheckpointError(CheckpointError::Code::bad_crc, "checkpoint: file truncated");
    std::uint32_t version = 0;
    for (int i = 0; i < 4; ++i) version |= static_cast<std::uint32_t>(buf[4 + static_cast<std::size_t>(i)]) << (8 * i);
    if (version != kCheckpointVersion)
        throw CheckpointError(CheckpointError::Code::bad_version,
                              "checkpoint: version " + std::to_string(version) +
                                  " not supported (supported versions: 1)");
    if (buf.size() < 13)
        throw CheckpointError(CheckpointError::Code::bad_crc, "checkpoint: file truncated");
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i)
        stored |= static_cast<std::uint32_t>(buf[buf.size() - 4 + static_cast<std::size_t>(i)]) << (8 * i);
    if (crc32_ieee(buf.data(), buf.size() - 4) != stored)
        throw CheckpointError(CheckpointError::Code::bad_crc, "checkpoint: CRC mismatch (corrupt or truncated)");

    detail::Reader rd{buf, 8, buf.size() - 4};
    int role_tag = rd.u8();
    if (role_tag < 0 || role_tag > 2)
        throw CheckpointError(CheckpointError::Code::bad_structure, "checkpoint: bad role tag");
    std::uint32_t count = rd.u32();

    std::map<std::string, std::pair<std::vector<int>, std::vector<float>>> tensors;
    for (std::uint32_t ti = 0; ti < count; ++ti) {
        std::uint16_t name_len = rd.u16();
        std::string name = rd.str(name_len);
        int rank = rd.u8();
        std::vector<int> dims;
        std::int64_t numel = 1;
        for (int i = 0; i < rank; ++i) {
            std::uint32_t d = rd.u32();
            if (d > 0x7FFFFFFFu)
                throw CheckpointError(CheckpointError::Code::bad_structure,
                                      "checkpoint: dimension too large in tensor '" + name + "'");
            dims.push_back(static_cast<int>(d));
            numel *= d;
            if (numel > (1LL << 31))
                throw CheckpointError(CheckpointError::Code::bad_structure,
                                      "checkpoint: tensor '" + name + "' too large");
        }
        std::vector<float> vals(static_cast<std::size_t>(numel));
        for (auto& f : vals) f = rd.f32();
        if (!tensors.emplace(name, std::make_pair(std::move(dims), std::move(vals))).second)
            throw CheckpointError(CheckpointError::Code::bad_structure,
                                  "checkpoint: duplicate tensor name '" + name + "'");
    }
    if (rd.pos != rd.limit)
        throw CheckpointError(CheckpointError::Code::bad_structure, "checkpoint: trailing bytes after tensor table");

    auto spec_it = tensors.find("__netspec__");
    if (spec_it == tensors.end())
        throw CheckpointError(CheckpointError::Code::bad_structure,
                              "checkpoint: architecture record '__netspec__' missing");
    NetworkSpec spec = detail::decode_netspec(spec_it->second.second);
    if (static_cast<int>(spec.role) != role_tag)
        throw CheckpointError(CheckpointError::Code::bad_structure,
                              "checkpoint: role tag does not match architecture record");
    tensors.erase(spec_it);

    Rng dummy(0, Stream::init);
    NetworkParams net = build_network(spec, dummy);
    auto named = named_params(net);
    if (named.size() != tensors.size())
        throw CheckpointError(CheckpointError::Code::bad_structure,
                              "checkpoint: expected " + std::to_string(named.size()) + " tensors, found " +
                                  std::to_string(tensors.size()));
    for (auto& [name, p] : named) {
        auto it = tensors.find(name);
        if (it == tensors.end())
            throw CheckpointError(CheckpointError::Code::bad_structure,
                                  "checkpoint: tensor '" + name + "' missing");
        if (it->second.first != p->value.shape)
            throw CheckpointError(CheckpointError::Code::bad_structure,
                                  "checkpoint: tensor '" + name + "' has shape " +
                                      Tensor::shape_string(it->second.first) + ", expected " +
                                      p->value.shape_str());
        p->value.v = std::move(it->second.second);
        p->grad.fill(0.0f);
    }
    return net;
}

inline NetworkParams load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("checkpoint: cannot open: " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_checkpoint(buf);
}

} // namespace lisgan
