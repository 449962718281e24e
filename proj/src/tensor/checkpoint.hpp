#pragma once

#include <map>
#include <string>
#include <vector>

#include "common/binio.hpp"
#include "tensor/store.hpp"

namespace bplab::tensor {

inline constexpr uint16_t kCheckpointVersion = 1;

struct CheckpointMeta {
    uint64_t config_fingerprint = 0;
    std::vector<std::string> frozen;           // parameter names frozen at save time
    std::map<std::string, std::string> extra;  // objective, metrics, ...
};

template <class Real>
constexpr uint8_t dtype_tag() {
    static_assert(std::is_same_v<Real, float> || std::is_same_v<Real, double>);
    return std::is_same_v<Real, float> ? 0 : 1;
}

template <class Real>
void save_checkpoint(const ParamStore<Real>& store, const CheckpointMeta& meta,
                     const std::string& path) {
    ByteWriter w;
    w.bytes("BPCK", 4);
    w.u16(kCheckpointVersion);
    w.u64(meta.config_fingerprint);
    w.u32(static_cast<uint32_t>(meta.frozen.size()));
    for (const std::string& s : meta.frozen) w.str(s);
    w.u32(static_cast<uint32_t>(meta.extra.size()));
    for (const auto& [k, v] : meta.extra) {
        w.str(k);
        w.str(v);
    }
    uint32_t count = 0;
    for (const auto& [name, p] : store) {
        (void)name;
        (void)p;
        ++count;
    }
    w.u32(count);
    for (const auto& [name, p] : store) {
        w.str(name);
        w.u8(dtype_tag<Real>());
        w.u32(static_cast<uint32_t>(p->shape.size()));
        for (int d : p->shape) w.u32(static_cast<uint32_t>(d));
        w.bytes(p->value.data(), p->value.size() * sizeof(Real));
    }
    w.u32(crc32(w.data().data() + 4, w.size() - 4));
    write_file(path, w.data());
}

// Populates an empty store with every stored tensor.
template <class Real>
CheckpointMeta load_checkpoint(ParamStore<Real>& store, const std::string& path) {
    std::vector<uint8_t> bytes = read_file(path);
    check(bytes.size() >= 12, ErrorCode::CorruptRecord, "checkpoint too small");
    const uint32_t stored_crc = crc32(bytes.data() + 4, bytes.size() - 8);
    ByteReader r(bytes);
    char magic[4];
    r.bytes(magic, 4);
    check(std::string(magic, 4) == "BPCK", ErrorCode::CorruptRecord, "bad checkpoint magic");
    check(r.u16() == kCheckpointVersion, ErrorCode::VersionMismatch, "checkpoint version");
    CheckpointMeta meta;
    meta.config_fingerprint = r.u64();
    const uint32_t n_frozen = r.u32();
    for (uint32_t i = 0; i < n_frozen; ++i) meta.frozen.push_back(r.str());
    const uint32_t n_extra = r.u32();
    for (uint32_t i = 0; i < n_extra; ++i) {
        std::string k = r.str();
        meta.extra[k] = r.str();
    }
    const uint32_t n_tensors = r.u32();
    for (uint32_t i = 0; i < n_tensors; ++i) {
        const std::string name = r.str();
        check(r.u8() == dtype_tag<Real>(), ErrorCode::VersionMismatch,
              "checkpoint dtype mismatch for " + name);
        Shape shape(r.u32());
        for (int& d : shape) d = static_cast<int>(r.u32());
        ParamTensor<Real>* p = store.create(name, shape);
        r.bytes(p->value.data(), p->value.size() * sizeof(Real));
    }
    const uint32_t file_crc = r.u32();
    check(file_crc == stored_crc, ErrorCode::CorruptRecord, "checkpoint CRC mismatch");
    check(r.remaining() == 0, ErrorCode::CorruptRecord, "trailing checkpoint bytes");
    for (const std::string& name : meta.frozen)
        if (store.contains(name)) store.get(name)->frozen = true;
    return meta;
}

} // namespace bplab::tensor
