#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "common/error.hpp"

namespace bplab {

// Little-endian fixed-width serialization helpers. All file formats in this
// project (episode files, checkpoints) are written through these.

class ByteWriter {
public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u16(uint16_t v) { raw(&v, 2); }
    void u32(uint32_t v) { raw(&v, 4); }
    void u64(uint64_t v) { raw(&v, 8); }
    void f32(float v) { raw(&v, 4); }
    void f64(double v) { raw(&v, 8); }
    void bytes(const void* p, size_t n) { raw(p, n); }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        raw(s.data(), s.size());
    }

    const std::vector<uint8_t>& data() const { return buf_; }
    size_t size() const { return buf_.size(); }

private:
    void raw(const void* p, size_t n) {
        static_assert(std::endian::native == std::endian::little, "little-endian host required");
        const auto* b = static_cast<const uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }

    std::vector<uint8_t> buf_;
};

class ByteReader {
public:
    ByteReader(const uint8_t* p, size_t n) : p_(p), n_(n) {}
    explicit ByteReader(const std::vector<uint8_t>& v) : p_(v.data()), n_(v.size()) {}

    uint8_t u8() { return take<uint8_t>(); }
    uint16_t u16() { return take<uint16_t>(); }
    uint32_t u32() { return take<uint32_t>(); }
    uint64_t u64() { return take<uint64_t>(); }
    float f32() { return take<float>(); }
    double f64() { return take<double>(); }
    void bytes(void* out, size_t n) {
        need(n);
        std::memcpy(out, p_ + pos_, n);
        pos_ += n;
    }
    std::string str() {
        uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(p_ + pos_), n);
        pos_ += n;
        return s;
    }

    size_t remaining() const { return n_ - pos_; }
    bool done() const { return pos_ == n_; }

private:
    template <class T>
    T take() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, p_ + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    void need(size_t n) const {
        check(pos_ + n <= n_, ErrorCode::CorruptRecord, "record truncated");
    }

    const uint8_t* p_;
    size_t n_;
    size_t pos_ = 0;
};

inline void write_file(const std::string& path, const std::vector<uint8_t>& data) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    check(f.good(), ErrorCode::Io, "cannot open for write: " + path);
    f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    check(f.good(), ErrorCode::Io, "write failed: " + path);
}

inline std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    check(f.good(), ErrorCode::Io, "cannot open: " + path);
    auto n = static_cast<size_t>(f.tellg());
    f.seekg(0);
    std::vector<uint8_t> data(n);
    f.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n));
    check(f.good() || n == 0, ErrorCode::Io, "read failed: " + path);
    return data;
}

// CRC-32 (IEEE reflected, poly 0xEDB88320), table-driven.
inline uint32_t crc32(const void* data, size_t len, uint32_t crc = 0) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) { c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1; }
            t[i] = c;
        }
        return t;
    }();
    const auto* p = static_cast<const unsigned char*>(data);
    crc ^= 0xFFFFFFFFu;
    for (size_t i = 0; i < len; ++i) { crc = table[(crc ^ p[i]) & 0xFF] ^ (crc >> 8); }
    return crc ^ 0xFFFFFFFFu;
}

} // namespace bplab
