#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace d3 {

std::uint32_t crc32(const unsigned char* data, std::size_t n, std::uint32_t seed = 0);
std::uint32_t crc32(const std::string& s);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

// Little-endian byte stream builder for the container formats.
struct ByteWriter {
    std::string bytes;

    void raw(const void* p, std::size_t n) {
        bytes.append(static_cast<const char*>(p), n);
    }
    void u8(std::uint8_t v) { raw(&v, 1); }
    void u16(std::uint16_t v) {
        unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
        raw(b, 2);
    }
    void u32(std::uint32_t v) {
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        raw(b, 4);
    }
    void u64(std::uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        raw(b, 8);
    }
    void f32(float v) {
        std::uint32_t u;
        std::memcpy(&u, &v, 4);
        u32(u);
    }
    void str(const std::string& s) { bytes.append(s); }
};

// Bounds-checked reader; throws "truncated file" on short reads.
struct ByteReader {
    const std::string& bytes;
    std::size_t pos = 0;

    explicit ByteReader(const std::string& b) : bytes(b) {}

    void need(std::size_t n) const;
    const unsigned char* cur() const {
        return reinterpret_cast<const unsigned char*>(bytes.data()) + pos;
    }
    void raw(void* out, std::size_t n) {
        need(n);
        std::memcpy(out, bytes.data() + pos, n);
        pos += n;
    }
    std::uint8_t u8() {
        std::uint8_t v;
        raw(&v, 1);
        return v;
    }
    std::uint16_t u16() {
        need(2);
        const unsigned char* b = cur();
        pos += 2;
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }
    std::uint32_t u32() {
        need(4);
        const unsigned char* b = cur();
        pos += 4;
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    }
    std::uint64_t u64() {
        need(8);
        const unsigned char* b = cur();
        pos += 8;
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    }
    float f32() {
        std::uint32_t u = u32();
        float v;
        std::memcpy(&v, &u, 4);
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s = bytes.substr(pos, n);
        pos += n;
        return s;
    }
    std::size_t remaining() const { return bytes.size() - pos; }
};

}  // namespace d3
