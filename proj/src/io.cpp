#include "d3/io.hpp"

#include <array>
#include <fstream>
#include <stdexcept>

namespace d3 {

namespace {
std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        t[i] = c;
    }
    return t;
}
const std::array<std::uint32_t, 256>& crc_table() {
    static const auto t = make_crc_table();
    return t;
}
}  // namespace

std::uint32_t crc32(const unsigned char* data, std::size_t n, std::uint32_t seed) {
    const auto& t = crc_table();
    std::uint32_t c = seed ^ 0xFFFFFFFFu;
    for (std::size_t i = 0; i < n; ++i) c = t[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

std::uint32_t crc32(const std::string& s) {
    return crc32(reinterpret_cast<const unsigned char*>(s.data()), s.size());
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (f.bad()) throw std::runtime_error("read error: " + path);
    return bytes;
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open file for writing: " + path);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write error: " + path);
}

void ByteReader::need(std::size_t n) const {
    if (pos + n > bytes.size()) throw std::runtime_error("truncated file");
}

}  // namespace d3
