#include "rffsei/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace rffsei {

namespace {

constexpr char kMagic[] = "RFFCKPT1\n";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

template <typename T>
void write_le(std::ostream& os, T v) {
    static_assert(std::is_integral_v<T>);
    unsigned char buf[sizeof(T)];
    auto u = static_cast<std::make_unsigned_t<T>>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(u >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    unsigned char buf[sizeof(T)] = {0};
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<std::make_unsigned_t<T>>(buf[i]) << (8 * i);
    return static_cast<T>(u);
}

void write_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    write_le<std::uint64_t>(os, bits);
}

double read_f64(std::istream& is) {
    const std::uint64_t bits = read_le<std::uint64_t>(is);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    os.write(kMagic, static_cast<std::streamsize>(kMagicLen));
    for (const auto& [name, t] : tensors) {
        if (name.size() > 0xFFFF) throw std::runtime_error("checkpoint tensor name too long");
        write_le<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
        for (std::size_t d : t.shape) write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
        for (double v : t.data) write_f64(os, v);
    }
    if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[kMagicLen];
    is.read(magic, static_cast<std::streamsize>(kMagicLen));
    if (!is || std::memcmp(magic, kMagic, kMagicLen) != 0) {
        throw std::runtime_error("not a checkpoint file (bad magic): " + path);
    }
    Checkpoint ck;
    while (true) {
        const std::uint16_t name_len = read_le<std::uint16_t>(is);
        if (is.eof()) break;
        if (!is) throw std::runtime_error("truncated checkpoint: " + path);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const auto rank = read_le<std::uint8_t>(is);
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = read_le<std::uint32_t>(is);
        Tensor t(shape);
        for (double& v : t.data) v = read_f64(is);
        if (!is) throw std::runtime_error("truncated checkpoint: " + path);
        ck.tensors.emplace(std::move(name), std::move(t));
    }
    return ck;
}

}  // namespace rffsei
