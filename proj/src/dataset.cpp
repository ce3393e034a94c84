#include "rffsei/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>

namespace rffsei::signal {

namespace {

constexpr char kMagic[] = "RFFSEI1\n";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

template <typename T>
void write_le(std::ostream& os, T v) {
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
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        u |= static_cast<std::make_unsigned_t<T>>(buf[i]) << (8 * i);
    }
    return static_cast<T>(u);
}

void write_f32(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    write_le<std::uint32_t>(os, bits);
}

float read_f32(std::istream& is) {
    const std::uint32_t bits = read_le<std::uint32_t>(is);
    float v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

IQFrame crop_or_pad(const IQFrame& frame, std::size_t target_len) {
    IQFrame out;
    out.label = frame.label;
    out.scheme_tag = frame.scheme_tag;
    out.data = Tensor({2, target_len});
    const std::size_t copy = std::min(frame.length(), target_len);
    for (std::size_t row = 0; row < 2; ++row) {
        for (std::size_t i = 0; i < copy; ++i) out.data.at(row, i) = frame.data.at(row, i);
    }
    return out;
}

}  // namespace

const char* role_name(SplitRole r) {
    switch (r) {
        case SplitRole::source_labeled: return "source_labeled";
        case SplitRole::target_unlabeled_train: return "target_unlabeled_train";
        case SplitRole::target_unlabeled_test: return "target_unlabeled_test";
    }
    return "unknown";
}

bool DatasetManifest::any_labeled() const {
    for (const auto& f : frames) {
        if (f.label.has_value()) return true;
    }
    return false;
}

DatasetManifest generate_dataset(const std::vector<EmitterProfile>& emitters,
                                 const std::vector<ModulationScheme>& schemes,
                                 std::size_t frames_per_pair, const ChannelConfig& channel,
                                 std::uint64_t seed, const GenOptions& opts) {
    if (emitters.size() < 2) throw std::invalid_argument("generate_dataset: need at least 2 emitters");
    if (schemes.empty()) throw std::invalid_argument("generate_dataset: need at least 1 scheme");
    if (frames_per_pair < 1) throw std::invalid_argument("generate_dataset: frames_per_pair must be >= 1");
    for (const auto& s : schemes) s.validate();
    for (std::size_t i = 0; i < emitters.size(); ++i) {
        double min_rate = std::numeric_limits<double>::infinity();
        for (const auto& s : schemes) {
            if (is_digital(s.kind)) min_rate = std::min(min_rate, s.symbol_rate_hz);
        }
        emitters[i].validate(min_rate);
        for (std::size_t j = i + 1; j < emitters.size(); ++j) {
            if (emitters[i].emitter_id == emitters[j].emitter_id ||
                emitters[i].same_parameters(emitters[j])) {
                throw std::invalid_argument("generate_dataset: emitter profiles must be distinct");
            }
        }
    }

    DatasetManifest ds;
    ds.emitter_count = emitters.size();
    ds.seed = seed;
    ds.role = opts.role;
    for (const auto& s : schemes) ds.schemes.push_back(s.kind);
    const bool keep_labels = opts.role != SplitRole::target_unlabeled_train;

    const std::size_t total = emitters.size() * schemes.size() * frames_per_pair;
    ds.frames.resize(total);
    const std::uint64_t split_seed = derive_seed(seed, role_name(opts.role));

    auto make_frame = [&](std::size_t flat) {
        const std::size_t per_emitter = schemes.size() * frames_per_pair;
        const std::size_t e = flat / per_emitter;
        const std::size_t s = (flat % per_emitter) / frames_per_pair;
        const std::size_t idx = flat % frames_per_pair;
        Rng rng = derive_rng(split_seed, "frame", static_cast<std::uint64_t>(emitters[e].emitter_id),
                             static_cast<std::uint64_t>(schemes[s].kind), idx);
        IQFrame frame = modulate(schemes[s], {}, rng);
        frame = apply_rff(frame, emitters[e], schemes[s].sample_rate_hz);
        frame = add_awgn(frame, channel, rng);
        frame = crop_or_pad(frame, opts.sample_length);
        if (keep_labels) frame.label = emitters[e].emitter_id;
        ds.frames[flat] = std::move(frame);
    };

    const int threads = std::max(1, opts.threads);
    if (threads == 1 || total < 2) {
        for (std::size_t i = 0; i < total; ++i) make_frame(i);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (total + threads - 1) / static_cast<std::size_t>(threads);
        for (int t = 0; t < threads; ++t) {
            const std::size_t lo = static_cast<std::size_t>(t) * chunk;
            const std::size_t hi = std::min(total, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back([&, lo, hi] {
                for (std::size_t i = lo; i < hi; ++i) make_frame(i);
            });
        }
        for (auto& th : pool) th.join();
    }
    return ds;
}

void save_dataset(const DatasetManifest& ds, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open dataset for writing: " + path);
    os.write(kMagic, static_cast<std::streamsize>(kMagicLen));
    const std::size_t len = ds.sample_length();
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.frames.size()));
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(len));
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.emitter_count));
    write_le<std::uint64_t>(os, ds.seed);
    write_le<std::uint8_t>(os, static_cast<std::uint8_t>(ds.schemes.size()));
    for (ModKind k : ds.schemes) {
        write_le<std::uint8_t>(os, static_cast<std::uint8_t>(k));
        const std::string name = kind_name(k);
        write_le<std::uint8_t>(os, static_cast<std::uint8_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    for (const auto& f : ds.frames) {
        if (f.length() != len) throw std::runtime_error("save_dataset: inconsistent frame length");
        write_le<std::uint16_t>(os, f.label ? static_cast<std::uint16_t>(*f.label) : 0xFFFF);
        write_le<std::uint8_t>(os, static_cast<std::uint8_t>(f.scheme_tag));
        for (std::size_t row = 0; row < 2; ++row) {
            for (std::size_t i = 0; i < len; ++i) {
                write_f32(os, static_cast<float>(f.data.at(row, i)));
            }
        }
    }
    if (!os) throw std::runtime_error("dataset write failed: " + path);
}

DatasetManifest load_dataset(const std::string& path, SplitRole role) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open dataset: " + path);
    char magic[kMagicLen];
    is.read(magic, static_cast<std::streamsize>(kMagicLen));
    if (!is || std::memcmp(magic, kMagic, kMagicLen) != 0) {
        throw std::runtime_error("not a dataset file (bad magic): " + path);
    }
    DatasetManifest ds;
    ds.role = role;
    const auto count = read_le<std::uint32_t>(is);
    const auto len = read_le<std::uint32_t>(is);
    ds.emitter_count = read_le<std::uint32_t>(is);
    ds.seed = read_le<std::uint64_t>(is);
    const auto scheme_count = read_le<std::uint8_t>(is);
    for (std::size_t i = 0; i < scheme_count; ++i) {
        const auto tag = read_le<std::uint8_t>(is);
        const auto name_len = read_le<std::uint8_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (tag >= kModKindCount || kind_from_name(name) != static_cast<ModKind>(tag)) {
            throw std::runtime_error("dataset scheme table is corrupt: " + path);
        }
        ds.schemes.push_back(static_cast<ModKind>(tag));
    }
    ds.frames.resize(count);
    for (auto& f : ds.frames) {
        const auto label = read_le<std::uint16_t>(is);
        const auto tag = read_le<std::uint8_t>(is);
        if (tag >= kModKindCount) throw std::runtime_error("dataset frame has a bad scheme tag");
        f.scheme_tag = static_cast<ModKind>(tag);
        if (label != 0xFFFF) f.label = static_cast<int>(label);
        f.data = Tensor({2, len});
        for (std::size_t row = 0; row < 2; ++row) {
            for (std::size_t i = 0; i < len; ++i) {
                f.data.at(row, i) = static_cast<double>(read_f32(is));
            }
        }
    }
    if (!is) throw std::runtime_error("truncated dataset: " + path);
    return ds;
}

}  // namespace rffsei::signal
