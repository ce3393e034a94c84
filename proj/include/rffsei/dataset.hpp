#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rffsei/signal.hpp"

namespace rffsei::signal {

enum class SplitRole {
    source_labeled,
    target_unlabeled_train,
    target_unlabeled_test,
};

const char* role_name(SplitRole r);

// A generated split plus its provenance. Frames in the unlabeled-train role
// never carry labels; the test role keeps labels for held-out evaluation.
struct DatasetManifest {
    std::vector<IQFrame> frames;
    std::size_t emitter_count = 0;
    std::vector<ModKind> schemes;
    std::uint64_t seed = 0;
    SplitRole role = SplitRole::source_labeled;

    std::size_t sample_length() const { return frames.empty() ? 0 : frames.front().length(); }
    bool any_labeled() const;
};

struct GenOptions {
    std::size_t sample_length = 200;
    SplitRole role = SplitRole::source_labeled;
    int threads = 1;
};

// frames_per_pair frames for every (emitter, scheme) pair via
// modulate -> apply_rff -> add_awgn -> crop/pad to sample_length.
// Every frame derives its own RNG stream from (seed, role, emitter, scheme,
// index), so any thread count produces the identical dataset.
DatasetManifest generate_dataset(const std::vector<EmitterProfile>& emitters,
                                 const std::vector<ModulationScheme>& schemes,
                                 std::size_t frames_per_pair, const ChannelConfig& channel,
                                 std::uint64_t seed, const GenOptions& opts);

// Binary dataset file:
//   "RFFSEI1\n"
//   u32 frame count, u32 L, u32 emitter count, u64 seed,
//   scheme-tag table: u8 count, then per scheme { u8 tag, u8 name length, name }
//   per frame: u16 label (0xFFFF = unlabeled), u8 scheme tag, 2*L f32 samples
// All integers and floats little-endian.
void save_dataset(const DatasetManifest& ds, const std::string& path);
DatasetManifest load_dataset(const std::string& path, SplitRole role);

}  // namespace rffsei::signal
