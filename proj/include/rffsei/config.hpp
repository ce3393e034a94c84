#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rffsei/eval.hpp"

namespace rffsei::config {

// Flat sectioned key-value text. Lines are `key = value` under `[section]`
// headers; `#` starts a comment. Parse and validation errors carry
// `path:line:` prefixes.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct KeyValueFile {
    struct Entry {
        std::string value;
        int line = 0;
        mutable bool used = false;
    };
    std::string path;
    std::map<std::string, Entry> entries;  // "section.key" -> entry
    std::map<std::string, int> section_lines;

    static KeyValueFile parse_file(const std::string& path);
    static KeyValueFile parse_text(const std::string& text, const std::string& path = "<config>");

    bool has(const std::string& key) const { return entries.count(key) != 0; }
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    std::size_t get_size(const std::string& key, std::size_t fallback) const;
    // Required lookups throw ConfigError naming the field.
    std::string require_string(const std::string& key) const;
    void reject_unused() const;  // unknown keys are parse errors

    [[noreturn]] void fail(const std::string& key, const std::string& message) const;
};

// Per-fleet impairment ranges; profiles are drawn from these with a fleet seed.
struct FleetRanges {
    double amp_offset_min = 0.9, amp_offset_max = 1.1;
    double cfo_hz_min = -5e3, cfo_hz_max = 5e3;
    double phase_offset_rad_min = -3.141592653589793, phase_offset_rad_max = 3.141592653589793;
    double iq_gain_min = 0.95, iq_gain_max = 1.05;
    double iq_phase_skew_rad_min = -0.05, iq_phase_skew_rad_max = 0.05;
    double pa3_min = -0.08, pa3_max = 0.0;
    double pa5_min = -0.02, pa5_max = 0.0;
};

std::vector<signal::EmitterProfile> build_fleet(std::size_t count, const FleetRanges& ranges,
                                                std::uint64_t fleet_seed);

struct ExperimentConfig {
    // fleet
    std::size_t emitter_count = 4;
    std::uint64_t fleet_seed = 7;
    FleetRanges ranges;
    // signal
    double sample_rate_hz = 16e6;
    double pulse_width_s = 12e-6;
    double carrier_hz = 1e6;
    double symbol_rate_hz = 1e6;
    double sweep_lo_hz = 0.8e6;
    double sweep_hi_hz = 1.2e6;
    std::size_t sample_length = 200;
    // data
    std::uint64_t data_seed = 1;
    std::vector<signal::ModKind> source_schemes;
    signal::ModKind target_scheme = signal::ModKind::QFSK;
    std::size_t frames_per_pair = 150;
    std::size_t target_frames_per_pair = 75;
    std::size_t test_frames_per_pair = 50;
    int gen_threads = 1;
    // channel
    signal::ChannelConfig channel;
    // model
    model::ModelConfig model;
    // mdd + train
    train::TrainConfig train;
    // matrix
    std::vector<std::pair<std::string, std::vector<signal::ModKind>>> matrix_groups;
    std::vector<signal::ModKind> matrix_targets;
    int matrix_jobs = 1;
    // output
    std::string output_dir = "out";

    static ExperimentConfig from_file(const KeyValueFile& kv);
    signal::ModulationScheme scheme_for(signal::ModKind kind) const;
    std::vector<signal::EmitterProfile> fleet() const;
    eval::MatrixSpec matrix_spec() const;
    std::string to_text() const;  // effective configuration echo
};

}  // namespace rffsei::config
