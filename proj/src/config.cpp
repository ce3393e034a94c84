#include "rffsei/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "rffsei/rng.hpp"

namespace rffsei::config {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    out.erase(std::remove(out.begin(), out.end(), std::string()), out.end());
    return out;
}

signal::ModKind parse_kind(const KeyValueFile& kv, const std::string& key,
                           const std::string& name) {
    const auto k = signal::kind_from_name(name);
    if (!k) kv.fail(key, "unknown modulation scheme '" + name + "'");
    return *k;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_text(ss.str(), path);
}

KeyValueFile KeyValueFile::parse_text(const std::string& text, const std::string& path) {
    KeyValueFile kv;
    kv.path = path;
    std::istringstream is(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(path + ":" + std::to_string(lineno) + ": unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                throw ConfigError(path + ":" + std::to_string(lineno) + ": empty section name");
            }
            kv.section_lines.emplace(section, lineno);
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
        }
        if (section.empty()) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": key outside any [section]");
        }
        const std::string full = section + "." + key;
        if (kv.entries.count(full)) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate key '" + full + "'");
        }
        kv.entries.emplace(full, Entry{value, lineno, false});
    }
    return kv;
}

void KeyValueFile::fail(const std::string& key, const std::string& message) const {
    auto it = entries.find(key);
    if (it != entries.end()) {
        throw ConfigError(path + ":" + std::to_string(it->second.line) + ": field '" + key + "': " +
                          message);
    }
    const std::string section = key.substr(0, key.find('.'));
    auto sec = section_lines.find(section);
    const int line = sec == section_lines.end() ? 0 : sec->second;
    throw ConfigError(path + ":" + std::to_string(line) + ": field '" + key + "': " + message);
}

std::string KeyValueFile::get_string(const std::string& key, const std::string& fallback) const {
    auto it = entries.find(key);
    if (it == entries.end()) return fallback;
    it->second.used = true;
    return it->second.value;
}

double KeyValueFile::get_double(const std::string& key, double fallback) const {
    auto it = entries.find(key);
    if (it == entries.end()) return fallback;
    it->second.used = true;
    if (it->second.value == "inf") return std::numeric_limits<double>::infinity();
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second.value, &pos);
        if (pos != it->second.value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        fail(key, "expected a number, got '" + it->second.value + "'");
    }
}

std::uint64_t KeyValueFile::get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = entries.find(key);
    if (it == entries.end()) return fallback;
    it->second.used = true;
    try {
        std::size_t pos = 0;
        const std::uint64_t v = std::stoull(it->second.value, &pos);
        if (pos != it->second.value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        fail(key, "expected an unsigned integer, got '" + it->second.value + "'");
    }
}

std::size_t KeyValueFile::get_size(const std::string& key, std::size_t fallback) const {
    return static_cast<std::size_t>(get_u64(key, fallback));
}

std::string KeyValueFile::require_string(const std::string& key) const {
    auto it = entries.find(key);
    if (it == entries.end()) fail(key, "missing required field");
    it->second.used = true;
    return it->second.value;
}

void KeyValueFile::reject_unused() const {
    for (const auto& [key, entry] : entries) {
        if (!entry.used) {
            throw ConfigError(path + ":" + std::to_string(entry.line) + ": unknown field '" + key +
                              "'");
        }
    }
}

std::vector<signal::EmitterProfile> build_fleet(std::size_t count, const FleetRanges& r,
                                                std::uint64_t fleet_seed) {
    if (count < 2) throw std::invalid_argument("fleet: need at least 2 emitters");
    std::vector<signal::EmitterProfile> fleet;
    fleet.reserve(count);
    for (std::size_t id = 0; id < count; ++id) {
        Rng rng = derive_rng(fleet_seed, "emitter", id);
        signal::EmitterProfile p;
        p.emitter_id = static_cast<int>(id);
        p.amp_offset = rng.uniform(r.amp_offset_min, r.amp_offset_max);
        p.cfo_hz = rng.uniform(r.cfo_hz_min, r.cfo_hz_max);
        p.phase_offset_rad = rng.uniform(r.phase_offset_rad_min, r.phase_offset_rad_max);
        p.iq_gain_imbalance = rng.uniform(r.iq_gain_min, r.iq_gain_max);
        p.iq_phase_skew_rad = rng.uniform(r.iq_phase_skew_rad_min, r.iq_phase_skew_rad_max);
        p.pa_coeffs = {1.0, rng.uniform(r.pa3_min, r.pa3_max), rng.uniform(r.pa5_min, r.pa5_max)};
        fleet.push_back(std::move(p));
    }
    return fleet;
}

ExperimentConfig ExperimentConfig::from_file(const KeyValueFile& kv) {
    ExperimentConfig c;
    c.emitter_count = kv.get_size("fleet.emitter_count", c.emitter_count);
    c.fleet_seed = kv.get_u64("fleet.fleet_seed", c.fleet_seed);
    c.ranges.amp_offset_min = kv.get_double("fleet.amp_offset_min", c.ranges.amp_offset_min);
    c.ranges.amp_offset_max = kv.get_double("fleet.amp_offset_max", c.ranges.amp_offset_max);
    c.ranges.cfo_hz_min = kv.get_double("fleet.cfo_hz_min", c.ranges.cfo_hz_min);
    c.ranges.cfo_hz_max = kv.get_double("fleet.cfo_hz_max", c.ranges.cfo_hz_max);
    c.ranges.phase_offset_rad_min =
        kv.get_double("fleet.phase_offset_rad_min", c.ranges.phase_offset_rad_min);
    c.ranges.phase_offset_rad_max =
        kv.get_double("fleet.phase_offset_rad_max", c.ranges.phase_offset_rad_max);
    c.ranges.iq_gain_min = kv.get_double("fleet.iq_gain_min", c.ranges.iq_gain_min);
    c.ranges.iq_gain_max = kv.get_double("fleet.iq_gain_max", c.ranges.iq_gain_max);
    c.ranges.iq_phase_skew_rad_min =
        kv.get_double("fleet.iq_phase_skew_rad_min", c.ranges.iq_phase_skew_rad_min);
    c.ranges.iq_phase_skew_rad_max =
        kv.get_double("fleet.iq_phase_skew_rad_max", c.ranges.iq_phase_skew_rad_max);
    c.ranges.pa3_min = kv.get_double("fleet.pa3_min", c.ranges.pa3_min);
    c.ranges.pa3_max = kv.get_double("fleet.pa3_max", c.ranges.pa3_max);
    c.ranges.pa5_min = kv.get_double("fleet.pa5_min", c.ranges.pa5_min);
    c.ranges.pa5_max = kv.get_double("fleet.pa5_max", c.ranges.pa5_max);

    c.sample_rate_hz = kv.get_double("signal.sample_rate_hz", c.sample_rate_hz);
    c.pulse_width_s = kv.get_double("signal.pulse_width_s", c.pulse_width_s);
    c.carrier_hz = kv.get_double("signal.carrier_hz", c.carrier_hz);
    c.symbol_rate_hz = kv.get_double("signal.symbol_rate_hz", c.symbol_rate_hz);
    c.sweep_lo_hz = kv.get_double("signal.sweep_lo_hz", c.sweep_lo_hz);
    c.sweep_hi_hz = kv.get_double("signal.sweep_hi_hz", c.sweep_hi_hz);
    c.sample_length = kv.get_size("signal.sample_length", c.sample_length);

    c.data_seed = kv.get_u64("data.seed", c.data_seed);
    for (const auto& name : split(kv.require_string("data.source_schemes"), ',')) {
        c.source_schemes.push_back(parse_kind(kv, "data.source_schemes", name));
    }
    if (c.source_schemes.empty()) kv.fail("data.source_schemes", "must name at least one scheme");
    c.target_scheme = parse_kind(kv, "data.target_scheme", kv.require_string("data.target_scheme"));
    c.frames_per_pair = kv.get_size("data.frames_per_pair", c.frames_per_pair);
    c.target_frames_per_pair = kv.get_size("data.target_frames_per_pair", c.target_frames_per_pair);
    c.test_frames_per_pair = kv.get_size("data.test_frames_per_pair", c.test_frames_per_pair);
    c.gen_threads = static_cast<int>(kv.get_size("data.threads", 1));

    c.channel.snr_db = kv.get_double("channel.snr_db", c.channel.snr_db);

    c.model.input_length = c.sample_length;
    if (kv.has("model.blocks")) {
        c.model.block_channels.clear();
        for (const auto& s : split(kv.get_string("model.blocks", ""), ',')) {
            try {
                c.model.block_channels.push_back(std::stoul(s));
            } catch (const std::exception&) {
                kv.fail("model.blocks", "expected a comma-separated channel list");
            }
        }
    }
    c.model.block_stride = kv.get_size("model.block_stride", c.model.block_stride);
    c.model.embedding_dim = kv.get_size("model.embedding_dim", c.model.embedding_dim);
    c.model.hidden_width = kv.get_size("model.hidden_width", c.model.hidden_width);
    c.model.class_count = c.emitter_count;

    c.train.mdd.gamma = kv.get_double("mdd.gamma", c.train.mdd.gamma);
    c.train.mdd.lambda = kv.get_double("mdd.lambda", c.train.mdd.lambda);
    c.train.mdd.grl_beta = kv.get_double("mdd.grl_beta", c.train.mdd.grl_beta);

    c.train.pretrain_epochs = kv.get_size("train.pretrain_epochs", c.train.pretrain_epochs);
    c.train.epochs = kv.get_size("train.epochs", c.train.epochs);
    c.train.batch_size = kv.get_size("train.batch_size", c.train.batch_size);
    c.train.seed = kv.get_u64("train.seed", c.train.seed);
    c.train.adam.lr = kv.get_double("train.lr", c.train.adam.lr);

    if (kv.has("matrix.groups")) {
        for (const auto& group : split(kv.get_string("matrix.groups", ""), ';')) {
            const std::size_t colon = group.find(':');
            if (colon == std::string::npos) {
                kv.fail("matrix.groups", "expected 'name:SCHEME|SCHEME;...'");
            }
            std::vector<signal::ModKind> kinds;
            for (const auto& name : split(group.substr(colon + 1), '|')) {
                kinds.push_back(parse_kind(kv, "matrix.groups", name));
            }
            if (kinds.empty()) kv.fail("matrix.groups", "group without schemes");
            c.matrix_groups.emplace_back(trim(group.substr(0, colon)), std::move(kinds));
        }
    } else {
        c.matrix_groups.emplace_back("source", c.source_schemes);
    }
    if (kv.has("matrix.targets")) {
        for (const auto& name : split(kv.get_string("matrix.targets", ""), ',')) {
            c.matrix_targets.push_back(parse_kind(kv, "matrix.targets", name));
        }
    } else {
        c.matrix_targets = {c.target_scheme};
    }
    c.matrix_jobs = static_cast<int>(kv.get_size("matrix.jobs", 1));

    c.output_dir = kv.get_string("output.dir", c.output_dir);

    kv.reject_unused();

    // cross-field validation, reported against the offending fields
    try {
        for (auto k : c.source_schemes) c.scheme_for(k).validate();
        c.scheme_for(c.target_scheme).validate();
    } catch (const std::exception& e) {
        kv.fail("signal.sample_rate_hz", e.what());
    }
    try {
        c.model.validate();
    } catch (const std::exception& e) {
        kv.fail("model.blocks", e.what());
    }
    try {
        c.train.validate();
    } catch (const std::exception& e) {
        kv.fail("train.batch_size", e.what());
    }
    return c;
}

signal::ModulationScheme ExperimentConfig::scheme_for(signal::ModKind kind) const {
    signal::ModulationScheme s;
    s.kind = kind;
    s.carrier_hz = carrier_hz;
    s.symbol_rate_hz = symbol_rate_hz;
    s.sweep_lo_hz = sweep_lo_hz;
    s.sweep_hi_hz = sweep_hi_hz;
    s.sample_rate_hz = sample_rate_hz;
    s.pulse_width_s = pulse_width_s;
    return s;
}

std::vector<signal::EmitterProfile> ExperimentConfig::fleet() const {
    return build_fleet(emitter_count, ranges, fleet_seed);
}

eval::MatrixSpec ExperimentConfig::matrix_spec() const {
    eval::MatrixSpec spec;
    spec.emitters = fleet();
    for (const auto& [name, kinds] : matrix_groups) {
        std::vector<signal::ModulationScheme> schemes;
        for (auto k : kinds) schemes.push_back(scheme_for(k));
        spec.groups.emplace_back(name, std::move(schemes));
    }
    for (auto k : matrix_targets) spec.targets.push_back(scheme_for(k));
    spec.source_frames_per_pair = frames_per_pair;
    spec.target_frames_per_pair = target_frames_per_pair;
    spec.test_frames_per_pair = test_frames_per_pair;
    spec.sample_length = sample_length;
    spec.channel = channel;
    spec.model = model;
    spec.train = train;
    spec.data_seed = data_seed;
    spec.jobs = matrix_jobs;
    return spec;
}

std::string ExperimentConfig::to_text() const {
    std::ostringstream os;
    os << "[fleet]\n";
    os << "emitter_count = " << emitter_count << "\n";
    os << "fleet_seed = " << fleet_seed << "\n";
    os << "amp_offset_min = " << fmt(ranges.amp_offset_min) << "\n";
    os << "amp_offset_max = " << fmt(ranges.amp_offset_max) << "\n";
    os << "cfo_hz_min = " << fmt(ranges.cfo_hz_min) << "\n";
    os << "cfo_hz_max = " << fmt(ranges.cfo_hz_max) << "\n";
    os << "phase_offset_rad_min = " << fmt(ranges.phase_offset_rad_min) << "\n";
    os << "phase_offset_rad_max = " << fmt(ranges.phase_offset_rad_max) << "\n";
    os << "iq_gain_min = " << fmt(ranges.iq_gain_min) << "\n";
    os << "iq_gain_max = " << fmt(ranges.iq_gain_max) << "\n";
    os << "iq_phase_skew_rad_min = " << fmt(ranges.iq_phase_skew_rad_min) << "\n";
    os << "iq_phase_skew_rad_max = " << fmt(ranges.iq_phase_skew_rad_max) << "\n";
    os << "pa3_min = " << fmt(ranges.pa3_min) << "\n";
    os << "pa3_max = " << fmt(ranges.pa3_max) << "\n";
    os << "pa5_min = " << fmt(ranges.pa5_min) << "\n";
    os << "pa5_max = " << fmt(ranges.pa5_max) << "\n";
    os << "\n[signal]\n";
    os << "sample_rate_hz = " << fmt(sample_rate_hz) << "\n";
    os << "pulse_width_s = " << fmt(pulse_width_s) << "\n";
    os << "carrier_hz = " << fmt(carrier_hz) << "\n";
    os << "symbol_rate_hz = " << fmt(symbol_rate_hz) << "\n";
    os << "sweep_lo_hz = " << fmt(sweep_lo_hz) << "\n";
    os << "sweep_hi_hz = " << fmt(sweep_hi_hz) << "\n";
    os << "sample_length = " << sample_length << "\n";
    os << "\n[data]\n";
    os << "seed = " << data_seed << "\n";
    os << "source_schemes = ";
    for (std::size_t i = 0; i < source_schemes.size(); ++i) {
        os << (i ? ", " : "") << signal::kind_name(source_schemes[i]);
    }
    os << "\n";
    os << "target_scheme = " << signal::kind_name(target_scheme) << "\n";
    os << "frames_per_pair = " << frames_per_pair << "\n";
    os << "target_frames_per_pair = " << target_frames_per_pair << "\n";
    os << "test_frames_per_pair = " << test_frames_per_pair << "\n";
    os << "threads = " << gen_threads << "\n";
    os << "\n[channel]\n";
    os << "snr_db = " << (channel.noiseless() ? "inf" : fmt(channel.snr_db)) << "\n";
    os << "\n[model]\n";
    os << "blocks = ";
    for (std::size_t i = 0; i < model.block_channels.size(); ++i) {
        os << (i ? ", " : "") << model.block_channels[i];
    }
    os << "\n";
    os << "block_stride = " << model.block_stride << "\n";
    os << "embedding_dim = " << model.embedding_dim << "\n";
    os << "hidden_width = " << model.hidden_width << "\n";
    os << "\n[mdd]\n";
    os << "gamma = " << fmt(train.mdd.gamma) << "\n";
    os << "lambda = " << fmt(train.mdd.lambda) << "\n";
    os << "grl_beta = " << fmt(train.mdd.grl_beta) << "\n";
    os << "\n[train]\n";
    os << "pretrain_epochs = " << train.pretrain_epochs << "\n";
    os << "epochs = " << train.epochs << "\n";
    os << "batch_size = " << train.batch_size << "\n";
    os << "seed = " << train.seed << "\n";
    os << "lr = " << fmt(train.adam.lr) << "\n";
    os << "\n[matrix]\n";
    os << "groups = ";
    for (std::size_t g = 0; g < matrix_groups.size(); ++g) {
        os << (g ? "; " : "") << matrix_groups[g].first << ":";
        for (std::size_t i = 0; i < matrix_groups[g].second.size(); ++i) {
            os << (i ? "|" : "") << signal::kind_name(matrix_groups[g].second[i]);
        }
    }
    os << "\n";
    os << "targets = ";
    for (std::size_t i = 0; i < matrix_targets.size(); ++i) {
        os << (i ? ", " : "") << signal::kind_name(matrix_targets[i]);
    }
    os << "\n";
    os << "jobs = " << matrix_jobs << "\n";
    os << "\n[output]\n";
    os << "dir = " << output_dir << "\n";
    return os.str();
}

}  // namespace rffsei::config
