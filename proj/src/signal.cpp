#include "rffsei/signal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace rffsei::signal {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct KindInfo {
    ModKind kind;
    const char* name;
    bool fm;
    std::size_t alphabet;
};

constexpr std::array<KindInfo, kModKindCount> kKinds{{
    {ModKind::LFM, "LFM", true, 0},
    {ModKind::NLFM, "NLFM", true, 0},
    {ModKind::BFSK, "BFSK", false, 2},
    {ModKind::QFSK, "QFSK", false, 4},
    {ModKind::BPSK, "BPSK", false, 2},
    {ModKind::QPSK, "QPSK", false, 4},
    {ModKind::PSK8, "PSK8", false, 8},
    {ModKind::QAM16, "QAM16", false, 16},
    {ModKind::QAM64, "QAM64", false, 64},
    {ModKind::BFSK_QPSK, "BFSK_QPSK", false, 8},
    {ModKind::QFSK_BPSK, "QFSK_BPSK", false, 8},
}};

const KindInfo& info(ModKind k) { return kKinds[static_cast<std::size_t>(k)]; }

std::size_t gray(std::size_t v) { return v ^ (v >> 1); }

// Per-axis QAM level for a Gray-coded bit group: level_of[gray(l)] = 2l-(m-1).
double qam_axis_level(std::size_t bits, std::size_t m) {
    for (std::size_t l = 0; l < m; ++l) {
        if (gray(l) == bits) return 2.0 * static_cast<double>(l) - static_cast<double>(m - 1);
    }
    return 0.0;  // unreachable for bits < m
}

std::complex<double> psk_point(std::size_t sym, std::size_t order, double offset) {
    const double phase = kTwoPi * static_cast<double>(gray(sym)) / static_cast<double>(order) + offset;
    return {std::cos(phase), std::sin(phase)};
}

// Gray-coded square QAM, odd-integer levels, normalized to unit mean energy.
std::complex<double> qam_point(std::size_t sym, std::size_t order) {
    const std::size_t m = order == 16 ? 4 : 8;  // levels per axis
    const std::size_t bits_per_axis = order == 16 ? 2 : 3;
    const double li = qam_axis_level(sym >> bits_per_axis, m);
    const double lq = qam_axis_level(sym & (m - 1), m);
    // mean energy of the unnormalized grid: 2 * mean(level^2) per axis
    const double mean_axis_sq = (static_cast<double>(m) * static_cast<double>(m) - 1.0) / 3.0;
    const double norm = 1.0 / std::sqrt(2.0 * mean_axis_sq);
    return {li * norm, lq * norm};
}

}  // namespace

const char* kind_name(ModKind k) { return info(k).name; }

std::optional<ModKind> kind_from_name(const std::string& name) {
    for (const auto& ki : kKinds) {
        if (name == ki.name) return ki.kind;
    }
    // common aliases
    if (name == "8PSK") return ModKind::PSK8;
    if (name == "16QAM") return ModKind::QAM16;
    if (name == "64QAM") return ModKind::QAM64;
    return std::nullopt;
}

bool is_fm(ModKind k) { return info(k).fm; }
bool is_digital(ModKind k) { return !info(k).fm; }
std::size_t alphabet_size(ModKind k) { return info(k).alphabet; }

void ModulationScheme::validate() const {
    if (sample_rate_hz <= 0 || pulse_width_s <= 0) {
        throw std::invalid_argument("scheme: sample rate and pulse width must be positive");
    }
    const double samples = pulse_width_s * sample_rate_hz;
    if (std::fabs(samples - std::round(samples)) > 1e-6 || std::round(samples) < 1) {
        throw std::invalid_argument("scheme: pulse_width_s * sample_rate_hz must be a whole number of samples");
    }
    if (is_fm(kind)) {
        if (!(sweep_lo_hz < sweep_hi_hz)) {
            throw std::invalid_argument("scheme: FM sweep requires sweep_lo_hz < sweep_hi_hz");
        }
        if (sample_rate_hz <= 2.0 * sweep_hi_hz) {
            throw std::invalid_argument("scheme: Nyquist violation (sample rate <= 2 * sweep_hi)");
        }
    } else {
        if (symbol_rate_hz <= 0) {
            throw std::invalid_argument("scheme: digital schemes require symbol_rate_hz > 0");
        }
        if (sample_rate_hz <= 2.0 * carrier_hz) {
            throw std::invalid_argument("scheme: Nyquist violation (sample rate <= 2 * carrier)");
        }
        const double sps = sample_rate_hz / symbol_rate_hz;
        if (std::fabs(sps - std::round(sps)) > 1e-6 || std::round(sps) < 1) {
            throw std::invalid_argument("scheme: sample rate must be an integer multiple of symbol rate");
        }
    }
}

std::size_t ModulationScheme::pulse_samples() const {
    return static_cast<std::size_t>(std::llround(pulse_width_s * sample_rate_hz));
}

std::size_t ModulationScheme::samples_per_symbol() const {
    return static_cast<std::size_t>(std::llround(sample_rate_hz / symbol_rate_hz));
}

std::size_t ModulationScheme::symbols_per_pulse() const {
    const std::size_t sps = samples_per_symbol();
    return (pulse_samples() + sps - 1) / sps;
}

double ModulationScheme::tone_hz(std::size_t tone, std::size_t count) const {
    return carrier_hz +
           (2.0 * static_cast<double>(tone) - static_cast<double>(count - 1)) * symbol_rate_hz / 2.0;
}

void EmitterProfile::validate(double max_abs_cfo_hz) const {
    if (!(amp_offset > 0)) throw std::invalid_argument("profile: amp_offset must be positive");
    if (std::fabs(cfo_hz) >= max_abs_cfo_hz) {
        throw std::invalid_argument("profile: |cfo_hz| must stay below the symbol rate");
    }
    if (pa_coeffs.empty() || pa_coeffs[0] != 1.0) {
        throw std::invalid_argument("profile: pa_coeffs[0] must be 1 (unit linear gain)");
    }
}

EmitterProfile EmitterProfile::identity(int id) {
    EmitterProfile p;
    p.emitter_id = id;
    return p;
}

bool EmitterProfile::same_parameters(const EmitterProfile& o) const {
    return amp_offset == o.amp_offset && cfo_hz == o.cfo_hz &&
           phase_offset_rad == o.phase_offset_rad &&
           iq_gain_imbalance == o.iq_gain_imbalance &&
           iq_phase_skew_rad == o.iq_phase_skew_rad && pa_coeffs == o.pa_coeffs;
}

IQFrame modulate(const ModulationScheme& scheme, std::span<const int> payload, Rng& rng) {
    scheme.validate();
    const std::size_t n = scheme.pulse_samples();
    IQFrame frame;
    frame.data = Tensor({2, n});
    frame.scheme_tag = scheme.kind;
    const double fs = scheme.sample_rate_hz;

    if (is_fm(scheme.kind)) {
        if (n < 2) throw std::invalid_argument("modulate: FM pulse needs at least 2 samples");
        // The sweep is defined on the sample grid: interval i carries the
        // instantaneous frequency f_i, so the first and last phase increments
        // measure sweep_lo and sweep_hi exactly.
        const double f0 = scheme.sweep_lo_hz;
        const double df = scheme.sweep_hi_hz - scheme.sweep_lo_hz;
        const std::size_t intervals = n - 1;
        double phase = 0.0;
        frame.set_sample(0, {1.0, 0.0});
        for (std::size_t i = 0; i < intervals; ++i) {
            const double u =
                intervals > 1 ? static_cast<double>(i) / static_cast<double>(intervals - 1) : 0.0;
            const double freq =
                scheme.kind == ModKind::LFM
                    ? f0 + df * u
                    : f0 + df * 0.5 * (1.0 - std::cos(std::numbers::pi * u));
            phase += kTwoPi * freq / fs;
            frame.set_sample(i + 1, {std::cos(phase), std::sin(phase)});
        }
        return frame;
    }

    const std::size_t order = alphabet_size(scheme.kind);
    const std::size_t count = scheme.symbols_per_pulse();
    std::vector<int> drawn;
    std::span<const int> symbols = payload;
    if (payload.empty()) {
        drawn.resize(count);
        for (auto& s : drawn) s = static_cast<int>(rng.next_below(order));
        symbols = drawn;
    } else if (payload.size() < count) {
        throw std::invalid_argument("modulate: payload too short for the pulse duration");
    }
    for (std::size_t k = 0; k < count; ++k) {
        if (symbols[k] < 0 || static_cast<std::size_t>(symbols[k]) >= order) {
            throw std::invalid_argument("modulate: symbol out of alphabet");
        }
    }

    const std::size_t sps = scheme.samples_per_symbol();
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / fs;
        const std::size_t sym = static_cast<std::size_t>(symbols[i / sps]);
        double freq = scheme.carrier_hz;
        std::complex<double> point{1.0, 0.0};
        switch (scheme.kind) {
            case ModKind::BPSK:
                point = psk_point(sym, 2, 0.0);
                break;
            case ModKind::QPSK:
                point = psk_point(sym, 4, std::numbers::pi / 4.0);
                break;
            case ModKind::PSK8:
                point = psk_point(sym, 8, 0.0);
                break;
            case ModKind::QAM16:
                point = qam_point(sym, 16);
                break;
            case ModKind::QAM64:
                point = qam_point(sym, 64);
                break;
            case ModKind::BFSK:
                freq = scheme.tone_hz(sym, 2);
                break;
            case ModKind::QFSK:
                freq = scheme.tone_hz(sym, 4);
                break;
            case ModKind::BFSK_QPSK:
                freq = scheme.tone_hz(sym & 1, 2);
                point = psk_point(sym >> 1, 4, std::numbers::pi / 4.0);
                break;
            case ModKind::QFSK_BPSK:
                freq = scheme.tone_hz(sym & 3, 4);
                point = psk_point(sym >> 2, 2, 0.0);
                break;
            default:
                break;
        }
        const double phase = kTwoPi * freq * t;
        frame.set_sample(i, point * std::complex<double>{std::cos(phase), std::sin(phase)});
    }
    return frame;
}

IQFrame apply_rff(const IQFrame& frame, const EmitterProfile& profile, double sample_rate_hz) {
    IQFrame out = frame;
    const std::size_t n = frame.length();
    const double g = profile.iq_gain_imbalance;
    const double skew_cos = std::cos(profile.iq_phase_skew_rad);
    const double skew_sin = std::sin(profile.iq_phase_skew_rad);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sample_rate_hz;
        std::complex<double> z = frame.sample(i) * profile.amp_offset *
                                 std::polar(1.0, kTwoPi * profile.cfo_hz * t + profile.phase_offset_rad);
        // IQ imbalance: quadrature arm scaled by g and skewed toward I
        z = {z.real(), g * (z.imag() * skew_cos + z.real() * skew_sin)};
        // memoryless odd-order PA polynomial
        const double p = std::norm(z);
        double gain = 0.0;
        double pk = 1.0;
        for (double c : profile.pa_coeffs) {
            gain += c * pk;
            pk *= p;
        }
        out.set_sample(i, z * gain);
    }
    return out;
}

IQFrame add_awgn(const IQFrame& frame, const ChannelConfig& channel, Rng& rng) {
    if (channel.noiseless()) return frame;
    if (!std::isfinite(channel.snr_db)) {
        throw std::invalid_argument("add_awgn: snr_db must be finite (or +inf to disable)");
    }
    const std::size_t n = frame.length();
    double power = 0.0;
    for (std::size_t i = 0; i < n; ++i) power += std::norm(frame.sample(i));
    power /= static_cast<double>(n);
    if (power <= 0.0) throw std::invalid_argument("add_awgn: zero-power frame");

    const double noise_power = power / std::pow(10.0, channel.snr_db / 10.0);
    const double sigma = std::sqrt(noise_power / 2.0);
    IQFrame out = frame;
    for (std::size_t i = 0; i < n; ++i) {
        out.data.at(0, i) += sigma * rng.next_gaussian();
        out.data.at(1, i) += sigma * rng.next_gaussian();
    }
    return out;
}

std::size_t detect_pulse(const Tensor& stream, std::size_t expected_len, double threshold_mult) {
    if (stream.rank() != 2 || stream.shape[0] != 2) {
        throw std::invalid_argument("detect_pulse: stream must be (2, N)");
    }
    const std::size_t n = stream.shape[1];
    if (n < expected_len || expected_len < 2) {
        throw std::invalid_argument("detect_pulse: stream shorter than expected pulse");
    }
    // prefix sums of the lag-1 products z[n] * conj(z[n+1])
    std::vector<std::complex<double>> prefix(n);
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::complex<double> a{stream.at(0, i), stream.at(1, i)};
        const std::complex<double> b{stream.at(0, i + 1), stream.at(1, i + 1)};
        acc += a * std::conj(b);
        prefix[i + 1] = acc;
    }
    const std::size_t pairs = expected_len - 1;
    const std::size_t positions = n - expected_len + 1;
    std::vector<double> stat(positions);
    for (std::size_t i = 0; i < positions; ++i) {
        stat[i] = std::abs(prefix[i + pairs] - prefix[i]);
    }
    const std::size_t best =
        static_cast<std::size_t>(std::max_element(stat.begin(), stat.end()) - stat.begin());
    std::vector<double> sorted = stat;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];
    if (!(stat[best] > threshold_mult * median) || stat[best] <= 0.0) {
        throw NoPulse("detect_pulse: no pulse above the detection threshold");
    }
    return best;
}

}  // namespace rffsei::signal
