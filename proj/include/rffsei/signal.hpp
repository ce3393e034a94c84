#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rffsei/rng.hpp"
#include "rffsei/tensor.hpp"

namespace rffsei::signal {

enum class ModKind : std::uint8_t {
    LFM,
    NLFM,
    BFSK,
    QFSK,
    BPSK,
    QPSK,
    PSK8,
    QAM16,
    QAM64,
    BFSK_QPSK,
    QFSK_BPSK,
};

inline constexpr std::size_t kModKindCount = 11;

const char* kind_name(ModKind k);
std::optional<ModKind> kind_from_name(const std::string& name);
bool is_fm(ModKind k);
bool is_digital(ModKind k);
std::size_t alphabet_size(ModKind k);  // digital schemes; 0 for FM

// One modulation scheme plus its numeric parameters. Defaults follow the
// bench configuration: complex baseband at 16 MHz, 12 us pulses, digital
// carrier and symbol rate of 1 MHz, FM sweep 0.8..1.2 MHz.
struct ModulationScheme {
    ModKind kind = ModKind::BPSK;
    double carrier_hz = 1e6;
    double symbol_rate_hz = 1e6;  // digital schemes
    double sweep_lo_hz = 0.8e6;   // FM schemes
    double sweep_hi_hz = 1.2e6;
    double sample_rate_hz = 16e6;
    double pulse_width_s = 12e-6;

    void validate() const;  // throws std::invalid_argument with the reason
    std::size_t pulse_samples() const;
    std::size_t samples_per_symbol() const;
    std::size_t symbols_per_pulse() const;
    // FSK tone for symbol index `tone` out of `count`, symmetric about the
    // carrier with spacing symbol_rate (orthogonal over one symbol).
    double tone_hz(std::size_t tone, std::size_t count) const;
};

// Device fingerprint: the unintentional front-end impairments. pa_coeffs are
// odd-order memoryless amplifier terms, y = c0*x + c1*x|x|^2 + c2*x|x|^4 ...
// with c0 fixed at 1.
struct EmitterProfile {
    int emitter_id = 0;
    double amp_offset = 1.0;
    double cfo_hz = 0.0;
    double phase_offset_rad = 0.0;
    double iq_gain_imbalance = 1.0;
    double iq_phase_skew_rad = 0.0;
    std::vector<double> pa_coeffs{1.0};

    void validate(double max_abs_cfo_hz) const;
    static EmitterProfile identity(int id);
    bool same_parameters(const EmitterProfile& o) const;
};

struct ChannelConfig {
    double snr_db = 15.0;  // +infinity disables noise

    bool noiseless() const { return std::isinf(snr_db) && snr_db > 0; }
};

// One pulse as a (2, L) real tensor: row 0 in-phase, row 1 quadrature.
struct IQFrame {
    Tensor data;
    std::optional<int> label;
    ModKind scheme_tag = ModKind::BPSK;

    std::size_t length() const { return data.rank() == 2 ? data.shape[1] : 0; }
    std::complex<double> sample(std::size_t n) const {
        return {data.at(0, n), data.at(1, n)};
    }
    void set_sample(std::size_t n, std::complex<double> z) {
        data.at(0, n) = z.real();
        data.at(1, n) = z.imag();
    }
};

struct NoPulse : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Ideal (noiseless, unimpaired) baseband pulse. Digital schemes take the
// symbol sequence in `payload`; an empty payload draws symbols uniformly from
// `rng`. FM schemes ignore payload and rng (the sweep is fully configured).
IQFrame modulate(const ModulationScheme& scheme, std::span<const int> payload, Rng& rng);

// Fingerprint chain, sample-wise with t = n / sample_rate:
//   PA_poly( IQ_imbalance( x * amp_offset * exp(j(2*pi*cfo*t + phase_offset)) ) )
IQFrame apply_rff(const IQFrame& frame, const EmitterProfile& profile, double sample_rate_hz);

// Complex AWGN at the configured SNR relative to the frame's mean power.
IQFrame add_awgn(const IQFrame& frame, const ChannelConfig& channel, Rng& rng);

// Start index of a pulse of `expected_len` samples inside a long (2, N)
// stream, found by the sliding lag-1 self-autocorrelation statistic. A pulse
// is declared only when the peak exceeds threshold_mult times the median
// statistic; otherwise throws NoPulse.
std::size_t detect_pulse(const Tensor& stream, std::size_t expected_len,
                         double threshold_mult = 8.0);

}  // namespace rffsei::signal
