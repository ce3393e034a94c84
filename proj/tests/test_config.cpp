#include <doctest.h>

#include <string>

#include "rffsei/config.hpp"

using namespace rffsei;
using namespace rffsei::config;

namespace {

const char* kMinimal =
    "[data]\n"
    "source_schemes = QAM16\n"
    "target_scheme = QFSK\n";

ExperimentConfig parse(const std::string& text) {
    return ExperimentConfig::from_file(KeyValueFile::parse_text(text, "test.ini"));
}

}  // namespace

TEST_CASE("minimal config picks up the bench defaults") {
    const auto cfg = parse(kMinimal);
    CHECK(cfg.emitter_count == 4);
    CHECK(cfg.sample_rate_hz == 16e6);
    CHECK(cfg.pulse_width_s == 12e-6);
    CHECK(cfg.sample_length == 200);
    CHECK(cfg.channel.snr_db == 15.0);
    CHECK(cfg.train.mdd.gamma == 4.0);
    CHECK(cfg.train.mdd.lambda == 1.0);
    CHECK(cfg.train.pretrain_epochs == 30);
    CHECK(cfg.train.batch_size == 32);
    CHECK(cfg.train.adam.lr == 1e-4);
    CHECK(cfg.model.block_channels == std::vector<std::size_t>{8, 16, 32, 32});
    CHECK(cfg.model.embedding_dim == 64);
    CHECK(cfg.model.class_count == 4);  // class count tracks the fleet
    CHECK(cfg.source_schemes == std::vector<signal::ModKind>{signal::ModKind::QAM16});
    CHECK(cfg.target_scheme == signal::ModKind::QFSK);
}

TEST_CASE("missing required fields name the field") {
    try {
        parse("[data]\ntarget_scheme = QFSK\n");
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("data.source_schemes") != std::string::npos);
        CHECK(msg.find("missing required field") != std::string::npos);
        CHECK(msg.find("test.ini:1") != std::string::npos);  // the [data] line
    }
}

TEST_CASE("parse errors carry line numbers") {
    try {
        parse("[data]\nsource_schemes = QAM16\ntarget_scheme = QFSK\nnot a key value\n");
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("test.ini:4") != std::string::npos);
    }
    CHECK_THROWS_AS(parse("key_outside_section = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[data\n"), ConfigError);
    CHECK_THROWS_AS(parse(std::string(kMinimal) + "source_schemes = QPSK\n"), ConfigError);
}

TEST_CASE("bad values report the offending line and field") {
    try {
        parse(std::string(kMinimal) + "[channel]\nsnr_db = loud\n");
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("channel.snr_db") != std::string::npos);
        CHECK(msg.find("test.ini:5") != std::string::npos);
    }
    CHECK_THROWS_AS(parse(std::string(kMinimal) + "[train]\nbatch_size = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[data]\nsource_schemes = WAT\ntarget_scheme = QFSK\n"), ConfigError);
}

TEST_CASE("unknown fields are rejected") {
    try {
        parse(std::string(kMinimal) + "[train]\nlerning_rate = 0.1\n");
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("unknown field 'train.lerning_rate'") !=
              std::string::npos);
    }
}

TEST_CASE("comments, whitespace and inf are handled") {
    const auto cfg = parse(
        "# experiment\n"
        "[data]\n"
        "source_schemes = QAM16 , QAM64  # two source schemes\n"
        "target_scheme = BFSK\n"
        "[channel]\n"
        "snr_db = inf\n");
    CHECK(cfg.source_schemes ==
          std::vector<signal::ModKind>{signal::ModKind::QAM16, signal::ModKind::QAM64});
    CHECK(cfg.channel.noiseless());
}

TEST_CASE("scheme aliases from the tables are accepted") {
    const auto cfg = parse(
        "[data]\n"
        "source_schemes = 16QAM\n"
        "target_scheme = 8PSK\n");
    CHECK(cfg.source_schemes == std::vector<signal::ModKind>{signal::ModKind::QAM16});
    CHECK(cfg.target_scheme == signal::ModKind::PSK8);
}

TEST_CASE("matrix groups parse and default to the source schemes") {
    const auto with_groups = parse(std::string(kMinimal) +
                                   "[matrix]\n"
                                   "groups = FM:LFM|NLFM; QAM:QAM16|QAM64\n"
                                   "targets = LFM, QFSK\n"
                                   "jobs = 2\n");
    REQUIRE(with_groups.matrix_groups.size() == 2);
    CHECK(with_groups.matrix_groups[0].first == "FM");
    CHECK(with_groups.matrix_groups[0].second ==
          std::vector<signal::ModKind>{signal::ModKind::LFM, signal::ModKind::NLFM});
    CHECK(with_groups.matrix_targets.size() == 2);
    CHECK(with_groups.matrix_jobs == 2);

    const auto defaulted = parse(kMinimal);
    REQUIRE(defaulted.matrix_groups.size() == 1);
    CHECK(defaulted.matrix_groups[0].second == defaulted.source_schemes);
    CHECK(defaulted.matrix_targets == std::vector<signal::ModKind>{signal::ModKind::QFSK});
}

TEST_CASE("effective-config echo reparses to the same configuration") {
    auto cfg = parse(std::string(kMinimal) +
                     "[fleet]\nemitter_count = 6\n"
                     "[train]\nepochs = 7\nlr = 2e-3\n"
                     "[mdd]\ngamma = 3\n");
    const std::string echoed = cfg.to_text();
    const auto reparsed = ExperimentConfig::from_file(KeyValueFile::parse_text(echoed, "echo.ini"));
    CHECK(reparsed.emitter_count == 6);
    CHECK(reparsed.train.epochs == 7);
    CHECK(reparsed.train.adam.lr == 2e-3);
    CHECK(reparsed.train.mdd.gamma == 3.0);
    CHECK(reparsed.to_text() == echoed);  // echo is a fixed point
}

TEST_CASE("scheme_for carries the configured signal parameters") {
    auto cfg = parse(std::string(kMinimal) +
                     "[signal]\nsample_rate_hz = 32e6\nsweep_hi_hz = 2e6\n");
    const auto lfm = cfg.scheme_for(signal::ModKind::LFM);
    CHECK(lfm.sample_rate_hz == 32e6);
    CHECK(lfm.sweep_hi_hz == 2e6);
    CHECK_NOTHROW(lfm.validate());
}

TEST_CASE("cross-field validation rejects impossible signal settings") {
    CHECK_THROWS_AS(parse(std::string(kMinimal) + "[signal]\nsample_rate_hz = 1e6\n"),
                    ConfigError);
}
