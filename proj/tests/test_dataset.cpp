#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "rffsei/config.hpp"
#include "rffsei/dataset.hpp"

using namespace rffsei;
using namespace rffsei::signal;

namespace {

std::vector<ModulationScheme> schemes_of(std::initializer_list<ModKind> kinds) {
    std::vector<ModulationScheme> out;
    for (ModKind k : kinds) {
        ModulationScheme s;
        s.kind = k;
        out.push_back(s);
    }
    return out;
}

std::vector<EmitterProfile> test_fleet(std::size_t count) {
    return config::build_fleet(count, config::FleetRanges{}, 4242);
}

std::string file_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string temp_path(const char* name) {
    return std::string("/tmp/rffsei_test_") + name;
}

}  // namespace

TEST_CASE("generate_dataset: counts and labels per (emitter, scheme) pair") {
    const auto fleet = test_fleet(7);
    GenOptions opts;
    const auto ds = generate_dataset(fleet, schemes_of({ModKind::QPSK}), 10, ChannelConfig{15.0},
                                     123, opts);
    CHECK(ds.frames.size() == 70);
    std::vector<int> per_label(7, 0);
    for (const auto& f : ds.frames) {
        REQUIRE(f.label.has_value());
        ++per_label[static_cast<std::size_t>(*f.label)];
    }
    for (int c : per_label) CHECK(c == 10);
}

TEST_CASE("generate_dataset: every frame is (2, 200) under the default config") {
    const auto fleet = test_fleet(2);
    const auto ds = generate_dataset(fleet, schemes_of({ModKind::LFM, ModKind::QAM64}), 3,
                                     ChannelConfig{15.0}, 5, GenOptions{});
    for (const auto& f : ds.frames) {
        CHECK(f.data.shape == std::vector<std::size_t>{2, 200});
    }
}

TEST_CASE("generate_dataset: identical seed gives byte-identical files") {
    const auto fleet = test_fleet(3);
    const auto path1 = temp_path("ds_a.rffsei");
    const auto path2 = temp_path("ds_b.rffsei");
    for (const auto& p : {path1, path2}) {
        const auto ds = generate_dataset(fleet, schemes_of({ModKind::BFSK}), 5, ChannelConfig{15.0},
                                         99, GenOptions{});
        save_dataset(ds, p);
    }
    CHECK(file_bytes(path1) == file_bytes(path2));
    std::remove(path1.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("generate_dataset: parallel generation reproduces serial output") {
    const auto fleet = test_fleet(3);
    GenOptions serial;
    GenOptions parallel;
    parallel.threads = 4;
    const auto a = generate_dataset(fleet, schemes_of({ModKind::QPSK, ModKind::QFSK}), 4,
                                    ChannelConfig{15.0}, 7, serial);
    const auto b = generate_dataset(fleet, schemes_of({ModKind::QPSK, ModKind::QFSK}), 4,
                                    ChannelConfig{15.0}, 7, parallel);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t i = 0; i < a.frames.size(); ++i) {
        CHECK(a.frames[i].data.data == b.frames[i].data.data);
    }
}

TEST_CASE("generate_dataset: target-train split carries no labels, test split does") {
    const auto fleet = test_fleet(2);
    GenOptions opts;
    opts.role = SplitRole::target_unlabeled_train;
    const auto train = generate_dataset(fleet, schemes_of({ModKind::QFSK}), 3, ChannelConfig{15.0},
                                        1, opts);
    CHECK_FALSE(train.any_labeled());
    opts.role = SplitRole::target_unlabeled_test;
    const auto test = generate_dataset(fleet, schemes_of({ModKind::QFSK}), 3, ChannelConfig{15.0},
                                       1, opts);
    for (const auto& f : test.frames) CHECK(f.label.has_value());
    // distinct splits draw distinct noise/payload streams
    CHECK(train.frames[0].data.data != test.frames[0].data.data);
}

TEST_CASE("generate_dataset rejects bad inputs") {
    const auto fleet = test_fleet(2);
    CHECK_THROWS(generate_dataset({fleet[0]}, schemes_of({ModKind::QPSK}), 1, ChannelConfig{15.0},
                                  1, GenOptions{}));
    CHECK_THROWS(generate_dataset(fleet, schemes_of({ModKind::QPSK}), 0, ChannelConfig{15.0}, 1,
                                  GenOptions{}));
    auto dup = fleet;
    dup[1] = dup[0];
    CHECK_THROWS(generate_dataset(dup, schemes_of({ModKind::QPSK}), 1, ChannelConfig{15.0}, 1,
                                  GenOptions{}));
}

TEST_CASE("dataset file round trip preserves everything") {
    const auto fleet = test_fleet(3);
    const auto ds = generate_dataset(fleet, schemes_of({ModKind::QAM16, ModKind::LFM}), 2,
                                     ChannelConfig{15.0}, 55, GenOptions{});
    const auto path = temp_path("roundtrip.rffsei");
    save_dataset(ds, path);

    const auto loaded = load_dataset(path, SplitRole::source_labeled);
    CHECK(loaded.emitter_count == 3);
    CHECK(loaded.seed == 55);
    CHECK(loaded.schemes == ds.schemes);
    REQUIRE(loaded.frames.size() == ds.frames.size());
    for (std::size_t i = 0; i < ds.frames.size(); ++i) {
        CHECK(loaded.frames[i].label == ds.frames[i].label);
        CHECK(loaded.frames[i].scheme_tag == ds.frames[i].scheme_tag);
        REQUIRE(loaded.frames[i].data.shape == ds.frames[i].data.shape);
        for (std::size_t j = 0; j < ds.frames[i].data.numel(); ++j) {
            // samples are stored as f32
            CHECK(loaded.frames[i].data.data[j] ==
                  static_cast<double>(static_cast<float>(ds.frames[i].data.data[j])));
        }
    }
    std::remove(path.c_str());
}

TEST_CASE("dataset file starts with the RFFSEI1 magic") {
    const auto fleet = test_fleet(2);
    const auto ds = generate_dataset(fleet, schemes_of({ModKind::BPSK}), 1, ChannelConfig{15.0}, 1,
                                     GenOptions{});
    const auto path = temp_path("magic.rffsei");
    save_dataset(ds, path);
    CHECK(file_bytes(path).substr(0, 8) == "RFFSEI1\n");
    CHECK_THROWS(load_dataset("/tmp/definitely_missing_rffsei_file", SplitRole::source_labeled));
    std::remove(path.c_str());
}

TEST_CASE("build_fleet is deterministic and produces distinct profiles") {
    const auto a = config::build_fleet(5, config::FleetRanges{}, 11);
    const auto b = config::build_fleet(5, config::FleetRanges{}, 11);
    REQUIRE(a.size() == 5);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].same_parameters(b[i]));
        CHECK(a[i].amp_offset >= 0.9);
        CHECK(a[i].amp_offset <= 1.1);
        CHECK(std::fabs(a[i].cfo_hz) < 5e3);
        for (std::size_t j = i + 1; j < a.size(); ++j) CHECK_FALSE(a[i].same_parameters(a[j]));
    }
}
