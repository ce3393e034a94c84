#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rffsei/train.hpp"

namespace rffsei::eval {

double accuracy(std::span<const int> predictions, std::span<const int> labels);  // percent

// k x k counts, rows = true emitter, columns = predicted.
struct ConfusionMatrix {
    std::size_t k = 0;
    std::vector<std::uint64_t> counts;

    std::uint64_t& at(std::size_t truth, std::size_t pred) { return counts[truth * k + pred]; }
    std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts[truth * k + pred]; }
    std::uint64_t trace() const;
    std::uint64_t total() const;
    // Fraction of all mass inside the `n` heaviest predicted columns.
    double top_column_mass(std::size_t n) const;
    std::string to_text() const;
};

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels,
                          std::size_t k);

struct MatrixCell {
    double baseline_acc = 0.0;
    double mdd_acc = 0.0;
};

// One source-group column per scheme group, one row per target scheme.
// Diagonal cells (target scheme inside the source group) are reported but
// excluded from the per-group averages.
struct ExperimentMatrix {
    std::vector<std::string> group_names;
    std::vector<signal::ModKind> targets;
    std::vector<MatrixCell> cells;      // row-major: targets x groups
    std::vector<MatrixCell> group_avg;  // per group, off-diagonal only

    const MatrixCell& cell(std::size_t target, std::size_t group) const {
        return cells[target * group_names.size() + group];
    }
    bool is_diagonal(std::size_t target, std::size_t group) const;
    std::string to_text() const;
    std::string to_json(std::uint64_t fleet_seed) const;

    std::vector<std::vector<signal::ModKind>> group_schemes;  // for diagonal bookkeeping
};

struct MatrixSpec {
    std::vector<signal::EmitterProfile> emitters;
    std::vector<std::pair<std::string, std::vector<signal::ModulationScheme>>> groups;
    std::vector<signal::ModulationScheme> targets;
    std::size_t source_frames_per_pair = 150;
    std::size_t target_frames_per_pair = 75;
    std::size_t test_frames_per_pair = 50;
    std::size_t sample_length = 200;
    signal::ChannelConfig channel;
    model::ModelConfig model;
    train::TrainConfig train;
    std::uint64_t data_seed = 1;
    int jobs = 1;
};

// For every (group, target) pair: generate the three splits, pretrain a
// baseline, evaluate it, then run adversarial training from the same
// pretrained checkpoint and evaluate again. Cell seeds derive from
// (data_seed, group, target) so any job count produces the same matrix.
ExperimentMatrix run_matrix(const MatrixSpec& spec);

// One row per frame: label (-1 when unlabeled), scheme tag, then the
// embedding values, comma-separated.
void export_embeddings(model::ModelBundle& bundle, const std::vector<signal::IQFrame>& frames,
                       const std::string& path);

}  // namespace rffsei::eval
