#include "rffsei/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "rffsei/rng.hpp"

namespace rffsei::eval {

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size()) {
        throw std::invalid_argument("accuracy: prediction/label lengths differ");
    }
    if (predictions.empty()) throw std::invalid_argument("accuracy: empty input");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] == labels[i]) ++correct;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(predictions.size());
}

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < k; ++i) t += at(i, i);
    return t;
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t t = 0;
    for (auto v : counts) t += v;
    return t;
}

double ConfusionMatrix::top_column_mass(std::size_t n) const {
    std::vector<std::uint64_t> col(k, 0);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) col[j] += at(i, j);
    }
    std::sort(col.begin(), col.end(), std::greater<>());
    std::uint64_t mass = 0;
    for (std::size_t j = 0; j < std::min(n, k); ++j) mass += col[j];
    const std::uint64_t all = total();
    return all == 0 ? 0.0 : static_cast<double>(mass) / static_cast<double>(all);
}

std::string ConfusionMatrix::to_text() const {
    std::ostringstream os;
    os << "true\\pred";
    for (std::size_t j = 0; j < k; ++j) os << '\t' << j;
    os << '\n';
    for (std::size_t i = 0; i < k; ++i) {
        os << i;
        for (std::size_t j = 0; j < k; ++j) os << '\t' << at(i, j);
        os << '\n';
    }
    return os.str();
}

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels,
                          std::size_t k) {
    if (predictions.size() != labels.size()) {
        throw std::invalid_argument("confusion: prediction/label lengths differ");
    }
    ConfusionMatrix m;
    m.k = k;
    m.counts.assign(k * k, 0);
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k || predictions[i] < 0 ||
            static_cast<std::size_t>(predictions[i]) >= k) {
            throw std::out_of_range("confusion: label or prediction out of range");
        }
        ++m.at(static_cast<std::size_t>(labels[i]), static_cast<std::size_t>(predictions[i]));
    }
    return m;
}

bool ExperimentMatrix::is_diagonal(std::size_t target, std::size_t group) const {
    const auto& schemes = group_schemes[group];
    return std::find(schemes.begin(), schemes.end(), targets[target]) != schemes.end();
}

std::string ExperimentMatrix::to_text() const {
    std::ostringstream os;
    auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%6.2f", v);
        return std::string(buf);
    };
    os << "target          ";
    for (const auto& g : group_names) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), " | %-8.8s base   mdd", g.c_str());
        os << buf;
    }
    os << '\n';
    for (std::size_t t = 0; t < targets.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "%-16.16s", signal::kind_name(targets[t]));
        os << name;
        for (std::size_t g = 0; g < group_names.size(); ++g) {
            const auto& c = cell(t, g);
            os << " | " << fmt(c.baseline_acc) << ' ' << fmt(c.mdd_acc)
               << (is_diagonal(t, g) ? '*' : ' ');
        }
        os << '\n';
    }
    os << "avg (off-diag)  ";
    for (const auto& a : group_avg) os << " | " << fmt(a.baseline_acc) << ' ' << fmt(a.mdd_acc) << ' ';
    os << "\n* same-scheme (diagonal) cell, excluded from the averages\n";
    return os.str();
}

std::string ExperimentMatrix::to_json(std::uint64_t fleet_seed) const {
    nlohmann::json j;
    j["fleet_seed"] = fleet_seed;
    j["groups"] = group_names;
    nlohmann::json targets_json = nlohmann::json::array();
    for (auto t : targets) targets_json.push_back(signal::kind_name(t));
    j["targets"] = targets_json;
    nlohmann::json cells = nlohmann::json::array();
    for (std::size_t t = 0; t < targets.size(); ++t) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t g = 0; g < group_names.size(); ++g) {
            const auto& c = cell(t, g);
            row.push_back({{"baseline", c.baseline_acc},
                           {"mdd", c.mdd_acc},
                           {"diagonal", is_diagonal(t, g)}});
        }
        cells.push_back(row);
    }
    j["cells"] = cells;
    nlohmann::json avg = nlohmann::json::array();
    for (const auto& a : group_avg) avg.push_back({{"baseline", a.baseline_acc}, {"mdd", a.mdd_acc}});
    j["group_averages_off_diagonal"] = avg;
    return j.dump(2) + "\n";
}

ExperimentMatrix run_matrix(const MatrixSpec& spec) {
    if (spec.groups.empty() || spec.targets.empty()) {
        throw std::invalid_argument("run_matrix: need at least one group and one target");
    }
    ExperimentMatrix m;
    for (const auto& [name, schemes] : spec.groups) {
        m.group_names.push_back(name);
        std::vector<signal::ModKind> kinds;
        for (const auto& s : schemes) kinds.push_back(s.kind);
        m.group_schemes.push_back(std::move(kinds));
    }
    for (const auto& t : spec.targets) m.targets.push_back(t.kind);
    m.cells.assign(m.targets.size() * m.group_names.size(), MatrixCell{});

    auto run_cell = [&](std::size_t ti, std::size_t gi) {
        const auto& [group_name, group_schemes] = spec.groups[gi];
        const signal::ModulationScheme& target = spec.targets[ti];
        const std::uint64_t cell_seed = derive_seed(spec.data_seed, "cell", gi, ti);

        signal::GenOptions gen;
        gen.sample_length = spec.sample_length;
        gen.role = signal::SplitRole::source_labeled;
        auto source = signal::generate_dataset(spec.emitters, group_schemes,
                                               spec.source_frames_per_pair, spec.channel,
                                               cell_seed, gen);
        gen.role = signal::SplitRole::target_unlabeled_train;
        auto target_train = signal::generate_dataset(spec.emitters, {target},
                                                     spec.target_frames_per_pair, spec.channel,
                                                     cell_seed, gen);
        gen.role = signal::SplitRole::target_unlabeled_test;
        auto target_test = signal::generate_dataset(spec.emitters, {target},
                                                    spec.test_frames_per_pair, spec.channel,
                                                    cell_seed, gen);

        train::TrainConfig tcfg = spec.train;
        tcfg.seed = derive_seed(cell_seed, "train");
        auto bundle = model::build_model(spec.model, derive_seed(cell_seed, "model"));
        train::pretrain(bundle, source, tcfg);

        std::vector<int> truth;
        for (const auto& f : target_test.frames) truth.push_back(f.label.value_or(-1));
        MatrixCell cell;
        cell.baseline_acc = accuracy(train::predict(bundle, target_test.frames), truth);
        train::train_mdd(bundle, source, target_train, tcfg);
        cell.mdd_acc = accuracy(train::predict(bundle, target_test.frames), truth);
        m.cells[ti * m.group_names.size() + gi] = cell;
    };

    std::vector<std::pair<std::size_t, std::size_t>> work;
    for (std::size_t ti = 0; ti < m.targets.size(); ++ti) {
        for (std::size_t gi = 0; gi < m.group_names.size(); ++gi) work.emplace_back(ti, gi);
    }
    const int jobs = std::max(1, spec.jobs);
    if (jobs == 1) {
        for (const auto& [ti, gi] : work) run_cell(ti, gi);
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        for (int j = 0; j < jobs; ++j) {
            pool.emplace_back([&] {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= work.size()) return;
                    run_cell(work[i].first, work[i].second);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    m.group_avg.assign(m.group_names.size(), MatrixCell{});
    for (std::size_t g = 0; g < m.group_names.size(); ++g) {
        double base = 0.0, mdd = 0.0;
        std::size_t n = 0;
        for (std::size_t t = 0; t < m.targets.size(); ++t) {
            if (m.is_diagonal(t, g)) continue;
            base += m.cell(t, g).baseline_acc;
            mdd += m.cell(t, g).mdd_acc;
            ++n;
        }
        if (n > 0) {
            m.group_avg[g].baseline_acc = base / static_cast<double>(n);
            m.group_avg[g].mdd_acc = mdd / static_cast<double>(n);
        }
    }
    return m;
}

void export_embeddings(model::ModelBundle& bundle, const std::vector<signal::IQFrame>& frames,
                       const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open embeddings file for writing: " + path);
    const Tensor emb = model::embed_frames(bundle, frames);
    const std::size_t dim = bundle.config.embedding_dim;
    char buf[40];
    for (std::size_t i = 0; i < frames.size(); ++i) {
        os << frames[i].label.value_or(-1) << ','
           << static_cast<int>(frames[i].scheme_tag);
        for (std::size_t d = 0; d < dim; ++d) {
            std::snprintf(buf, sizeof(buf), "%.17g", emb.at(i, d));
            os << ',' << buf;
        }
        os << '\n';
    }
    if (!os) throw std::runtime_error("embeddings write failed: " + path);
}

}  // namespace rffsei::eval
