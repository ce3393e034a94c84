// rffsei command line: dataset generation, training, evaluation and export.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "rffsei/config.hpp"
#include "rffsei/rng.hpp"

namespace fs = std::filesystem;
using namespace rffsei;

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<double> lambda;
    std::optional<double> gamma;
    std::optional<std::size_t> epochs;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment configuration file")->required();
    cmd->add_option("--seed", args.seed, "override every configured seed");
    cmd->add_option("--out", args.out, "override the output directory");
    cmd->add_option("--lambda", args.lambda, "override the MDD trade-off lambda");
    cmd->add_option("--gamma", args.gamma, "override the MDD margin factor gamma");
    cmd->add_option("--epochs", args.epochs, "override the adversarial epoch count");
}

config::ExperimentConfig load_config(const CommonArgs& args) {
    auto cfg = config::ExperimentConfig::from_file(config::KeyValueFile::parse_file(args.config_path));
    if (args.seed) {
        cfg.data_seed = *args.seed;
        cfg.fleet_seed = *args.seed;
        cfg.train.seed = *args.seed;
    }
    if (args.out) cfg.output_dir = *args.out;
    if (args.lambda) cfg.train.mdd.lambda = *args.lambda;
    if (args.gamma) cfg.train.mdd.gamma = *args.gamma;
    if (args.epochs) cfg.train.epochs = *args.epochs;
    cfg.train.validate();
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << text;
}

fs::path prepare_out(const config::ExperimentConfig& cfg) {
    fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    write_text(dir / "effective.ini", cfg.to_text());
    return dir;
}

std::string sidecar_text(const config::ExperimentConfig& cfg, const signal::DatasetManifest& ds) {
    std::ostringstream os;
    os << "[dataset]\n";
    os << "role = " << signal::role_name(ds.role) << "\n";
    os << "frames = " << ds.frames.size() << "\n";
    os << "sample_length = " << ds.sample_length() << "\n";
    os << "seed = " << ds.seed << "\n";
    os << "emitter_count = " << ds.emitter_count << "\n";
    os << "schemes = ";
    for (std::size_t i = 0; i < ds.schemes.size(); ++i) {
        os << (i ? ", " : "") << signal::kind_name(ds.schemes[i]);
    }
    os << "\n\n[emitters]\n";
    for (const auto& p : cfg.fleet()) {
        os << "emitter" << p.emitter_id << " = amp:" << p.amp_offset << " cfo_hz:" << p.cfo_hz
           << " phase_rad:" << p.phase_offset_rad << " iq_gain:" << p.iq_gain_imbalance
           << " iq_skew_rad:" << p.iq_phase_skew_rad << " pa3:" << p.pa_coeffs[1]
           << " pa5:" << p.pa_coeffs[2] << "\n";
    }
    os << "\n# generation parameters\n" << cfg.to_text();
    return os.str();
}

struct Splits {
    signal::DatasetManifest source;
    signal::DatasetManifest target_train;
    signal::DatasetManifest target_test;
};

Splits generate_splits(const config::ExperimentConfig& cfg) {
    const auto fleet = cfg.fleet();
    std::vector<signal::ModulationScheme> source_schemes;
    for (auto k : cfg.source_schemes) source_schemes.push_back(cfg.scheme_for(k));
    const std::vector<signal::ModulationScheme> target{cfg.scheme_for(cfg.target_scheme)};

    signal::GenOptions gen;
    gen.sample_length = cfg.sample_length;
    gen.threads = cfg.gen_threads;
    Splits s;
    gen.role = signal::SplitRole::source_labeled;
    s.source = signal::generate_dataset(fleet, source_schemes, cfg.frames_per_pair, cfg.channel,
                                        cfg.data_seed, gen);
    gen.role = signal::SplitRole::target_unlabeled_train;
    s.target_train = signal::generate_dataset(fleet, target, cfg.target_frames_per_pair,
                                              cfg.channel, cfg.data_seed, gen);
    gen.role = signal::SplitRole::target_unlabeled_test;
    s.target_test = signal::generate_dataset(fleet, target, cfg.test_frames_per_pair, cfg.channel,
                                             cfg.data_seed, gen);
    return s;
}

int cmd_gen(const CommonArgs& args) {
    const auto cfg = load_config(args);
    const fs::path dir = prepare_out(cfg);
    const Splits s = generate_splits(cfg);
    const std::pair<const char*, const signal::DatasetManifest*> outputs[] = {
        {"source.rffsei", &s.source},
        {"target_train.rffsei", &s.target_train},
        {"target_test.rffsei", &s.target_test},
    };
    for (const auto& [name, ds] : outputs) {
        const fs::path path = dir / name;
        signal::save_dataset(*ds, path.string());
        write_text(path.string() + ".manifest", sidecar_text(cfg, *ds));
    }
    std::cout << "wrote " << (dir / "source.rffsei") << " (" << s.source.frames.size()
              << " frames), target_train (" << s.target_train.frames.size()
              << "), target_test (" << s.target_test.frames.size() << ")\n";
    return 0;
}

signal::DatasetManifest load_split(const fs::path& dir, const std::string& name,
                                   signal::SplitRole role) {
    return signal::load_dataset((dir / name).string(), role);
}

int cmd_pretrain(const CommonArgs& args) {
    const auto cfg = load_config(args);
    const fs::path dir = prepare_out(cfg);
    const auto source = load_split(dir, "source.rffsei", signal::SplitRole::source_labeled);
    auto bundle = model::build_model(cfg.model, derive_seed(cfg.train.seed, "model"));
    train::MetricsLog log;
    train::pretrain(bundle, source, cfg.train, &log);
    model::save_bundle(bundle, (dir / "pretrained.ckpt").string());
    log.save((dir / "pretrain_metrics.csv").string());
    const double acc = log.rows.empty() || !log.rows.back().train_acc
                           ? 0.0
                           : *log.rows.back().train_acc;
    std::cout << "pretrained " << cfg.train.pretrain_epochs << " epochs, final source accuracy "
              << acc << "%\n";
    return 0;
}

int cmd_train(const CommonArgs& args, const std::string& init_ckpt) {
    const auto cfg = load_config(args);
    const fs::path dir = prepare_out(cfg);
    const auto source = load_split(dir, "source.rffsei", signal::SplitRole::source_labeled);
    const auto target_train =
        load_split(dir, "target_train.rffsei", signal::SplitRole::target_unlabeled_train);
    const auto target_test =
        load_split(dir, "target_test.rffsei", signal::SplitRole::target_unlabeled_test);
    auto bundle = model::build_model(cfg.model, derive_seed(cfg.train.seed, "model"));
    const fs::path init = init_ckpt.empty() ? dir / "pretrained.ckpt" : fs::path(init_ckpt);
    model::load_bundle(bundle, init.string());
    train::MetricsLog log;
    train::train_mdd(bundle, source, target_train, cfg.train, &target_test, &log);
    model::save_bundle(bundle, (dir / "mdd.ckpt").string());
    log.save((dir / "train_metrics.csv").string());
    const double acc =
        log.rows.empty() || !log.rows.back().test_acc ? 0.0 : *log.rows.back().test_acc;
    std::cout << "adversarial training done, target test accuracy " << acc << "%\n";
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& ckpt, const std::string& dataset) {
    const auto cfg = load_config(args);
    const fs::path dir = prepare_out(cfg);
    const fs::path ds_path = dataset.empty() ? dir / "target_test.rffsei" : fs::path(dataset);
    const auto test = signal::load_dataset(ds_path.string(), signal::SplitRole::target_unlabeled_test);
    auto bundle = model::build_model(cfg.model, derive_seed(cfg.train.seed, "model"));
    const fs::path ckpt_path = ckpt.empty() ? dir / "mdd.ckpt" : fs::path(ckpt);
    model::load_bundle(bundle, ckpt_path.string());

    const auto preds = train::predict(bundle, test.frames);
    std::vector<int> truth;
    for (const auto& f : test.frames) truth.push_back(f.label.value_or(-1));
    const double acc = eval::accuracy(preds, truth);
    const auto conf = eval::confusion(preds, truth, cfg.emitter_count);
    std::ostringstream report;
    report << "checkpoint = " << ckpt_path.string() << "\n";
    report << "dataset = " << ds_path.string() << "\n";
    report << "frames = " << test.frames.size() << "\n";
    report << "accuracy_percent = " << acc << "\n";
    write_text(dir / "accuracy.txt", report.str());
    write_text(dir / "confusion.txt", conf.to_text());
    std::cout << report.str() << conf.to_text();
    return 0;
}

int cmd_matrix(const CommonArgs& args) {
    const auto cfg = load_config(args);
    const fs::path dir = prepare_out(cfg);
    const auto matrix = eval::run_matrix(cfg.matrix_spec());
    write_text(dir / "matrix.txt", matrix.to_text());
    write_text(dir / "matrix.json", matrix.to_json(cfg.fleet_seed));
    std::cout << matrix.to_text();
    return 0;
}

int cmd_export(const CommonArgs& args, const std::string& ckpt, const std::string& dataset) {
    const auto cfg = load_config(args);
    const fs::path dir = prepare_out(cfg);
    const fs::path ds_path = dataset.empty() ? dir / "target_test.rffsei" : fs::path(dataset);
    const auto ds = signal::load_dataset(ds_path.string(), signal::SplitRole::target_unlabeled_test);
    auto bundle = model::build_model(cfg.model, derive_seed(cfg.train.seed, "model"));
    const fs::path ckpt_path = ckpt.empty() ? dir / "mdd.ckpt" : fs::path(ckpt);
    model::load_bundle(bundle, ckpt_path.string());
    const fs::path out = dir / "embeddings.csv";
    eval::export_embeddings(bundle, ds.frames, out.string());
    std::cout << "wrote " << out << " (" << ds.frames.size() << " rows)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RF fingerprint emitter identification workbench"};
    app.require_subcommand(1);

    CommonArgs gen_args, pre_args, train_args, eval_args, matrix_args, export_args;
    std::string train_init, eval_ckpt, eval_ds, export_ckpt, export_ds;

    add_common(app.add_subcommand("gen", "generate the source/target dataset files"), gen_args);
    add_common(app.add_subcommand("pretrain", "source-only supervised pretraining"), pre_args);
    auto* train_cmd = app.add_subcommand("train", "adversarial MDD training from a checkpoint");
    add_common(train_cmd, train_args);
    train_cmd->add_option("--init", train_init, "initial checkpoint (default <out>/pretrained.ckpt)");
    auto* eval_cmd = app.add_subcommand("eval", "accuracy and confusion matrix on a dataset");
    add_common(eval_cmd, eval_args);
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint (default <out>/mdd.ckpt)");
    eval_cmd->add_option("--dataset", eval_ds, "dataset file (default <out>/target_test.rffsei)");
    add_common(app.add_subcommand("matrix", "source-group x target-scheme experiment matrix"),
               matrix_args);
    auto* export_cmd = app.add_subcommand("export-embeddings", "write per-frame feature embeddings");
    add_common(export_cmd, export_args);
    export_cmd->add_option("--checkpoint", export_ckpt, "checkpoint (default <out>/mdd.ckpt)");
    export_cmd->add_option("--dataset", export_ds, "dataset file (default <out>/target_test.rffsei)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("gen")) return cmd_gen(gen_args);
        if (app.got_subcommand("pretrain")) return cmd_pretrain(pre_args);
        if (app.got_subcommand("train")) return cmd_train(train_args, train_init);
        if (app.got_subcommand("eval")) return cmd_eval(eval_args, eval_ckpt, eval_ds);
        if (app.got_subcommand("matrix")) return cmd_matrix(matrix_args);
        if (app.got_subcommand("export-embeddings")) return cmd_export(export_args, export_ckpt, export_ds);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
