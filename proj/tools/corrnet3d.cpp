// corrnet3d: synth | train | infer | eval | bench
//
// Exit codes: 0 success, 2 usage or configuration error, 3 data error,
// 4 numeric failure. Set CORRNET3D_VERBOSE=1 for per-epoch progress.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "corrnet3d/corrnet3d.hpp"

namespace fs = std::filesystem;
using namespace corrnet3d;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4 };

bool verbose() {
    const char* v = std::getenv("CORRNET3D_VERBOSE");
    return v != nullptr && *v != '\0' && std::string(v) != "0";
}

std::string percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * fraction);
    return buf;
}

TrainConfig load_config(const std::string& path) {
    if (path.empty()) return TrainConfig{};
    return parse_train_config(read_text_file(path));
}

struct SynthArgs {
    std::string kind = "rigid";
    std::size_t n = 128;
    std::size_t pairs = 1;
    std::uint64_t seed = 0;
    double amplitude = 0.3;
    std::string out_dir;
};

int run_synth(const SynthArgs& a) {
    Rng rng(a.seed);
    std::vector<std::string> entries;
    for (std::size_t i = 0; i < a.pairs; ++i) {
        const auto shape_seed = rng.next_u64();
        const auto pair_seed = rng.next_u64();
        const auto base = synth_base_shape(a.n, shape_seed);
        const auto pair = a.kind == "rigid" ? synth_rigid_pair(base, pair_seed) : synth_nonrigid_pair(base, a.amplitude, pair_seed);
        char name[32];
        std::snprintf(name, sizeof name, "pair_%04zu", i);
        write_pair_dir(fs::path(a.out_dir) / name, pair);
        entries.emplace_back(name);
    }
    write_manifest(a.out_dir, entries);
    std::cout << "wrote " << a.pairs << " " << a.kind << " pairs of " << a.n << " points to " << a.out_dir << "\n";
    return kOk;
}

struct TrainArgs {
    std::string config;
    std::string data;
    std::string out;
    std::string log;
    std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& a) {
    TrainConfig cfg = load_config(a.config);
    if (a.seed) cfg.seed = *a.seed;
    const auto pairs = load_dataset(a.data);
    const bool loud = verbose();
    const auto result = train(pairs, cfg, [&](std::size_t epoch, const CorrNet& model, double loss) {
        if (loud) std::cerr << "epoch " << epoch << " loss " << loss << "\n";
        if (cfg.checkpoint_every != 0 && epoch % cfg.checkpoint_every == 0 && epoch != cfg.epochs)
            save_checkpoint(model.params(), a.out + ".epoch" + std::to_string(epoch));
    });
    save_checkpoint(result.model.params(), a.out);
    const std::string log = a.log.empty() ? a.out + ".loss.csv" : a.log;
    write_text_file(log, write_loss_csv(result.epoch_loss));
    const double final_loss = result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back();
    std::cout << "trained " << pairs.size() << " pairs for " << cfg.epochs << " epochs (" << to_string(cfg.mode)
              << "), final loss " << detail::format_double(final_loss) << "\n";
    if (result.desmooth_t != cfg.model.desmooth.t) std::cout << "calibrated desmooth_t = " << result.desmooth_t << "\n";
    std::cout << "checkpoint " << a.out << ", loss log " << log << "\n";
    return kOk;
}

struct InferArgs {
    std::string checkpoint;
    std::string config;
    std::string source;
    std::string target;
    std::size_t keypoints = 0;
    std::string out;
};

int run_infer(const InferArgs& a) {
    TrainConfig cfg = load_config(a.config);
    const auto source = load_point_cloud(a.source);
    const auto target = load_point_cloud(a.target);
    if (source.size() != target.size())
        throw ShapeError("source has " + std::to_string(source.size()) + " points, target " + std::to_string(target.size()));
    const std::size_t model_points = a.keypoints ? a.keypoints : source.size();
    if (a.keypoints > source.size()) throw ContractError("--keypoints exceeds the cloud size");
    if (cfg.model.deformer.points == 0) cfg.model.deformer.points = model_points;
    CorrNet model(cfg.model, cfg.seed);
    load_checkpoint(model.params(), a.checkpoint);
    std::vector<std::size_t> corr;
    if (a.keypoints)
        corr = pseudo_cluster_correspond(source, target, a.keypoints,
                                         [&](const PointCloud& ka, const PointCloud& kb) { return model.infer(ka, kb); });
    else
        corr = model.infer(source, target);
    write_text_file(a.out, write_correspondence_csv(corr));
    std::cout << "wrote " << corr.size() << " correspondences to " << a.out << "\n";
    return kOk;
}

struct EvalArgs {
    std::string pred;
    std::string gt;
    std::string target;
    std::string out;
    bool validate = false;
    bool check_monotone = false;
};

std::vector<std::size_t> load_correspondence(const std::string& path) {
    try {
        return parse_correspondence_csv(read_text_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), 0);
    }
}

int run_eval(const EvalArgs& a) {
    const auto gt = load_correspondence(a.gt);
    if (!is_bijection(gt)) {
        std::cerr << "error: " << a.gt << " is not a bijection\n";
        return kData;
    }
    if (a.validate && a.pred.empty()) {
        std::cout << a.gt << ": valid bijection on " << gt.size() << " points\n";
        return kOk;
    }
    if (a.pred.empty()) throw CLI::RequiredError("--pred");
    const auto pred = load_correspondence(a.pred);
    if (pred.size() != gt.size())
        throw ShapeError("prediction has " + std::to_string(pred.size()) + " rows, ground truth " + std::to_string(gt.size()));
    for (auto j : pred)
        if (j >= gt.size()) throw ShapeError("predicted index " + std::to_string(j) + " out of range");
    std::cout << "Corr: " << percent(corr_strict(pred, gt)) << "\n";
    if (a.target.empty()) return kOk;

    const auto target = load_point_cloud(a.target);
    const auto tolerances = default_tolerances();
    const auto report = corr_tolerant(pred, gt, target, tolerances);
    std::cout << "Corr at 20% tolerance: " << percent(report.curve.back().corr) << "\n";
    if (!a.out.empty()) {
        write_text_file(a.out, write_curve_csv(report.curve));
        if (a.check_monotone && !curve_is_monotone(parse_curve_csv(read_text_file(a.out)))) {
            std::cerr << "error: " << a.out << " is not monotone\n";
            return kData;
        }
    }
    return kOk;
}

struct BenchArgs {
    std::vector<std::size_t> sizes{128, 256, 512, 1024};
    std::size_t iterations = 30;
    std::size_t repeats = 5;
    std::uint64_t seed = 7;
    std::string out;
};

int run_bench(const BenchArgs& a) {
    const auto rows = bench_normalizers(a.sizes, a.iterations, a.repeats, a.seed);
    for (const auto& r : rows) std::cout << r.method << " n=" << r.n << " " << r.median_seconds << " s\n";
    if (a.sizes.size() >= 2) std::cout << "desmooth log-log slope " << loglog_slope(rows, "desmooth") << "\n";
    if (!a.out.empty()) write_text_file(a.out, write_bench_csv(rows));
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unsupervised dense correspondence between equal-size point clouds"};
    app.require_subcommand(1, 1);

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Write synthetic shape pairs with ground truth");
    synth->add_option("--kind", synth_args.kind, "rigid or nonrigid")->check(CLI::IsMember({"rigid", "nonrigid"}));
    synth->add_option("--n", synth_args.n, "Points per cloud")->check(CLI::Range(std::size_t{2}, std::size_t{1} << 24));
    synth->add_option("--pairs", synth_args.pairs, "Number of pairs")->check(CLI::PositiveNumber);
    synth->add_option("--seed", synth_args.seed, "Random seed");
    synth->add_option("--amplitude", synth_args.amplitude, "Largest bend amplitude (nonrigid)")->check(CLI::NonNegativeNumber);
    synth->add_option("--out-dir", synth_args.out_dir, "Output directory")->required();

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Train on a synthesized data directory");
    train_cmd->add_option("--config", train_args.config, "key = value configuration file");
    train_cmd->add_option("--data", train_args.data, "Directory with manifest.txt")->required();
    train_cmd->add_option("--out", train_args.out, "Checkpoint path")->required();
    train_cmd->add_option("--log", train_args.log, "Loss log CSV (default <out>.loss.csv)");
    train_cmd->add_option("--seed", train_args.seed, "Overrides the config seed");

    InferArgs infer_args;
    auto* infer = app.add_subcommand("infer", "Hard correspondence between two clouds");
    infer->add_option("--checkpoint", infer_args.checkpoint)->required();
    infer->add_option("--config", infer_args.config, "Configuration used for training");
    infer->add_option("--source", infer_args.source)->required();
    infer->add_option("--target", infer_args.target)->required();
    infer->add_option("--keypoints", infer_args.keypoints, "Match m key points and extend by pseudo clustering")
        ->check(CLI::PositiveNumber);
    infer->add_option("--out", infer_args.out, "Correspondence CSV")->required();

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Score a correspondence against ground truth");
    eval->add_option("--pred", eval_args.pred, "Predicted correspondence CSV");
    eval->add_option("--gt", eval_args.gt, "Ground-truth correspondence CSV")->required();
    eval->add_option("--target", eval_args.target, "Target cloud, enables the tolerance curve");
    eval->add_option("--out", eval_args.out, "Tolerance curve CSV");
    eval->add_flag("--validate", eval_args.validate, "Check that --gt is a bijection");
    eval->add_flag("--check-monotone", eval_args.check_monotone, "Re-read the curve and check it is monotone");

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench", "Time desmooth against sinkhorn");
    bench->add_option("--sizes", bench_args.sizes, "Matrix sizes")->delimiter(',');
    bench->add_option("--iterations", bench_args.iterations, "Sinkhorn iterations");
    bench->add_option("--repeats", bench_args.repeats, "Timed calls per cell")->check(CLI::PositiveNumber);
    bench->add_option("--seed", bench_args.seed);
    bench->add_option("--out", bench_args.out, "Benchmark CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*synth) return run_synth(synth_args);
        if (*train_cmd) return run_train(train_args);
        if (*infer) return run_infer(infer_args);
        if (*eval) return run_eval(eval_args);
        if (*bench) return run_bench(bench_args);
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kNumeric;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    }
    return kUsage;
}
