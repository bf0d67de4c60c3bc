#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <dkbo/dkbo.hpp>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;    // CLI or config errors, unusable input paths
constexpr int kExitRuntime = 2;  // failures after a valid configuration

std::vector<dkbo::Variant> parse_variant_list(const std::string& csv) {
    std::vector<dkbo::Variant> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(dkbo::parse_variant(item));
    }
    if (out.empty()) throw dkbo::ConfigError("no variants given");
    return out;
}

int cmd_collect(const std::string& variants_csv, long long n_per_variant, std::uint64_t seed,
                const std::string& out_path) {
    const auto variants = parse_variant_list(variants_csv);
    if (n_per_variant < 0) throw dkbo::ConfigError("--n-per-variant must be >= 0");
    const auto ds =
        dkbo::collect_dataset(variants, static_cast<std::size_t>(n_per_variant), seed);
    dkbo::write_text_file(out_path, dkbo::dataset_to_csv(ds));
    std::cout << "wrote " << ds.samples.size() << " rows to " << out_path << "\n";
    return kExitOk;
}

int cmd_train(const std::string& dataset_path, const std::string& out_path,
              const std::string& curve_path, const dkbo::TrainConfig& cfg,
              std::uint64_t net_seed) {
    if (!std::filesystem::exists(dataset_path))
        throw dkbo::ConfigError("dataset not found: " + dataset_path);
    auto ds = dkbo::dataset_from_csv(dataset_path);
    auto net = dkbo::init_net(net_seed);
    const auto curve = dkbo::train_net(net, ds, cfg);
    dkbo::save_net(net, out_path);
    std::ostringstream c;
    c << "epoch,loss\n";
    for (std::size_t e = 0; e < curve.train_mse.size(); ++e)
        c << (e + 1) << ',' << dkbo::fmt_double(curve.train_mse[e]) << "\n";
    const std::string cpath = curve_path.empty() ? out_path + ".curve.csv" : curve_path;
    dkbo::write_text_file(cpath, c.str());
    std::cout << "final train mse " << dkbo::fmt_double(curve.train_mse.back()) << ", val mse "
              << dkbo::fmt_double(curve.val_mse.back()) << "\n"
              << "weights: " << out_path << "\ncurve: " << cpath << "\n";
    return kExitOk;
}

int cmd_run(const std::string& config_path, const std::string& out_override,
            bool seed_given, std::uint64_t seed_override, int workers, bool dry_run) {
    auto cfg = dkbo::load_experiment_config(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (seed_given) cfg.master_seed = seed_override;
    const auto grid = dkbo::experiment_grid(cfg);
    if (dry_run) {
        std::cout << "config ok; planned grid (" << grid.size() << " conditions x "
                  << cfg.runs_per_condition << " runs):\n";
        for (std::size_t ci = 0; ci < grid.size(); ++ci) {
            std::cout << "  " << dkbo::variant_name(grid[ci].variant) << " "
                      << dkbo::kernel_name(grid[ci].kernel) << " "
                      << dkbo::feedback_name(grid[ci].feedback) << " seeds";
            for (int r = 0; r < cfg.runs_per_condition; ++r)
                std::cout << ' ' << dkbo::derive_run_seed(cfg.master_seed, ci, r);
            std::cout << "\n";
        }
        return kExitOk;
    }
    const auto result = dkbo::run_experiment(cfg, workers);
    std::cout << "summary: " << result.summary_path << "\n";
    return kExitOk;
}

int cmd_report(const std::string& summary_path, const std::string& out_dir) {
    if (!std::filesystem::exists(summary_path))
        throw dkbo::ConfigError("summary not found: " + summary_path);
    const std::string dir = out_dir.empty()
                                ? std::filesystem::path(summary_path).parent_path().string()
                                : out_dir;
    const auto result = dkbo::report_from_summary(summary_path, dir.empty() ? "." : dir);
    std::cout << result.table;
    for (const auto& f : result.curve_files) std::cout << "curve: " << f << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian-optimization probe-pose search with a neural deep kernel"};
    app.require_subcommand(1);

    auto* collect = app.add_subcommand(
        "collect-dataset", "Scan phantoms over an LHS design and write (pose, q_s) rows");
    std::string variants_csv = "P0,P1";
    long long n_per_variant = 600;
    std::uint64_t collect_seed = 0;
    std::string collect_out = "dataset.csv";
    collect->add_option("--variants", variants_csv, "comma-separated phantom variants");
    collect->add_option("--n-per-variant", n_per_variant, "LHS samples per variant");
    collect->add_option("--seed", collect_seed, "sampling and noise seed");
    collect->add_option("--out", collect_out, "output CSV path");

    auto* train = app.add_subcommand("train-kernel",
                                     "Train the deep-kernel network on an offline dataset");
    std::string train_dataset, train_out = "weights.dkw", train_curve;
    dkbo::TrainConfig tcfg;
    std::uint64_t train_seed = 0;
    train->add_option("--dataset", train_dataset, "dataset CSV from collect-dataset")
        ->required();
    train->add_option("--out", train_out, "weights file path");
    train->add_option("--curve-out", train_curve,
                      "learning-curve CSV path (default: <out>.curve.csv)");
    train->add_option("--seed", train_seed, "init, split and shuffle seed");
    train->add_option("--epochs", tcfg.epochs, "training epochs");
    train->add_option("--batch", tcfg.batch, "mini-batch size");
    train->add_option("--lr", tcfg.lr, "learning rate");
    train->add_option("--split", tcfg.split, "train fraction of the dataset");

    auto* run = app.add_subcommand("run-experiment",
                                   "Execute the kernel x feedback x phantom grid of BO runs");
    std::string run_config, run_out;
    std::uint64_t run_seed = 0;
    int workers = 1;
    bool dry_run = false;
    run->add_option("--config", run_config, "experiment config JSON")->required();
    run->add_option("--out", run_out, "override the config's output directory");
    auto* seed_opt = run->add_option("--seed", run_seed, "override the config's master seed");
    run->add_option("--workers", workers, "worker threads for independent runs");
    run->add_flag("--dry-run", dry_run, "validate config and print the planned grid");

    auto* report = app.add_subcommand(
        "report", "Emit per-condition curves and the kernel-comparison table");
    std::string report_summary, report_out;
    report->add_option("--summary", report_summary, "summary.csv from run-experiment")
        ->required();
    report->add_option("--out", report_out, "directory for curve files (default: alongside)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (collect->parsed())
            return cmd_collect(variants_csv, n_per_variant, collect_seed, collect_out);
        if (train->parsed()) {
            tcfg.seed = train_seed;
            return cmd_train(train_dataset, train_out, train_curve, tcfg, train_seed);
        }
        if (run->parsed())
            return cmd_run(run_config, run_out, seed_opt->count() > 0, run_seed, workers,
                           dry_run);
        if (report->parsed()) return cmd_report(report_summary, report_out);
    } catch (const dkbo::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
