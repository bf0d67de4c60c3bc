#include <catch2/catch_amalgamated.hpp>

#include <dkbo/experiment.hpp>
#include <dkbo/io.hpp>
#include <dkbo/net.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd =
        std::string("\"") + DKBO_CLI_PATH + "\" " + args + " > cli_stdout.txt 2> cli_stderr.txt";
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string cli_stdout() { return dkbo::read_text_file("cli_stdout.txt"); }

} // namespace

TEST_CASE("cli requires a subcommand and knows --help") {
    CHECK(run_cli("") == 1);
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("frobnicate") == 1);
}

TEST_CASE("cli collect-dataset writes the requested rows") {
    fs::remove_all("test_tmp_cli");
    fs::create_directories("test_tmp_cli");
    CHECK(run_cli("collect-dataset --variants P0 --n-per-variant 3 --seed 1 "
                  "--out test_tmp_cli/tiny.csv") == 0);
    auto lines = dkbo::read_lines("test_tmp_cli/tiny.csv");
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == dkbo::kDatasetHeader);

    CHECK(run_cli("collect-dataset --variants P9 --out test_tmp_cli/bad.csv") == 1);
    CHECK_FALSE(fs::exists("test_tmp_cli/bad.csv"));
}

TEST_CASE("cli train-kernel is deterministic and validates its input") {
    fs::create_directories("test_tmp_cli");
    CHECK(run_cli("train-kernel --dataset test_tmp_cli/missing.csv "
                  "--out test_tmp_cli/w.dkw") == 1);

    CHECK(run_cli("collect-dataset --variants P0,P1 --n-per-variant 12 --seed 2 "
                  "--out test_tmp_cli/train.csv") == 0);
    const std::string train_args =
        "train-kernel --dataset test_tmp_cli/train.csv --seed 4 --epochs 3 --batch 8";
    CHECK(run_cli(train_args + " --out test_tmp_cli/w1.dkw") == 0);
    CHECK(run_cli(train_args + " --out test_tmp_cli/w2.dkw") == 0);
    CHECK(dkbo::read_text_file("test_tmp_cli/w1.dkw") ==
          dkbo::read_text_file("test_tmp_cli/w2.dkw"));

    auto net = dkbo::load_net("test_tmp_cli/w1.dkw");
    CHECK(net.finite());

    auto curve = dkbo::read_lines("test_tmp_cli/w1.dkw.curve.csv");
    REQUIRE(curve.size() == 4); // header + one row per epoch
    CHECK(curve[0] == "epoch,loss");
    CHECK(curve[1].rfind("1,", 0) == 0);

    // a dataset below the minimum size is a usage error
    dkbo::write_text_file("test_tmp_cli/short.csv",
                          std::string(dkbo::kDatasetHeader) + "\n" +
                              "P0,0,0,12,0,0,0,0.5\n");
    CHECK(run_cli("train-kernel --dataset test_tmp_cli/short.csv "
                  "--out test_tmp_cli/w3.dkw") == 1);
}

TEST_CASE("cli run-experiment honours dry runs, overrides and exit codes") {
    fs::create_directories("test_tmp_cli");
    CHECK(run_cli("run-experiment --config test_tmp_cli/missing.json") == 1);

    dkbo::write_text_file("test_tmp_cli/bad.json", "{\"schema_version\": 2}");
    CHECK(run_cli("run-experiment --config test_tmp_cli/bad.json") == 1);

    dkbo::write_text_file("test_tmp_cli/exp.json", R"({
        "schema_version": 1,
        "variants": ["P0"],
        "kernels": ["rbf"],
        "feedbacks": ["q_s"],
        "runs_per_condition": 1,
        "master_seed": 3,
        "out_dir": "test_tmp_cli/exp_out",
        "run": {"budget": 3, "init_design": 2},
        "acq": {"pool": 32, "restarts": 2, "max_iters": 4}
    })");

    CHECK(run_cli("run-experiment --config test_tmp_cli/exp.json --dry-run") == 0);
    CHECK(cli_stdout().find("P0 rbf q_s") != std::string::npos);
    CHECK_FALSE(fs::exists("test_tmp_cli/exp_out"));

    CHECK(run_cli("run-experiment --config test_tmp_cli/exp.json") == 0);
    CHECK(fs::exists("test_tmp_cli/exp_out/summary.csv"));

    // a --seed override must change the outcome deterministically
    CHECK(run_cli("run-experiment --config test_tmp_cli/exp.json "
                  "--out test_tmp_cli/exp_out2 --seed 4") == 0);
    CHECK(dkbo::read_text_file("test_tmp_cli/exp_out/summary.csv") !=
          dkbo::read_text_file("test_tmp_cli/exp_out2/summary.csv"));
    CHECK(run_cli("run-experiment --config test_tmp_cli/exp.json "
                  "--out test_tmp_cli/exp_out3 --seed 3") == 0);
    CHECK(dkbo::read_text_file("test_tmp_cli/exp_out/summary.csv") ==
          dkbo::read_text_file("test_tmp_cli/exp_out3/summary.csv"));
}

TEST_CASE("cli report renders curves or fails with the right codes") {
    CHECK(run_cli("report --summary test_tmp_cli/nowhere/summary.csv") == 1);

    REQUIRE(fs::exists("test_tmp_cli/exp_out/summary.csv"));
    CHECK(run_cli("report --summary test_tmp_cli/exp_out/summary.csv "
                  "--out test_tmp_cli/report_out") == 0);
    CHECK(fs::exists("test_tmp_cli/report_out/curve_P0_rbf_q_s.csv"));
    CHECK(fs::exists("test_tmp_cli/report_out/gains.csv"));
    CHECK(cli_stdout().find("feedback,deep_hqr_total,rbf_hqr_total,gain_percent") !=
          std::string::npos);

    // missing traces are an execution failure, not a usage error
    fs::remove("test_tmp_cli/exp_out/P0_rbf_q_s_run00.trace.csv");
    CHECK(run_cli("report --summary test_tmp_cli/exp_out/summary.csv "
                  "--out test_tmp_cli/report_out2") == 2);
}
