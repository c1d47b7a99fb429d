#include <gtest/gtest.h>

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "holder_hj/io.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli() {
    if (const char* path = std::getenv("HOLDER_HJ_CLI")) {
        return path;
    }
    return HOLDER_HJ_CLI;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("holder_hj_cli_" + std::string(info->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write_config(const std::string& name, const std::string& json) {
        const fs::path p = dir_ / name;
        holder_hj::write_text(p, json);
        return p;
    }

    // Exit status of the CLI; stdout and stderr go to files in the temp dir.
    int run(const std::string& args) {
        const std::string cmd = "\"" + cli() + "\" " + args + " >\"" + (dir_ / "stdout.txt").string() + "\" 2>\"" +
                                (dir_ / "stderr.txt").string() + "\"";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string out() const { return holder_hj::read_text(dir_ / "stdout.txt"); }
    std::string err() const { return holder_hj::read_text(dir_ / "stderr.txt"); }

    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, SmallCounterexampleWritesGridAndArc) {
    const auto cfg = write_config("cfg.json", R"({"experiment": "counterexample", "n_list": [4],
        "grid_x": 51, "grid_t": 51, "value_grid_x": 51, "value_grid_t": 51, "grid_csv_stride": 1})");
    const fs::path out_dir = dir_ / "out";
    const auto start = std::chrono::steady_clock::now();
    const int code = run("run --config \"" + cfg.string() + "\" --out \"" + out_dir.string() + "\"");
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_TRUE(code == 0 || code == 1) << err();
    EXPECT_LT(seconds, 5.0);
    ASSERT_TRUE(fs::exists(out_dir / "u_4.csv"));
    ASSERT_TRUE(fs::exists(out_dir / "arc_4.csv"));
    const auto grid = holder_hj::parse_csv(holder_hj::read_text(out_dir / "u_4.csv"));
    EXPECT_EQ(grid.size(), 1u + 51u * 51u);
    const auto arc = holder_hj::read_arc_csv(out_dir / "arc_4.csv");
    EXPECT_EQ(arc.times.front(), 0.0);
    EXPECT_EQ(arc.times.back(), 1.0);
    EXPECT_TRUE(fs::exists(out_dir / "summary.csv"));
    EXPECT_TRUE(fs::exists(out_dir / "report.txt"));
    EXPECT_EQ(out().rfind("holder-hj report\n", 0), 0u);
}

TEST_F(CliTest, ConjugatesPass) {
    const auto cfg = write_config("cfg.json", R"({"experiment": "conjugates", "conjugate_samples": 5})");
    EXPECT_EQ(run("run --config \"" + cfg.string() + "\" --out \"" + (dir_ / "out").string() + "\""), 0) << err();
    EXPECT_NE(out().find("c_plus_q2_d1"), std::string::npos);
}

TEST_F(CliTest, ConfigErrorsExitTwo) {
    const auto unknown = write_config("unknown.json", R"({"gama": 0.7})");
    EXPECT_EQ(run("run --config \"" + unknown.string() + "\""), 2);
    EXPECT_NE(err().find("unknown config key 'gama'"), std::string::npos);

    const auto bad_gamma = write_config("gamma.json", R"({"gamma": 0.5})");
    EXPECT_EQ(run("run --config \"" + bad_gamma.string() + "\""), 2);

    EXPECT_EQ(run("run --config \"" + (dir_ / "missing.json").string() + "\""), 2);
    EXPECT_EQ(run("run"), 2);
    EXPECT_EQ(run("frobnicate"), 2);
}

TEST_F(CliTest, ReportOnMissingDirectoryFails) {
    EXPECT_EQ(run("report --dir \"" + (dir_ / "nowhere").string() + "\""), 1);
    EXPECT_NE(err().find("missing artifact: summary.csv"), std::string::npos);
}

TEST_F(CliTest, OverridesReachConfigJson) {
    const auto cfg = write_config("cfg.json", R"({"experiment": "conjugates", "conjugate_samples": 2,
        "output_dir": "ignored", "seed": 1})");
    const fs::path out_dir = dir_ / "over";
    ASSERT_EQ(run("run --config \"" + cfg.string() + "\" --out \"" + out_dir.string() + "\" --seed 987"), 0) << err();
    const auto j = nlohmann::json::parse(holder_hj::read_text(out_dir / "config.json"));
    EXPECT_EQ(j.at("seed").get<std::uint64_t>(), 987u);
    EXPECT_FALSE(fs::exists(fs::current_path() / "ignored"));
}

TEST_F(CliTest, ReportIsIdempotent) {
    const auto cfg = write_config("cfg.json", R"({"experiment": "conjugates", "conjugate_samples": 2})");
    const fs::path out_dir = dir_ / "rep";
    ASSERT_EQ(run("run --config \"" + cfg.string() + "\" --out \"" + out_dir.string() + "\""), 0) << err();
    const auto first_file = holder_hj::read_text(out_dir / "report.txt");
    ASSERT_EQ(run("report --dir \"" + out_dir.string() + "\""), 0);
    const auto first = out();
    ASSERT_EQ(run("report --dir \"" + out_dir.string() + "\""), 0);
    EXPECT_EQ(out(), first);
    EXPECT_EQ(first, first_file);
    EXPECT_EQ(holder_hj::read_text(out_dir / "report.txt"), first_file);
}
