#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "gtw/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("gtw_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    /// Runs the binary with `args`; stdout and stderr land in out_ and err_.
    int run(const std::string& args) {
        const std::string cmd = std::string(GTW_CLI) + " " + args + " > " + (dir_ / "stdout").string() + " 2> " +
                                (dir_ / "stderr").string();
        const int status = std::system(cmd.c_str());
        out_ = slurp(dir_ / "stdout");
        err_ = slurp(dir_ / "stderr");
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string sample(const std::string& name) const { return std::string(SAMPLES_DIR) + "/" + name; }

    std::string write_config(const std::string& name, const json& j) const {
        const fs::path p = dir_ / name;
        std::ofstream(p) << j.dump(2);
        return p.string();
    }

    static std::string slurp(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream os;
        os << in.rdbuf();
        return os.str();
    }

    std::string out(const std::string& name) const { return (dir_ / "out" / name).string(); }
    std::string flags() const { return "--out " + (dir_ / "out").string(); }

    fs::path dir_;
    std::string out_, err_;
};

json homogeneous() {
    return json::parse(R"({
      "model": {"kind": "barotropic", "pressure": {"law": "polytropic", "kappa": 1, "gamma": 2}},
      "frame": {"s": 0.5, "F": "zero", "anchor": [1, 0.2]},
      "window": {"x_min": -1, "x_max": 1, "t_max": 0.5, "nx": 21, "nt": 11}
    })");
}

json small_flagship() {
    return json::parse(R"({
      "model": {"kind": "barotropic", "pressure": {"law": "polytropic", "kappa": 1, "gamma": 2},
                "force": {"kind": "gtw_family", "k1": 0.5, "s": 1, "beta": "rho_over_c"}},
      "frame": {"s": 1, "F": "gtw_family", "a0": 0.1, "rho0": 1},
      "window": {"x_min": -2, "x_max": 2, "t_max": 0.5, "nx": 41, "nt": 11}
    })");
}

}  // namespace

TEST_F(Cli, DecomposeWritesTable) {
    ASSERT_EQ(run("--config " + sample("flagship.json") + " " + flags() + " decompose"), 0) << err_;
    const std::string csv = slurp(out("decompose.csv"));
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
    EXPECT_EQ(csv.rfind("rho,u,lambda0", 0), 0u);
}

TEST_F(Cli, DecomposeEmptyListGivesHeaderOnly) {
    json cfg = small_flagship();
    cfg["states"] = json::array();
    ASSERT_EQ(run("--config " + write_config("c.json", cfg) + " " + flags() + " decompose"), 0) << err_;
    const std::string csv = slurp(out("decompose.csv"));
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1);
}

TEST_F(Cli, DecomposeZeroDensityExitsThree) {
    json cfg = small_flagship();
    cfg["states"] = json::array({json::array({0, 1})});
    EXPECT_EQ(run("--config " + write_config("c.json", cfg) + " " + flags() + " decompose"), 3);
    EXPECT_NE(err_.find("admissibility predicate 'rho >"), std::string::npos) << err_;
}

TEST_F(Cli, UnknownKeyExitsTwo) {
    json cfg = small_flagship();
    cfg["window"]["nz"] = 3;
    EXPECT_EQ(run("--config " + write_config("c.json", cfg) + " " + flags() + " gtw"), 2);
    EXPECT_NE(err_.find("nz"), std::string::npos) << err_;
}

TEST_F(Cli, MissingConfigExitsTwo) { EXPECT_EQ(run(flags() + " gtw"), 2); }

TEST_F(Cli, UnknownVerbExitsTwo) { EXPECT_EQ(run("frobnicate"), 2); }

TEST_F(Cli, SubShockExitsFourWithLocus) {
    EXPECT_EQ(run("--config " + sample("sonic.json") + " " + flags() + " gtw"), 4);
    const json j = json::parse(err_.substr(err_.find('{')));
    EXPECT_EQ(j.at("error"), "sub_shock");
    EXPECT_EQ(j.at("family"), 1);
    EXPECT_EQ(j.at("state"), json::array({0.5, 0.0}));
}

TEST_F(Cli, IncompatibleSourceExitsFive) {
    json cfg = small_flagship();
    cfg["frame"] = json::parse(R"({"s": 1, "F": ["0", "0.5*(u - 1)^2"], "anchor": [1, 1.1]})");
    EXPECT_EQ(run("--config " + write_config("c.json", cfg) + " " + flags() + " gtw"), 5);
}

TEST_F(Cli, StructuralFailureExitsFive) {
    EXPECT_EQ(run("--config " + sample("case_i_fail.json") + " " + flags() + " case-i"), 5);
    EXPECT_NE(err_.find("compatibility"), std::string::npos);
}

TEST_F(Cli, GtwFlagshipReportPasses) {
    ASSERT_EQ(run("--config " + write_config("c.json", small_flagship()) + " " + flags() + " gtw"), 0) << err_;
    const json rep = json::parse(slurp(out("gtw_report.json")));
    EXPECT_TRUE(rep.at("pass").get<bool>());
    EXPECT_LE(rep.at("pde_residual_constructed").at("max").get<double>(), 1e-7);
    EXPECT_LE(rep.at("closed_form_error").at("max").get<double>(), 1e-7);
    EXPECT_FALSE(rep.at("exact_tw").get<bool>());
}

TEST_F(Cli, HomogeneousReportFlagsTravellingWave) {
    ASSERT_EQ(run("--config " + write_config("c.json", homogeneous()) + " " + flags() + " gtw"), 0) << err_;
    const json rep = json::parse(slurp(out("gtw_report.json")));
    EXPECT_TRUE(rep.at("exact_tw").get<bool>());
    EXPECT_TRUE(rep.at("shift_invariance_pass").get<bool>());
}

TEST_F(Cli, VerifySelfDifferenceIsZero) {
    const std::string cfg = write_config("c.json", small_flagship());
    ASSERT_EQ(run("--config " + cfg + " " + flags() + " gtw"), 0) << err_;
    const std::string f = out("gtw_field.gtwf");
    ASSERT_EQ(run("--config " + cfg + " " + flags() + " verify " + f + " " + f), 0) << err_;
    const json rep = json::parse(slurp(out("verify_report.json")));
    EXPECT_EQ(rep.at("difference").at("max").get<double>(), 0.0);
    EXPECT_LE(rep.at("fields")[0].at("closed_form_error").at("max").get<double>(), 1e-7);
}

TEST_F(Cli, VerifyTruncatedFileExitsTwoWithLine) {
    ASSERT_EQ(run("--config " + write_config("c.json", homogeneous()) + " " + flags() + " gtw"), 0) << err_;
    const std::string full = slurp(out("gtw_field.gtwf"));
    const fs::path cut = dir_ / "cut.gtwf";
    std::ofstream(cut, std::ios::binary) << full.substr(0, full.size() / 2);
    EXPECT_EQ(run("verify " + cut.string()), 2);
    const json j = json::parse(err_.substr(err_.find('{')));
    EXPECT_EQ(j.at("error"), "config");
    EXPECT_GT(j.at("line").get<int>(), 0);
}

TEST_F(Cli, FixedStepRerunIsBitIdentical) {
    const std::string cfg = write_config("c.json", small_flagship());
    ASSERT_EQ(run("--config " + cfg + " --out " + (dir_ / "a").string() + " --fixed-step gtw"), 0) << err_;
    ASSERT_EQ(run("--config " + cfg + " --out " + (dir_ / "b").string() + " --fixed-step gtw"), 0) << err_;
    EXPECT_EQ(slurp(dir_ / "a" / "gtw_field.gtwf"), slurp(dir_ / "b" / "gtw_field.gtwf"));
    EXPECT_EQ(slurp(dir_ / "a" / "gtw_report.json"), slurp(dir_ / "b" / "gtw_report.json"));
}

TEST_F(Cli, ToleranceOverrideRecordedInMetadata) {
    const std::string cfg = write_config("c.json", homogeneous());
    ASSERT_EQ(run("--config " + cfg + " " + flags() + " --tol-override rel_tol=1e-11 gtw"), 0) << err_;
    const json rep = json::parse(slurp(out("gtw_report.json")));
    EXPECT_EQ(rep.at("metadata").at("tolerances").at("rel_tol").get<double>(), 1e-11);
    EXPECT_EQ(rep.at("metadata").at("tolerances").at("overrides").at("rel_tol").get<double>(), 1e-11);
    EXPECT_EQ(run("--config " + cfg + " " + flags() + " --tol-override bogus=1 gtw"), 2);
}

TEST_F(Cli, FieldRoundTripIsLossless) {
    ASSERT_EQ(run("--config " + write_config("c.json", small_flagship()) + " " + flags() + " gtw"), 0) << err_;
    const gtw::GridField a = gtw::io::read_field(out("gtw_field.gtwf"));
    const std::string copy = (dir_ / "copy.gtwf").string();
    gtw::io::write_field(copy, a);
    const gtw::GridField b = gtw::io::read_field(copy);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.t, b.t);
    for (std::size_t j = 0; j < a.nt(); ++j)
        for (std::size_t i = 0; i < a.nx(); ++i) EXPECT_EQ(a.at(i, j), b.at(i, j));
    EXPECT_EQ(slurp(out("gtw_field.gtwf")), slurp(copy));
}

TEST_F(Cli, SimpleWaveRecordsBreakingTime) {
    ASSERT_EQ(run("--config " + sample("simple_wave.json") + " " + flags() + " simple-wave"), 0) << err_;
    const gtw::GridField f = gtw::io::read_field(out("simple_wave_field.gtwf"));
    EXPECT_NEAR(f.metadata.at("breaking_time").get<double>(), 4.0 / 3.0, 1e-4);
    EXPECT_LE(f.metadata.at("max_invariant_defect").get<double>(), 1e-8);
}

TEST_F(Cli, ConvergenceWritesOrderTable) {
    json cfg = small_flagship();
    cfg["convergence"] = json::parse(R"({"target": "closed_form", "scheme": "b", "ladder": [64, 128, 256], "t_end": 0.25})");
    ASSERT_EQ(run("--config " + write_config("c.json", cfg) + " " + flags() + " convergence"), 0) << err_;
    const std::string csv = slurp(out("convergence.csv"));
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
    const json rep = json::parse(slurp(out("convergence_report.json")));
    EXPECT_GT(rep.at("order").get<double>(), 1.5);
}

TEST_F(Cli, CaseIRunsSample) {
    ASSERT_EQ(run("--config " + sample("case_i.json") + " " + flags() + " case-i"), 0) << err_;
    const gtw::GridField f = gtw::io::read_field(out("case_i_field.gtwf"));
    EXPECT_LE(f.metadata.at("lattice_residual").at("max").get<double>(), 1e-6);
}
