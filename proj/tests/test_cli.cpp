#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + std::string(PCFIELD_EXE) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("pcf_cli_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    // lead field, simulation and alpha-band cross-spectrum with a short recording
    void prepare(int epochs = 40) {
        ASSERT_EQ(run("leadfield --builtin-1020 --grid 0.14 --out " + path("lf.pcf")), 0);
        std::ofstream(path("sim.cfg")) << "n_epochs = " << epochs << "\nseed = 3\n";
        ASSERT_EQ(run("simulate --config " + path("sim.cfg") + " --leadfield " + path("lf.pcf") + " --out " + path("sim")), 0);
        ASSERT_EQ(run("xspec --epochs " + path("sim/epochs.csv") + " --rate 64 --band 8:12 --out " + path("s.pcf")), 0);
    }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, NoSubcommandIsUsage) { EXPECT_EQ(run(""), 64); }

TEST_F(Cli, MissingRequiredOptionIsUsage) {
    EXPECT_EQ(run("leadfield --builtin-1020 --grid 0.2"), 64);
    EXPECT_EQ(run("leadfield --out " + path("lf.pcf")), 64);
    EXPECT_EQ(run("leadfield --builtin-1020 --electrodes e.csv --grid 0.2 --out x.pcf"), 64);
}

TEST_F(Cli, BadChoiceIsUsage) {
    EXPECT_EQ(run("connect --leadfield a --xspec b --method mne --measure lagged --out c"), 64);
    EXPECT_EQ(run("xspec --epochs a --rate 64 --band 8-12 --out b"), 64);
}

TEST_F(Cli, MissingInputFile) {
    EXPECT_EQ(run("simulate --leadfield " + path("nope.pcf") + " --out " + path("o")), 66);
    EXPECT_EQ(run("compare --maps " + path("m") + " --truth " + path("truth.csv") + " --out " + path("c.csv")), 66);
}

TEST_F(Cli, LeadfieldWritesSidecars) {
    EXPECT_EQ(run("leadfield --builtin-1020 --grid 0.14 --out " + path("lf.pcf")), 0);
    EXPECT_TRUE(fs::exists(path("lf.electrodes.csv")));
    EXPECT_TRUE(fs::exists(path("lf.voxels.csv")));
    EXPECT_EQ(fs::file_size(path("lf.pcf")), 13u + 8u * 19u * 818u);
}

TEST_F(Cli, DuplicateVoxelsFail) {
    std::ofstream(path("v.csv")) << "id,x,y,z\n0,0,0,0\n1,0.1,0,0\n2,0,0,0\n";
    EXPECT_EQ(run("leadfield --builtin-1020 --voxels " + path("v.csv") + " --out " + path("lf.pcf")), 2);
}

TEST_F(Cli, EmptyBandFails) {
    std::ofstream f(path("e.csv"));
    f << "epoch,t,a\n";
    for (int t = 0; t < 64; ++t) f << "0," << t << "," << t % 3 << "\n";
    f.close();
    EXPECT_EQ(run("xspec --epochs " + path("e.csv") + " --rate 64 --band 8.2:8.8 --out " + path("s.pcf")), 2);
    EXPECT_EQ(run("xspec --epochs " + path("e.csv") + " --rate 64 --band 8:12 --out " + path("s.pcf")), 0);
}

TEST_F(Cli, ElectrodeCountMismatchFails) {
    ASSERT_EQ(run("leadfield --builtin-1020 --grid 0.2 --out " + path("lf.pcf")), 0);
    std::ofstream f(path("e.csv"));
    f << "epoch,t,a,b\n";
    for (int t = 0; t < 64; ++t) f << "0," << t << "," << t % 3 << "," << t % 5 << "\n";
    f.close();
    ASSERT_EQ(run("xspec --epochs " + path("e.csv") + " --rate 64 --band 8:12 --out " + path("s.pcf")), 0);
    EXPECT_EQ(run("connect --leadfield " + path("lf.pcf") + " --xspec " + path("s.pcf") +
                  " --method partial --measure lagged --out " + path("m")),
              2);
}

TEST_F(Cli, SingleSeed) {
    prepare(20);
    ASSERT_EQ(run("connect --leadfield " + path("lf.pcf") + " --xspec " + path("s.pcf") +
                  " --method partial --measure coherence --seeds 5 --out " + path("m")),
              0);
    int maps = 0;
    for (const auto& e : fs::directory_iterator(path("m")))
        if (e.path().filename().string().rfind("map_seed_", 0) == 0) ++maps;
    EXPECT_EQ(maps, 1);
    EXPECT_TRUE(fs::exists(path("m/map_seed_5.csv")));
    EXPECT_TRUE(fs::exists(path("m/factor.pcf")));
    EXPECT_EQ(run("connect --leadfield " + path("lf.pcf") + " --xspec " + path("s.pcf") +
                  " --method partial --measure coherence --seeds 99999 --out " + path("m2")),
              2);
}

TEST_F(Cli, FullPipelineIsFastAndIdempotent) {
    const auto start = std::chrono::steady_clock::now();
    prepare(100);
    for (const std::string method : {"classical", "partial"}) {
        ASSERT_EQ(run("connect --leadfield " + path("lf.pcf") + " --xspec " + path("s.pcf") + " --method " + method +
                      " --measure lagged --out " + path(method)),
                  0);
        EXPECT_EQ(slurp(path(method + "/composite.csv")).substr(0, 21), "voxel_id,x,y,z,value\n");
    }
    ASSERT_EQ(run("compare --maps " + path("classical") + " " + path("partial") + " --truth " + path("sim/truth.csv") +
                  " --out " + path("summary.csv")),
              0);
    ASSERT_EQ(run("render --map " + path("partial/composite.csv") + " --out " + path("partial.ppm")), 0);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_LT(seconds, 60.0);

    const std::string summary = slurp(path("summary.csv"));
    EXPECT_EQ(summary.substr(0, summary.find('\n')), "method,measure,localization_error");
    EXPECT_NE(summary.find("classical,classical_lagged,"), std::string::npos);
    EXPECT_NE(summary.find("partial,partial_lagged,"), std::string::npos);
    EXPECT_EQ(slurp(path("partial.ppm")).substr(0, 2), "P6");

    const std::string first = slurp(path("partial/composite.csv"));
    const std::string first_epochs = slurp(path("sim/epochs.csv"));
    ASSERT_EQ(run("simulate --config " + path("sim.cfg") + " --leadfield " + path("lf.pcf") + " --out " + path("sim")), 0);
    ASSERT_EQ(run("connect --leadfield " + path("lf.pcf") + " --xspec " + path("s.pcf") +
                  " --method partial --measure lagged --out " + path("partial")),
              0);
    EXPECT_EQ(slurp(path("sim/epochs.csv")), first_epochs);
    EXPECT_EQ(slurp(path("partial/composite.csv")), first);
}

TEST_F(Cli, ThreadCountDoesNotChangeOutput) {
    prepare(20);
    const std::string base = "connect --leadfield " + path("lf.pcf") + " --xspec " + path("s.pcf") +
                             " --method classical --measure lagged --out ";
    ASSERT_EQ(run(base + path("t1"), "PCF_THREADS=1"), 0);
    ASSERT_EQ(run(base + path("t3"), "PCF_THREADS=3"), 0);
    EXPECT_EQ(slurp(path("t1/composite.csv")), slurp(path("t3/composite.csv")));
    EXPECT_EQ(run(base + path("t0"), "PCF_THREADS=zero"), 64);
}
