#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

// The binary lives next to the test tree; ctest runs these from build/tests.
static std::string cli() {
    const char* env = std::getenv("DWAVE_CLI");
    if (env) return env;
    if (fs::exists("../tools/dwave")) return "../tools/dwave";
    if (fs::exists("tools/dwave")) return "tools/dwave";
    return "dwave";
}

static int run(const std::string& args) {
    std::string cmd = cli() + " " + args + " > cli_stdout.txt 2> cli_stderr.txt";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

TEST_CASE("determinism: identical config and seed give identical bytes") {
    fs::remove_all("cli_out_a");
    fs::remove_all("cli_out_b");
    REQUIRE(run("--out cli_out_a ipp-check --n 8 --trials 10 --seed 1") == 0);
    REQUIRE(run("--out cli_out_b ipp-check --n 8 --trials 10 --seed 1") == 0);
    CHECK(slurp("cli_out_a/ipp-check/residuals.csv") == slurp("cli_out_b/ipp-check/residuals.csv"));
    CHECK(!slurp("cli_out_a/ipp-check/residuals.csv").empty());
    CHECK(slurp("cli_out_a/ipp-check/manifest.json") == slurp("cli_out_b/ipp-check/manifest.json"));
}

TEST_CASE("unknown flag exits 1") {
    CHECK(run("--definitely-not-a-flag") == 1);
    CHECK(run("no-such-subcommand") == 1);
}

TEST_CASE("inadmissible tau h exits 2 and names the failure") {
    fs::remove_all("cli_out_c");
    int rc = run("--out cli_out_c carleman-sweep --n 8 --tauh 5.0 --samples 1");
    CHECK(rc == 2);
    CHECK(slurp("cli_stderr.txt").find("inadmissible-parameter") != std::string::npos);
}

TEST_CASE("solve writes snapshots, sidecars and the energy table") {
    fs::remove_all("cli_out_d");
    {
        std::ofstream cfg("solve_test.cfg");
        cfg << "N = 10\nT = 0.5\ndt_factor = 8\n"
            << "q = 1 + x1*x2\n"
            << "y0 = sin(pi*x1)*sin(pi*x2)\n"
            << "y1 = 0\nf = 0\nf_bdy = 0\n"
            << "snapshot_stride = 16\n";
    }
    REQUIRE(run("--out cli_out_d solve --config solve_test.cfg") == 0);
    CHECK(fs::exists("cli_out_d/solve/energy.csv"));
    CHECK(fs::exists("cli_out_d/solve/manifest.json"));
    CHECK(fs::exists("cli_out_d/solve/snapshots/y_index.json"));
    CHECK(fs::exists("cli_out_d/solve/snapshots/y_000000.csv"));
    std::string manifest = slurp("cli_out_d/solve/manifest.json");
    CHECK(manifest.find("dt_factor") != std::string::npos); // defaults echoed
    std::string energy = slurp("cli_out_d/solve/energy.csv");
    CHECK(energy.rfind("t,E", 0) == 0);
}

TEST_CASE("sweep subcommands produce their tables") {
    fs::remove_all("cli_out_e");
    REQUIRE(run("--out cli_out_e carleman-sweep --n 8 --tauh 0.1 --samples 2 --seed 4") == 0);
    std::string csv = slurp("cli_out_e/carleman-sweep/sweep.csv");
    CHECK(csv.rfind("N,tau,sample,term_name,value,ratio", 0) == 0);
    CHECK(csv.find("rhs_pen") != std::string::npos);
    CHECK(fs::exists("cli_out_e/carleman-sweep/summary.json"));

    {
        std::ofstream cfg("stab_test.cfg");
        cfg << "n = 8\nsamples = 2\nT = 1.6\n";
    }
    REQUIRE(run("--out cli_out_e stability-sweep --config stab_test.cfg --seed 5") == 0);
    CHECK(fs::exists("cli_out_e/stability-sweep/records.csv"));
    CHECK(fs::exists("cli_out_e/stability-sweep/ratios.dat"));

    {
        std::ofstream cfg("conv_test.cfg");
        cfg << "n = 8,16\nmode = exact\n";
    }
    REQUIRE(run("--out cli_out_e convergence --config conv_test.cfg") == 0);
    std::string table = slurp("cli_out_e/convergence/table.csv");
    CHECK(table.rfind("N,h,potential_error", 0) == 0);
}

TEST_CASE("report subcommands produce their JSON") {
    fs::remove_all("cli_out_f");
    REQUIRE(run("--out cli_out_f fbi-check --n-kernel 1 --lambda 1") == 0);
    std::string rep = slurp("cli_out_f/fbi-check/report.json");
    CHECK(rep.find("\"c1\"") != std::string::npos);

    {
        std::ofstream cfg("ellc_test.cfg");
        cfg << "n = 8\nsamples = 1\ntauh = 0.3\n";
    }
    REQUIRE(run("--out cli_out_f elliptic-carleman --config ellc_test.cfg") == 0);
    CHECK(fs::exists("cli_out_f/elliptic-carleman/summary.json"));

    {
        std::ofstream cfg("logstab_test.cfg");
        cfg << "N = 8\nT = 8\ndt_factor = 4\nscenario = checkerboard\n";
    }
    REQUIRE(run("--out cli_out_f log-stability --config logstab_test.cfg") == 0);
    std::string ls = slurp("cli_out_f/log-stability/report.json");
    CHECK(ls.find("lambda_case") != std::string::npos);
    CHECK(ls.find("C_emp") != std::string::npos);

    {
        std::ofstream cfg("rec_test.cfg");
        cfg << "N = 10\nT = 1.6\nmax_iter = 12\n";
    }
    REQUIRE(run("--out cli_out_f reconstruct --config rec_test.cfg") == 0);
    std::string sum = slurp("cli_out_f/reconstruct/summary.json");
    CHECK(sum.find("final_error") != std::string::npos);
    CHECK(fs::exists("cli_out_f/reconstruct/convergence.csv"));
    CHECK(fs::exists("cli_out_f/reconstruct/q_reconstructed.csv"));
}
