// End-to-end command-line behavior: exit codes, on-disk artifacts, and
// environment handling, driven through the real binary.
#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "mbsindy/io.hpp"

using namespace mbsindy;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(MBSINDY_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// One shared scratch area with a small dataset, built on first use.
struct Fixture {
    fs::path root;
    fs::path dataset;

    Fixture() {
        root = fs::temp_directory_path() / ("mbsindy-cli-test-" + std::to_string(::getpid()));
        fs::remove_all(root);
        fs::create_directories(root);
        dataset = root / "data";
        const int code = std::system((std::string(MBSINDY_CLI_PATH) +
                                      " simulate --case planar --kappa 0.5 --t-end 2"
                                      " --spacing 0.1 --length-x 5.9 --length-y 6.0 --front-x0 1.0"
                                      " --snapshot-stride 25 --out " + dataset.string() +
                                      " >/dev/null 2>&1")
                                         .c_str());
        REQUIRE(WEXITSTATUS(code) == 0);
    }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

}  // namespace

TEST_CASE("usage errors exit with code 2", "[cli]") {
    CHECK(run("") == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run("simulate --case dodecahedron") == 2);
    CHECK(run("discover") == 2);             // --in is required
    CHECK(run("replay --in /nonexistent --report /nonexistent/report.json") == 2);
    CHECK(run("--help") == 0);
    CHECK(run("simulate --help") == 0);
}

TEST_CASE("runtime failures exit with code 4", "[cli]") {
    // A time step above the stability bound is a solver-domain error, not a
    // usage error.
    CHECK(run("simulate --case planar --dt 0.1 --t-end 1 --out " +
              (fixture().root / "never").string()) == 4);
}

TEST_CASE("simulate writes a readable dataset", "[cli]") {
    const fs::path& dir = fixture().dataset;
    REQUIRE(fs::exists(dir / "manifest"));
    REQUIRE(fs::exists(dir / "snapshots" / "t_0.csv"));
    REQUIRE(fs::exists(dir / "boundary" / "t_0.csv"));

    Dataset ds = read_dataset(dir);
    CHECK(ds.params.kappa == 0.5);
    CHECK(ds.params.dx == 0.1);
    CHECK(ds.snapshots.size() >= 5);
    CHECK(ds.snapshots.size() == ds.curves.size());
}

TEST_CASE("corrupt with zero amplitude copies snapshots bit for bit", "[cli]") {
    const Fixture& f = fixture();
    const fs::path clean_copy = f.root / "eta0";
    REQUIRE(run("corrupt --in " + f.dataset.string() + " --out " + clean_copy.string() +
                " --eta 0 --seed 42") == 0);
    CHECK(slurp(clean_copy / "snapshots" / "t_1.csv") ==
          slurp(f.dataset / "snapshots" / "t_1.csv"));
    CHECK(slurp(clean_copy / "boundary" / "t_1.csv") ==
          slurp(f.dataset / "boundary" / "t_1.csv"));

    const fs::path noisy = f.root / "eta5";
    REQUIRE(run("corrupt --in " + f.dataset.string() + " --out " + noisy.string() +
                " --eta 0.05 --seed 42") == 0);
    CHECK(slurp(noisy / "snapshots" / "t_1.csv") != slurp(f.dataset / "snapshots" / "t_1.csv"));
    // Boundary curves carry no measurement noise.
    CHECK(slurp(noisy / "boundary" / "t_1.csv") == slurp(f.dataset / "boundary" / "t_1.csv"));

    Dataset ds = read_dataset(noisy);
    CHECK(ds.noise_eta == 0.05);
    CHECK(ds.noise_seed == 42);
}

TEST_CASE("discover writes a report and finds the front law", "[cli]") {
    const Fixture& f = fixture();
    const fs::path out = f.root / "disc";
    REQUIRE(run("discover --in " + f.dataset.string() + " --problem stefan --out " +
                out.string()) == 0);

    DiscoveryReport rep = read_report(out / "report.json");
    CHECK(rep.problem == "stefan");
    CHECK_FALSE(rep.empty_model);
    CHECK(rep.total_fits == 60 * 165);
    bool has_uxn = false;
    for (const auto& feat : rep.features)
        if (feat.name == "u_xn" && feat.retained) has_uxn = true;
    CHECK(has_uxn);
    CHECK(fs::exists(out / "report.txt"));
    CHECK(fs::exists(out / "coefficients.svg"));
    CHECK(fs::exists(out / "kde.svg"));

    // The config echo never records thread counts or absolute paths.
    CHECK(rep.config.find("threads") == rep.config.end());
    const std::string dumped = rep.config.dump();
    CHECK(dumped.find(f.dataset.string()) == std::string::npos);
}

TEST_CASE("discover reports an empty model with exit code 3", "[cli]") {
    const Fixture& f = fixture();
    const fs::path out = f.root / "disc-empty";
    CHECK(run("discover --in " + f.dataset.string() + " --problem stefan --lambda1 99 --out " +
              out.string()) == 3);
    DiscoveryReport rep = read_report(out / "report.json");
    CHECK(rep.empty_model);
    CHECK(rep.model.find("= 0") != std::string::npos);
}

TEST_CASE("reports are byte-identical across runs and thread counts", "[cli]") {
    const Fixture& f = fixture();
    const fs::path a = f.root / "det-a", b = f.root / "det-b", c = f.root / "det-c";
    REQUIRE(run("discover --in " + f.dataset.string() + " --out " + a.string() + " --threads 1") == 0);
    REQUIRE(run("discover --in " + f.dataset.string() + " --out " + b.string() + " --threads 4") == 0);
    REQUIRE(run("discover --in " + f.dataset.string() + " --out " + c.string() + " --threads 1") == 0);
    CHECK(slurp(a / "report.json") == slurp(b / "report.json"));
    CHECK(slurp(a / "report.json") == slurp(c / "report.json"));
}

TEST_CASE("replay reconstructs a front band from a report", "[cli]") {
    const Fixture& f = fixture();
    const fs::path disc = f.root / "disc";  // produced by the discover test
    if (!fs::exists(disc / "report.json")) {
        REQUIRE(run("discover --in " + f.dataset.string() + " --problem stefan --out " +
                    disc.string()) == 0);
    }
    const fs::path out = f.root / "band";
    REQUIRE(run("replay --in " + f.dataset.string() + " --report " +
                (disc / "report.json").string() + " --out " + out.string() +
                " --t-target 1.5") == 0);
    CHECK(fs::exists(out / "band_lower.csv"));
    CHECK(fs::exists(out / "band_median.csv"));
    CHECK(fs::exists(out / "band_upper.csv"));
    CHECK(fs::exists(out / "band.json"));
    CHECK(fs::exists(out / "band.svg"));

    CHECK(run("replay --in " + f.dataset.string() + " --report " +
              (f.root / "missing.json").string() + " --out " + (f.root / "band2").string()) == 2);
}

TEST_CASE("relative outputs are rooted at the output environment variable", "[cli]") {
    const Fixture& f = fixture();
    const fs::path env_root = f.root / "env-root";
    fs::create_directories(env_root);
    const std::string cmd = "MBSINDY_OUT=" + env_root.string() + " " + MBSINDY_CLI_PATH +
                            " corrupt --in " + f.dataset.string() +
                            " --out rel/copy --eta 0 --seed 1 >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    CHECK(WEXITSTATUS(status) == 0);
    CHECK(fs::exists(env_root / "rel" / "copy" / "manifest"));
}
