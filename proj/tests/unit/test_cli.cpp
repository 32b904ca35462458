#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "latmed_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int run(const std::string& args, const std::string& log = "log.txt") {
    const std::string cmd = std::string(LATMED_CLI) + " " + args + " > " + (workdir() / log).string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string write(const std::string& name, const std::string& text) {
    const fs::path p = workdir() / name;
    std::ofstream(p) << text;
    return p.string();
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

}  // namespace

TEST_CASE("simulate is byte-for-byte reproducible") {
    const std::string cfg = write("lin.json", R"({"generator": "linear", "n": 200, "k": 2, "seed": 1})");
    REQUIRE(run("simulate --config " + cfg + " --out " + path("a.csv")) == 0);
    REQUIRE(run("simulate --config " + cfg + " --out " + path("b.csv")) == 0);
    CHECK(slurp(path("a.csv")) == slurp(path("b.csv")));
    CHECK(fs::exists(path("a.truth.json")));
    REQUIRE(run("simulate --config " + cfg + " --out " + path("c.csv") + " --seed 2") == 0);
    CHECK(slurp(path("a.csv")) != slurp(path("c.csv")));
}

TEST_CASE("simulate writes five mediators for the low-rank generator") {
    const std::string cfg = write("low.json", R"({"generator": "lowrank", "n": 50, "seed": 3})");
    REQUIRE(run("simulate --config " + cfg + " --out " + path("low.csv")) == 0);
    const std::string text = slurp(path("low.csv"));
    CHECK(text.substr(0, text.find('\n')) == "T,M1,M2,M3,M4,M5,Y,X1,X2,U");
}

TEST_CASE("config errors exit with code 2 and name the key") {
    const std::string cfg = write("nokey.json", R"({"generator": "linear", "k": 2})");
    CHECK(run("simulate --config " + cfg + " --out " + path("x.csv"), "err.txt") == 2);
    CHECK(slurp(path("err.txt")).find("'n'") != std::string::npos);
    CHECK(run("simulate --config " + path("missing.json"), "err2.txt") == 2);
    CHECK(run("fit --data " + path("a.csv") + " --model xyz", "err3.txt") == 2);
    CHECK(run("frobnicate", "err4.txt") == 2);
}

TEST_CASE("fit, effects and rank-select pipeline") {
    const std::string cfg = write("fitdata.json", R"({"generator": "linear", "n": 400, "k": 2, "seed": 4})");
    REQUIRE(run("simulate --config " + cfg + " --out " + path("d.csv")) == 0);
    REQUIRE(run("fit --data " + path("d.csv") + " --out " + path("fit.json") + " --lambda 5") == 0);
    CHECK(fs::exists(path("fit.uhat.csv")));
    REQUIRE(run("effects --fit " + path("fit.json") + " --data " + path("d.csv") + " --out " + path("eff.json")) == 0);
    const std::string eff = slurp(path("eff.json"));
    CHECK(eff.find("\"tau\"") != std::string::npos);
    REQUIRE(run("fit --data " + path("d.csv") + " --out " + path("fit2.json") + " --lambda 5") == 0);
    CHECK(slurp(path("fit.json")) == slurp(path("fit2.json")));
    REQUIRE(run("rank-select --data " + path("d.csv"), "rank.txt") == 0);
    CHECK(slurp(path("rank.txt")).find("rank: ") != std::string::npos);
    REQUIRE(run("fit --data " + path("d.csv") + " --model ae --max-iter 2 --seed 3 --out " + path("ae.json")) == 0);
    REQUIRE(run("effects --fit " + path("ae.json") + " --data " + path("d.csv"), "aeeff.txt") == 0);
    CHECK(slurp(path("aeeff.txt")).find("\"tau\"") != std::string::npos);
}

TEST_CASE("numerical failures exit with code 3") {
    const std::string cfg = write("tiny.json", R"({"generator": "linear", "n": 40, "k": 2, "seed": 4})");
    REQUIRE(run("simulate --config " + cfg + " --out " + path("t.csv")) == 0);
    const std::string aecfg = write("boom.json", R"({"autoencoder": {"learn_rate": 1e300, "weight_init_scale": 1e200}})");
    CHECK(run("fit --data " + path("t.csv") + " --model ae --config " + aecfg, "boom.txt") == 3);
}

TEST_CASE("benchmark is reproducible from the master seed") {
    const std::string cfg = write("bench.json", R"({
        "master_seed": 3, "replications": 2, "methods": ["prop_fm", "lsem"],
        "settings": [{"name": "lin", "generator": "linear", "n": 300, "k": 2}]})");
    REQUIRE(run("benchmark --config " + cfg + " --out " + path("r1.csv")) == 0);
    REQUIRE(run("benchmark --config " + cfg + " --jobs 2 --out " + path("r2.csv")) == 0);
    CHECK(slurp(path("r1.csv")) == slurp(path("r2.csv")));
    CHECK(slurp(path("r1.csv")).find("prop_fm") != std::string::npos);
}
