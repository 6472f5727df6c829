#include "support.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace cosie;
using nlohmann::json;
using testsupport::TempDir;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(COSIE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

/// Two-community SBM with four graphs written through the sample command.
void make_collection(const TempDir& dir) {
    Matrix b(2, 2);
    b << 0.6, 0.1, 0.1, 0.5;
    save_sbm_params(dir / "sbm.json",
                    MultilayerSbmParams(testsupport::block_labels(60, 2), std::vector<Matrix>(4, b)));
    REQUIRE(run("sample --sbm " + q(dir / "sbm.json") + " --seed 3 --out " + q(dir / "graphs")) == 0);
}

} // namespace

TEST_CASE("sample writes a loadable manifest", "[cli]") {
    TempDir dir;
    make_collection(dir);
    const auto graphs = load_collection(dir / "graphs" / "manifest.json");
    CHECK(graphs.size() == 4);
    CHECK(graphs.n() == 60);
    REQUIRE(run("sample --sbm " + q(dir / "sbm.json") + " --seed 3 --threads 3 --out " + q(dir / "again")) == 0);
    for (int i = 1; i <= 4; ++i) {
        const std::string name = "graph_" + std::to_string(i) + ".txt";
        CHECK(slurp(dir / "graphs" / name) == slurp(dir / "again" / name));
    }
}

TEST_CASE("embed, select-dim and cluster", "[cli]") {
    TempDir dir;
    make_collection(dir);
    const auto manifest = q(dir / "graphs" / "manifest.json");
    REQUIRE(run("embed --manifest " + manifest + " --d 2 --di 2 --out " + q(dir / "mase")) == 0);
    const Matrix v = load_matrix(dir / "mase" / "V.csv");
    CHECK(v.rows() == 60);
    CHECK(v.cols() == 2);
    for (int i = 1; i <= 4; ++i) CHECK(load_matrix(dir / "mase" / ("R_" + std::to_string(i) + ".csv")).rows() == 2);
    const auto dims = json::parse(slurp(dir / "mase" / "dims.json"));
    CHECK(dims.at("d") == 2);

    REQUIRE(run("embed --manifest " + manifest + " --method omni --d 2 --out " + q(dir / "omni")) == 0);
    CHECK(load_matrix(dir / "omni" / "X_4.csv").cols() == 2);
    REQUIRE(run("embed --manifest " + manifest + " --method mean-ase --d 2 --out " + q(dir / "mean")) == 0);
    CHECK(load_matrix(dir / "mean" / "V.csv").rows() == 60);

    const std::string select = std::string(COSIE_CLI_PATH) + " select-dim --manifest " + manifest + " --di 2 > " +
                               q(dir / "scree.csv");
    REQUIRE(std::system(select.c_str()) == 0);
    CHECK(slurp(dir / "scree.csv").rfind("chosen_d,", 0) == 0);

    write(dir / "z.json", json{{"z", testsupport::block_labels(60, 2)}}.dump());
    REQUIRE(run("cluster --embedding " + q(dir / "mase") + " --k 2 --seed 1 --reference " + q(dir / "z.json") +
                " --out " + q(dir / "cl.json")) == 0);
    const auto cl = json::parse(slurp(dir / "cl.json"));
    CHECK(cl.at("assignment").size() == 60);
    CHECK(cl.at("misclustered") == 0);
}

TEST_CASE("test and experiment commands", "[cli]") {
    TempDir dir;
    make_collection(dir);
    const auto manifest = q(dir / "graphs" / "manifest.json");
    REQUIRE(run("test --manifest " + manifest + " --method bootstrap --d 2 --reps 20 --seed 4 --out " +
                q(dir / "p.csv")) == 0);
    const Matrix p = load_matrix(dir / "p.csv");
    CHECK(p.rows() == 4);
    CHECK(p == p.transpose());
    CHECK(p.diagonal() == Vector::Ones(4));

    write(dir / "cfg.json", R"({"n": 40, "m_grid": [1, 2], "reps": 2})");
    REQUIRE(run("experiment --scenario community_detection --config " + q(dir / "cfg.json") + " --seed 9 --out " +
                q(dir / "exp")) == 0);
    CHECK(std::filesystem::exists(dir / "exp" / "raw.csv"));
    CHECK(std::filesystem::exists(dir / "exp" / "summary.csv"));
    CHECK(json::parse(slurp(dir / "exp" / "config_echo.json")).at("seed") == 9);
}

TEST_CASE("errors exit with status 2", "[cli]") {
    TempDir dir;
    CHECK(run("embed --manifest " + q(dir / "missing.json") + " --out " + q(dir / "o")) == 2);
    write(dir / "bad.json", R"({"reps": 1, "nope": 2})");
    CHECK(run("experiment --scenario subspace_error --config " + q(dir / "bad.json") + " --out " + q(dir / "o")) == 2);
    CHECK(run("no-such-command") != 0);
}
