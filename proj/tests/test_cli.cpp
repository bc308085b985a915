#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "tbac/digest.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

RunResult run(const std::string& args) {
    std::string cmd = std::string(TBAC_CLI_PATH) + " " + args + " 2>&1";
    std::array<char, 4096> buf{};
    RunResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    while (fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
    int status = pclose(pipe);
    r.exit_code = WEXITSTATUS(status);
    return r;
}

fs::path scratch_dir() {
    auto p = fs::temp_directory_path() /
             ("tbac_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(p);
    return p;
}

std::string data(const char* name) {
    return (fs::path(TBAC_DATA_DIR) / name).string();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace

TEST_CASE("model validate accepts the shipped models") {
    auto ok = run("model validate " + data("demo.model"));
    CHECK(ok.exit_code == 0);
    CHECK(ok.output.find("5 services") != std::string::npos);

    CHECK(run("model validate " + data("bench.model")).exit_code == 0);
    CHECK(run("model validate /no/such/file").exit_code == 1);
}

TEST_CASE("model validate rejects an invalid document") {
    auto dir = scratch_dir();
    std::ofstream(dir / "bad.model") << "service A system /x\nservice B system /x\ninitial A\n";
    auto r = run("model validate " + (dir / "bad.model").string());
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("duplicate URI") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("tbm create compiles one file per rule") {
    auto dir = scratch_dir();
    auto r = run("tbm create --srm " + data("demo.srm") + " --model " + data("demo.model") +
                 " --out-dir " + dir.string());
    CHECK(r.exit_code == 0);

    auto mike = slurp(dir / "tbm_C0_cardiopathy.txt");
    CHECK(mike == "tbm C0\n"
                  "rb /SBA/0.jsp /SBA/0.jsp\n"
                  "rb /SBA/0.jsp /SBA/1.jsp\n"
                  "rb /SBA/0.jsp /SBA/X0.jsp\n"
                  "rb /SBA/1.jsp /SBA/1.jsp\n"
                  "rb /SBA/1.jsp /SBA/X1.jsp\n"
                  "rb /SBA/X0.jsp /SBA/X0.jsp\n"
                  "rb /SBA/X1.jsp /SBA/X1.jsp\n");
    auto mary = slurp(dir / "tbm_C1_influenza.txt");
    CHECK(mary == "tbm C1\n"
                  "rb /SBA/0.jsp /SBA/0.jsp\n"
                  "rb /SBA/0.jsp /SBA/X0.jsp\n"
                  "rb /SBA/X0.jsp /SBA/X0.jsp\n");
    fs::remove_all(dir);
}

TEST_CASE("tbm create on an empty SRM warns and succeeds") {
    auto dir = scratch_dir();
    std::ofstream(dir / "empty.srm") << "# nothing released\n";
    auto r = run("tbm create --srm " + (dir / "empty.srm").string() + " --model " +
                 data("demo.model") + " --out-dir " + dir.string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("warning") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("tbm create surfaces unreachable released services") {
    auto dir = scratch_dir();
    std::ofstream(dir / "island.model") << "service S0 system /a\n"
                                           "service S1 sensitive /b\n"
                                           "initial S0\n";
    std::ofstream(dir / "island.srm") << "rule C0 ab t0 -> S1\n";
    auto r = run("tbm create --srm " + (dir / "island.srm").string() + " --model " +
                 (dir / "island.model").string() + " --out-dir " + dir.string());
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("S1") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("tbm append merges and deduplicates") {
    auto dir = scratch_dir();
    REQUIRE(run("tbm create --srm " + data("demo.srm") + " --model " + data("demo.model") +
                " --out-dir " + dir.string())
                .exit_code == 0);
    auto tbm_path = (dir / "tbm_C0_cardiopathy.txt").string();

    std::ofstream(dir / "extra.txt") << "tbm C0\nrb /SBA/X1.jsp /SBA/X2.jsp\n";
    auto grown = run("tbm append --tbm " + tbm_path + " --rules " +
                     (dir / "extra.txt").string());
    CHECK(grown.exit_code == 0);
    CHECK(grown.output.find("8 rules") != std::string::npos);

    // appending the same rules again changes nothing
    auto again = run("tbm append --tbm " + tbm_path + " --rules " +
                     (dir / "extra.txt").string());
    CHECK(again.output.find("8 rules") != std::string::npos);

    auto shown = run("tbm show --tbm " + tbm_path);
    CHECK(shown.exit_code == 0);
    CHECK(shown.output.find("rb /SBA/X1.jsp /SBA/X2.jsp") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("srm hash prints the salted key digest") {
    auto r = run("srm hash --consumer C0 --target cardiopathy --key mike-key");
    CHECK(r.exit_code == 0);
    CHECK(r.output == tbac::key_digest("C0", "cardiopathy", "mike-key") + "\n");
}

TEST_CASE("blacklist list and remove") {
    auto dir = scratch_dir();
    auto bl = (dir / "bl.txt").string();

    auto empty = run("blacklist list --file " + bl);
    CHECK(empty.exit_code == 0);
    CHECK(empty.output.empty());

    std::ofstream(bl) << "ban C0 1700000000000 uar-afr-exceeded\n";
    auto listed = run("blacklist list --file " + bl);
    CHECK(listed.output.find("C0") != std::string::npos);

    CHECK(run("blacklist remove C0 --file " + bl).exit_code == 0);
    CHECK(run("blacklist list --file " + bl).output.empty());
    CHECK(run("blacklist remove C9 --file " + bl).exit_code == 1);
    fs::remove_all(dir);
}
