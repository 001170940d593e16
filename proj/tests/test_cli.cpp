#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "test_util.hpp"

namespace {

struct RunResult {
    int code = -1;
    std::string out;
};

// runs the tool, captures stdout, folds stderr into a side file
RunResult run(const std::string& args, const std::string& tag) {
    const std::string err_file = "cli_err_" + tag + ".txt";
    const std::string cmd = std::string(AGP_BIN) + " " + args + " 2>" + err_file;
    RunResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string tiny_cfg_file(const std::string& dir) {
    const std::string path = dir + "/cfg.json";
    testutil::dump(path, R"({
      "synth": {"shapes": 5, "points": 96},
      "grammar": {"n_rows": 12},
      "search": {"epochs": 2, "samples": 2, "pool_size": 3, "select_epochs": 1},
      "eval": {"final_epochs": 2}
    })");
    return path;
}

}  // namespace

TEST_CASE("cli help and usage errors") {
    CHECK(run("--help", "help").code == 0);
    CHECK(run("search --help", "help_search").code == 0);
    CHECK(run("frobnicate", "bogus_sub").code == 2);
    CHECK(run("", "no_sub").code == 2);
    CHECK(run("gen --set nosuch.key=1", "bad_key").code == 2);
    CHECK(run("gen --set search.epochs=0", "bad_value").code == 2);

    // --help output documents every config key with its default
    auto help = run("--help", "help_keys");
    CHECK(help.out.find("search.epochs") != std::string::npos);
    CHECK(help.out.find("grammar.radius") != std::string::npos);
    CHECK(help.out.find("select.method") != std::string::npos);
}

TEST_CASE("gen is deterministic and io errors exit 1") {
    const auto dir = testutil::scratch_dir("cli_gen");
    const auto cfg = tiny_cfg_file(dir);
    auto r1 = run("gen --config " + cfg + " --seed 5 --out " + dir + "/a.agpd", "gen_a");
    REQUIRE(r1.code == 0);
    auto r2 = run("gen --config " + cfg + " --seed 5 --out " + dir + "/b.agpd", "gen_b");
    REQUIRE(r2.code == 0);
    CHECK(testutil::slurp(dir + "/a.agpd") == testutil::slurp(dir + "/b.agpd"));
    CHECK(!testutil::slurp(dir + "/a.agpd").empty());

    auto r3 = run("gen --config " + cfg + " --seed 6 --out " + dir + "/c.agpd", "gen_c");
    REQUIRE(r3.code == 0);
    CHECK(testutil::slurp(dir + "/a.agpd") != testutil::slurp(dir + "/c.agpd"));

    CHECK(run("search --data " + dir + "/missing.agpd --config " + cfg, "missing_data").code ==
          1);
}

TEST_CASE("oracle-check passes on a fresh build") {
    auto r = run("oracle-check --seed 7", "oracle");
    CHECK(r.code == 0);
    CHECK(r.out.find("6/6") != std::string::npos);
}

TEST_CASE("eval-tree dumps unit-norm axis features") {
    const auto dir = testutil::scratch_dir("cli_evaltree");
    const auto cfg = tiny_cfg_file(dir);
    REQUIRE(run("gen --config " + cfg + " --seed 7 --out " + dir + "/d.agpd", "et_gen").code ==
            0);
    auto r = run("eval-tree --tree \"identity(svd(centralize(N)))\" --data " + dir +
                     "/d.agpd --config " + cfg + " --shape 0",
                 "et_run");
    REQUIRE(r.code == 0);
    int rows = 0;
    std::istringstream in(r.out);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        int shape_idx = 0, point_idx = 0;
        double x = 0, y = 0, z = 0;
        REQUIRE((ls >> shape_idx >> point_idx >> x >> y >> z));
        const double norm = std::sqrt(x * x + y * y + z * z);
        CHECK(std::fabs(norm - 1.0) < 1e-9);
        ++rows;
    }
    CHECK(rows == 96);

    CHECK(run("eval-tree --tree \"identity(\" --data " + dir + "/d.agpd", "et_bad").code == 1);
}

TEST_CASE("enumerate emits a normalized distribution") {
    const auto dir = testutil::scratch_dir("cli_enum");
    auto r = run("enumerate --set grammar.groupings=sum,max --set grammar.unaries=identity "
                 "--set grammar.binaries=add",
                 "enum");
    REQUIRE(r.code == 0);
    double mass = 0;
    int lines = 0;
    std::istringstream in(r.out);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        mass += j.at("p").get<double>();
        ++lines;
    }
    CHECK(lines > 10);
    CHECK(std::fabs(mass - 1.0) < 1e-9);
}

TEST_CASE("search, select, train pipeline round-trips through run dirs") {
    const auto dir = testutil::scratch_dir("cli_pipe");
    const auto cfg = tiny_cfg_file(dir);
    REQUIRE(run("gen --config " + cfg + " --seed 7 --out " + dir + "/d.agpd", "pipe_gen")
                .code == 0);

    auto s = run("search --config " + cfg + " --data " + dir + "/d.agpd --out " + dir +
                     "/runs --seed 7",
                 "pipe_search");
    REQUIRE(s.code == 0);
    // stdout: the run directory
    std::string run_dir = s.out;
    while (!run_dir.empty() && (run_dir.back() == '\n' || run_dir.back() == '\r'))
        run_dir.pop_back();
    REQUIRE(std::filesystem::is_directory(run_dir));
    CHECK(std::filesystem::exists(run_dir + "/config.resolved"));
    CHECK(std::filesystem::exists(run_dir + "/events.ndjson"));
    CHECK(std::filesystem::exists(run_dir + "/space_epoch_1"));
    CHECK(std::filesystem::exists(run_dir + "/state"));

    auto sel = run("select --config " + cfg + " --data " + dir + "/d.agpd --out " + dir +
                       "/runs --seed 7 --space " + run_dir + "/space_epoch_1",
                   "pipe_select");
    REQUIRE(sel.code == 0);
    std::istringstream sel_out(sel.out);
    std::string sel_dir, first_tree;
    std::getline(sel_out, first_tree);  // first line: winning tree text
    CHECK(!first_tree.empty());
    std::string tail, last;
    while (std::getline(sel_out, tail))
        if (!tail.empty()) last = tail;
    sel_dir = last;  // final line: the run directory
    REQUIRE(std::filesystem::is_directory(sel_dir));
    REQUIRE(std::filesystem::exists(sel_dir + "/selection.json"));
    auto sj = nlohmann::json::parse(testutil::slurp(sel_dir + "/selection.json"));
    CHECK(sj.at("method") == "greedy");
    REQUIRE(sj.at("trees").is_array());
    CHECK(sj.at("trees").size() >= 1);
    CHECK(sj.at("trees").size() <= 3);
    CHECK(sj.at("evaluated").size() >= 3);

    auto tr = run("train --config " + cfg + " --data " + dir + "/d.agpd --out " + dir +
                      "/runs --seed 7 --selection " + sel_dir + "/selection.json",
                  "pipe_train");
    REQUIRE(tr.code == 0);
    std::string train_last, cur;
    std::istringstream tr_out(tr.out);
    while (std::getline(tr_out, cur))
        if (!cur.empty()) train_last = cur;
    REQUIRE(std::filesystem::is_directory(train_last));
    auto rj = nlohmann::json::parse(testutil::slurp(train_last + "/report.json"));
    CHECK(rj.at("in_dist").get<double>() >= 0.0);
    CHECK(rj.at("in_dist").get<double>() <= 1.0);
    CHECK(rj.at("out_of_dist").get<double>() >= 0.0);
    CHECK(rj.at("out_of_dist").get<double>() <= 1.0);
    CHECK(rj.at("trees").is_array());
}

TEST_CASE("search resume guard rejects a changed configuration") {
    const auto dir = testutil::scratch_dir("cli_resume_guard");
    const auto cfg = tiny_cfg_file(dir);
    REQUIRE(run("gen --config " + cfg + " --seed 7 --out " + dir + "/d.agpd", "rg_gen").code ==
            0);
    auto s = run("search --config " + cfg + " --data " + dir + "/d.agpd --out " + dir +
                     "/runs --seed 7",
                 "rg_search");
    REQUIRE(s.code == 0);
    std::string run_dir = s.out;
    while (!run_dir.empty() && (run_dir.back() == '\n' || run_dir.back() == '\r'))
        run_dir.pop_back();

    // same config: resume accepted (already complete, so it finishes quickly)
    CHECK(run("search --config " + cfg + " --data " + dir + "/d.agpd --seed 7 --resume " +
                  run_dir,
              "rg_ok")
              .code == 0);

    // different search length: rejected as a configuration error
    auto bad = run("search --config " + cfg + " --set search.epochs=3 --data " + dir +
                       "/d.agpd --seed 7 --resume " + run_dir,
                   "rg_bad");
    CHECK(bad.code == 2);
    CHECK(testutil::slurp("cli_err_rg_bad.txt").find("different configuration") !=
          std::string::npos);
}
