#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "graphssl/corpus.hpp"

// End-to-end checks against the installed binary. The test runner passes the
// executable location through GRAPHSSL_CLI_PATH.

namespace {

struct CmdResult {
    int code = -1;
    std::string out;
};

CmdResult run_cli(const std::string& args) {
    const char* bin = std::getenv("GRAPHSSL_CLI_PATH");
    REQUIRE(bin != nullptr);
    const std::string cmd = "\"" + std::string(bin) + "\" " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CmdResult r;
    char buf[4096];
    while (std::fgets(buf, sizeof(buf), pipe) != nullptr) r.out += buf;
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string temp_dir(const std::string& name) {
    const std::string d = (std::filesystem::temp_directory_path() / name).string();
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("help and usage errors") {
    REQUIRE(run_cli("--help").code == 0);
    const CmdResult none = run_cli("");
    REQUIRE(none.code == 1);
    const CmdResult unknown = run_cli("ingest --no-such-flag 1");
    REQUIRE(unknown.code == 1);
    const CmdResult badsub = run_cli("frobnicate");
    REQUIRE(badsub.code == 1);
}

TEST_CASE("synth then ingest round-trips through the filesystem") {
    const std::string dir = temp_dir("gssl_cli_synth");
    const std::string corpus = dir + "/c.jsonl";
    const CmdResult synth = run_cli(
        "synth --out " + corpus +
        " --n-labeled 12 --n-unlabeled 4 --vocab-size 40 --avg-posts 4 --seed 3 --d-x 8");
    REQUIRE(synth.code == 0);
    const auto sj = nlohmann::json::parse(synth.out);
    REQUIRE(sj["corpus"] == corpus);
    REQUIRE(sj["summary"]["claims"] == 16);
    REQUIRE(std::filesystem::exists(corpus));

    const CmdResult ingest = run_cli("ingest --corpus " + corpus + " --d-x 8");
    REQUIRE(ingest.code == 0);
    const auto ij = nlohmann::json::parse(ingest.out);
    REQUIRE(ij["hash"] == graphssl::corpus_hash(corpus));
    REQUIRE(ij["summary"]["unlabeled"] == 4);
    std::filesystem::remove_all(dir);
}

TEST_CASE("validation failures exit with code one") {
    const CmdResult missing = run_cli("ingest --corpus /nonexistent/x.jsonl");
    REQUIRE(missing.code == 1);
    REQUIRE(missing.out.find("error:") != std::string::npos);

    const CmdResult nocorpus = run_cli("pretrain");
    REQUIRE(nocorpus.code == 1);
    REQUIRE(nocorpus.out.find("corpus") != std::string::npos);

    const std::string dir = temp_dir("gssl_cli_cfg");
    const std::string cfg = dir + "/bad.json";
    graphssl::write_file(cfg, R"({"no_such_key": 1})");
    const CmdResult badkey = run_cli("ingest --config " + cfg);
    REQUIRE(badkey.code == 1);
    REQUIRE(badkey.out.find("no_such_key") != std::string::npos);

    graphssl::write_file(cfg, R"({"aug_ratio": 2.0})");
    const CmdResult badval = run_cli("ingest --config " + cfg);
    REQUIRE(badval.code == 1);
    REQUIRE(badval.out.find("aug_ratio") != std::string::npos);

    const CmdResult nock = run_cli("eval --corpus " + cfg);
    REQUIRE(nock.code == 1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("contract violations exit with code two") {
    const std::string dir = temp_dir("gssl_cli_contract");
    const std::string corpus = dir + "/c.jsonl";
    REQUIRE(run_cli("synth --out " + corpus +
                    " --n-labeled 16 --n-unlabeled 0 --vocab-size 40 --avg-posts 4 --seed 5 "
                    "--d-x 8")
                .code == 0);
    // full semi-supervised mode requires an unlabeled pool
    const CmdResult semi = run_cli(
        "semi --corpus " + corpus + " --out-dir " + dir +
        " --method graphmae --d-x 8 --d-h 4 --epochs-finetune 1 --n-splits 1 --batch-size 8 "
        "--labeled-per-batch 4");
    REQUIRE(semi.code == 2);
    REQUIRE(semi.out.find("internal error:") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("gradcheck audits every construction") {
    const CmdResult r = run_cli("gradcheck --trials 2 --eps 1e-6 --tolerance 1e-4");
    REQUIRE(r.code == 0);
    for (const char* name : {"supervised_ce", "infograph_mi", "infograph_consistency",
                             "infograph_semi", "joao_minmax", "graphmae_sce", "graphmae_semi"}) {
        REQUIRE(r.out.find(name) != std::string::npos);
    }
    REQUIRE(r.out.find("FAIL") == std::string::npos);
}

TEST_CASE("pretrain writes a reloadable checkpoint") {
    const std::string dir = temp_dir("gssl_cli_pre");
    const std::string corpus = dir + "/c.jsonl";
    REQUIRE(run_cli("synth --out " + corpus +
                    " --n-labeled 8 --n-unlabeled 10 --vocab-size 40 --avg-posts 4 --seed 6 "
                    "--d-x 8")
                .code == 0);
    const CmdResult pre = run_cli("pretrain --corpus " + corpus + " --out-dir " + dir +
                                  " --method joao --d-x 8 --d-h 4 --d-p 4 --epochs-pretrain 1 "
                                  "--batch-size 6 --labeled-per-batch 3 --aug-ratio 0.3");
    REQUIRE(pre.code == 0);
    const auto pj = nlohmann::json::parse(pre.out);
    const std::string ckpt = pj["checkpoint"].get<std::string>();
    REQUIRE(std::filesystem::exists(ckpt));
    REQUIRE(std::filesystem::exists(dir + "/pretrain_log.jsonl"));
    REQUIRE(std::filesystem::exists(dir + "/policy_pretrain_epoch001.csv"));

    const CmdResult eval = run_cli("eval --corpus " + corpus + " --checkpoint " + ckpt + " --d-x 8");
    REQUIRE(eval.code == 0);
    const auto ej = nlohmann::json::parse(eval.out);
    REQUIRE(ej["metrics"].contains("accuracy"));
    std::filesystem::remove_all(dir);
}
