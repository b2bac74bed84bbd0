// End-to-end tests driving the installed binary through a shell, checking
// exit codes (0 success, 1 usage, 2 validation, 3 divergence) and the
// file artifacts each subcommand leaves behind.

#include <cstdio>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "doctest.h"

#include "hashnet/dataset.hpp"
#include "hashnet/hash_codes.hpp"

#include "support/test_util.hpp"

namespace {

struct CliResult {
    int exit_code = -1;
    std::string output;  // stdout and stderr interleaved
};

CliResult run_cli(const std::string& args) {
    const std::string cmd = std::string(HASHNET_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult result;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) result.output.append(buf, n);
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

bool file_exists(const std::string& path) {
    return std::ifstream(path).good();
}

} // namespace

TEST_CASE("usage errors exit with code 1") {
    CHECK(run_cli("").exit_code == 1);
    CHECK(run_cli("warp-drive").exit_code == 1);
    CHECK(run_cli("train --no-such-flag").exit_code == 1);
    CHECK(run_cli("train").exit_code == 1);  // missing required options
    CHECK(run_cli("gen-synth 3 4").exit_code == 1);
}

TEST_CASE("help exits cleanly and lists the subcommands") {
    const CliResult r = run_cli("--help");
    CHECK(r.exit_code == 0);
    for (const char* name : {"train", "encode", "index-query", "eval", "cost-report",
                             "gen-synth", "inspect-checkpoint"}) {
        CHECK(r.output.find(name) != std::string::npos);
    }
}

TEST_CASE("gen-synth writes a loadable dataset") {
    testutil::TempDir dir;
    const std::string out = dir.file("data");
    const CliResult r = run_cli("gen-synth 3 4 32 --seed 7 --out " + out);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("wrote 12 images") != std::string::npos);

    const hashnet::DatasetManifest m = hashnet::load_manifest(out + "/manifest.csv");
    CHECK(m.records.size() == 12);
    CHECK(m.num_classes == 3);

    // Determinism across invocations: identical files.
    const std::string out2 = dir.file("data2");
    CHECK(run_cli("gen-synth 3 4 32 --seed 7 --out " + out2).exit_code == 0);
    CHECK(testutil::read_file(out + "/manifest.csv") ==
          testutil::read_file(out2 + "/manifest.csv"));
    CHECK(testutil::read_file(out + "/" + m.records[0].id + ".ppm") ==
          testutil::read_file(out2 + "/" + m.records[0].id + ".ppm"));

    CHECK(run_cli("gen-synth 1 4 32 --out " + dir.file("bad")).exit_code == 2);
}

TEST_CASE("cost-report prints the accounting and writes key-values") {
    testutil::TempDir dir;
    const std::string kv_path = dir.file("cost.kv");
    const CliResult r = run_cli("cost-report --preset toy --out " + kv_path);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("39917") != std::string::npos);
    CHECK(r.output.find("171408") != std::string::npos);
    CHECK(r.output.find("ratio") != std::string::npos);

    const std::string kv = testutil::read_file(kv_path);
    CHECK(kv.find("total_params 39917\n") != std::string::npos);

    // Config selection errors are validation errors.
    CHECK(run_cli("cost-report").exit_code == 2);
    CHECK(run_cli("cost-report --preset toy --config toy").exit_code == 2);
    CHECK(run_cli("cost-report --preset warp").exit_code == 2);
    CHECK(run_cli("cost-report --config /nonexistent.cfg").exit_code == 2);
}

TEST_CASE("cost-report accepts a config file path") {
    testutil::TempDir dir;
    const std::string cfg = dir.file("net.cfg");
    testutil::write_file(cfg,
                         "name mini\n"
                         "input 3 8 8\n"
                         "bits 0\n"
                         "classes 2\n"
                         "conv s2 4 3\n"
                         "avgpool\n"
                         "dense 2\n"
                         "softmax\n");
    const CliResult r = run_cli("cost-report --config " + cfg);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("mini") != std::string::npos);
}

TEST_CASE("train, inspect, encode, query and eval chain together") {
    testutil::TempDir dir;
    const std::string data = dir.file("data");
    REQUIRE(run_cli("gen-synth 2 4 32 --seed 3 --out " + data).exit_code == 0);
    const std::string manifest = data + "/manifest.csv";
    const std::string ckpt = dir.file("net.ckpt");

    const CliResult train = run_cli("train --preset toy --manifest " + manifest +
                                    " --out " + ckpt +
                                    " --max-iters 6 --batch 4 --seed 5");
    CHECK(train.exit_code == 0);
    CHECK(train.output.find("trained 6 iterations on 8 images") != std::string::npos);
    CHECK(file_exists(ckpt));
    CHECK(file_exists(ckpt + ".log"));
    const std::string log = testutil::read_file(ckpt + ".log");
    CHECK(log.find("# iter lr loss\n") == 0);
    CHECK(log.find("iter 5 ") != std::string::npos);

    const CliResult inspect = run_cli("inspect-checkpoint --checkpoint " + ckpt);
    CHECK(inspect.exit_code == 0);
    CHECK(inspect.output.find("training step 6") != std::string::npos);
    CHECK(inspect.output.find("hash bits 16") != std::string::npos);
    CHECK(inspect.output.find("classes 5") != std::string::npos);
    CHECK(inspect.output.find("parameters 39917") != std::string::npos);

    const std::string codes = dir.file("codes.txt");
    const CliResult encode = run_cli("encode --checkpoint " + ckpt + " --manifest " +
                                     manifest + " --out " + codes);
    CHECK(encode.exit_code == 0);
    CHECK(encode.output.find("encoded 8 images at 16 bits") != std::string::npos);

    const hashnet::CodeBook book = hashnet::load_codes_file(codes);
    CHECK(book.bits == 16);
    CHECK(book.codes.size() == 8);
    CHECK(book.label_names.size() == 2);

    const std::string qid = book.codes[0].image_id;
    const CliResult q = run_cli("index-query " + codes + " " + qid);
    CHECK(q.exit_code == 0);
    CHECK(q.output.find("query " + qid) == 0);
    std::size_t lines = 0;
    for (char ch : q.output) lines += (ch == '\n');
    CHECK(lines == 8);  // header + 7 candidates

    const CliResult q3 = run_cli("index-query " + codes + " " + qid + " --k 3");
    CHECK(q3.exit_code == 0);
    lines = 0;
    for (char ch : q3.output) lines += (ch == '\n');
    CHECK(lines == 4);

    const std::string per_query = dir.file("per_query.csv");
    const CliResult eval =
        run_cli("eval " + codes + " --k 5 --out " + per_query);
    CHECK(eval.exit_code == 0);
    CHECK(eval.output.find("map=") != std::string::npos);
    CHECK(eval.output.find("k=5") != std::string::npos);
    CHECK(eval.output.find("K=16") != std::string::npos);
    CHECK(eval.output.find("ap_norm=min_rk") != std::string::npos);
    const std::string csv = testutil::read_file(per_query);
    CHECK(csv.find("id,label,relevant,ap,excluded") == 0);
    lines = 0;
    for (char ch : csv) lines += (ch == '\n');
    CHECK(lines == 9);

    const CliResult eval_r = run_cli("eval " + codes + " --ap-norm r");
    CHECK(eval_r.exit_code == 0);
    CHECK(eval_r.output.find("ap_norm=r") != std::string::npos);
}

TEST_CASE("the bits flag overrides the latent width") {
    testutil::TempDir dir;
    const std::string data = dir.file("data");
    REQUIRE(run_cli("gen-synth 2 3 32 --seed 4 --out " + data).exit_code == 0);
    const std::string ckpt = dir.file("net8.ckpt");

    const CliResult train = run_cli("train --preset toy --manifest " + data +
                                    "/manifest.csv --out " + ckpt +
                                    " --max-iters 3 --batch 3 --bits 8");
    CHECK(train.exit_code == 0);
    const CliResult inspect = run_cli("inspect-checkpoint --checkpoint " + ckpt);
    CHECK(inspect.output.find("hash bits 8") != std::string::npos);

    const std::string codes = dir.file("codes8.txt");
    CHECK(run_cli("encode --checkpoint " + ckpt + " --manifest " + data +
                  "/manifest.csv --out " + codes)
              .exit_code == 0);
    CHECK(hashnet::load_codes_file(codes).bits == 8);
}

TEST_CASE("a diverging run exits with code 3") {
    testutil::TempDir dir;
    const std::string data = dir.file("data");
    REQUIRE(run_cli("gen-synth 2 3 32 --seed 6 --out " + data).exit_code == 0);
    const CliResult r = run_cli("train --preset toy --manifest " + data +
                                "/manifest.csv --out " + dir.file("x.ckpt") +
                                " --max-iters 5 --batch 3 --lr 1e40");
    CHECK(r.exit_code == 3);
    CHECK(r.output.find("error:") != std::string::npos);
}

TEST_CASE("validation failures exit with code 2") {
    testutil::TempDir dir;
    CHECK(run_cli("train --preset toy --manifest /nonexistent.csv --out " +
                  dir.file("x.ckpt"))
              .exit_code == 2);
    CHECK(run_cli("encode --checkpoint /nonexistent.ckpt --manifest m.csv --out o")
              .exit_code == 2);
    CHECK(run_cli("inspect-checkpoint --checkpoint /nonexistent.ckpt").exit_code == 2);
    CHECK(run_cli("eval /nonexistent-codes.txt").exit_code == 2);

    const std::string codes = dir.file("codes.txt");
    testutil::write_file(codes, "hashcodes 1\nbits 4\ncount 1\na 0 f\nb 0 f\n");
    CHECK(run_cli("eval " + codes).exit_code == 2);

    testutil::write_file(codes,
                         "hashcodes 1\nbits 4\ncount 2\na 0 f\nb 0 0\n");
    CHECK(run_cli("index-query " + codes + " missing-id").exit_code == 2);
    CHECK(run_cli("eval " + codes + " --ap-norm sideways").exit_code == 2);
}
