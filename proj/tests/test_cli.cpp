#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

#include "sgas/checkpoint.hpp"
#include "sgas/ply.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "sgas_cli";

int run(const std::string& args) {
  const std::string cmd = std::string(SGAS_CLI_PATH) + " " + args + " > " + (kWork / "out.txt").string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string w(const std::string& name) { return (kWork / name).string(); }

}  // namespace

TEST_CASE("end to end through the command line") {
  fs::remove_all(kWork);
  fs::create_directories(kWork);

  REQUIRE(run("synth-data --out " + w("data") + " --count 6 --seed 2") == 0);
  CHECK(fs::exists(kWork / "data" / "spec.json"));
  REQUIRE(run("segment --data " + w("data") + " --out " + w("parts")) == 0);
  REQUIRE(run("pretrain --parts " + w("parts") + " --out " + w("codecs.ckpt") + " --epochs 1 --batch 3") == 0);
  REQUIRE(run("train --ckpt " + w("codecs.ckpt") + " --parts " + w("parts") + " --out " + w("model.ckpt") +
              " --epochs 1 --batch 3 --log " + w("log.jsonl")) == 0);
  CHECK(!sgas::read_file(kWork / "log.jsonl").empty());

  fs::create_directories(kWork / "edits");
  const std::string shape = w("data/shape_00000.ply");
  REQUIRE(run("edit --ckpt " + w("model.ckpt") + " --shape " + shape + " --mask 1001 -k 2 --out " + w("edits")) == 0);
  CHECK(fs::exists(kWork / "edits" / "edit_1.ply"));
  CHECK(fs::exists(kWork / "edits" / "edit_1.json"));

  fs::create_directories(kWork / "eval");
  CHECK(run("eval --ckpt " + w("model.ckpt") + " --parts " + w("parts") + " --partials 1 -k 2 --tmds --out " +
            w("eval")) == 0);
  CHECK(fs::exists(kWork / "eval" / "tmds_forall.txt"));

  REQUIRE(run("train --ckpt " + w("codecs.ckpt") + " --parts " + w("parts") + " --out " + w("pruned.ckpt") +
              " --epochs 1 --batch 3 --pruned") == 0);
  fs::create_directories(kWork / "gen");
  CHECK(run("generate --ckpt " + w("pruned.ckpt") + " -k 2 --out " + w("gen")) == 0);
  CHECK(sgas::read_ply(kWork / "gen" / "sample_1.ply").cloud.size() == 512);

  SUBCASE("exit codes") {
    CHECK(run("") == 2);
    CHECK(run("edit --ckpt " + w("model.ckpt")) == 2);
    CHECK(run("edit --ckpt " + w("model.ckpt") + " --shape " + shape + " --mask 10 --out " + w("edits")) == 2);
    CHECK(run("edit --ckpt " + w("model.ckpt") + " --shape " + shape + " --mask 1x00 --out " + w("edits")) == 2);
    CHECK(run("edit --ckpt " + w("missing.ckpt") + " --shape " + shape + " --mask 1001 --out " + w("edits")) == 4);
    sgas::write_file(kWork / "junk.ckpt", "not a checkpoint");
    CHECK(run("edit --ckpt " + w("junk.ckpt") + " --shape " + shape + " --mask 1001 --out " + w("edits")) == 4);
    CHECK(run("train --ckpt " + w("codecs.ckpt") + " --parts " + w("parts") + " --out " + w("x.ckpt") +
              " --epochs 1 --n-critic 0") == 2);
    CHECK(run("train --ckpt " + w("codecs.ckpt") + " --parts " + w("parts") + " --out " + w("x.ckpt") +
              " --epochs 3 --batch 3 --lr 1e200") == 3);
    CHECK(run("segment --data " + w("nowhere") + " --out " + w("p2")) == 4);
  }

  SUBCASE("staged run from a config") {
    const std::string cfg = R"({"run_root": ")" + w("runs") +
                            R"(", "synth_count": 6, "spec": {"P": 256},
        "codec": {"encoder_widths": [16], "decoder_hidden": [32], "latent_dim": 8},
        "pretrain": {"epochs": 1, "batch": 3},
        "gan": {"condition_widths": [8], "generator_hidden": [16], "critic_hidden": [16]},
        "train": {"epochs": 1, "batch": 3}, "eval": {"partials": 1, "k": 2}})";
    sgas::write_file(kWork / "run.json", cfg);
    CHECK(run("run --config " + w("run.json")) == 0);
    CHECK(run("run --config " + w("run.json")) == 0);
    sgas::write_file(kWork / "bad.json", "{");
    CHECK(run("run --config " + w("bad.json")) == 2);
  }
}
