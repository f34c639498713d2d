#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "sgas/pipeline.hpp"
#include "sgas/ply.hpp"
#include "support.hpp"

using namespace sgas;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_config(const fs::path& root) {
  PipelineConfig c;
  c.run_root = root;
  c.spec.points_per_shape = 256;
  c.synth_count = 10;
  c.codec.encoder_widths = {16, 16};
  c.codec.decoder_hidden = {32};
  c.codec.latent_dim = 8;
  c.pretrain.epochs = 2;
  c.pretrain.batch = 5;
  c.gan.condition_widths = {8, 8};
  c.gan.condition_points_per_part = 8;
  c.gan.generator_hidden = {16};
  c.gan.critic_hidden = {16};
  c.train.epochs = 2;
  c.train.batch = 5;
  c.eval.partials = 2;
  c.eval.k = 2;
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("config json round trip") {
  auto c = small_config("runs-x");
  c.segment = SegmentMethod::kCosegment;
  c.dataset = "data";
  const auto back = nlohmann::json(c).get<PipelineConfig>();
  CHECK(nlohmann::json(back) == nlohmann::json(c));
  const auto partial = nlohmann::json::parse(R"({"train": {"epochs": 7}})").get<PipelineConfig>();
  CHECK(partial.train.epochs == 7);
  CHECK(partial.train.batch == TrainConfig{}.batch);
}

TEST_CASE("part sets round trip") {
  const auto dir = fresh_dir("sgas_parts");
  const auto spec = default_chair_spec();
  const auto shapes = synth_dataset(spec, 4, 2);
  const auto sets = segment_shapes(shapes, spec, SegmentMethod::kLabels, 0);
  save_part_sets(dir, spec, sets);
  CategorySpec loaded_spec;
  const auto back = load_part_sets(dir, &loaded_spec);
  CHECK(loaded_spec == spec);
  REQUIRE(back.size() == sets.size());
  for (std::size_t s = 0; s < sets.size(); ++s)
    for (int i = 0; i < spec.n; ++i) {
      CHECK(back[s].present(i) == sets[s].present(i));
      if (!sets[s].present(i)) continue;
      CHECK(back[s].part(i).size() == sets[s].part(i).size());
      for (std::size_t k = 0; k < back[s].part(i).size(); ++k)
        CHECK((back[s].part(i).points[k] - sets[s].part(i).points[k]).norm() < 1e-6);
    }
  const auto per_slot = part_datasets(sets, spec.n);
  CHECK(per_slot[0].size() == sets.size());
  fs::remove_all(dir);
}

TEST_CASE("cosegmented part sets") {
  const auto spec = default_chair_spec();
  const auto shapes = synth_dataset(spec, 6, 3);
  const auto sets = segment_shapes(shapes, spec, SegmentMethod::kCosegment, 1);
  REQUIRE(sets.size() == 6);
  for (const auto& s : sets) s.validate(spec.n, spec.points_per_part());
}

TEST_CASE("staged runs skip completed stages") {
  const auto root = fresh_dir("sgas_pipeline");
  auto cfg = small_config(root);
  std::ostringstream log;
  const auto first = run_pipeline(cfg, &log);
  REQUIRE(first.stages.size() == 4);
  for (const auto& s : first.stages) {
    CHECK_FALSE(s.skipped);
    CHECK(fs::exists(s.dir / "done"));
  }
  CHECK(fs::exists(first.stages[2].dir / "model.ckpt"));
  CHECK(fs::exists(first.stages[2].dir / "train_log.jsonl"));
  const auto report = nlohmann::json::parse(read_file(first.report));
  CHECK(report.contains("tmd_mean"));
  CHECK(report.contains("tmds_exists_max"));
  CHECK(fs::exists(first.stages[3].dir / "tmds_exists.txt"));

  const auto second = run_pipeline(cfg);
  for (const auto& s : second.stages) CHECK(s.skipped);
  CHECK(read_file(second.report) == read_file(first.report));

  // a training change reruns train and evaluate only
  cfg.train.seed = 9;
  const auto third = run_pipeline(cfg);
  CHECK(third.stages[0].skipped);
  CHECK(third.stages[1].skipped);
  CHECK_FALSE(third.stages[2].skipped);
  CHECK_FALSE(third.stages[3].skipped);
  CHECK(third.stages[2].dir != first.stages[2].dir);

  // same config in a fresh root gives identical artifacts
  auto again = small_config(fresh_dir("sgas_pipeline_b"));
  const auto other = run_pipeline(again);
  CHECK(read_file(other.stages[2].dir / "model.ckpt") == read_file(first.stages[2].dir / "model.ckpt"));
  CHECK(read_file(other.report) == read_file(first.report));
  fs::remove_all(root);
  fs::remove_all(again.run_root);
}

TEST_CASE("stage failures name the stage") {
  const auto root = fresh_dir("sgas_pipeline_fail");
  auto cfg = small_config(root);
  cfg.train.n_critic = 0;
  try {
    run_pipeline(cfg);
    FAIL("pipeline succeeded with an invalid training config");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).rfind("[train]", 0) == 0);
  }
  cfg.dataset = root / "missing";
  CHECK_THROWS_AS(run_pipeline(cfg), Error);
  fs::remove_all(root);
}

TEST_CASE("pruned evaluation") {
  auto ckpt = testing::tiny_checkpoint(3, 16, 8, true);
  std::mt19937_64 rng(3);
  std::vector<PartSet> sets;
  for (int s = 0; s < 4; ++s) sets.push_back(testing::blob_parts(3, 16, rng));
  EvalConfig ec;
  ec.generated = 5;
  const auto report = evaluate_checkpoint(ckpt, sets, ec);
  CHECK(report["pruned"] == true);
  CHECK(report["cov_cd"].get<double>() > 0.0);
  CHECK(report["jsd"].get<double>() >= 0.0);
}

TEST_CASE("hash helpers") {
  CHECK(hex64(fnv1a("")) == "cbf29ce484222325");
  CHECK(hex64(fnv1a("a")) == "af63dc4c8601ec8c");
}
