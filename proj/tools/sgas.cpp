#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "sgas/checkpoint.hpp"
#include "sgas/editing.hpp"
#include "sgas/metrics.hpp"
#include "sgas/pipeline.hpp"
#include "sgas/ply.hpp"
#include "sgas/server.hpp"

namespace fs = std::filesystem;
using namespace sgas;

namespace {

fs::path run_root() {
  const char* env = std::getenv("SGAS_RUN_ROOT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

EditMask parse_mask(const std::string& text, int n) {
  require(static_cast<int>(text.size()) == n,
          "mask '" + text + "' must have " + std::to_string(n) + " characters of 0/1");
  EditMask m;
  for (char c : text) {
    require(c == '0' || c == '1', "mask '" + text + "' must contain only 0 and 1");
    m.push_back(c == '1');
  }
  return m;
}

void add_train_flags(CLI::App* cmd, TrainConfig& t) {
  cmd->add_option("--lr", t.lr);
  cmd->add_option("--adam-beta1", t.adam_beta1);
  cmd->add_option("--adam-beta2", t.adam_beta2);
  cmd->add_option("--epochs", t.epochs);
  cmd->add_option("--batch", t.batch);
  cmd->add_option("--n-critic", t.n_critic);
  cmd->add_option("--lambda-gp", t.lambda_gp);
  cmd->add_option("--alpha", t.alpha);
  cmd->add_option("--beta", t.beta);
  cmd->add_option("--tau", t.tau);
  cmd->add_option("--seed", t.seed);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Part-aware point cloud editing pipeline"};
  app.require_subcommand(1);

  // synth-data
  std::string out_dir;
  int count = 200;
  std::uint64_t seed = 1;
  double gamma = 0.0;
  auto* synth = app.add_subcommand("synth-data", "Generate the procedural labeled chair dataset");
  synth->add_option("--out", out_dir, "Dataset directory")->required();
  synth->add_option("--count", count);
  synth->add_option("--seed", seed);
  synth->add_option("--gamma", gamma);

  // segment
  std::string data_dir, method = "labels";
  auto* segment = app.add_subcommand("segment", "Split shapes into fixed-size parts");
  segment->add_option("--data", data_dir, "Labeled dataset directory")->required();
  segment->add_option("--out", out_dir, "Part dataset directory")->required();
  segment->add_option("--method", method)->check(CLI::IsMember({"labels", "cosegment"}));
  segment->add_option("--gamma", gamma);
  segment->add_option("--seed", seed);

  // pretrain
  std::string parts_dir, ckpt_path, out_path;
  CodecConfig codec;
  PretrainConfig pre;
  auto* pretrain = app.add_subcommand("pretrain", "Train one part autoencoder per slot");
  pretrain->add_option("--parts", parts_dir)->required();
  pretrain->add_option("--out", out_path, "Checkpoint to write")->required();
  pretrain->add_option("--epochs", pre.epochs);
  pretrain->add_option("--batch", pre.batch);
  pretrain->add_option("--lr", pre.lr);
  pretrain->add_option("--seed", pre.seed);

  // train
  TrainConfig tc;
  GanConfig gc;
  bool pruned = false;
  std::string log_path;
  auto* train = app.add_subcommand("train", "Train the conditional generator and critics");
  train->add_option("--ckpt", ckpt_path, "Codec checkpoint")->required();
  train->add_option("--parts", parts_dir)->required();
  train->add_option("--out", out_path)->required();
  train->add_option("--log", log_path, "Per-epoch JSON lines");
  train->add_flag("--pruned", pruned, "Unconditional part-aware generation");
  add_train_flags(train, tc);

  // edit
  std::string shape_path, mask_text;
  int k = 5;
  EditOptions opts;
  bool decode_all = false, literal_select = false;
  auto* editc = app.add_subcommand("edit", "Regenerate the masked parts of a shape");
  editc->add_option("--ckpt", ckpt_path)->required();
  editc->add_option("--shape", shape_path, "Labeled PLY")->required();
  editc->add_option("--mask", mask_text, "One 0/1 per slot, 1 = regenerate")->required();
  editc->add_option("-k", k);
  editc->add_option("--seed", seed);
  editc->add_option("--tau", opts.tau);
  editc->add_flag("--decode-all", decode_all);
  editc->add_flag("--literal-select", literal_select);
  editc->add_option("--out", out_dir)->required();

  // generate
  auto* gen = app.add_subcommand("generate", "Sample shapes from a pruned checkpoint");
  gen->add_option("--ckpt", ckpt_path)->required();
  gen->add_option("-k", k);
  gen->add_option("--seed", seed);
  gen->add_option("--out", out_dir)->required();

  // eval
  bool with_tmds = false;
  EvalConfig ec;
  auto* eval = app.add_subcommand("eval", "Evaluation report for a checkpoint");
  eval->add_option("--ckpt", ckpt_path)->required();
  eval->add_option("--parts", parts_dir)->required();
  eval->add_option("--out", out_dir);
  eval->add_flag("--tmds", with_tmds, "Also compute the TMDS surfaces");
  eval->add_option("--partials", ec.partials);
  eval->add_option("-k", ec.k);
  eval->add_option("--generated", ec.generated);
  eval->add_option("--seed", ec.seed);

  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* servec = app.add_subcommand("serve", "HTTP editing API");
  servec->add_option("--ckpt", ckpt_path)->required();
  servec->add_option("--data", data_dir, "Labeled dataset to browse");
  servec->add_option("--host", host);
  servec->add_option("--port", port);
  servec->add_option("--tau", opts.tau);

  // run
  std::string config_path;
  auto* run = app.add_subcommand("run", "Run every stage from a JSON config");
  run->add_option("--config", config_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*synth) {
      CategorySpec spec = default_chair_spec();
      spec.gamma = gamma;
      save_dataset(out_dir, spec, synth_dataset(spec, count, seed));
    } else if (*segment) {
      Dataset d = load_dataset(data_dir);
      d.spec.gamma = gamma;
      const auto sets = segment_shapes(d.shapes, d.spec,
                                       method == "labels" ? SegmentMethod::kLabels : SegmentMethod::kCosegment, seed);
      save_part_sets(out_dir, d.spec, sets);
    } else if (*pretrain) {
      CategorySpec spec;
      const auto sets = load_part_sets(parts_dir, &spec);
      codec.points_per_part = spec.points_per_part();
      std::vector<PretrainReport> reports;
      save_checkpoint(pretrain_checkpoint(sets, spec, codec, pre, &reports), out_path);
      for (std::size_t i = 0; i < reports.size(); ++i)
        std::cout << "codec " << i << " loss " << reports[i].epoch_loss.front() << " -> "
                  << reports[i].epoch_loss.back() << "\n";
    } else if (*train) {
      gc.pruned = pruned;
      const auto sets = load_part_sets(parts_dir);
      Checkpoint c = load_checkpoint(ckpt_path);
      gc.n = c.spec.n;
      gc.latent_dim = c.codec_config.latent_dim;
      std::ofstream log_file;
      if (!log_path.empty()) log_file.open(log_path);
      save_checkpoint(train_checkpoint(std::move(c), sets, gc, tc, log_file.is_open() ? &log_file : &std::cout),
                      out_path);
    } else if (*editc) {
      const Checkpoint c = load_checkpoint(ckpt_path);
      const PointCloud cloud = read_ply(shape_path).cloud;
      require(cloud.has_labels(), "edit needs a shape with part labels");
      opts.mode = decode_all ? AssemblyMode::kDecodeAll : AssemblyMode::kPassthrough;
      opts.rule = literal_select ? PartSelectRule::kLiteralAverage : PartSelectRule::kPerSlot;
      const PartSet shape = split_by_labels(cloud, c.spec, 0);
      const auto results = edit(c, shape, parse_mask(mask_text, c.spec.n), k, seed, opts);
      for (std::size_t j = 0; j < results.size(); ++j) {
        const fs::path p = fs::path(out_dir) / ("edit_" + std::to_string(j) + ".ply");
        write_result(results[j], p);
        std::cout << p.string() << "\n";
      }
    } else if (*gen) {
      const Checkpoint c = load_checkpoint(ckpt_path);
      const auto clouds = generate_unconditional(c, k, seed);
      for (std::size_t j = 0; j < clouds.size(); ++j)
        write_ply(fs::path(out_dir) / ("sample_" + std::to_string(j) + ".ply"), clouds[j]);
    } else if (*eval) {
      ec.tmds = with_tmds;
      const Checkpoint c = load_checkpoint(ckpt_path);
      MetricSurface ex, fa;
      const auto report = evaluate_checkpoint(c, load_part_sets(parts_dir), ec, &ex, &fa);
      std::cout << report.dump(2) << "\n";
      if (!out_dir.empty()) {
        write_file(fs::path(out_dir) / "report.json", report.dump(2) + "\n");
        if (with_tmds && !c.pruned()) {
          write_file(fs::path(out_dir) / "tmds_exists.txt", surface_to_text(ex));
          write_file(fs::path(out_dir) / "tmds_forall.txt", surface_to_text(fa));
          write_surface_ppm(ex, fs::path(out_dir) / "tmds_exists.ppm");
          write_surface_ppm(fa, fs::path(out_dir) / "tmds_forall.ppm");
        }
      }
    } else if (*servec) {
      std::vector<PointCloud> shapes;
      if (!data_dir.empty()) shapes = load_dataset(data_dir).shapes;
      EditService service(load_checkpoint(ckpt_path), std::move(shapes), opts);
      std::cerr << "listening on " << host << ":" << port << "\n";
      serve(service, host, port);
    } else if (*run) {
      PipelineConfig cfg = load_pipeline_config(config_path);
      if (cfg.run_root.is_relative() && !nlohmann::json::parse(read_file(config_path)).contains("run_root"))
        cfg.run_root = run_root();
      const auto report = run_pipeline(cfg, &std::cerr);
      std::cout << report.report.string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
