#include "sgas/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include "sgas/metrics.hpp"
#include "sgas/ply.hpp"

namespace sgas {

namespace fs = std::filesystem;

void to_json(nlohmann::json& j, const EvalConfig& c) {
  j = {{"partials", c.partials}, {"k", c.k}, {"generated", c.generated}, {"seed", c.seed}, {"tmds", c.tmds}};
}

void from_json(const nlohmann::json& j, EvalConfig& c) {
  c.partials = j.value("partials", c.partials);
  c.k = j.value("k", c.k);
  c.generated = j.value("generated", c.generated);
  c.seed = j.value("seed", c.seed);
  c.tmds = j.value("tmds", c.tmds);
}

void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = {{"run_root", c.run_root.string()},
       {"spec", c.spec},
       {"synth_count", c.synth_count},
       {"synth_seed", c.synth_seed},
       {"segment", c.segment == SegmentMethod::kLabels ? "labels" : "cosegment"},
       {"segment_seed", c.segment_seed},
       {"codec", c.codec},
       {"pretrain", c.pretrain},
       {"gan", c.gan},
       {"train", c.train},
       {"eval", c.eval}};
  if (c.dataset) j["dataset"] = c.dataset->string();
}

void from_json(const nlohmann::json& j, PipelineConfig& c) {
  c.run_root = j.value("run_root", c.run_root.string());
  if (j.contains("dataset")) c.dataset = j.at("dataset").get<std::string>();
  if (j.contains("spec")) {
    nlohmann::json spec = c.spec;
    spec.merge_patch(j.at("spec"));
    c.spec = spec.get<CategorySpec>();
  }
  c.synth_count = j.value("synth_count", c.synth_count);
  c.synth_seed = j.value("synth_seed", c.synth_seed);
  const std::string seg = j.value("segment", std::string("labels"));
  require(seg == "labels" || seg == "cosegment", "segment must be 'labels' or 'cosegment'");
  c.segment = seg == "labels" ? SegmentMethod::kLabels : SegmentMethod::kCosegment;
  c.segment_seed = j.value("segment_seed", c.segment_seed);
  c.codec = j.value("codec", c.codec);
  c.pretrain = j.value("pretrain", c.pretrain);
  c.gan = j.value("gan", c.gan);
  c.train = j.value("train", c.train);
  c.eval = j.value("eval", c.eval);
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path)).get<PipelineConfig>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidInput, "bad pipeline config " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// stage bodies

std::vector<PartSet> segment_shapes(const std::vector<PointCloud>& shapes, const CategorySpec& spec,
                                    SegmentMethod method, std::uint64_t seed) {
  spec.validate();
  require(!shapes.empty(), "no shapes to segment");
  std::vector<PartSet> out;
  if (method == SegmentMethod::kLabels) {
    for (std::size_t s = 0; s < shapes.size(); ++s) out.push_back(split_by_labels(shapes[s], spec, seed + s));
    return out;
  }
  std::vector<PointCloud> prepared;
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    PointCloud c = normalize(PointCloud(shapes[s].points));
    if (c.size() > static_cast<std::size_t>(spec.points_per_shape))
      c = downsample(c, static_cast<std::size_t>(spec.points_per_shape), SampleStrategy::kFarthestPoint, seed + s);
    require(c.size() == static_cast<std::size_t>(spec.points_per_shape),
            "shape " + std::to_string(s) + " has fewer than P points");
    prepared.push_back(std::move(c));
  }
  const StructurePoints anchors = fit_structure_points(prepared, spec.n, seed);
  for (std::size_t s = 0; s < prepared.size(); ++s) out.push_back(cosegment(prepared[s], anchors, spec, seed + s));
  return out;
}

void save_part_sets(const fs::path& dir, const CategorySpec& spec, const std::vector<PartSet>& sets) {
  std::vector<PointCloud> clouds;
  for (const auto& s : sets) clouds.push_back(s.merged());
  save_dataset(dir, spec, clouds);
}

std::vector<PartSet> load_part_sets(const fs::path& dir, CategorySpec* spec) {
  const Dataset d = load_dataset(dir);
  if (spec) *spec = d.spec;
  std::vector<PartSet> out;
  for (const auto& c : d.shapes) {
    PartSet p = part_set_from_labeled(c, d.spec.n);
    p.validate(d.spec.n, d.spec.points_per_part());
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::vector<PointCloud>> part_datasets(const std::vector<PartSet>& sets, int n) {
  std::vector<std::vector<PointCloud>> out(static_cast<std::size_t>(n));
  for (const auto& s : sets)
    for (int i = 0; i < n; ++i)
      if (s.present(i)) out[static_cast<std::size_t>(i)].push_back(s.part(i));
  return out;
}

Checkpoint pretrain_checkpoint(const std::vector<PartSet>& sets, const CategorySpec& spec,
                               const CodecConfig& codec, const PretrainConfig& config,
                               std::vector<PretrainReport>* reports) {
  require(codec.points_per_part == spec.points_per_part(),
          "codec points_per_part must equal the category's per-part count " +
              std::to_string(spec.points_per_part()));
  Checkpoint c;
  c.spec = spec;
  c.codec_config = codec;
  c.codecs = pretrain_codecs(part_datasets(sets, spec.n), codec, config, reports);
  return c;
}

Checkpoint train_checkpoint(Checkpoint ckpt, const std::vector<PartSet>& sets, const GanConfig& gan,
                            const TrainConfig& config, std::ostream* log) {
  require(gan.n == ckpt.spec.n, "GAN arity must equal the category's n");
  require(gan.latent_dim == ckpt.codec_config.latent_dim, "GAN latent size must match the codecs");
  TrainResult r = train_gan(sets, ckpt.codecs, gan, config, log);
  ckpt.gan = std::move(r.params);
  ckpt.train_config = config;
  ckpt.training_seed = config.seed;
  return ckpt;
}

nlohmann::json evaluate_checkpoint(const Checkpoint& ckpt, const std::vector<PartSet>& test_sets,
                                   const EvalConfig& config, MetricSurface* exists_surface,
                                   MetricSurface* forall_surface) {
  require(!test_sets.empty(), "evaluation needs shapes");
  std::vector<PointCloud> reference;
  for (const auto& s : test_sets) reference.push_back(s.merged());
  nlohmann::json report;
  report["pruned"] = ckpt.pruned();

  if (ckpt.pruned()) {
    const auto gen = generate_unconditional(ckpt, config.generated, config.seed);
    report["generated"] = gen.size();
    report["mmd_cd"] = set_mmd(gen, reference);
    report["cov_cd"] = coverage(gen, reference);
    report["jsd"] = jsd(gen, reference);
    return report;
  }

  std::vector<PointCloud> partials;
  for (std::size_t s = 0; s < test_sets.size() && static_cast<int>(partials.size()) < config.partials; ++s) {
    if (test_sets[s].present_count() < 2) continue;
    partials.push_back(random_part_dropout(test_sets[s], derive_seed(config.seed, s)).unedited.merged());
  }
  require(!partials.empty(), "no evaluation shape has two parts");
  const int n = ckpt.spec.n;
  const EditFn fn = [&ckpt, n](const PointCloud& partial, int k, std::uint64_t seed) {
    const PartSet shape = part_set_from_labeled(partial, n);
    EditMask mask(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) mask[static_cast<std::size_t>(i)] = !shape.present(i);
    std::vector<PointCloud> clouds;
    for (auto& r : edit(ckpt, shape, mask, k, seed)) clouds.push_back(std::move(r.cloud));
    return clouds;
  };
  const auto stats = tmds_stats(fn, partials, reference, config.k, config.seed);
  double tmd_sum = 0.0, mmd_sum = 0.0, uhd_max = 0.0;
  std::size_t count = 0;
  for (const auto& st : stats) {
    tmd_sum += st.tmd;
    for (std::size_t i = 0; i < st.mmd.size(); ++i, ++count) {
      mmd_sum += st.mmd[i];
      uhd_max = std::max(uhd_max, st.uhd[i]);
    }
  }
  report["partials"] = partials.size();
  report["k"] = config.k;
  report["tmd_mean"] = tmd_sum / static_cast<double>(stats.size());
  report["shape_mmd_mean"] = mmd_sum / static_cast<double>(count);
  report["uhd_max"] = uhd_max;
  if (config.tmds) {
    const auto ex = tmds_surface(stats, default_uhd_grid(), default_mmd_grid(), TmdsMode::kExists);
    const auto fa = tmds_surface(stats, default_uhd_grid(), default_mmd_grid(), TmdsMode::kForall);
    report["tmds_exists_max"] = ex.values.maxCoeff();
    report["tmds_forall_max"] = fa.values.maxCoeff();
    if (exists_surface) *exists_surface = ex;
    if (forall_surface) *forall_surface = fa;
  }
  return report;
}

// ---------------------------------------------------------------------------
// staged runner

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {

std::string dataset_fingerprint(const PipelineConfig& c) {
  if (!c.dataset) return "synth";
  if (!fs::is_directory(*c.dataset))
    fail(ErrorCode::kIo, "[segment] dataset directory " + c.dataset->string() + " does not exist");
  // Content of every file in the dataset directory, in name order.
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(*c.dataset))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::uint64_t h = fnv1a("dataset");
  for (const auto& f : files) h = fnv1a(f.filename().string() + read_file(f), h);
  return hex64(h);
}

class Stage {
 public:
  Stage(const PipelineConfig& cfg, std::string name, const nlohmann::json& params, const std::string& upstream)
      : name_(std::move(name)) {
    hash_ = hex64(fnv1a(params.dump() + "|" + upstream));
    dir_ = cfg.run_root / (name_ + "-" + hash_);
  }
  const std::string& hash() const { return hash_; }
  const fs::path& dir() const { return dir_; }
  bool done() const { return fs::exists(dir_ / "done"); }

  template <typename Body>
  StageStatus run(Body&& body, std::ostream* log) {
    StageStatus st{name_, hash_, dir_, done()};
    if (st.skipped) {
      if (log) *log << "[" << name_ << "] up to date (" << hash_ << ")\n";
      return st;
    }
    if (log) *log << "[" << name_ << "] running in " << dir_.string() << "\n";
    try {
      fs::remove_all(dir_);
      fs::create_directories(dir_);
      body(dir_);
      write_file(dir_ / "done", hash_ + "\n");
    } catch (const TrainingError& e) {
      throw TrainingError(e.step(), e.snapshot(), "[" + name_ + "] " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), "[" + name_ + "] " + e.what());
    } catch (const fs::filesystem_error& e) {
      throw Error(ErrorCode::kIo, "[" + name_ + "] " + e.what());
    }
    return st;
  }

 private:
  std::string name_, hash_;
  fs::path dir_;
};

}  // namespace

PipelineReport run_pipeline(const PipelineConfig& config, std::ostream* log) {
  PipelineReport report;
  nlohmann::json seg_params = {{"dataset", dataset_fingerprint(config)},
                               {"spec", config.spec},
                               {"segment", config.segment == SegmentMethod::kLabels ? "labels" : "cosegment"},
                               {"segment_seed", config.segment_seed}};
  if (!config.dataset) seg_params["synth"] = {{"count", config.synth_count}, {"seed", config.synth_seed}};
  Stage segment(config, "segment", seg_params, "");
  report.stages.push_back(segment.run([&](const fs::path& dir) {
    std::vector<PointCloud> shapes;
    CategorySpec spec = config.spec;
    if (config.dataset) {
      Dataset d = load_dataset(*config.dataset);
      shapes = std::move(d.shapes);
      spec = d.spec;
      spec.gamma = config.spec.gamma;
    } else {
      shapes = synth_dataset(spec, config.synth_count, config.synth_seed);
    }
    save_part_sets(dir / "parts", spec, segment_shapes(shapes, spec, config.segment, config.segment_seed));
  }, log));

  Stage pretrain(config, "pretrain", {{"codec", config.codec}, {"pretrain", config.pretrain}}, segment.hash());
  report.stages.push_back(pretrain.run([&](const fs::path& dir) {
    CategorySpec spec;
    const auto sets = load_part_sets(segment.dir() / "parts", &spec);
    CodecConfig codec = config.codec;
    codec.points_per_part = spec.points_per_part();
    std::vector<PretrainReport> reports;
    save_checkpoint(pretrain_checkpoint(sets, spec, codec, config.pretrain, &reports), dir / "codecs.ckpt");
    nlohmann::json losses = nlohmann::json::array();
    for (const auto& r : reports) losses.push_back(r.epoch_loss);
    write_file(dir / "pretrain_loss.json", losses.dump() + "\n");
  }, log));

  Stage train(config, "train", {{"gan", config.gan}, {"train", config.train}}, pretrain.hash());
  report.stages.push_back(train.run([&](const fs::path& dir) {
    const auto sets = load_part_sets(segment.dir() / "parts");
    std::ofstream train_log(dir / "train_log.jsonl");
    Checkpoint codecs = load_checkpoint(pretrain.dir() / "codecs.ckpt");
    GanConfig gan = config.gan;
    gan.n = codecs.spec.n;
    gan.latent_dim = codecs.codec_config.latent_dim;
    save_checkpoint(train_checkpoint(std::move(codecs), sets, gan, config.train, &train_log),
                    dir / "model.ckpt");
  }, log));

  Stage evaluate(config, "evaluate", {{"eval", config.eval}}, train.hash());
  report.stages.push_back(evaluate.run([&](const fs::path& dir) {
    const auto sets = load_part_sets(segment.dir() / "parts");
    MetricSurface ex, fa;
    const auto result = evaluate_checkpoint(load_checkpoint(train.dir() / "model.ckpt"), sets, config.eval, &ex, &fa);
    write_file(dir / "report.json", result.dump(2) + "\n");
    if (result.contains("tmds_exists_max")) {
      write_file(dir / "tmds_exists.txt", surface_to_text(ex));
      write_file(dir / "tmds_forall.txt", surface_to_text(fa));
      write_surface_ppm(ex, dir / "tmds_exists.ppm");
    }
  }, log));
  report.report = evaluate.dir() / "report.json";
  return report;
}

}  // namespace sgas
