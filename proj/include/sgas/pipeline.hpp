#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgas/checkpoint.hpp"
#include "sgas/editing.hpp"
#include "sgas/metrics.hpp"

namespace sgas {

enum class SegmentMethod { kLabels, kCosegment };

struct EvalConfig {
  int partials = 3;
  int k = 5;
  int generated = 50;  // pruned mode: unconditional samples
  std::uint64_t seed = 11;
  bool tmds = true;
};

void to_json(nlohmann::json& j, const EvalConfig& c);
void from_json(const nlohmann::json& j, EvalConfig& c);

struct PipelineConfig {
  std::filesystem::path run_root = "runs";
  /// Labeled dataset directory; when unset a synthetic one is generated.
  std::optional<std::filesystem::path> dataset;
  CategorySpec spec;
  int synth_count = 200;
  std::uint64_t synth_seed = 1;
  SegmentMethod segment = SegmentMethod::kLabels;
  std::uint64_t segment_seed = 3;
  CodecConfig codec;
  PretrainConfig pretrain;
  GanConfig gan;  // n and latent_dim are taken from the codec stage
  TrainConfig train;
  EvalConfig eval;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Segments every shape into a full PartSet.
std::vector<PartSet> segment_shapes(const std::vector<PointCloud>& shapes, const CategorySpec& spec,
                                    SegmentMethod method, std::uint64_t seed);

/// Stores part sets as labeled clouds in the dataset layout and back.
void save_part_sets(const std::filesystem::path& dir, const CategorySpec& spec,
                    const std::vector<PartSet>& sets);
std::vector<PartSet> load_part_sets(const std::filesystem::path& dir, CategorySpec* spec = nullptr);

/// Per-slot part collections for codec pretraining.
std::vector<std::vector<PointCloud>> part_datasets(const std::vector<PartSet>& sets, int n);

/// Encodes and trains; returns a checkpoint holding the frozen codecs.
Checkpoint pretrain_checkpoint(const std::vector<PartSet>& sets, const CategorySpec& spec,
                               const CodecConfig& codec, const PretrainConfig& config,
                               std::vector<PretrainReport>* reports = nullptr);

/// Adds a trained GAN to a codec-only checkpoint.
Checkpoint train_checkpoint(Checkpoint ckpt, const std::vector<PartSet>& sets, const GanConfig& gan,
                            const TrainConfig& config, std::ostream* log = nullptr);

/// Evaluation report: editing metrics (TMD, MMD, UHD, TMDS) for conditional
/// checkpoints or MMD/COV/JSD for pruned ones.
nlohmann::json evaluate_checkpoint(const Checkpoint& ckpt, const std::vector<PartSet>& test_sets,
                                   const EvalConfig& config, MetricSurface* exists_surface = nullptr,
                                   MetricSurface* forall_surface = nullptr);

struct StageStatus {
  std::string name;
  std::string hash;
  std::filesystem::path dir;
  bool skipped = false;
};

struct PipelineReport {
  std::vector<StageStatus> stages;
  std::filesystem::path report;
};

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

/// segment -> pretrain -> train -> evaluate. Each stage writes into
/// run_root/<stage>-<hash>, where the hash covers the stage's own config
/// and its upstream hash, and is skipped when its `done` marker exists.
/// Stage failures are rethrown with the stage name prefixed.
PipelineReport run_pipeline(const PipelineConfig& config, std::ostream* log = nullptr);

}  // namespace sgas
