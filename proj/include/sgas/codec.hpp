#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "sgas/geometry.hpp"
#include "sgas/nn.hpp"

namespace sgas {

/// Part feature. The all-zeros code is reserved for an absent part.
using LatentCode = Vector;

bool is_absent_code(const LatentCode& code);

struct CodecConfig {
  std::vector<int> encoder_widths = {64, 128, 128};
  std::vector<int> decoder_hidden = {256, 512};
  int latent_dim = 128;
  int points_per_part = 128;

  friend bool operator==(const CodecConfig&, const CodecConfig&) = default;
};

void to_json(nlohmann::json& j, const CodecConfig& c);
void from_json(const nlohmann::json& j, CodecConfig& c);

struct PretrainConfig {
  int epochs = 60;
  int batch = 16;
  double lr = 1e-3;
  std::uint64_t seed = 7;
  /// After training, codes are rescaled so their mean absolute component
  /// over the training set equals this value (0 disables the rescale).
  double code_scale = 1.0;
};

void to_json(nlohmann::json& j, const PretrainConfig& c);
void from_json(const nlohmann::json& j, PretrainConfig& c);

/// Autoencoder for one semantic slot: max-pooled pointwise encoder and a
/// fully connected decoder to a fixed-size part.
class PartCodec {
 public:
  PartCodec() = default;
  PartCodec(const CodecConfig& config, int part_index, std::mt19937_64& rng);

  LatentCode encode(const std::optional<PointCloud>& part) const;
  /// One column per part; every part must be present.
  Matrix encode_batch(const std::vector<const PointCloud*>& parts,
                      PointNetEncoder::Cache* cache = nullptr) const;
  PointCloud decode(const LatentCode& code) const;

  int part_index() const { return part_index_; }
  int points_per_part() const { return points_per_part_; }
  int latent_dim() const { return encoder_.output_dim(); }
  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }

  PointNetEncoder& encoder() { return encoder_; }
  const PointNetEncoder& encoder() const { return encoder_; }
  Mlp& decoder() { return decoder_; }
  const Mlp& decoder() const { return decoder_; }

  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
  PartCodec zeros_like() const;

  /// Scales the latent space by `factor` without changing decode(encode(x))
  /// in exact arithmetic.
  void rescale_latent(double factor);

  static PartCodec from_parts(PointNetEncoder encoder, Mlp decoder, int part_index,
                              int points_per_part, bool frozen);

  friend bool operator==(const PartCodec&, const PartCodec&) = default;

 private:
  PointNetEncoder encoder_;
  Mlp decoder_;
  int part_index_ = 0;
  int points_per_part_ = 0;
  bool frozen_ = false;
};

using Assignment = std::vector<int>;

/// Mean over the batch of EMD(decode(encode(x)), x). When `fixed` is given
/// those matchings are used instead of solving for the optimal ones; the
/// matchings used are written to `used`. Gradients are accumulated into
/// `grads` when non-null.
double reconstruction_loss(const PartCodec& codec, const std::vector<const PointCloud*>& parts,
                           const std::vector<Assignment>* fixed, PartCodec* grads,
                           std::vector<Assignment>* used = nullptr);

struct PretrainReport {
  std::vector<double> epoch_loss;
};

/// Trains one codec per slot and returns them frozen.
std::vector<PartCodec> pretrain_codecs(const std::vector<std::vector<PointCloud>>& part_datasets,
                                       const CodecConfig& codec_config,
                                       const PretrainConfig& config,
                                       std::vector<PretrainReport>* reports = nullptr);

PartCodec pretrain_codec(const std::vector<PointCloud>& dataset, int part_index,
                         const CodecConfig& codec_config, const PretrainConfig& config,
                         PretrainReport* report = nullptr);

}  // namespace sgas
