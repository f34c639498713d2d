#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sgas/codec.hpp"
#include "sgas/gan.hpp"
#include "sgas/segmentation.hpp"

namespace sgas {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to edit or generate: the category, the frozen codecs
/// and, once trained, the adversarial networks.
struct Checkpoint {
  CategorySpec spec;
  CodecConfig codec_config;
  std::vector<PartCodec> codecs;
  std::optional<GanParameters> gan;
  TrainConfig train_config;
  std::uint64_t training_seed = 0;

  bool pruned() const { return gan && gan->config.pruned; }
  /// Throws kInvalidInput unless a trained GAN is present.
  const GanParameters& require_gan() const;
};

/// Layout: "SGASCKPT", u32 version, u32 header length, JSON header, then
/// every tensor as column-major little-endian float32 in header order.
std::string serialize_checkpoint(const Checkpoint& ckpt);

/// Errors: kCorruptFile (bad magic, bad header, truncated payload),
/// kVersionMismatch, kShapeMismatch (tensor list disagrees with the configs).
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sgas
