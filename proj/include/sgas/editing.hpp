#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sgas/checkpoint.hpp"

namespace sgas {

enum class Provenance { kGenerated, kPassthrough, kFiltered };
enum class AssemblyMode { kPassthrough, kDecodeAll };

/// kPerSlot filters generated slot i when mean_j |code_i[j]| <= tau.
/// kLiteralAverage averages the codes over all slots first and filters every
/// generated slot when the mean absolute value of that average is <= tau.
enum class PartSelectRule { kPerSlot, kLiteralAverage };

const char* to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct EditOptions {
  double tau = 0.5;
  PartSelectRule rule = PartSelectRule::kPerSlot;
  AssemblyMode mode = AssemblyMode::kPassthrough;
};

void to_json(nlohmann::json& j, const EditOptions& o);
void from_json(const nlohmann::json& j, EditOptions& o);

/// mean_j |code[j]|
double select_score(const LatentCode& code);

/// Kept flag per slot: passthrough slots (mask false) are always kept.
std::vector<bool> part_select(const std::vector<LatentCode>& codes, const EditMask& mask,
                              double tau, PartSelectRule rule = PartSelectRule::kPerSlot);

struct EditResult {
  PointCloud cloud;                 // labeled by slot
  PartSet parts;                    // emitted geometry per slot, absent when filtered
  std::vector<LatentCode> codes;    // after the Part Mask
  std::vector<Provenance> provenance;
  EditMask mask;
  PartSet source;                   // unedited input (mask-false slots only)
  Vector epsilon;                   // empty when not drawn from noise
  Vector z;
  std::uint64_t seed = 0;

  std::vector<int> kept_slots() const;
};

/// JSON sidecar: mask, kept slots, provenance, seed, epsilon and z.
nlohmann::json result_metadata(const EditResult& r);
/// PLY with a `provenance` comment line.
std::string result_ply(const EditResult& r);
void write_result(const EditResult& r, const std::filesystem::path& ply_path);

/// Union of the emitted parts reduced to `points_per_shape` by seeded
/// farthest-point sampling. Passthrough points are always retained, so the
/// output can exceed `points_per_shape` when they alone outnumber it.
PointCloud assemble_cloud(const PartSet& parts, const std::vector<Provenance>& provenance,
                          int points_per_shape, std::uint64_t seed);

EditResult assemble(const std::vector<LatentCode>& codes, const EditMask& mask,
                    const std::vector<bool>& kept, const PartSet& unedited,
                    const std::vector<PartCodec>& codecs, int points_per_shape,
                    AssemblyMode mode, std::uint64_t seed);

/// Drops the mask-true slots of `shape`; checks the mask against it.
PartSet unedited_for(const PartSet& shape, const EditMask& mask);

/// Per-result seed used by `edit` for its j-th result.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);
Vector draw_epsilon(std::uint64_t seed, int latent_dim);

/// Conditioned z for one unedited input (z = epsilon in pruned mode).
Vector noise_for(const Checkpoint& ckpt, const PartSet& unedited, const Vector& epsilon);

EditResult edit_from_z(const Checkpoint& ckpt, const PartSet& shape, const EditMask& mask,
                       const Vector& z, std::uint64_t seed, const EditOptions& options = {});

EditResult edit_with_epsilon(const Checkpoint& ckpt, const PartSet& shape, const EditMask& mask,
                             const Vector& epsilon, std::uint64_t seed,
                             const EditOptions& options = {});

/// One result from its own seed (epsilon and sampling both derive from it).
EditResult edit_one(const Checkpoint& ckpt, const PartSet& shape, const EditMask& mask,
                    std::uint64_t seed, const EditOptions& options = {});

/// k results; result j uses derive_seed(seed, j). `shape` may contain parts
/// at mask-true slots; they are removed before conditioning.
std::vector<EditResult> edit(const Checkpoint& ckpt, const PartSet& shape, const EditMask& mask,
                             int k, std::uint64_t seed, const EditOptions& options = {});

/// Edits `previous.parts` with `new_mask`.
std::vector<EditResult> reedit(const Checkpoint& ckpt, const EditResult& previous,
                               const EditMask& new_mask, int k, std::uint64_t seed,
                               const EditOptions& options = {});

/// z(a) = (1 - a) z_s + a z_t for `steps` values of a spaced evenly on [0, 1].
std::vector<EditResult> interpolate_edit(const Checkpoint& ckpt, const PartSet& shape,
                                         const EditMask& mask, const Vector& eps_s,
                                         const Vector& eps_t, int steps, std::uint64_t seed,
                                         const EditOptions& options = {});

/// Slot i of the output comes from the donor that lists it. The slot sets
/// must be disjoint, must name only slots the donor kept, and must together
/// cover every slot kept by any donor. Sampling uses the first donor's seed.
EditResult style_mix(const std::vector<std::pair<const EditResult*, std::vector<int>>>& donors,
                     int points_per_shape);

/// z ~ N(0, I); every branch decoded, no mask and no selection; exactly
/// points_per_shape points.
std::vector<PointCloud> generate_unconditional(const Checkpoint& ckpt, int k, std::uint64_t seed);

}  // namespace sgas
