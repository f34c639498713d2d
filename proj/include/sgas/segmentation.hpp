#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgas/error.hpp"
#include "sgas/geometry.hpp"

namespace sgas {

/// Per-category constants. Each part is stored with
/// floor((1 + gamma) * floor(points_per_shape / n)) points.
struct CategorySpec {
  std::string name = "chair";
  int n = 4;
  int points_per_shape = 512;
  double gamma = 0.0;
  std::vector<std::string> part_names = {"back", "seat", "legs", "arms"};

  int base_points_per_part() const { return points_per_shape / n; }
  int points_per_part() const;
  void validate() const;

  friend bool operator==(const CategorySpec&, const CategorySpec&) = default;
};

void to_json(nlohmann::json& j, const CategorySpec& spec);
void from_json(const nlohmann::json& j, CategorySpec& spec);

/// Length-n regenerate flags: true = generate this slot, false = keep input.
using EditMask = std::vector<bool>;

/// Fixed-arity array of optional parts.
struct PartSet {
  std::vector<std::optional<PointCloud>> parts;

  PartSet() = default;
  explicit PartSet(int n) : parts(static_cast<std::size_t>(n)) {}

  int n() const { return static_cast<int>(parts.size()); }
  bool present(int i) const { return parts[static_cast<std::size_t>(i)].has_value(); }
  int present_count() const;
  const PointCloud& part(int i) const;

  /// Union of present parts, labeled by slot index.
  PointCloud merged() const;

  /// Checks arity, that at least one part is present and that every present
  /// part has `points_per_part` points (skipped when negative).
  void validate(int n, int points_per_part) const;

  friend bool operator==(const PartSet&, const PartSet&) = default;
};

/// Rebuilds a PartSet from a labeled cloud without resampling.
PartSet part_set_from_labeled(const PointCloud& cloud, int n);

struct StructurePoints {
  std::vector<Vec3> anchors;
};

/// Points grouped by label, no resampling; label -1 is dropped.
std::vector<PointCloud> partition_by_labels(const PointCloud& cloud, int n);

PartSet split_by_labels(const PointCloud& cloud, const CategorySpec& spec,
                        std::uint64_t seed = 0);

/// Seeded k-means (k-means++ seeding, several restarts) on the pooled points.
StructurePoints fit_structure_points(const std::vector<PointCloud>& dataset, int n,
                                     std::uint64_t seed);

/// Nearest-anchor assignment, lowest slot index on ties.
std::vector<int> nearest_anchor_labels(const PointCloud& cloud, const StructurePoints& anchors);

PartSet cosegment(const PointCloud& cloud, const StructurePoints& anchors,
                  const CategorySpec& spec, std::uint64_t seed = 0);

struct DropoutResult {
  PartSet unedited;
  EditMask mask;
};

template <typename Rng>
DropoutResult random_part_dropout(const PartSet& full, Rng& rng);

DropoutResult random_part_dropout(const PartSet& full, std::uint64_t seed);

/// Procedural chairs (back, seat, legs, optional arms) built from sampled
/// cuboid surfaces. Requires spec.n == 4.
std::vector<PointCloud> synth_dataset(const CategorySpec& spec, int count, std::uint64_t seed);

CategorySpec default_chair_spec();

/// One PLY per shape (`shape_00000.ply`, ...) plus `spec.json`.
void save_dataset(const std::filesystem::path& dir, const CategorySpec& spec,
                  const std::vector<PointCloud>& shapes);

struct Dataset {
  CategorySpec spec;
  std::vector<PointCloud> shapes;
};

Dataset load_dataset(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------

template <typename Rng>
DropoutResult random_part_dropout(const PartSet& full, Rng& rng) {
  std::vector<int> present;
  for (int i = 0; i < full.n(); ++i)
    if (full.present(i)) present.push_back(i);
  require(present.size() >= 2, "random_part_dropout needs at least two present parts");

  std::uniform_int_distribution<int> count(1, static_cast<int>(present.size()) - 1);
  const int k = count(rng);
  // Partial Fisher-Yates: the first k entries become the dropped parts.
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, static_cast<int>(present.size()) - 1);
    std::swap(present[static_cast<std::size_t>(i)],
              present[static_cast<std::size_t>(pick(rng))]);
  }
  DropoutResult out{full, EditMask(static_cast<std::size_t>(full.n()), false)};
  for (int i = 0; i < full.n(); ++i)
    if (!full.present(i)) out.mask[static_cast<std::size_t>(i)] = true;
  for (int i = 0; i < k; ++i) {
    const auto slot = static_cast<std::size_t>(present[static_cast<std::size_t>(i)]);
    out.mask[slot] = true;
    out.unedited.parts[slot].reset();
  }
  return out;
}

}  // namespace sgas
