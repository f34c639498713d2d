#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sgas/geometry.hpp"
#include "sgas/nn.hpp"

namespace sgas {

enum class ShapeDistance { kChamfer, kEmdExact, kEmdApproximate };

double shape_distance(const PointCloud& a, const PointCloud& b, ShapeDistance dist);

/// sum_i 1/(k-1) sum_{j != i} CD(s_i, s_j)
double tmd(const std::vector<PointCloud>& samples);

/// Mean over reference shapes of the distance to the closest generated one.
double set_mmd(const std::vector<PointCloud>& generated, const std::vector<PointCloud>& reference,
               ShapeDistance dist = ShapeDistance::kChamfer);

/// Percentage of reference shapes that are the nearest reference of at least
/// one generated shape.
double coverage(const std::vector<PointCloud>& generated, const std::vector<PointCloud>& reference,
                ShapeDistance dist = ShapeDistance::kChamfer);

inline constexpr int kJsdResolution = 28;
inline constexpr double kJsdSmoothing = 1e-12;

/// Base-2 Jensen-Shannon divergence of two histograms after adding
/// kJsdSmoothing to every cell and renormalizing.
double jsd_histograms(const std::vector<double>& p, const std::vector<double>& q);

/// JSD between the pooled occupancy histograms of two shape sets.
double jsd(const std::vector<PointCloud>& generated, const std::vector<PointCloud>& reference,
           int resolution = kJsdResolution);

/// Distance to the closest reference shape.
double shape_mmd(const PointCloud& shape, const std::vector<PointCloud>& reference,
                 ShapeDistance dist = ShapeDistance::kChamfer);

enum class TmdsMode { kExists, kForall };

struct MetricSurface {
  std::vector<double> uhd_thresholds;
  std::vector<double> mmd_thresholds;
  Matrix values;  // rows follow uhd_thresholds, columns mmd_thresholds
};

/// What the surface needs from the k edits of one partial.
struct PartialStats {
  double tmd = 0.0;
  std::vector<double> uhd;  // UHD(partial, s_i)
  std::vector<double> mmd;  // shape_mmd(s_i, reference)
};

/// k edits of one partial input.
using EditFn = std::function<std::vector<PointCloud>(const PointCloud& partial, int k, std::uint64_t seed)>;

/// Runs edit_fn once per partial with a seed derived from `seed`.
std::vector<PartialStats> tmds_stats(const EditFn& edit_fn, const std::vector<PointCloud>& partials,
                                     const std::vector<PointCloud>& reference, int k, std::uint64_t seed);

MetricSurface tmds_surface(const std::vector<PartialStats>& stats, const std::vector<double>& uhd_grid,
                           const std::vector<double>& mmd_grid, TmdsMode mode);

MetricSurface tmds(const EditFn& edit_fn, const std::vector<PointCloud>& partials,
                   const std::vector<PointCloud>& reference, int k, const std::vector<double>& uhd_grid,
                   const std::vector<double>& mmd_grid, TmdsMode mode, std::uint64_t seed);

std::vector<double> default_uhd_grid();
std::vector<double> default_mmd_grid();

/// One "uhd mmd value" row per threshold pair.
std::string surface_to_text(const MetricSurface& s);
/// Heat map, one square block per grid cell, as binary PPM.
void write_surface_ppm(const MetricSurface& s, const std::filesystem::path& path, int cell = 24);

}  // namespace sgas
