#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace sgas {

using Vec3 = Eigen::Vector3d;

/// Ordered set of 3D points with optional per-point part labels.
/// `labels` is either empty or has one entry per point (-1 = unlabeled).
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<int> labels;

  PointCloud() = default;
  explicit PointCloud(std::vector<Vec3> pts) : points(std::move(pts)) {}
  PointCloud(std::vector<Vec3> pts, std::vector<int> lbls)
      : points(std::move(pts)), labels(std::move(lbls)) {}

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_labels() const { return !labels.empty(); }

  /// Throws kInvalidInput on non-finite coordinates or a label/point count
  /// mismatch.
  void validate() const;

  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

struct OccupancyHistogram {
  int resolution = 0;
  std::vector<double> mass;  // resolution^3 cells, x-major
};

enum class EmdMode { kExact, kApproximate };
enum class SampleStrategy { kRandom, kFarthestPoint };

/// Symmetric Chamfer distance with squared nearest-neighbour distances,
/// each direction averaged over its own cloud.
double chamfer_distance(const PointCloud& a, const PointCloud& b);

/// Mean matched distance under the optimal bijection. Exact mode solves the
/// assignment with the Hungarian method; approximate mode runs an
/// epsilon-scaled auction.
double earth_movers_distance(const PointCloud& a, const PointCloud& b,
                             EmdMode mode = EmdMode::kExact);

/// max over `partial` of the distance to the nearest point of `full`.
double unidirectional_hausdorff(const PointCloud& partial, const PointCloud& full);

/// Centers on the centroid and scales so the farthest point has norm 1.
PointCloud normalize(const PointCloud& cloud);

PointCloud downsample(const PointCloud& cloud, std::size_t m, SampleStrategy strategy,
                      std::uint64_t seed);

/// Greedy farthest-point selection that starts from `preselected` (kept in
/// order at the front of the result) and adds candidates until `m` indices
/// are chosen. With nothing preselected the first pick is `first`.
std::vector<std::size_t> farthest_point_indices(std::span<const Vec3> points, std::size_t m,
                                                std::span<const std::size_t> preselected,
                                                std::size_t first = 0);

OccupancyHistogram occupancy(const PointCloud& cloud, int resolution);

/// Cell index of a point inside [-1,1]^3 at the given resolution; points
/// outside are clamped to the boundary cells.
std::size_t occupancy_cell(const Vec3& p, int resolution);

/// Point-to-set nearest neighbour queries over a static cloud.
class NearestNeighbors {
 public:
  explicit NearestNeighbors(std::span<const Vec3> points);

  /// Squared distance to, and index of, the closest point. Ties resolve to
  /// the lowest index.
  std::pair<double, std::size_t> nearest(const Vec3& q) const;

 private:
  struct Node {
    std::uint32_t begin, end;
    std::int32_t left = -1, right = -1;
    int axis = -1;
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const Vec3& q, double& best, std::size_t& best_idx) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace sgas
