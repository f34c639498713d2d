#include "sgas/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "sgas/assignment.hpp"
#include "sgas/error.hpp"

namespace sgas {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid-input";
    case ErrorCode::kContractViolation: return "contract-violation";
    case ErrorCode::kTrainingFailure: return "training-failure";
    case ErrorCode::kIo: return "io-error";
    case ErrorCode::kCorruptFile: return "corrupt-file";
    case ErrorCode::kVersionMismatch: return "version-mismatch";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
  }
  return "unknown";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput:
    case ErrorCode::kContractViolation: return 2;
    case ErrorCode::kTrainingFailure: return 3;
    case ErrorCode::kIo:
    case ErrorCode::kCorruptFile:
    case ErrorCode::kVersionMismatch:
    case ErrorCode::kShapeMismatch: return 4;
  }
  return 1;
}

void PointCloud::validate() const {
  for (const auto& p : points)
    require(p.allFinite(), "point cloud has a non-finite coordinate");
  require(labels.empty() || labels.size() == points.size(),
          "label count does not match point count");
}

// ---------------------------------------------------------------------------
// k-d tree

namespace {
constexpr std::uint32_t kLeafSize = 8;
}

NearestNeighbors::NearestNeighbors(std::span<const Vec3> points)
    : points_(points.begin(), points.end()), order_(points.size()) {
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, static_cast<std::uint32_t>(points_.size()));
  }
}

std::int32_t NearestNeighbors::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = points_[order_[begin]], hi = lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] - lo[axis] <= 0.0) return id;  // all coincident

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return points_[a][axis] < points_[b][axis];
                   });
  const double split = points_[order_[mid]][axis];
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void NearestNeighbors::search(std::int32_t node_id, const Vec3& q, double& best,
                              std::size_t& best_idx) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t idx = order_[i];
      const double d = (points_[idx] - q).squaredNorm();
      if (d < best || (d == best && idx < best_idx)) {
        best = d;
        best_idx = idx;
      }
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const std::int32_t near = diff < 0 ? node.left : node.right;
  const std::int32_t far = diff < 0 ? node.right : node.left;
  search(near, q, best, best_idx);
  // <= keeps lowest-index tie breaking exact across the split plane.
  if (diff * diff <= best) search(far, q, best, best_idx);
}

std::pair<double, std::size_t> NearestNeighbors::nearest(const Vec3& q) const {
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_idx = std::numeric_limits<std::size_t>::max();
  if (!nodes_.empty()) search(0, q, best, best_idx);
  return {best, best_idx};
}

// ---------------------------------------------------------------------------
// distances

namespace {

double mean_nearest_squared(const PointCloud& from, const NearestNeighbors& to) {
  double sum = 0.0;
  for (const auto& p : from.points) sum += to.nearest(p).first;
  return sum / static_cast<double>(from.size());
}

CostMatrix distance_matrix(const PointCloud& a, const PointCloud& b) {
  CostMatrix cost(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          (a.points[i] - b.points[j]).norm();
  return cost;
}

}  // namespace

double chamfer_distance(const PointCloud& a, const PointCloud& b) {
  require(!a.empty() && !b.empty(), "chamfer distance of an empty cloud");
  const NearestNeighbors tree_a(a.points), tree_b(b.points);
  return mean_nearest_squared(a, tree_b) + mean_nearest_squared(b, tree_a);
}

double earth_movers_distance(const PointCloud& a, const PointCloud& b, EmdMode mode) {
  require(a.size() == b.size(), "earth mover's distance needs equal-size clouds");
  require(!a.empty(), "earth mover's distance of an empty cloud");
  const CostMatrix cost = distance_matrix(a, b);
  const auto assignment =
      mode == EmdMode::kExact ? optimal_assignment(cost) : auction_assignment(cost);
  return assignment_cost(cost, assignment) / static_cast<double>(a.size());
}

double unidirectional_hausdorff(const PointCloud& partial, const PointCloud& full) {
  require(!partial.empty() && !full.empty(), "hausdorff distance of an empty cloud");
  const NearestNeighbors tree(full.points);
  double worst = 0.0;
  for (const auto& p : partial.points) worst = std::max(worst, tree.nearest(p).first);
  return std::sqrt(worst);
}

// ---------------------------------------------------------------------------
// resampling

PointCloud normalize(const PointCloud& cloud) {
  require(!cloud.empty(), "cannot normalize an empty cloud");
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : cloud.points) centroid += p;
  centroid /= static_cast<double>(cloud.size());

  PointCloud out = cloud;
  double max_norm = 0.0;
  for (auto& p : out.points) {
    p -= centroid;
    max_norm = std::max(max_norm, p.norm());
  }
  if (max_norm > 0.0)
    for (auto& p : out.points) p /= max_norm;
  return out;
}

std::vector<std::size_t> farthest_point_indices(std::span<const Vec3> points, std::size_t m,
                                                std::span<const std::size_t> preselected,
                                                std::size_t first) {
  const std::size_t n = points.size();
  require(m <= n, "cannot sample more points than the cloud has");
  std::vector<std::size_t> chosen(preselected.begin(), preselected.end());
  if (chosen.size() >= m) {
    chosen.resize(m);
    return chosen;
  }
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);
  auto absorb = [&](std::size_t idx) {
    taken[idx] = 1;
    for (std::size_t i = 0; i < n; ++i)
      dist[i] = std::min(dist[i], (points[i] - points[idx]).squaredNorm());
  };
  if (chosen.empty()) {
    require(first < n, "first farthest-point pick out of range");
    chosen.push_back(first);
  }
  for (auto idx : chosen) absorb(idx);
  while (chosen.size() < m) {
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!taken[i] && dist[i] > best_d) {
        best_d = dist[i];
        best = i;
      }
    }
    chosen.push_back(best);
    absorb(best);
  }
  return chosen;
}

PointCloud downsample(const PointCloud& cloud, std::size_t m, SampleStrategy strategy,
                      std::uint64_t seed) {
  require(m >= 1, "downsample target must be positive");
  require(m <= cloud.size(), "downsample target exceeds cloud size");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx;
  if (strategy == SampleStrategy::kRandom) {
    idx.resize(cloud.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(m);
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, cloud.size() - 1);
    idx = farthest_point_indices(cloud.points, m, {}, pick(rng));
  }
  PointCloud out;
  out.points.reserve(m);
  for (auto i : idx) {
    out.points.push_back(cloud.points[i]);
    if (cloud.has_labels()) out.labels.push_back(cloud.labels[i]);
  }
  return out;
}

std::size_t occupancy_cell(const Vec3& p, int resolution) {
  auto axis = [&](double x) {
    const auto c = static_cast<long>(std::floor((x + 1.0) * 0.5 * resolution));
    return static_cast<std::size_t>(std::clamp<long>(c, 0, resolution - 1));
  };
  const auto r = static_cast<std::size_t>(resolution);
  return (axis(p.x()) * r + axis(p.y())) * r + axis(p.z());
}

OccupancyHistogram occupancy(const PointCloud& cloud, int resolution) {
  require(resolution >= 1, "occupancy resolution must be at least 1");
  require(!cloud.empty(), "occupancy of an empty cloud");
  OccupancyHistogram h;
  h.resolution = resolution;
  const auto r = static_cast<std::size_t>(resolution);
  h.mass.assign(r * r * r, 0.0);
  const double w = 1.0 / static_cast<double>(cloud.size());
  for (const auto& p : cloud.points) h.mass[occupancy_cell(p, resolution)] += w;
  return h;
}

}  // namespace sgas
