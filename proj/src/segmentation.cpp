#include "sgas/segmentation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "sgas/ply.hpp"

namespace sgas {

int CategorySpec::points_per_part() const {
  // The small offset keeps e.g. 1.1 * 340 from landing just under an integer.
  return static_cast<int>(std::floor((1.0 + gamma) * base_points_per_part() + 1e-9));
}

void CategorySpec::validate() const {
  require(n >= 1, "category needs at least one part");
  require(points_per_shape >= n, "points_per_shape must be at least n");
  require(gamma >= 0.0 && std::isfinite(gamma), "gamma must be a finite non-negative value");
  require(part_names.empty() || static_cast<int>(part_names.size()) == n,
          "part_names must have n entries");
}

void to_json(nlohmann::json& j, const CategorySpec& spec) {
  j = nlohmann::json{{"name", spec.name},
                     {"n", spec.n},
                     {"P", spec.points_per_shape},
                     {"gamma", spec.gamma},
                     {"part_names", spec.part_names}};
}

void from_json(const nlohmann::json& j, CategorySpec& spec) {
  spec.name = j.value("name", std::string{"category"});
  spec.n = j.at("n").get<int>();
  spec.points_per_shape = j.at("P").get<int>();
  spec.gamma = j.value("gamma", 0.0);
  spec.part_names = j.value("part_names", std::vector<std::string>{});
}

CategorySpec default_chair_spec() { return CategorySpec{}; }

// ---------------------------------------------------------------------------
// PartSet

int PartSet::present_count() const {
  return static_cast<int>(
      std::count_if(parts.begin(), parts.end(), [](const auto& p) { return p.has_value(); }));
}

const PointCloud& PartSet::part(int i) const {
  require(i >= 0 && i < n(), "part index out of range");
  const auto& p = parts[static_cast<std::size_t>(i)];
  require(p.has_value(), "part " + std::to_string(i) + " is absent");
  return *p;
}

PointCloud PartSet::merged() const {
  PointCloud out;
  for (int i = 0; i < n(); ++i) {
    if (!present(i)) continue;
    for (const auto& p : part(i).points) {
      out.points.push_back(p);
      out.labels.push_back(i);
    }
  }
  return out;
}

void PartSet::validate(int expected_n, int points_per_part) const {
  require(n() == expected_n, "part set has " + std::to_string(n()) + " slots, expected " +
                                 std::to_string(expected_n));
  require(present_count() >= 1, "part set has no present part");
  for (int i = 0; i < n(); ++i) {
    if (!present(i)) continue;
    part(i).validate();
    require(points_per_part < 0 || static_cast<int>(part(i).size()) == points_per_part,
            "part " + std::to_string(i) + " has " + std::to_string(part(i).size()) +
                " points, expected " + std::to_string(points_per_part));
  }
}

PartSet part_set_from_labeled(const PointCloud& cloud, int n) {
  PartSet out(n);
  auto raw = partition_by_labels(cloud, n);
  for (int i = 0; i < n; ++i)
    if (!raw[static_cast<std::size_t>(i)].empty())
      out.parts[static_cast<std::size_t>(i)] = std::move(raw[static_cast<std::size_t>(i)]);
  return out;
}

// ---------------------------------------------------------------------------
// labeled splits

std::vector<PointCloud> partition_by_labels(const PointCloud& cloud, int n) {
  require(cloud.has_labels(), "split_by_labels needs a labeled cloud");
  require(cloud.labels.size() == cloud.size(), "label count does not match point count");
  std::vector<PointCloud> parts(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < cloud.size(); ++k) {
    const int label = cloud.labels[k];
    require(label >= -1 && label < n, "label " + std::to_string(label) + " outside {-1..n-1}");
    if (label >= 0) parts[static_cast<std::size_t>(label)].points.push_back(cloud.points[k]);
  }
  return parts;
}

namespace {

// Exactly `target` points: farthest-point subset when there are enough,
// otherwise every point plus uniform draws with replacement.
PointCloud resample_part(const PointCloud& part, int target, std::mt19937_64& rng) {
  const auto m = static_cast<std::size_t>(target);
  PointCloud out;
  out.points.reserve(m);
  if (part.size() >= m) {
    std::uniform_int_distribution<std::size_t> first(0, part.size() - 1);
    for (auto i : farthest_point_indices(part.points, m, {}, first(rng)))
      out.points.push_back(part.points[i]);
  } else {
    out.points = part.points;
    std::uniform_int_distribution<std::size_t> pick(0, part.size() - 1);
    while (out.points.size() < m) out.points.push_back(part.points[pick(rng)]);
  }
  return out;
}

}  // namespace

PartSet split_by_labels(const PointCloud& cloud, const CategorySpec& spec, std::uint64_t seed) {
  spec.validate();
  auto raw = partition_by_labels(cloud, spec.n);
  require(std::any_of(raw.begin(), raw.end(), [](const auto& p) { return !p.empty(); }),
          "every point is unlabeled");
  std::mt19937_64 rng(seed);
  PartSet out(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    const auto& part = raw[static_cast<std::size_t>(i)];
    if (!part.empty())
      out.parts[static_cast<std::size_t>(i)] = resample_part(part, spec.points_per_part(), rng);
  }
  return out;
}

// ---------------------------------------------------------------------------
// structure points

namespace {

struct KMeansResult {
  std::vector<Vec3> centers;
  double inertia = std::numeric_limits<double>::infinity();
};

KMeansResult kmeans(const std::vector<Vec3>& pts, int k, std::mt19937_64& rng) {
  const std::size_t n = pts.size();
  KMeansResult res;
  // k-means++ seeding.
  std::uniform_int_distribution<std::size_t> uni(0, n - 1);
  res.centers.push_back(pts[uni(rng)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = (pts[i] - res.centers[0]).squaredNorm();
  while (static_cast<int>(res.centers.size()) < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      for (pick = 0; pick + 1 < n; ++pick) {
        r -= d2[pick];
        if (r <= 0.0 && d2[pick] > 0.0) break;
      }
      while (d2[pick] == 0.0) pick = (pick + 1) % n;
    }
    res.centers.push_back(pts[pick]);
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], (pts[i] - res.centers.back()).squaredNorm());
  }

  std::vector<int> assign(n, -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (pts[i] - res.centers[0]).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (pts[i] - res.centers[static_cast<std::size_t>(c)]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    std::vector<Vec3> sums(static_cast<std::size_t>(k), Vec3::Zero());
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums[static_cast<std::size_t>(assign[i])] += pts[i];
      ++counts[static_cast<std::size_t>(assign[i])];
    }
    for (int c = 0; c < k; ++c) {
      const auto cu = static_cast<std::size_t>(c);
      if (counts[cu] > 0) {
        res.centers[cu] = sums[cu] / static_cast<double>(counts[cu]);
      } else {
        // Empty cluster: move it to the point worst served by its center.
        std::size_t worst = 0;
        double worst_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = (pts[i] - res.centers[static_cast<std::size_t>(assign[i])]).squaredNorm();
          if (d > worst_d) {
            worst_d = d;
            worst = i;
          }
        }
        res.centers[cu] = pts[worst];
        changed = true;
      }
    }
    if (!changed) break;
  }
  res.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    res.inertia += (pts[i] - res.centers[static_cast<std::size_t>(assign[i])]).norm();
  res.inertia /= static_cast<double>(n);
  return res;
}

}  // namespace

StructurePoints fit_structure_points(const std::vector<PointCloud>& dataset, int n,
                                     std::uint64_t seed) {
  require(!dataset.empty(), "structure points need a non-empty dataset");
  require(n >= 1, "structure points need n >= 1");
  std::vector<Vec3> pooled;
  for (const auto& cloud : dataset) pooled.insert(pooled.end(), cloud.points.begin(), cloud.points.end());
  require(!pooled.empty(), "structure points need at least one point");

  auto key = [](const Vec3& p) { return std::array<double, 3>{p.x(), p.y(), p.z()}; };
  std::vector<std::array<double, 3>> distinct;
  distinct.reserve(pooled.size());
  for (const auto& p : pooled) distinct.push_back(key(p));
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  require(static_cast<std::size_t>(n) <= distinct.size(),
          "n exceeds the number of distinct points");

  constexpr int kRestarts = 5;
  std::mt19937_64 rng(seed);
  KMeansResult best;
  for (int r = 0; r < kRestarts; ++r) {
    auto res = kmeans(pooled, n, rng);
    if (res.inertia < best.inertia) best = std::move(res);
  }
  return StructurePoints{std::move(best.centers)};
}

std::vector<int> nearest_anchor_labels(const PointCloud& cloud, const StructurePoints& anchors) {
  require(!anchors.anchors.empty(), "no structure points");
  std::vector<int> labels(cloud.size());
  for (std::size_t k = 0; k < cloud.size(); ++k) {
    int best = 0;
    double best_d = (cloud.points[k] - anchors.anchors[0]).squaredNorm();
    for (std::size_t a = 1; a < anchors.anchors.size(); ++a) {
      const double d = (cloud.points[k] - anchors.anchors[a]).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(a);
      }
    }
    labels[k] = best;
  }
  return labels;
}

PartSet cosegment(const PointCloud& cloud, const StructurePoints& anchors,
                  const CategorySpec& spec, std::uint64_t seed) {
  spec.validate();
  require(static_cast<int>(anchors.anchors.size()) == spec.n, "anchor count must equal n");
  require(static_cast<int>(cloud.size()) == spec.points_per_shape,
          "cosegment expects exactly P points");
  const auto labels = nearest_anchor_labels(cloud, anchors);
  const auto target = static_cast<std::size_t>(spec.points_per_part());
  std::mt19937_64 rng(seed);

  PartSet out(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    const Vec3& anchor = anchors.anchors[static_cast<std::size_t>(i)];
    std::vector<std::size_t> ranked(cloud.size());
    std::iota(ranked.begin(), ranked.end(), std::size_t{0});
    std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
      return (cloud.points[a] - anchor).squaredNorm() < (cloud.points[b] - anchor).squaredNorm();
    });

    std::vector<std::size_t> pool;
    for (auto k : ranked)
      if (labels[k] == i) pool.push_back(k);
    if (pool.empty()) {
      // Degenerate anchor: the nearest points overall.
      pool.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(
                                                       std::min(target, ranked.size())));
    } else {
      // Overlap margin from the nearest points owned by other anchors.
      auto margin = static_cast<std::size_t>(std::floor(spec.gamma * pool.size() + 1e-9));
      for (auto k : ranked) {
        if (margin == 0) break;
        if (labels[k] != i) {
          pool.push_back(k);
          --margin;
        }
      }
    }

    std::vector<std::size_t> chosen;
    if (pool.size() >= target) {
      chosen = pool;
      std::shuffle(chosen.begin(), chosen.end(), rng);
      chosen.resize(target);
    } else {
      chosen = pool;
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      while (chosen.size() < target) chosen.push_back(pool[pick(rng)]);
    }
    PointCloud part;
    part.points.reserve(target);
    for (auto k : chosen) part.points.push_back(cloud.points[k]);
    out.parts[static_cast<std::size_t>(i)] = std::move(part);
  }
  return out;
}

DropoutResult random_part_dropout(const PartSet& full, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_part_dropout(full, rng);
}

// ---------------------------------------------------------------------------
// synthetic chairs

namespace {

struct Box {
  Vec3 lo, hi;
  double area() const {
    const Vec3 e = hi - lo;
    return 2.0 * (e.x() * e.y() + e.y() * e.z() + e.x() * e.z());
  }
};

Vec3 sample_box_surface(const Box& b, std::mt19937_64& rng) {
  const Vec3 e = b.hi - b.lo;
  const double axy = e.x() * e.y(), ayz = e.y() * e.z(), axz = e.x() * e.z();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng) * (axy + ayz + axz);
  const bool far_side = u(rng) < 0.5;
  Vec3 p(b.lo.x() + u(rng) * e.x(), b.lo.y() + u(rng) * e.y(), b.lo.z() + u(rng) * e.z());
  if (r < axy) p.z() = far_side ? b.hi.z() : b.lo.z();
  else if (r < axy + ayz) p.x() = far_side ? b.hi.x() : b.lo.x();
  else p.y() = far_side ? b.hi.y() : b.lo.y();
  return p;
}

PointCloud make_chair(int points, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };

  const double w = range(0.8, 1.2);        // seat width (x)
  const double d = range(0.7, 1.1);        // seat depth (z)
  const double t = range(0.05, 0.15);      // seat thickness
  const double h = range(0.6, 1.0);        // seat height
  const double bh = range(0.6, 1.2);       // back height
  const double bt = range(0.05, 0.12);     // back thickness
  const double bw = w * range(0.75, 1.0);  // back width
  const double lt = range(0.05, 0.12);     // leg thickness
  const bool pedestal = u(rng) < 0.3;
  const bool arms = u(rng) >= 0.3;
  const double ah = range(0.15, 0.35);
  const double aw = range(0.05, 0.12);

  std::vector<std::vector<Box>> parts(4);
  const double seat_lo = h - t / 2, seat_hi = h + t / 2;
  parts[1].push_back({{-w / 2, seat_lo, -d / 2}, {w / 2, seat_hi, d / 2}});
  parts[0].push_back({{-bw / 2, seat_hi, -d / 2}, {bw / 2, seat_hi + bh, -d / 2 + bt}});
  if (pedestal) {
    parts[2].push_back({{-lt, 0.08, -lt}, {lt, seat_lo, lt}});
    parts[2].push_back({{-w / 2, 0.0, -lt / 2}, {w / 2, 0.08, lt / 2}});
    parts[2].push_back({{-lt / 2, 0.0, -d / 2}, {lt / 2, 0.08, d / 2}});
  } else {
    for (double sx : {-1.0, 1.0})
      for (double sz : {-1.0, 1.0}) {
        const double cx = sx * (w / 2 - lt / 2), cz = sz * (d / 2 - lt / 2);
        parts[2].push_back({{cx - lt / 2, 0.0, cz - lt / 2}, {cx + lt / 2, seat_lo, cz + lt / 2}});
      }
  }
  if (arms) {
    for (double sx : {-1.0, 1.0}) {
      const double x0 = sx > 0 ? w / 2 : -w / 2 - aw;
      parts[3].push_back({{x0, seat_hi, -d / 2 + bt}, {x0 + aw, seat_hi + ah, d / 2 * 0.9}});
    }
  }

  // Points per part proportional to surface area, at least 32 per part.
  std::vector<double> areas(4, 0.0);
  for (int i = 0; i < 4; ++i)
    for (const auto& b : parts[static_cast<std::size_t>(i)]) areas[static_cast<std::size_t>(i)] += b.area();
  const double total_area = std::accumulate(areas.begin(), areas.end(), 0.0);
  const int present = arms ? 4 : 3;
  const int spare = points - 32 * present;
  std::vector<int> counts(4, 0);
  int assigned = 0;
  for (int i = 0; i < 4; ++i) {
    if (parts[static_cast<std::size_t>(i)].empty()) continue;
    counts[static_cast<std::size_t>(i)] =
        32 + static_cast<int>(std::floor(spare * areas[static_cast<std::size_t>(i)] / total_area));
    assigned += counts[static_cast<std::size_t>(i)];
  }
  counts[1] += points - assigned;  // rounding remainder goes to the seat

  PointCloud cloud;
  for (int i = 0; i < 4; ++i) {
    const auto& boxes = parts[static_cast<std::size_t>(i)];
    if (boxes.empty()) continue;
    double part_area = 0.0;
    for (const auto& b : boxes) part_area += b.area();
    for (int k = 0; k < counts[static_cast<std::size_t>(i)]; ++k) {
      double r = u(rng) * part_area;
      std::size_t bi = 0;
      while (bi + 1 < boxes.size() && r > boxes[bi].area()) r -= boxes[bi++].area();
      cloud.points.push_back(sample_box_surface(boxes[bi], rng));
      cloud.labels.push_back(i);
    }
  }
  return normalize(cloud);
}

}  // namespace

std::vector<PointCloud> synth_dataset(const CategorySpec& spec, int count, std::uint64_t seed) {
  spec.validate();
  require(spec.n == 4, "the synthetic chair category has exactly 4 parts");
  require(count >= 1, "synth_dataset needs count >= 1");
  require(spec.points_per_shape >= 4 * 32 + 4, "synthetic chairs need P >= 132");
  std::mt19937_64 seeds(seed);
  std::vector<PointCloud> shapes;
  shapes.reserve(static_cast<std::size_t>(count));
  for (int s = 0; s < count; ++s) {
    std::mt19937_64 rng(seeds());
    shapes.push_back(make_chair(spec.points_per_shape, rng));
  }
  return shapes;
}

// ---------------------------------------------------------------------------
// dataset directories

void save_dataset(const std::filesystem::path& dir, const CategorySpec& spec,
                  const std::vector<PointCloud>& shapes) {
  std::filesystem::create_directories(dir);
  write_file(dir / "spec.json", nlohmann::json(spec).dump(2) + "\n");
  char name[32];
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    std::snprintf(name, sizeof name, "shape_%05zu.ply", i);
    write_ply(dir / name, shapes[i]);
  }
}

Dataset load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) fail(ErrorCode::kIo, "no dataset directory " + dir.string());
  Dataset ds;
  try {
    ds.spec = nlohmann::json::parse(read_file(dir / "spec.json")).get<CategorySpec>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidInput, "bad spec.json: " + std::string(e.what()));
  }
  ds.spec.validate();
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == ".ply") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) ds.shapes.push_back(read_ply(f).cloud);
  return ds;
}

}  // namespace sgas
