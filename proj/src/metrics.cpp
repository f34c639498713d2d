#include "sgas/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "sgas/error.hpp"
#include "sgas/ply.hpp"

namespace sgas {

double shape_distance(const PointCloud& a, const PointCloud& b, ShapeDistance dist) {
  switch (dist) {
    case ShapeDistance::kChamfer: return chamfer_distance(a, b);
    case ShapeDistance::kEmdExact: return earth_movers_distance(a, b, EmdMode::kExact);
    case ShapeDistance::kEmdApproximate: return earth_movers_distance(a, b, EmdMode::kApproximate);
  }
  return 0.0;
}

double tmd(const std::vector<PointCloud>& samples) {
  const std::size_t k = samples.size();
  require(k >= 2, "TMD needs at least two samples");
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) total += 2.0 * chamfer_distance(samples[i], samples[j]);
  return total / static_cast<double>(k - 1);
}

namespace {

Matrix distance_matrix(const std::vector<PointCloud>& rows, const std::vector<PointCloud>& cols,
                       ShapeDistance dist) {
  Matrix d(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = shape_distance(rows[i], cols[j], dist);
  return d;
}

void require_sets(const std::vector<PointCloud>& a, const std::vector<PointCloud>& b) {
  require(!a.empty() && !b.empty(), "shape sets must be non-empty");
}

}  // namespace

double set_mmd(const std::vector<PointCloud>& generated, const std::vector<PointCloud>& reference,
               ShapeDistance dist) {
  require_sets(generated, reference);
  return distance_matrix(reference, generated, dist).rowwise().minCoeff().mean();
}

double coverage(const std::vector<PointCloud>& generated, const std::vector<PointCloud>& reference,
                ShapeDistance dist) {
  require_sets(generated, reference);
  const Matrix d = distance_matrix(generated, reference, dist);
  std::vector<bool> hit(reference.size(), false);
  for (Eigen::Index g = 0; g < d.rows(); ++g) {
    Eigen::Index best = 0;
    d.row(g).minCoeff(&best);
    hit[static_cast<std::size_t>(best)] = true;
  }
  return 100.0 * static_cast<double>(std::count(hit.begin(), hit.end(), true)) /
         static_cast<double>(reference.size());
}

double jsd_histograms(const std::vector<double>& p, const std::vector<double>& q) {
  require(p.size() == q.size() && !p.empty(), "histograms differ in size");
  auto smooth = [](const std::vector<double>& h) {
    std::vector<double> s(h.size());
    double total = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) total += (s[i] = h[i] + kJsdSmoothing);
    for (auto& v : s) v /= total;
    return s;
  };
  const auto ps = smooth(p), qs = smooth(q);
  double out = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double m = 0.5 * (ps[i] + qs[i]);
    out += 0.5 * ps[i] * std::log2(ps[i] / m) + 0.5 * qs[i] * std::log2(qs[i] / m);
  }
  return std::clamp(out, 0.0, 1.0);
}

double jsd(const std::vector<PointCloud>& generated, const std::vector<PointCloud>& reference,
           int resolution) {
  require(resolution >= 1, "resolution must be at least 1");
  require_sets(generated, reference);
  auto pooled = [resolution](const std::vector<PointCloud>& set) {
    std::vector<double> h(static_cast<std::size_t>(resolution) * resolution * resolution, 0.0);
    double total = 0.0;
    for (const auto& c : set)
      for (const auto& p : c.points) {
        h[occupancy_cell(p, resolution)] += 1.0;
        total += 1.0;
      }
    require(total > 0.0, "shape set has no points");
    for (auto& v : h) v /= total;
    return h;
  };
  return jsd_histograms(pooled(generated), pooled(reference));
}

double shape_mmd(const PointCloud& shape, const std::vector<PointCloud>& reference, ShapeDistance dist) {
  require(!reference.empty(), "reference set must be non-empty");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : reference) best = std::min(best, shape_distance(shape, r, dist));
  return best;
}

// ---------------------------------------------------------------------------
// TMDS

std::vector<PartialStats> tmds_stats(const EditFn& edit_fn, const std::vector<PointCloud>& partials,
                                     const std::vector<PointCloud>& reference, int k, std::uint64_t seed) {
  require(!partials.empty(), "TMDS needs at least one partial input");
  require(k >= 2, "TMDS needs k >= 2");
  std::vector<PartialStats> out;
  for (std::size_t p = 0; p < partials.size(); ++p) {
    const auto samples = edit_fn(partials[p], k, seed + p);
    require(static_cast<int>(samples.size()) == k, "edit function returned the wrong number of samples");
    PartialStats s;
    s.tmd = tmd(samples);
    for (const auto& x : samples) {
      s.uhd.push_back(unidirectional_hausdorff(partials[p], x));
      s.mmd.push_back(shape_mmd(x, reference));
    }
    out.push_back(std::move(s));
  }
  return out;
}

MetricSurface tmds_surface(const std::vector<PartialStats>& stats, const std::vector<double>& uhd_grid,
                           const std::vector<double>& mmd_grid, TmdsMode mode) {
  require(!stats.empty(), "TMDS needs at least one partial input");
  require(!uhd_grid.empty() && !mmd_grid.empty(), "threshold grids must be non-empty");
  require(std::is_sorted(uhd_grid.begin(), uhd_grid.end()) && std::is_sorted(mmd_grid.begin(), mmd_grid.end()),
          "threshold grids must be ascending");
  MetricSurface s{uhd_grid, mmd_grid,
                  Matrix::Zero(static_cast<Eigen::Index>(uhd_grid.size()), static_cast<Eigen::Index>(mmd_grid.size()))};
  for (std::size_t a = 0; a < uhd_grid.size(); ++a) {
    for (std::size_t b = 0; b < mmd_grid.size(); ++b) {
      double total = 0.0;
      for (const auto& st : stats) {
        require(st.uhd.size() == st.mmd.size() && !st.uhd.empty(), "inconsistent partial statistics");
        std::size_t ok = 0;
        for (std::size_t i = 0; i < st.uhd.size(); ++i)
          if (st.uhd[i] <= uhd_grid[a] && st.mmd[i] <= mmd_grid[b]) ++ok;
        const bool qualifies = mode == TmdsMode::kExists ? ok > 0 : ok == st.uhd.size();
        if (qualifies) total += st.tmd;
      }
      s.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = total / static_cast<double>(stats.size());
    }
  }
  return s;
}

MetricSurface tmds(const EditFn& edit_fn, const std::vector<PointCloud>& partials,
                   const std::vector<PointCloud>& reference, int k, const std::vector<double>& uhd_grid,
                   const std::vector<double>& mmd_grid, TmdsMode mode, std::uint64_t seed) {
  return tmds_surface(tmds_stats(edit_fn, partials, reference, k, seed), uhd_grid, mmd_grid, mode);
}

std::vector<double> default_uhd_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 10; ++i) g.push_back(0.02 * i);
  return g;
}

std::vector<double> default_mmd_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 10; ++i) g.push_back(0.0005 * i);
  return g;
}

std::string surface_to_text(const MetricSurface& s) {
  std::ostringstream out;
  out << "uhd_threshold mmd_threshold tmds\n" << std::setprecision(10);
  for (std::size_t a = 0; a < s.uhd_thresholds.size(); ++a)
    for (std::size_t b = 0; b < s.mmd_thresholds.size(); ++b)
      out << s.uhd_thresholds[a] << ' ' << s.mmd_thresholds[b] << ' '
          << s.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) << '\n';
  return out.str();
}

void write_surface_ppm(const MetricSurface& s, const std::filesystem::path& path, int cell) {
  const auto rows = static_cast<int>(s.values.rows()), cols = static_cast<int>(s.values.cols());
  const int w = cols * cell, h = rows * cell;
  const double top = s.values.size() ? s.values.maxCoeff() : 0.0;
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  for (int y = 0; y < h; ++y) {
    // largest uhd threshold on the top row
    const int r = rows - 1 - y / cell;
    for (int x = 0; x < w; ++x) {
      const double t = top > 0.0 ? s.values(r, x / cell) / top : 0.0;
      out.push_back(static_cast<char>(static_cast<int>(255 * t)));
      out.push_back(static_cast<char>(static_cast<int>(255 * (1.0 - std::abs(2.0 * t - 1.0)))));
      out.push_back(static_cast<char>(static_cast<int>(255 * (1.0 - t))));
    }
  }
  write_file(path, out);
}

}  // namespace sgas
