#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "sgas/checkpoint.hpp"
#include "sgas/geometry.hpp"
#include "sgas/segmentation.hpp"

namespace testing {

using sgas::PointCloud;
using sgas::Vec3;

inline PointCloud random_cloud(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.emplace_back(u(rng), u(rng), u(rng));
  return c;
}

// ---- brute-force oracles --------------------------------------------------

inline double oracle_chamfer(const PointCloud& a, const PointCloud& b) {
  auto directed = [](const PointCloud& x, const PointCloud& y) {
    double s = 0.0;
    for (const auto& p : x.points) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : y.points) best = std::min(best, (p - q).squaredNorm());
      s += best;
    }
    return s / static_cast<double>(x.size());
  };
  return directed(a, b) + directed(b, a);
}

inline double oracle_emd(const PointCloud& a, const PointCloud& b) {
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) s += (a.points[i] - b.points[perm[i]]).norm();
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(a.size());
}

inline double oracle_uhd(const PointCloud& partial, const PointCloud& full) {
  double worst = 0.0;
  for (const auto& p : partial.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : full.points) best = std::min(best, (p - q).norm());
    worst = std::max(worst, best);
  }
  return worst;
}

inline double oracle_tmd(const std::vector<PointCloud>& s) {
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j)
      if (j != i) row += oracle_chamfer(s[i], s[j]);
    total += row / static_cast<double>(s.size() - 1);
  }
  return total;
}

inline double oracle_set_mmd(const std::vector<PointCloud>& gen, const std::vector<PointCloud>& ref) {
  double total = 0.0;
  for (const auto& r : ref) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& g : gen) best = std::min(best, oracle_chamfer(r, g));
    total += best;
  }
  return total / static_cast<double>(ref.size());
}

inline double oracle_shape_mmd(const PointCloud& s, const std::vector<PointCloud>& ref) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : ref) best = std::min(best, oracle_chamfer(s, r));
  return best;
}

// ---- finite differences ---------------------------------------------------

/// Worst tensor-wise relative error between analytic and central-difference
/// gradients over the given parameters. `loss` re-evaluates the objective.
template <typename Loss>
double gradient_error(const std::vector<sgas::Matrix*>& params, const std::vector<const sgas::Matrix*>& grads,
                      Loss&& loss, std::size_t max_entries = 24, double h = 1e-6) {
  double worst = 0.0;
  std::mt19937_64 rng(99);
  for (std::size_t t = 0; t < params.size(); ++t) {
    sgas::Matrix& p = *params[t];
    const sgas::Matrix& g = *grads[t];
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(p.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(idx.size(), max_entries));
    double diff = 0.0, norm_a = 0.0, norm_f = 0.0;
    for (auto k : idx) {
      const double orig = p.data()[k];
      p.data()[k] = orig + h;
      const double up = loss();
      p.data()[k] = orig - h;
      const double down = loss();
      p.data()[k] = orig;
      const double fd = (up - down) / (2.0 * h);
      const double an = g.data()[k];
      diff += (an - fd) * (an - fd);
      norm_a += an * an;
      norm_f += fd * fd;
    }
    const double scale = std::sqrt(std::max(norm_a, norm_f));
    if (scale > 1e-9) worst = std::max(worst, std::sqrt(diff) / scale);
  }
  return worst;
}

// ---- small fixtures -------------------------------------------------------

/// Untrained but complete checkpoint for editing semantics: tiny codecs and
/// GAN, category with `n` parts of `ppp` points each.
inline sgas::Checkpoint tiny_checkpoint(int n = 3, int ppp = 16, int latent = 8, bool pruned = false,
                                        std::uint64_t seed = 5) {
  sgas::Checkpoint c;
  c.spec.name = "toy";
  c.spec.n = n;
  c.spec.points_per_shape = n * ppp;
  c.spec.gamma = 0.0;
  c.spec.part_names.clear();
  for (int i = 0; i < n; ++i) c.spec.part_names.push_back("p" + std::to_string(i));
  c.codec_config.encoder_widths = {8, 8};
  c.codec_config.decoder_hidden = {16};
  c.codec_config.latent_dim = latent;
  c.codec_config.points_per_part = ppp;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < n; ++i) {
    c.codecs.emplace_back(c.codec_config, i, rng);
    c.codecs.back().freeze();
  }
  sgas::GanConfig g;
  g.n = n;
  g.latent_dim = latent;
  g.condition_widths = {8, 8};
  g.condition_points_per_part = 8;
  g.generator_hidden = {12, 12};
  g.critic_hidden = {12, 12};
  g.pruned = pruned;
  c.gan.emplace(g, rng);
  // Scale generator outputs so generated codes clear the default select
  // threshold.
  for (auto& gen : c.gan->generators) {
    gen.layers().back().weight *= 4.0;
    gen.layers().back().bias.setConstant(1.0);
  }
  sgas::quantize_to_float(c.gan->all());
  for (auto& codec : c.codecs) sgas::quantize_to_float(codec.parameters());
  return c;
}

/// Full part set whose part i is a small blob around a distinct center.
inline sgas::PartSet blob_parts(int n, int ppp, std::mt19937_64& rng, double spread = 0.05) {
  std::normal_distribution<double> noise(0.0, spread);
  sgas::PartSet s(n);
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * i / n;
    const Vec3 center(0.6 * std::cos(a), 0.6 * std::sin(a), 0.1 * i);
    PointCloud c;
    for (int k = 0; k < ppp; ++k) c.points.push_back(center + Vec3(noise(rng), noise(rng), noise(rng)));
    s.parts[static_cast<std::size_t>(i)] = c;
  }
  return s;
}

}  // namespace testing
