#include "sgas/assignment.hpp"

#include <algorithm>
#include <limits>

#include "sgas/error.hpp"

namespace sgas {

std::vector<int> optimal_assignment(const CostMatrix& cost) {
  const int n = static_cast<int>(cost.rows());
  require(cost.cols() == n, "assignment needs a square cost matrix");
  if (n == 0) return {};

  // 1-based potentials formulation; column 0 is a virtual start.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> assignment(n, -1);
  for (int j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

std::vector<int> auction_assignment(const CostMatrix& cost, double relative_tolerance) {
  const int n = static_cast<int>(cost.rows());
  require(cost.cols() == n, "assignment needs a square cost matrix");
  if (n == 0) return {};
  if (n == 1) return {0};

  const double max_cost = std::max(cost.maxCoeff(), 1e-300);
  const double final_eps = relative_tolerance * max_cost / n;
  double eps = std::max(max_cost / 4.0, final_eps);

  std::vector<double> price(n, 0.0);
  std::vector<int> owner(n, -1);
  std::vector<int> assigned(n, -1);
  std::vector<int> queue;
  queue.reserve(n);

  while (true) {
    std::fill(owner.begin(), owner.end(), -1);
    std::fill(assigned.begin(), assigned.end(), -1);
    queue.clear();
    for (int i = n - 1; i >= 0; --i) queue.push_back(i);

    while (!queue.empty()) {
      const int i = queue.back();
      queue.pop_back();
      // Benefit of object j for person i is -cost(i, j) - price[j].
      double best = -std::numeric_limits<double>::infinity();
      double second = best;
      int best_j = 0;
      for (int j = 0; j < n; ++j) {
        const double value = -cost(i, j) - price[j];
        if (value > best) {
          second = best;
          best = value;
          best_j = j;
        } else if (value > second) {
          second = value;
        }
      }
      price[best_j] += (best - second) + eps;
      const int previous = owner[best_j];
      owner[best_j] = i;
      assigned[i] = best_j;
      if (previous >= 0) {
        assigned[previous] = -1;
        queue.push_back(previous);
      }
    }
    if (eps <= final_eps) break;
    eps = std::max(eps / 5.0, final_eps);
  }
  return assigned;
}

double assignment_cost(const CostMatrix& cost, const std::vector<int>& assignment) {
  double total = 0.0;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    total += cost(static_cast<Eigen::Index>(i), assignment[i]);
  return total;
}

}  // namespace sgas
