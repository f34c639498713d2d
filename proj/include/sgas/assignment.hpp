#pragma once

#include <vector>

#include <Eigen/Core>

namespace sgas {

/// Square cost matrix, row i = source i, column j = target j.
using CostMatrix = Eigen::MatrixXd;

/// Minimum-cost perfect matching (Hungarian method with potentials,
/// O(n^3)). Returns target index per source.
std::vector<int> optimal_assignment(const CostMatrix& cost);

/// Forward auction with epsilon scaling. The total cost of the returned
/// matching exceeds the optimum by at most relative_tolerance * max(cost).
std::vector<int> auction_assignment(const CostMatrix& cost, double relative_tolerance = 1e-4);

double assignment_cost(const CostMatrix& cost, const std::vector<int>& assignment);

}  // namespace sgas
