#include "rdsl/measure.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <vector>

namespace rdsl {

// Exact transportation simplex (MODI). Sizes here are at most 64x64, so the
// dense bookkeeping below is more than fast enough. Bland's rule on both the
// entering and leaving choices prevents cycling under degeneracy.
double transport_lp(const Mat& cost, const Vec& supply, const Vec& demand) {
  const int m = int(supply.size());
  const int n = int(demand.size());
  if (m == 0 || n == 0) throw ConfigError("transport problem is empty");
  if (cost.rows() != m || cost.cols() != n)
    throw ConfigError("transport cost shape mismatch");
  const double sa = supply.sum();
  const double sb = demand.sum();
  if (std::fabs(sa - sb) > 1e-9)
    throw ConfigError("transport problem is unbalanced");

  Mat flow = Mat::Zero(m, n);
  std::vector<std::vector<bool>> basic(static_cast<std::size_t>(m),
                                       std::vector<bool>(static_cast<std::size_t>(n), false));

  // Northwest-corner start: yields a spanning-tree basis of m+n-1 cells.
  {
    Vec a = supply, b = demand;
    int i = 0, j = 0;
    while (i < m && j < n) {
      const double q = std::min(a[i], b[j]);
      flow(i, j) = q;
      basic[std::size_t(i)][std::size_t(j)] = true;
      a[i] -= q;
      b[j] -= q;
      if (i == m - 1 && j == n - 1) break;
      if (a[i] <= b[j] && i < m - 1)
        ++i;
      else if (j < n - 1)
        ++j;
      else
        ++i;
    }
  }

  // Node ids: rows 0..m-1, columns m..m+n-1.
  std::vector<double> u(static_cast<std::size_t>(m));
  std::vector<double> v(static_cast<std::size_t>(n));
  std::vector<int> parent(static_cast<std::size_t>(m + n));

  const int max_pivots = 200000;
  for (int pivot = 0; pivot < max_pivots; ++pivot) {
    // Potentials from the spanning tree: u[0] = 0, c = u + v on basic cells.
    std::vector<bool> seen(static_cast<std::size_t>(m + n), false);
    std::deque<int> bfs{0};
    seen[0] = true;
    u[0] = 0.0;
    while (!bfs.empty()) {
      const int node = bfs.front();
      bfs.pop_front();
      if (node < m) {
        for (int j = 0; j < n; ++j) {
          if (basic[std::size_t(node)][std::size_t(j)] && !seen[std::size_t(m + j)]) {
            v[std::size_t(j)] = cost(node, j) - u[std::size_t(node)];
            seen[std::size_t(m + j)] = true;
            bfs.push_back(m + j);
          }
        }
      } else {
        const int j = node - m;
        for (int i = 0; i < m; ++i) {
          if (basic[std::size_t(i)][std::size_t(j)] && !seen[std::size_t(i)]) {
            u[std::size_t(i)] = cost(i, j) - v[std::size_t(j)];
            seen[std::size_t(i)] = true;
            bfs.push_back(i);
          }
        }
      }
    }

    // Entering cell: first (row-major) with negative reduced cost.
    int ei = -1, ej = -1;
    for (int i = 0; i < m && ei < 0; ++i)
      for (int j = 0; j < n; ++j) {
        if (basic[std::size_t(i)][std::size_t(j)]) continue;
        if (cost(i, j) - u[std::size_t(i)] - v[std::size_t(j)] < -1e-12) {
          ei = i;
          ej = j;
          break;
        }
      }
    if (ei < 0) break;  // optimal

    // Unique tree path from row ei to column ej.
    std::fill(parent.begin(), parent.end(), -1);
    std::deque<int> q{ei};
    parent[std::size_t(ei)] = ei;
    while (!q.empty()) {
      const int node = q.front();
      q.pop_front();
      if (node == m + ej) break;
      if (node < m) {
        for (int j = 0; j < n; ++j)
          if (basic[std::size_t(node)][std::size_t(j)] &&
              parent[std::size_t(m + j)] < 0) {
            parent[std::size_t(m + j)] = node;
            q.push_back(m + j);
          }
      } else {
        const int j = node - m;
        for (int i = 0; i < m; ++i)
          if (basic[std::size_t(i)][std::size_t(j)] && parent[std::size_t(i)] < 0) {
            parent[std::size_t(i)] = m + j;
            q.push_back(i);
          }
      }
    }

    // Cycle = entering cell + path edges; signs alternate starting with +
    // on the entering cell.
    std::vector<std::pair<int, int>> minus_cells, plus_cells{{ei, ej}};
    int node = m + ej;
    bool minus = true;
    while (node != ei) {
      const int par = parent[std::size_t(node)];
      const int i = node < m ? node : par;
      const int j = node < m ? par - m : node - m;
      (minus ? minus_cells : plus_cells).push_back({i, j});
      minus = !minus;
      node = par;
    }

    double theta = std::numeric_limits<double>::infinity();
    std::pair<int, int> leaving{-1, -1};
    for (const auto& [i, j] : minus_cells) {
      if (flow(i, j) < theta - 1e-15) {
        theta = flow(i, j);
        leaving = {i, j};
      }
    }

    for (const auto& [i, j] : plus_cells) flow(i, j) += theta;
    for (const auto& [i, j] : minus_cells) flow(i, j) -= theta;
    flow(leaving.first, leaving.second) = 0.0;
    basic[std::size_t(leaving.first)][std::size_t(leaving.second)] = false;
    basic[std::size_t(ei)][std::size_t(ej)] = true;
  }

  double total = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) total += flow(i, j) * cost(i, j);
  return total;
}

}  // namespace rdsl
