// Rectangular linear assignment by shortest augmenting paths (the O(n^2 m)
// potentials formulation of the Hungarian method).

#include <limits>

#include "cpwopt/error.hpp"
#include "cpwopt/evaluation.hpp"

namespace cpwopt {

std::vector<Index> max_assignment(const Eigen::MatrixXd& score) {
  const auto n = static_cast<std::size_t>(score.rows());
  const auto m = static_cast<std::size_t>(score.cols());
  if (n > m) throw ShapeError("assignment needs at least as many columns as rows");
  if (n == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();
  // Minimize cost = -score. Arrays are 1-based with slot 0 as the virtual
  // column.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = -score(static_cast<Eigen::Index>(i0 - 1),
                                  static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
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
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> out(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) out[p[j] - 1] = j - 1;
  }
  return out;
}

}  // namespace cpwopt
