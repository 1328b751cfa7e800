#include "oracles.hpp"

#include <stdexcept>

#include "crossalpha/optimize.hpp"

namespace oracle {

double grid_search_objective(const crossalpha::PortfolioProblem& prob,
                             double resolution) {
  const int n = prob.size();
  const int n_sectors = prob.sectors.maxCoeff() + 1;
  Matrix a = Matrix::Zero(1 + n_sectors, n);
  for (int i = 0; i < n; ++i) {
    a(0, i) = 1.0;
    a(1 + prob.sectors[i], i) = 1.0;
  }
  // Orthonormal basis of the null space of the equality constraints.
  Eigen::FullPivLU<Matrix> lu(a);
  Matrix kernel = lu.kernel();
  Eigen::HouseholderQR<Matrix> qr(kernel);
  Matrix z = qr.householderQ() * Matrix::Identity(n, kernel.cols());
  const int d = static_cast<int>(kernel.cols());
  if (d > 3) {
    throw std::runtime_error("grid_search_objective: manifold dimension > 3");
  }

  const double radius = std::sqrt(static_cast<double>(n)) * prob.w_max;
  double best = -std::numeric_limits<double>::infinity();
  Vector best_c = Vector::Zero(d);

  auto sweep = [&](const Vector& center, double step, int steps) {
    Vector c = Vector::Zero(d);
    std::vector<int> idx(d, -steps);
    while (true) {
      for (int k = 0; k < d; ++k) c[k] = center[k] + idx[k] * step;
      const Vector w = z * c;
      const bool feasible = w.cwiseAbs().maxCoeff() <= prob.w_max + 1e-12 &&
                            w.cwiseAbs().sum() <= prob.leverage + 1e-12;
      if (feasible) {
        const double obj = prob.objective(w);
        if (obj > best) {
          best = obj;
          best_c = c;
        }
      }
      int k = 0;
      for (; k < d; ++k) {
        if (++idx[k] <= steps) break;
        idx[k] = -steps;
      }
      if (k == d) break;
    }
  };

  sweep(Vector::Zero(d), resolution,
        static_cast<int>(std::ceil(radius / resolution)));
  // Local refinement passes shrink the boundary error of the coarse grid.
  double step = resolution;
  for (int pass = 0; pass < 4; ++pass) {
    step /= 8.0;
    sweep(best_c, step, 10);
  }
  return best;
}

}  // namespace oracle
