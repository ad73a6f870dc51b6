#include "glsmul/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace glsmul {

void require_finite(const Matrix& m, std::string_view what) {
  if (!m.allFinite()) {
    throw Error(std::string(what) + ": non-finite entries");
  }
}

bool is_symmetric(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = j + 1; i < m.rows(); ++i) {
      if (std::abs(m(i, j) - m(j, i)) > tol) return false;
    }
  }
  return true;
}

double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

EigPair sym_eig_truncated(const Matrix& m, Index rank) {
  require_finite(m, "sym_eig_truncated");
  if (m.rows() != m.cols() || !is_symmetric(m)) {
    throw Error("sym_eig_truncated: asymmetric input");
  }
  if (rank < 1 || rank > m.rows()) {
    throw Error("sym_eig_truncated: rank out of range");
  }

  Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
  if (solver.info() != Eigen::Success) {
    throw Error("sym_eig_truncated: eigensolver did not converge");
  }
  // Eigen returns ascending order.
  const Vector& values = solver.eigenvalues();
  const Matrix& vectors = solver.eigenvectors();
  const Index n = m.rows();

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return values(a) > values(b); });

  EigPair out;
  out.values.resize(rank);
  out.vectors.resize(n, rank);
  for (Index k = 0; k < rank; ++k) {
    const Index src = order[static_cast<std::size_t>(k)];
    out.values(k) = values(src);
    out.vectors.col(k) = vectors.col(src);
  }
  return out;
}

Matrix solve_spd(const Matrix& a, const Matrix& b) {
  require_finite(a, "solve_spd");
  require_finite(b, "solve_spd");
  if (a.rows() != a.cols() || a.rows() != b.rows()) {
    throw Error("solve_spd: shape mismatch");
  }
  if (!is_symmetric(a, 1e-10 * std::max(1.0, max_abs(a)))) {
    throw Error("solve_spd: not SPD (asymmetric)");
  }
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw Error("solve_spd: not SPD");
  }
  // The Cholesky pivots bound the spectrum: lambda_min <= min(l_ii)^2 and
  // lambda_max >= max(l_ii)^2. Reject numerically singular systems.
  const Vector pivots = llt.matrixLLT().diagonal().cwiseAbs2();
  if (pivots.minCoeff() <= 1e-14 * pivots.maxCoeff()) {
    throw Error("solve_spd: not SPD (numerically singular)");
  }
  return llt.solve(b);
}

double ordered_sum(const double* data, Index n) {
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) acc += data[i];
  return acc;
}

}  // namespace glsmul
