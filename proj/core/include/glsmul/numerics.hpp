#ifndef GLSMUL_NUMERICS_HPP_
#define GLSMUL_NUMERICS_HPP_

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace glsmul {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base class for every error raised by the library. Messages carry a short
/// keyword ("asymmetric", "not SPD", ...) that callers and tests match on.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Eigenpairs of a symmetric matrix, values sorted in descending order and
/// vectors stored as orthonormal columns.
struct EigPair {
  Vector values;
  Matrix vectors;
};

/// Throws Error("<what>: non-finite ...") if any entry is NaN or infinite.
void require_finite(const Matrix& m, std::string_view what);

bool is_symmetric(const Matrix& m, double tol = 1e-10);

/// Largest absolute entry, 0 for an empty matrix.
double max_abs(const Matrix& m);

/// Top-`rank` eigenpairs of a symmetric matrix. The full decomposition is
/// computed (tridiagonal QL) and then truncated.
EigPair sym_eig_truncated(const Matrix& m, Index rank);

/// Solves A X = B for symmetric positive definite A by Cholesky.
Matrix solve_spd(const Matrix& a, const Matrix& b);

/// Sum with a fixed left-to-right order.
double ordered_sum(const double* data, Index n);

}  // namespace glsmul

#endif  // GLSMUL_NUMERICS_HPP_
