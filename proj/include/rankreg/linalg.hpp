#pragma once

#include <Eigen/Dense>

#include "rankreg/error.hpp"

namespace rankreg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linalg {

// Condition-number threshold shared by every "nonsingular" gate.
inline constexpr double kCondLimit = 1e12;

// Gap below which a truncated SVD is flagged as ill-defined (relative to
// the largest singular value).
inline constexpr double kDegenerateGap = 1e-12;

struct TruncatedSvd {
    Matrix U;            // s x n, orthonormal columns
    Vector singvals;     // n, nonincreasing, > 0
    Matrix V;            // m x n, orthonormal columns
    Matrix residual;     // s x m, A - U S V'
    bool degenerate = false; // sigma_n - sigma_{n+1} below gap threshold

    Matrix S() const { return Matrix(singvals.asDiagonal()); }
};

// 2-norm condition number via SVD. Returns +inf for a zero matrix.
double cond(const Matrix& m);

// Symmetric square root S of an SPD matrix, S*S = m.
Matrix sym_sqrt(const Matrix& m);

// Inverse symmetric square root: sym_sqrt(m)^{-1} without forming the inverse.
Matrix sym_sqrt_inv(const Matrix& m);

// Factor W with W*W' = m^{-1}. `symmetric` picks the symmetric root of
// m^{-1} (the default); otherwise the lower Cholesky factor of m^{-1} is
// returned. Both are valid whitening factors for the same Gram matrix.
enum class GramFactor { Symmetric, Cholesky };
Matrix gram_factor(const Matrix& m, GramFactor kind = GramFactor::Symmetric);

// Best rank-n approximation U S V' of a, with residual. Columns are
// sign-fixed: the largest-magnitude entry of each left singular vector is
// made positive so repeated runs are reproducible.
TruncatedSvd truncated_svd(const Matrix& a, int n);

struct GenEig {
    Matrix vectors;  // m x n, M-orthonormal (v_i' M v_j = delta_ij)
    Vector values;   // n largest generalized eigenvalues, nonincreasing
};

// Largest-n solutions of Q v = lambda M v for symmetric Q and SPD M.
GenEig gen_eig_sym(const Matrix& q, const Matrix& m, int n);

// Weighted pseudo-inverse (O' W^2 O)^{-1} O' W^2; satisfies pinv * O = I.
Matrix weighted_pinv(const Matrix& o, const Matrix& w);

// Inverse of [[A, B], [C, D]] assembled from the block inversion formula
//   [[A^{-1},0],[0,0]] + [-A^{-1}B; I] (D - C A^{-1} B)^{-1} [-C A^{-1}, I].
Matrix block_inverse(const Matrix& a, const Matrix& b, const Matrix& c, const Matrix& d);

// Solve m * x = rhs for SPD m, with the shared condition gate.
Matrix solve_spd(const Matrix& m, const Matrix& rhs, ErrorCode on_singular = ErrorCode::SingularGram);

// m^{-1} for SPD m through solve_spd.
Matrix inv_spd(const Matrix& m, ErrorCode on_singular = ErrorCode::SingularGram);

bool is_symmetric(const Matrix& m, double rel_tol = 1e-10);

} // namespace linalg
} // namespace rankreg
