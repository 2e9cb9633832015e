#pragma once

#include <cstdint>
#include <vector>

#include "rankreg/series.hpp"

namespace rankreg::dgp {

enum class NoiseKind { Gaussian, Uniform };
enum class Preproc { None, Demean, Detrend };

// Full description of the data generating process
//   y_t = b_r z_t^r + b_u z_t^u + Lambda eps_t
// where the regressors are driven by the finite moving average
//   nu_t = sum_{j=1}^{q} C_j eps_{t-j},   nu_t = [v_t; w_t],
// the leading c_r (c_u) coordinates of H_r' z^r (H_u' z^u) are partial sums
// of the corresponding rows of nu and the remaining ones equal them directly.
struct DgpSpec {
    int s = 0, m_r = 0, m_u = 0, k = 0;
    int c_r = 0, c_u = 0; // number of integrated directions
    int n = 0;            // rank of b_r
    Matrix Lambda;        // s x k, full row rank
    Matrix Sigma;         // k x k SPD noise variance
    Matrix b_r;           // s x m_r, rank exactly n
    Matrix b_u;           // s x m_u
    Matrix H_r;           // m_r x m_r orthogonal, first c_r columns span the integrated directions
    Matrix H_u;           // m_u x m_u orthogonal
    std::vector<Matrix> ma_coeffs; // C_1..C_q, each (m_r+m_u) x k
    NoiseKind noise = NoiseKind::Gaussian;
    int burn_in = 0;      // stationary-coordinate warm-up length

    int q() const { return static_cast<int>(ma_coeffs.size()); }
    Matrix c1() const; // sum of the MA coefficients

    // Checks every structural invariant (orthogonality, ranks, SPD-ness,
    // full-row-rank c(1), and the stationary-direction covariance condition
    // on a pilot sample). Throws InvalidSpec on the first violation.
    void validate() const;
};

struct SimOutput {
    SeriesMatrix y;     // s x T
    SeriesMatrix z_r;   // m_r x T
    SeriesMatrix z_u;   // m_u x T
    SeriesMatrix eps;   // k x T
};

// Coordinate separation of Theorem-1 type: nonsingular T_y, T_zr, T_zu such
// that T_y b_r T_zr^{-1} has the pattern [[I_{c_y}, 0, 0], [0, 0, O2 Gamma32']].
struct CanonicalForm {
    Matrix T_y;        // s x s
    Matrix T_zr;       // m_r x m_r
    Matrix T_zu;       // m_u x m_u
    int c_y = 0;       // rank of b_r H_{r,par}
    Matrix b_tilde_r;  // the canonical pattern, s x m_r
    Matrix O2;         // (s - c_y) x (n - c_y)
    Matrix Gamma32;    // (m_r - c_r) x (n - c_y), normalized so Gamma32' S_p22 = I
};

// Deterministic in (spec, T, seed); prefix-consistent in T.
SimOutput simulate(const DgpSpec& spec, int T, std::uint64_t seed);

CanonicalForm canonical_form(const DgpSpec& spec);

// VAR(1) special case  dX_t = diag(0, Upsilon22) X_{t-1} + W_t,  X_0 = 0,
// mapped to (y, z_r) = (dX_t, X_{t-1}). The AR dynamics of the stationary
// block are expanded into the MA list, truncated once the coefficients fall
// below machine noise (cap 50 lags).
DgpSpec make_anderson_var1(const Matrix& upsilon22, const Matrix& sigma_w, int c_y_block);

// Johansen VECM  dX_t = alpha beta' X_{t-1} + sum_i Phi_i dX_{t-i} + eps_t,
// mapped to y = dX_t, z^r = X_{t-1}, z^u = [dX_{t-1}', ..., dX_{t-L}']'.
DgpSpec make_johansen_vecm(const Matrix& alpha, const Matrix& beta,
                           const std::vector<Matrix>& lag_coeffs, const Matrix& sigma);

// Seeded random spec with rank(b_r H_{r,par}) = c_y exactly. c_y >= 1 here;
// the general builder below accepts c_y = 0 as well.
DgpSpec make_cy_positive_spec(int s, int m_r, int m_u, int c_r, int c_u, int n, int c_y,
                              std::uint64_t seed);

// Shared randomized construction (used by presets and tests); c_y may be 0,
// and purely stationary specs are obtained with c_r = c_u = c_y = 0.
DgpSpec make_random_spec(int s, int m_r, int m_u, int c_r, int c_u, int n, int c_y,
                         std::uint64_t seed);

// Demean / detrend against d_t = [1, t]', t = 1..T. Mode None is identity.
SeriesMatrix detrend(const SeriesMatrix& a, Preproc mode);

// Population second moments of the regressor coordinates implied by the MA
// part: E nu_t nu_{t-j}' for the stacked [v; w] process (exact finite sums).
Matrix nu_autocov(const DgpSpec& spec, int j);

} // namespace rankreg::dgp
