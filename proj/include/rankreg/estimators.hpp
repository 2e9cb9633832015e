#pragma once

#include <vector>

#include "rankreg/covest.hpp"
#include "rankreg/dgp.hpp"

namespace rankreg::estimators {

using dgp::Preproc;

enum class Method { OLS, RRR, FM_OLS, FM_RRR };
const char* to_string(Method m);

struct RegressionSample {
    SeriesMatrix y;   // s x T
    SeriesMatrix z_r; // m_r x T
    SeriesMatrix z_u; // m_u x T, m_u may be 0
    Preproc preprocessing = Preproc::None;

    int T() const { return y.length(); }
};

// Bundles the observation blocks and applies the requested preprocessing to
// every series. Throws on length mismatches or T <= m_r + m_u.
RegressionSample make_sample(SeriesMatrix y, SeriesMatrix z_r, SeriesMatrix z_u,
                             Preproc mode = Preproc::None);

struct Estimate {
    Method method = Method::OLS;
    Matrix beta_r;               // s x m_r
    Matrix beta_u;               // s x m_u
    Matrix O_hat;                // s x n (empty for the unrestricted methods)
    Matrix Gamma_hat;            // m_r x n
    std::vector<double> singvals;
    int rank = 0;                // n for the restricted methods, min(s, m_r) otherwise
};

// beta = <y, z><z, z>^{-1} over the stacked regressor z = [z_r; z_u].
Estimate ols(const RegressionSample& sample);

// Residuals of a regression of `a` onto `b`; identity when b is empty.
SeriesMatrix project_out(const SeriesMatrix& a, const SeriesMatrix& b);

// Rank-restricted estimator through the weighted truncated SVD
//   Wf beta_ols_r Wp = U S V' + R,  Of = Wf^{-1} U S,  Kp' = V' Wp^{-1},
// with Wf Wf' = <y_pi, y_pi>^{-1} and Wp = <z_pi, z_pi>^{1/2}. The factor
// convention for Wf is selectable; the estimator itself does not depend on it.
Estimate rrr(const RegressionSample& sample, int n,
             linalg::GramFactor wf_factor = linalg::GramFactor::Symmetric);

// Same estimator through the generalized eigenvalue problem
//   <z_pi,z_pi> Kp S^2 = <z_pi,y_pi><y_pi,y_pi>^{-1}<y_pi,z_pi> Kp.
Estimate rrr_geneig(const RegressionSample& sample, int n);

// Fully modified OLS with kernel long-run corrections (z_0 := 0 convention
// for the differences).
Estimate fm_ols(const RegressionSample& sample, const covest::KernelConfig& cfg);

// Fully modified RRR: rank truncation of the FM-OLS coefficient under the
// Wff weighting; the inner matrix of Wff is symmetrized before the inverse
// square root.
Estimate fm_rrr(const RegressionSample& sample, int n, const covest::KernelConfig& cfg);

struct NormalizedFactors {
    Matrix O;        // O * (Gamma' S_p)
    Matrix Gamma;    // Gamma (S_p' Gamma)^{-1}, satisfies Gamma' S_p = I
    Matrix selector; // S_p, m x n columns of the identity
};

// Selector normalization Gamma' S_p = I_n with pivoted row selection.
NormalizedFactors normalize_factors(const Matrix& O, const Matrix& Gamma);

// Max-abs residual of the exact beta_u correction identity between two fits
// of the same sample (NaN when m_u = 0, where the identity is vacuous).
double beta_u_identity_residual(const RegressionSample& sample, const Estimate& restricted,
                                const Estimate& unrestricted);

} // namespace rankreg::estimators
