#pragma once

#include <cstdint>
#include <vector>

#include "rankreg/dgp.hpp"

namespace rankreg::asymptotics {

// Diagonal normalizations making the estimator errors converge: T^{-1} on
// integrated directions, T^{-1/2} on stationary ones.
struct ScalingScheme {
    Vector d_zr; // m_r entries
    Vector d_zu; // m_u entries
    Vector d_y;  // s entries, c_y leading block at T^{-1}
    int T = 0;

    Vector d_z() const; // stacked [d_zr; d_zu]
};

ScalingScheme scaling(const dgp::CanonicalForm& canon, const dgp::DgpSpec& spec, int T);

// Brownian motion on a grid of N steps: dim x (N+1) with W(0) = 0 and iid
// Gaussian increments of variance cov/N.
Matrix brownian_paths(int dim, int N, std::uint64_t seed, const Matrix& cov);

// f(E, W) = int dE W' (int W W')^{-1} with left-point (Ito) sums.
Matrix functional_f(const Matrix& e_path, const Matrix& w_path);

// Left-point approximations used inside the samplers, exposed for tests.
Matrix ito_integral(const Matrix& e_path, const Matrix& w_path); // int dE W'
Matrix gram_integral(const Matrix& w_path);                      // int W W'

// Demean / detrend a path over [0, 1] (Brownian-bridge style corrections).
Matrix detrend_path(const Matrix& path, dgp::Preproc mode);

struct LongRunTrue {
    Matrix omega;  // long-run covariance of nu
    Matrix delta;  // one-sided long-run covariance of nu
    Matrix gamma0; // contemporaneous covariance of nu
    Matrix c1;     // sum of MA coefficients
};

// Closed-form population long-run quantities of the finite MA part.
LongRunTrue true_long_run(const dgp::DgpSpec& spec);

// Population projector constants of the Theorem-2 correction term.
struct CorrectionProjectors {
    Matrix Xi;             // c_y x (s - c_y)
    Matrix P;              // (m_r - c_r) square
    Matrix O2_dagger;      // (n - c_y) x (s - c_y)
    Matrix Gamma32_dagger; // (n - c_y) x (m_r - c_r)
    Matrix Ey2Pi;          // E y2_Pi y2_Pi'
    Matrix Ez3Pi;          // E z3_Pi z3_Pi'
};

CorrectionProjectors correction_projectors(const dgp::DgpSpec& spec,
                                           const dgp::CanonicalForm& canon);

// Sign of the Xi block in the FM correction; the two theorem displays in
// the source disagree, so both are available.
enum class XiSign { Minus, Plus };

struct LimitOptions {
    int z_proxy_T = 20000;  // sample length for the Z covariance proxy
    int z_proxy_reps = 500; // replications for the Z covariance proxy
    XiSign fm_xi_sign = XiSign::Minus;
    dgp::Preproc preprocessing = dgp::Preproc::None;
    bool with_z = true;     // estimate/draw the stationary-direction blocks
    bool with_fm = false;   // also build B-paths and the FM functionals
};

struct LimitDraw {
    Matrix M_r;        // s x c_r
    Matrix M_u;        // s x c_u
    Matrix N_r;        // c_r x c_u
    Matrix Z_r;        // s x (m_r - c_r)
    Matrix Z_u;        // s x (m_u - c_u)
    Matrix M_r_plus;   // s x c_r (FM)
    Matrix M_u_plus;   // s x c_u (FM)
    Matrix correction;     // s x c_r, Theorem-2 nonstationary correction
    Matrix correction_fm;  // s x c_r, FM analogue
};

struct LimitSample {
    std::vector<LimitDraw> draws;
    CorrectionProjectors proj;
    int resample_count = 0;
};

LimitSample limit_sampler_ols(const dgp::DgpSpec& spec, const dgp::CanonicalForm& canon, int N,
                              int R, std::uint64_t seed, const LimitOptions& opts = {});

// Same path stream as limit_sampler_ols under matched (seed, index), with
// the fully modified functionals filled in.
LimitSample limit_sampler_fm(const dgp::DgpSpec& spec, const dgp::CanonicalForm& canon, int N,
                             int R, std::uint64_t seed, const LimitOptions& opts = {});

// Long-run transfer of the differenced canonical nonstationary coordinates
// evaluated at frequency zero: rows [dz~_{1:2}; dz~^u_1] against eps.
Matrix nonstationary_transfer(const dgp::DgpSpec& spec, const dgp::CanonicalForm& canon);

// CSV serialization of a draw set: one row per draw, flattened matrices with
// header <name>_<i>_<j> (1-based indices). Empty blocks are omitted.
void write_draws_csv(std::ostream& os, const std::vector<LimitDraw>& draws);

// Population E z z' of the stacked stationary regressors (only valid when
// c_r = c_u = 0), for the Kronecker covariance formula.
Matrix stationary_regressor_cov(const dgp::DgpSpec& spec);

} // namespace rankreg::asymptotics
