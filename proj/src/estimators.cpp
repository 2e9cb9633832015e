#include "rankreg/estimators.hpp"

#include <cmath>
#include <limits>

namespace rankreg::estimators {

namespace {

using covest::sample_moment;

SeriesMatrix stack(const SeriesMatrix& a, const SeriesMatrix& b) {
    if (b.dim() == 0) return a;
    if (a.dim() == 0) return b;
    SeriesMatrix out(a.dim() + b.dim(), a.length());
    out.values.topRows(a.dim()) = a.values;
    out.values.bottomRows(b.dim()) = b.values;
    return out;
}

// Split the stacked OLS coefficient into the z_r and z_u blocks.
void split_beta(const Matrix& beta, int m_r, Estimate& est) {
    est.beta_r = beta.leftCols(m_r);
    est.beta_u = beta.rightCols(beta.cols() - m_r);
}

Matrix full_ols_beta(const RegressionSample& sample) {
    SeriesMatrix z = stack(sample.z_r, sample.z_u);
    Matrix gram = sample_moment(z, z);
    return linalg::solve_spd(gram, sample_moment(z, sample.y)).transpose();
}

// beta_u refit for a fixed beta_r: <y - beta_r z_r, z_u><z_u,z_u>^{-1}.
Matrix refit_beta_u(const RegressionSample& sample, const Matrix& beta_r) {
    if (sample.z_u.dim() == 0) return Matrix(sample.y.dim(), 0);
    SeriesMatrix resid(sample.y.values - beta_r * sample.z_r.values);
    Matrix gram = sample_moment(sample.z_u, sample.z_u);
    return linalg::solve_spd(gram, sample_moment(sample.z_u, resid)).transpose();
}

struct FmCore {
    Matrix beta_plus; // s x (m_r + m_u)
    SeriesMatrix dz;  // differences of the stacked regressors
    SeriesMatrix u_hat;
    covest::LongRunSet lr_u_dz;
    covest::LongRunSet lr_dz_dz;
};

FmCore fm_core(const RegressionSample& sample, const covest::KernelConfig& cfg) {
    cfg.validate();
    FmCore core;
    SeriesMatrix z = stack(sample.z_r, sample.z_u);
    core.dz = covest::diff(z);
    // The long-run variance of the differences gates the correction before
    // anything else is inverted.
    core.lr_dz_dz = covest::long_run_set(core.dz, core.dz, cfg);
    if (linalg::cond(core.lr_dz_dz.omega) >= linalg::kCondLimit)
        throw Error(ErrorCode::SingularLongRun, "fm: Omega_{dz,dz} near singular");

    Matrix beta_ols = full_ols_beta(sample);
    core.u_hat = SeriesMatrix(sample.y.values - beta_ols * z.values);
    core.lr_u_dz = covest::long_run_set(core.u_hat, core.dz, cfg);

    Matrix gram = sample_moment(z, z);
    Matrix dz_z = sample_moment(core.dz, z);
    Matrix corr = sample_moment(sample.y, z) - core.lr_u_dz.delta -
                  core.lr_u_dz.omega *
                      linalg::solve_spd(core.lr_dz_dz.omega, dz_z - core.lr_dz_dz.delta,
                                        ErrorCode::SingularLongRun);
    core.beta_plus = linalg::solve_spd(gram, corr.transpose()).transpose();
    return core;
}

void check_sample(const RegressionSample& sample) {
    sample.y.validate("sample.y");
    if (sample.z_r.dim() < 1)
        throw Error(ErrorCode::InvalidSpec, "sample.z_r must be nonempty");
    if (sample.z_r.length() != sample.y.length() ||
        (sample.z_u.dim() > 0 && sample.z_u.length() != sample.y.length()))
        throw Error(ErrorCode::LengthMismatch, "sample blocks disagree on T");
    if (sample.T() <= sample.z_r.dim() + sample.z_u.dim())
        throw Error(ErrorCode::TooShort, "sample: T <= m_r + m_u");
}

} // namespace

const char* to_string(Method m) {
    switch (m) {
        case Method::OLS: return "OLS";
        case Method::RRR: return "RRR";
        case Method::FM_OLS: return "FM_OLS";
        case Method::FM_RRR: return "FM_RRR";
    }
    return "?";
}

RegressionSample make_sample(SeriesMatrix y, SeriesMatrix z_r, SeriesMatrix z_u, Preproc mode) {
    RegressionSample sample;
    sample.y = dgp::detrend(y, mode);
    sample.z_r = dgp::detrend(z_r, mode);
    sample.z_u = z_u.dim() > 0 ? dgp::detrend(z_u, mode) : z_u;
    sample.preprocessing = mode;
    check_sample(sample);
    return sample;
}

Estimate ols(const RegressionSample& sample) {
    check_sample(sample);
    Estimate est;
    est.method = Method::OLS;
    split_beta(full_ols_beta(sample), sample.z_r.dim(), est);
    est.rank = std::min(sample.y.dim(), sample.z_r.dim());
    return est;
}

SeriesMatrix project_out(const SeriesMatrix& a, const SeriesMatrix& b) {
    if (b.dim() == 0) return a;
    if (a.length() != b.length())
        throw Error(ErrorCode::LengthMismatch, "project_out");
    Matrix gram = sample_moment(b, b);
    Matrix coeff = linalg::solve_spd(gram, sample_moment(b, a)).transpose();
    return SeriesMatrix(a.values - coeff * b.values);
}

Estimate rrr(const RegressionSample& sample, int n, linalg::GramFactor wf_factor) {
    check_sample(sample);
    const int s = sample.y.dim(), m_r = sample.z_r.dim();
    if (n < 1 || n > std::min(s, m_r))
        throw Error(ErrorCode::RankTooLarge, "rrr: rank n");

    SeriesMatrix y_pi = project_out(sample.y, sample.z_u);
    SeriesMatrix z_pi = project_out(sample.z_r, sample.z_u);

    Matrix wf = linalg::gram_factor(sample_moment(y_pi, y_pi), wf_factor);
    Matrix wp = linalg::sym_sqrt(sample_moment(z_pi, z_pi));

    Matrix beta_ols_r;
    {
        Estimate base = ols(sample);
        beta_ols_r = base.beta_r;
    }

    // For the Cholesky convention Wf is lower triangular and Wf Wf' is the
    // inverse Gram; the SVD weighting needs Wf acting from the left, which
    // works for any factor since U_n S_n V_n' absorbs the rotation.
    linalg::TruncatedSvd svd = linalg::truncated_svd(wf.transpose() * beta_ols_r * wp, n);

    Estimate est;
    est.method = Method::RRR;
    est.rank = n;
    // Of = (Wf')^{-1} U S  and  Kp' = V' Wp^{-1}.
    est.O_hat = wf.transpose().partialPivLu().solve(Matrix(svd.U * svd.singvals.asDiagonal()));
    est.Gamma_hat = wp.partialPivLu().solve(svd.V);
    est.beta_r = est.O_hat * est.Gamma_hat.transpose();
    est.beta_u = refit_beta_u(sample, est.beta_r);
    est.singvals.assign(svd.singvals.data(), svd.singvals.data() + svd.singvals.size());
    return est;
}

Estimate rrr_geneig(const RegressionSample& sample, int n) {
    check_sample(sample);
    const int s = sample.y.dim(), m_r = sample.z_r.dim();
    if (n < 1 || n > std::min(s, m_r))
        throw Error(ErrorCode::RankTooLarge, "rrr_geneig: rank n");

    SeriesMatrix y_pi = project_out(sample.y, sample.z_u);
    SeriesMatrix z_pi = project_out(sample.z_r, sample.z_u);

    Matrix syy = sample_moment(y_pi, y_pi);
    Matrix szz = sample_moment(z_pi, z_pi);
    Matrix szy = sample_moment(z_pi, y_pi);
    Matrix q = szy * linalg::solve_spd(syy, szy.transpose());

    linalg::GenEig ge = linalg::gen_eig_sym(0.5 * (q + q.transpose()), szz, n);

    Estimate est;
    est.method = Method::RRR;
    est.rank = n;
    est.Gamma_hat = ge.vectors; // M-orthonormal: Kp' <z,z> Kp = I
    // Of = coefficients of regressing y_pi onto Kp' z_pi; the Gram of the
    // transformed regressor is the identity by the normalization above.
    est.O_hat = szy.transpose() * est.Gamma_hat;
    est.beta_r = est.O_hat * est.Gamma_hat.transpose();
    est.beta_u = refit_beta_u(sample, est.beta_r);
    est.singvals.resize(n);
    for (int i = 0; i < n; ++i)
        est.singvals[i] = ge.values(i) > 0 ? std::sqrt(ge.values(i)) : 0.0;
    return est;
}

Estimate fm_ols(const RegressionSample& sample, const covest::KernelConfig& cfg) {
    check_sample(sample);
    FmCore core = fm_core(sample, cfg);
    Estimate est;
    est.method = Method::FM_OLS;
    split_beta(core.beta_plus, sample.z_r.dim(), est);
    est.rank = std::min(sample.y.dim(), sample.z_r.dim());
    return est;
}

Estimate fm_rrr(const RegressionSample& sample, int n, const covest::KernelConfig& cfg) {
    check_sample(sample);
    const int s = sample.y.dim(), m_r = sample.z_r.dim();
    if (n < 1 || n > std::min(s, m_r))
        throw Error(ErrorCode::RankTooLarge, "fm_rrr: rank n");

    FmCore core = fm_core(sample, cfg);
    SeriesMatrix y_pi = project_out(sample.y, sample.z_u);
    SeriesMatrix dy_pi = covest::diff(y_pi);

    // Wff = (inner)^{-1/2}; the sample version of the inner matrix is only
    // symmetric in population, so it is symmetrized before the root. Both
    // correction terms use the dz-leading one-sided sum: the lag convention
    // of the mirrored term must match the first, otherwise the sum fails to
    // telescope and the inner matrix picks up an O(1) asymmetry.
    Matrix delta_dz_dy = covest::long_run_set(core.dz, dy_pi, cfg).delta;
    Matrix inv_omega_dz_u =
        linalg::solve_spd(core.lr_dz_dz.omega, core.lr_u_dz.omega.transpose(),
                          ErrorCode::SingularLongRun);
    Matrix dz_ypi = sample_moment(core.dz, y_pi);
    Matrix half = inv_omega_dz_u.transpose() * (dz_ypi - delta_dz_dy);
    Matrix inner = sample_moment(y_pi, y_pi) - half - half.transpose();
    inner = 0.5 * (inner + inner.transpose());
    Matrix wff;
    try {
        wff = linalg::sym_sqrt_inv(inner);
    } catch (const Error&) {
        throw Error(ErrorCode::WffNotPositiveDefinite, "fm_rrr: Wff inner matrix");
    }

    Matrix zr_gram_root = linalg::sym_sqrt(sample_moment(sample.z_r, sample.z_r));
    Matrix beta_plus_r = core.beta_plus.leftCols(m_r);
    linalg::TruncatedSvd svd = linalg::truncated_svd(wff * beta_plus_r * zr_gram_root, n);

    Estimate est;
    est.method = Method::FM_RRR;
    est.rank = n;
    est.O_hat = linalg::solve_spd(wff, Matrix(svd.U * svd.singvals.asDiagonal()),
                                  ErrorCode::WffNotPositiveDefinite);
    est.Gamma_hat = zr_gram_root.partialPivLu().solve(svd.V);
    est.beta_r = est.O_hat * est.Gamma_hat.transpose();
    est.singvals.assign(svd.singvals.data(), svd.singvals.data() + svd.singvals.size());

    // beta_u^+ adjusted by the same correction identity as the OLS pair:
    // beta_rrr_u - beta_ols_u = (beta_ols_r - beta_rrr_r)<z_r,z_u><z_u,z_u>^{-1}
    if (sample.z_u.dim() > 0) {
        Matrix gram_u = sample_moment(sample.z_u, sample.z_u);
        Matrix cross = sample_moment(sample.z_r, sample.z_u);
        est.beta_u = core.beta_plus.rightCols(sample.z_u.dim()) +
                     (beta_plus_r - est.beta_r) *
                         linalg::solve_spd(gram_u, cross.transpose()).transpose();
    } else {
        est.beta_u = Matrix(s, 0);
    }
    return est;
}

NormalizedFactors normalize_factors(const Matrix& O, const Matrix& Gamma) {
    const int m = static_cast<int>(Gamma.rows());
    const int n = static_cast<int>(Gamma.cols());
    if (n < 1 || m < n)
        throw Error(ErrorCode::SelectorSingular, "normalize_factors: bad factor shapes");

    // Pivoted QR on Gamma' picks the n best-conditioned rows of Gamma.
    Eigen::ColPivHouseholderQR<Matrix> qr(Gamma.transpose());
    Matrix sel = Matrix::Zero(m, n);
    for (int i = 0; i < n; ++i)
        sel(qr.colsPermutation().indices()(i), i) = 1.0;

    Matrix a = sel.transpose() * Gamma; // n x n
    if (linalg::cond(a) >= 1e10)
        throw Error(ErrorCode::SelectorSingular, "normalize_factors: selector block ill conditioned");

    NormalizedFactors out;
    out.selector = sel;
    out.Gamma = Gamma * a.partialPivLu().solve(Matrix::Identity(n, n));
    out.O = O * a.transpose();
    return out;
}

double beta_u_identity_residual(const RegressionSample& sample, const Estimate& restricted,
                                const Estimate& unrestricted) {
    if (sample.z_u.dim() == 0) return std::numeric_limits<double>::quiet_NaN();
    Matrix gram_u = sample_moment(sample.z_u, sample.z_u);
    Matrix cross = sample_moment(sample.z_r, sample.z_u);
    Matrix expected = (unrestricted.beta_r - restricted.beta_r) *
                      linalg::solve_spd(gram_u, cross.transpose()).transpose();
    return ((restricted.beta_u - unrestricted.beta_u) - expected).cwiseAbs().maxCoeff();
}

} // namespace rankreg::estimators
