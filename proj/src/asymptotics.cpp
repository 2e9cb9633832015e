#include "rankreg/asymptotics.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <ostream>

#include "rankreg/covest.hpp"
#include "rankreg/rng.hpp"

namespace rankreg::asymptotics {

namespace {

constexpr int kMaxResample = 64;

Matrix spd_half(const Matrix& m, ErrorCode code, const char* who) {
    if (m.size() == 0) return m;
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw Error(code, who);
    return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
           es.eigenvectors().transpose();
}

// Covariance square root tolerating an estimated, possibly rank-deficient input.
Matrix cov_half_psd(const Matrix& m) {
    if (m.size() == 0) return m;
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
    Vector ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

// N^{-1} sum_{i<N} a_i b_i' (left-point version of int A B').
Matrix cross_gram(const Matrix& a_path, const Matrix& b_path) {
    const Eigen::Index N = a_path.cols() - 1;
    Matrix out = Matrix::Zero(a_path.rows(), b_path.rows());
    for (Eigen::Index i = 0; i < N; ++i)
        out.noalias() += a_path.col(i) * b_path.col(i).transpose();
    return out / static_cast<double>(N);
}

} // namespace

Vector ScalingScheme::d_z() const {
    Vector out(d_zr.size() + d_zu.size());
    if (out.size() > 0) out << d_zr, d_zu;
    return out;
}

ScalingScheme scaling(const dgp::CanonicalForm& canon, const dgp::DgpSpec& spec, int T) {
    if (T < 2) throw Error(ErrorCode::TooShort, "scaling: T < 2");
    const double inv_t = 1.0 / static_cast<double>(T);
    const double inv_rt = 1.0 / std::sqrt(static_cast<double>(T));

    ScalingScheme out;
    out.T = T;
    auto fill = [&](int total, int integrated) {
        Vector v(total);
        for (int i = 0; i < total; ++i) v(i) = i < integrated ? inv_t : inv_rt;
        return v;
    };
    out.d_zr = fill(spec.m_r, spec.c_r);
    out.d_zu = fill(spec.m_u, spec.c_u);
    out.d_y = fill(spec.s, canon.c_y);
    return out;
}

Matrix brownian_paths(int dim, int N, std::uint64_t seed, const Matrix& cov) {
    if (N < 10) throw Error(ErrorCode::InvalidSpec, "brownian_paths: N < 10");
    if (cov.rows() != dim || cov.cols() != dim)
        throw Error(ErrorCode::LengthMismatch, "brownian_paths: cov shape");
    Matrix half = spd_half(cov, ErrorCode::NotPositiveDefinite, "brownian_paths: cov");

    NormalSampler rng(seed);
    Matrix path(dim, N + 1);
    path.col(0).setZero();
    const double step = 1.0 / std::sqrt(static_cast<double>(N));
    Vector g(dim);
    for (int i = 1; i <= N; ++i) {
        for (int d = 0; d < dim; ++d) g(d) = rng.normal();
        path.col(i) = path.col(i - 1) + step * (half * g);
    }
    return path;
}

Matrix ito_integral(const Matrix& e_path, const Matrix& w_path) {
    if (e_path.cols() != w_path.cols())
        throw Error(ErrorCode::LengthMismatch, "ito_integral: grid mismatch");
    const Eigen::Index N = e_path.cols() - 1;
    Matrix out = Matrix::Zero(e_path.rows(), w_path.rows());
    for (Eigen::Index i = 0; i < N; ++i)
        out.noalias() += (e_path.col(i + 1) - e_path.col(i)) * w_path.col(i).transpose();
    return out;
}

Matrix gram_integral(const Matrix& w_path) {
    return cross_gram(w_path, w_path);
}

Matrix functional_f(const Matrix& e_path, const Matrix& w_path) {
    if (w_path.rows() == 0) return Matrix(e_path.rows(), 0);
    if (e_path.cols() != w_path.cols())
        throw Error(ErrorCode::LengthMismatch, "functional_f: grid mismatch");
    Matrix gram = gram_integral(w_path);
    if (linalg::cond(gram) >= linalg::kCondLimit)
        throw Error(ErrorCode::SingularGram, "functional_f: int W W' near singular");
    return gram.ldlt().solve(ito_integral(e_path, w_path).transpose()).transpose();
}

Matrix detrend_path(const Matrix& path, dgp::Preproc mode) {
    if (mode == dgp::Preproc::None) return path;
    const Eigen::Index N = path.cols() - 1;
    Vector mean = Vector::Zero(path.rows());
    Vector slope = Vector::Zero(path.rows());
    for (Eigen::Index i = 0; i < N; ++i) {
        mean += path.col(i);
        slope += (static_cast<double>(i) / static_cast<double>(N)) * path.col(i);
    }
    mean /= static_cast<double>(N);
    slope /= static_cast<double>(N);

    Matrix out = path;
    if (mode == dgp::Preproc::Demean) {
        out.colwise() -= mean;
        return out;
    }
    for (Eigen::Index i = 0; i <= N; ++i) {
        const double w = static_cast<double>(i) / static_cast<double>(N);
        out.col(i) -= (4.0 - 6.0 * w) * mean + (12.0 * w - 6.0) * slope;
    }
    return out;
}

LongRunTrue true_long_run(const dgp::DgpSpec& spec) {
    LongRunTrue out;
    out.c1 = spec.c1();
    out.gamma0 = dgp::nu_autocov(spec, 0);
    out.omega = out.c1 * spec.Sigma * out.c1.transpose();
    const int m = spec.m_r + spec.m_u;
    out.delta = Matrix::Zero(m, m);
    for (int j = 0; j <= spec.q() - 1; ++j)
        out.delta += dgp::nu_autocov(spec, j);
    return out;
}

CorrectionProjectors correction_projectors(const dgp::DgpSpec& spec,
                                           const dgp::CanonicalForm& canon) {
    const int s = spec.s, m_r = spec.m_r, m_u = spec.m_u;
    const int c_r = spec.c_r, c_u = spec.c_u, c_y = canon.c_y;
    const int stat_r = m_r - c_r, stat_u = m_u - c_u;

    Matrix gamma0 = dgp::nu_autocov(spec, 0);
    // z~3 rows sit at [c_r, m_r) of nu; z~2^u rows at [m_r + c_u, m_r + m_u).
    Matrix ez3 = gamma0.block(c_r, c_r, stat_r, stat_r);
    Matrix ez3_zu = gamma0.block(c_r, m_r + c_u, stat_r, stat_u);
    Matrix ezu = gamma0.block(m_r + c_u, m_r + c_u, stat_u, stat_u);

    CorrectionProjectors out;
    if (stat_u > 0) {
        if (linalg::cond(ezu) >= linalg::kCondLimit)
            throw Error(ErrorCode::SingularMoment, "correction_projectors: E z2u z2u'");
        out.Ez3Pi = ez3 - ez3_zu * ezu.ldlt().solve(ez3_zu.transpose());
    } else {
        out.Ez3Pi = ez3;
    }

    Matrix tyl = canon.T_y * spec.Lambda; // s x k
    Matrix tyl2 = tyl.bottomRows(s - c_y);
    Matrix b23 = canon.O2 * canon.Gamma32.transpose(); // (s-c_y) x stat_r
    Matrix eyy = b23 * ez3 * b23.transpose() + tyl2 * spec.Sigma * tyl2.transpose();
    if (stat_u > 0) {
        Matrix eyu = b23 * ez3_zu;
        out.Ey2Pi = eyy - eyu * ezu.ldlt().solve(eyu.transpose());
    } else {
        out.Ey2Pi = eyy;
    }
    if (linalg::cond(out.Ey2Pi) >= linalg::kCondLimit)
        throw Error(ErrorCode::SingularMoment, "correction_projectors: E y2Pi y2'");

    // Xi = -[I,0] T_y Lambda E eps y2' (E y2Pi y2')^{-1}; the only nonzero
    // piece of E eps y2' is Sigma (T_y Lambda)_2'.
    Matrix ey_inv = linalg::inv_spd(out.Ey2Pi, ErrorCode::SingularMoment);
    out.Xi = -(tyl.topRows(c_y) * spec.Sigma * tyl2.transpose()) * ey_inv;

    const int n2 = spec.n - c_y;
    if (n2 > 0) {
        Matrix normal = canon.O2.transpose() * ey_inv * canon.O2;
        if (linalg::cond(normal) >= linalg::kCondLimit)
            throw Error(ErrorCode::SingularMoment, "correction_projectors: O2 normal matrix");
        out.O2_dagger = normal.ldlt().solve(canon.O2.transpose() * ey_inv);

        Matrix gnormal = canon.Gamma32.transpose() * out.Ez3Pi * canon.Gamma32;
        if (linalg::cond(gnormal) >= linalg::kCondLimit)
            throw Error(ErrorCode::SingularMoment, "correction_projectors: Gamma32 normal matrix");
        out.Gamma32_dagger = gnormal.ldlt().solve(canon.Gamma32.transpose());
        out.P = Matrix::Identity(stat_r, stat_r) - out.Ez3Pi * canon.Gamma32 * out.Gamma32_dagger;
    } else {
        out.O2_dagger = Matrix(0, s - c_y);
        out.Gamma32_dagger = Matrix(0, stat_r);
        out.P = Matrix::Identity(stat_r, stat_r);
    }
    return out;
}

Matrix nonstationary_transfer(const dgp::DgpSpec& spec, const dgp::CanonicalForm& canon) {
    Matrix c1 = spec.c1();
    Matrix out(spec.c_r + spec.c_u, spec.k);
    if (spec.c_r > 0) {
        Matrix rot = (canon.T_zr * spec.H_r).leftCols(spec.c_r); // m_r x c_r
        out.topRows(spec.c_r) = (rot * c1.topRows(spec.c_r)).topRows(spec.c_r);
    }
    if (spec.c_u > 0) {
        Matrix rot = (canon.T_zu * spec.H_u).leftCols(spec.c_u); // m_u x c_u
        out.bottomRows(spec.c_u) = (rot * c1.middleRows(spec.m_r, spec.c_u)).topRows(spec.c_u);
    }
    return out;
}

Matrix stationary_regressor_cov(const dgp::DgpSpec& spec) {
    if (spec.c_r != 0 || spec.c_u != 0)
        throw Error(ErrorCode::InvalidSpec,
                    "stationary_regressor_cov: spec has integrated directions");
    Matrix gamma0 = dgp::nu_autocov(spec, 0);
    const int m = spec.m_r + spec.m_u;
    Matrix hblk = Matrix::Zero(m, m);
    hblk.topLeftCorner(spec.m_r, spec.m_r) = spec.H_r;
    if (spec.m_u > 0) hblk.bottomRightCorner(spec.m_u, spec.m_u) = spec.H_u;
    return hblk * gamma0 * hblk.transpose();
}

namespace {

struct SamplerContext {
    const dgp::DgpSpec& spec;
    const dgp::CanonicalForm& canon;
    CorrectionProjectors proj;
    Matrix tyl;     // T_y Lambda
    Matrix ctil;    // nonstationary transfer, (c_r + c_u) x k
    Matrix fm_bmat; // T_y (Lambda - Omega_{u,dn} Omega_{dn,dn}^{-1} ctil)
    Matrix io2;     // I - O2 O2_dagger
    Matrix lf_rrr;  // [-Xi; I]
    Matrix lf_fm;   // Xi sign per option
    // Z-draw machinery: either the closed Kronecker form (purely stationary)
    // or a proxy covariance square root of the stacked statistic.
    bool z_closed_form = false;
    Matrix z_b_half;      // (T_y Lambda Sigma Lambda' T_y')^{1/2}
    Matrix z_a_half;      // ((E z~ z~')^{-1})^{1/2}
    Matrix ez3_zu_coeff;  // E z~3 z~2u' (E z~2u z~2u')^{-1}
    Matrix z_cov_half;    // proxy route
};

// Covariance of the stacked (vec Z_r, vec Z_u) statistic at a long proxy
// length, averaged over replications.
Matrix z_statistic_cov(const dgp::DgpSpec& spec, const dgp::CanonicalForm& canon,
                       const Matrix& tyl, std::uint64_t seed, const LimitOptions& opts) {
    const int s = spec.s;
    const int stat_r = spec.m_r - spec.c_r, stat_u = spec.m_u - spec.c_u;
    const int dim = s * (stat_r + stat_u);
    if (dim == 0) return Matrix(0, 0);

    Matrix acc = Matrix::Zero(dim, dim);
    for (int rep = 0; rep < opts.z_proxy_reps; ++rep) {
        dgp::SimOutput sim =
            dgp::simulate(spec, opts.z_proxy_T, derive_seed(seed ^ 0xA5A5A5A5ULL, rep));
        const double rt = std::sqrt(static_cast<double>(opts.z_proxy_T));

        SeriesMatrix noise(tyl * sim.eps.values);
        SeriesMatrix z3((canon.T_zr * sim.z_r.values).bottomRows(stat_r));
        SeriesMatrix z2u(stat_u, opts.z_proxy_T);
        if (stat_u > 0)
            z2u.values = (canon.T_zu * sim.z_u.values).bottomRows(stat_u);

        Vector v(dim);
        int off = 0;
        if (stat_r > 0) {
            SeriesMatrix z3p = z3;
            if (stat_u > 0) {
                Matrix g = covest::sample_moment(z2u, z2u);
                Matrix coeff = g.ldlt().solve(covest::sample_moment(z2u, z3)).transpose();
                z3p.values = z3.values - coeff * z2u.values;
            }
            Matrix g3 = covest::sample_moment(z3p, z3p);
            Matrix stat = rt * g3.ldlt().solve(covest::sample_moment(z3p, noise)).transpose();
            for (int j = 0; j < stat.cols(); ++j)
                for (int i = 0; i < s; ++i) v(off++) = stat(i, j);
        }
        if (stat_u > 0) {
            Matrix gu = covest::sample_moment(z2u, z2u);
            Matrix stat = rt * gu.ldlt().solve(covest::sample_moment(z2u, noise)).transpose();
            for (int j = 0; j < stat.cols(); ++j)
                for (int i = 0; i < s; ++i) v(off++) = stat(i, j);
        }
        acc.noalias() += v * v.transpose();
    }
    return acc / static_cast<double>(opts.z_proxy_reps);
}

SamplerContext make_context(const dgp::DgpSpec& spec, const dgp::CanonicalForm& canon,
                            std::uint64_t seed, const LimitOptions& opts) {
    SamplerContext ctx{spec, canon, {}, {}, {}, {}, {}, {}, {}, false, {}, {}, {}, {}};
    const int s = spec.s, c_y = canon.c_y;
    if (spec.Lambda.norm() == 0.0) {
        // Noiseless diagnostic case: every limit functional is exactly zero
        // and the projector moments are singular by construction.
        ctx.proj.Xi = Matrix::Zero(c_y, s - c_y);
        ctx.proj.O2_dagger = Matrix::Zero(spec.n - c_y, s - c_y);
        ctx.proj.Gamma32_dagger = Matrix::Zero(spec.n - c_y, spec.m_r - spec.c_r);
        ctx.proj.P = Matrix::Identity(spec.m_r - spec.c_r, spec.m_r - spec.c_r);
        ctx.proj.Ey2Pi = Matrix::Zero(s - c_y, s - c_y);
        ctx.proj.Ez3Pi = Matrix::Zero(spec.m_r - spec.c_r, spec.m_r - spec.c_r);
    } else {
        ctx.proj = correction_projectors(spec, canon);
    }
    ctx.tyl = canon.T_y * spec.Lambda;
    ctx.ctil = nonstationary_transfer(spec, canon);

    if (ctx.ctil.rows() > 0 && spec.Lambda.norm() > 0.0) {
        Matrix omega_nn = ctx.ctil * spec.Sigma * ctx.ctil.transpose();
        Matrix omega_u_n = spec.Lambda * spec.Sigma * ctx.ctil.transpose();
        Matrix rho =
            linalg::solve_spd(omega_nn, omega_u_n.transpose(), ErrorCode::SingularMoment)
                .transpose();
        ctx.fm_bmat = canon.T_y * (spec.Lambda - rho * ctx.ctil);
    } else {
        ctx.fm_bmat = ctx.tyl;
    }

    ctx.io2 = Matrix::Identity(s - c_y, s - c_y);
    if (ctx.proj.O2_dagger.rows() > 0)
        ctx.io2 -= canon.O2 * ctx.proj.O2_dagger;

    ctx.lf_rrr = Matrix(s, s - c_y);
    ctx.lf_rrr.topRows(c_y) = -ctx.proj.Xi;
    ctx.lf_rrr.bottomRows(s - c_y) = Matrix::Identity(s - c_y, s - c_y);
    ctx.lf_fm = ctx.lf_rrr;
    if (opts.fm_xi_sign == XiSign::Plus)
        ctx.lf_fm.topRows(c_y) = ctx.proj.Xi;

    if (opts.with_z) {
        const int stat_r = spec.m_r - spec.c_r, stat_u = spec.m_u - spec.c_u;
        if (stat_r + stat_u > 0) {
            if (spec.c_r == 0 && spec.c_u == 0) {
                ctx.z_closed_form = true;
                const int m = spec.m_r + spec.m_u;
                Matrix tblk = Matrix::Zero(m, m);
                tblk.topLeftCorner(spec.m_r, spec.m_r) = canon.T_zr;
                if (spec.m_u > 0) tblk.bottomRightCorner(spec.m_u, spec.m_u) = canon.T_zu;
                Matrix ezz = tblk * stationary_regressor_cov(spec) * tblk.transpose();
                if (spec.m_u > 0) {
                    Matrix e3u = ezz.topRightCorner(spec.m_r, spec.m_u);
                    Matrix euu = ezz.bottomRightCorner(spec.m_u, spec.m_u);
                    ctx.ez3_zu_coeff = euu.ldlt().solve(e3u.transpose()).transpose();
                } else {
                    ctx.ez3_zu_coeff = Matrix(spec.m_r, 0);
                }
                ctx.z_a_half = spd_half(linalg::inv_spd(ezz, ErrorCode::SingularMoment),
                                        ErrorCode::SingularMoment, "limit sampler: (E zz')^{-1}");
                ctx.z_b_half = spd_half(ctx.tyl * spec.Sigma * ctx.tyl.transpose(),
                                        ErrorCode::SingularMoment, "limit sampler: LSL'");
            } else {
                ctx.z_cov_half = cov_half_psd(z_statistic_cov(spec, canon, ctx.tyl, seed, opts));
            }
        }
    }
    return ctx;
}

LimitDraw one_draw(const SamplerContext& ctx, int N, std::uint64_t draw_seed,
                   const LimitOptions& opts, bool with_fm) {
    const dgp::DgpSpec& spec = ctx.spec;
    const int s = spec.s, c_r = spec.c_r, c_u = spec.c_u, c_y = ctx.canon.c_y;
    const int stat_r = spec.m_r - c_r, stat_u = spec.m_u - c_u;

    Matrix w = brownian_paths(spec.k, N, draw_seed, spec.Sigma);
    w = detrend_path(w, opts.preprocessing);

    Matrix e_y = ctx.tyl * w;
    Matrix w_z = ctx.ctil.topRows(c_r) * w;
    Matrix w_u = ctx.ctil.bottomRows(c_u) * w;

    LimitDraw d;
    d.M_u = Matrix(s, c_u);
    d.N_r = Matrix(c_r, c_u);
    Matrix w_z_pi = w_z;
    if (c_u > 0) {
        Matrix gu = gram_integral(w_u);
        if (linalg::cond(gu) >= linalg::kCondLimit)
            throw Error(ErrorCode::SingularGram, "limit draw: int Wu Wu'");
        d.N_r = gu.ldlt().solve(cross_gram(w_z, w_u).transpose()).transpose();
        w_z_pi = w_z - d.N_r * w_u;
        d.M_u = functional_f(e_y, w_u);
    }
    d.M_r = c_r > 0 ? functional_f(e_y, w_z_pi) : Matrix(s, 0);

    d.correction = Matrix::Zero(s, c_r);
    d.correction_fm = Matrix::Zero(s, c_r);
    d.M_r_plus = Matrix(s, with_fm ? c_r : 0);
    d.M_u_plus = Matrix(s, with_fm ? c_u : 0);
    if (c_r > 0) {
        Matrix w1 = w_z_pi.topRows(c_y);
        Matrix w2 = w_z_pi.bottomRows(c_r - c_y);
        Matrix w21 = w2;
        Matrix rf = Matrix::Zero(c_r - c_y, c_r);
        if (c_y > 0) {
            Matrix y11 = gram_integral(w1);
            if (linalg::cond(y11) >= linalg::kCondLimit)
                throw Error(ErrorCode::SingularGram, "limit draw: Y11");
            Matrix coef = y11.ldlt().solve(cross_gram(w2, w1).transpose()).transpose();
            w21 = w2 - coef * w1;
            rf.leftCols(c_y) = -coef;
        }
        rf.rightCols(c_r - c_y).setIdentity();

        Matrix m_r2 = functional_f(e_y.bottomRows(s - c_y), w21);
        d.correction = -(ctx.lf_rrr * (ctx.io2 * m_r2) * rf);

        if (with_fm) {
            Matrix b_path = ctx.fm_bmat * w;
            d.M_r_plus = functional_f(b_path, w_z_pi);
            d.M_u_plus = c_u > 0 ? functional_f(b_path, w_u) : Matrix(s, 0);
            Matrix m2p = functional_f(b_path.bottomRows(s - c_y), w21);
            d.correction_fm = -(ctx.lf_fm * (ctx.io2 * m2p) * rf);
        }
    }

    // Z draws come from a separate stream so the path draws above are
    // identical whether or not the stationary blocks are requested.
    d.Z_r = Matrix(s, 0);
    d.Z_u = Matrix(s, 0);
    if (ctx.z_closed_form) {
        NormalSampler zrng(derive_seed(draw_seed, 0x7A11));
        const int m = spec.m_r + spec.m_u;
        Matrix g(s, m);
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < s; ++i) g(i, j) = zrng.normal();
        Matrix limit = ctx.z_b_half * g * ctx.z_a_half.transpose();
        d.Z_r = limit.leftCols(spec.m_r);
        d.Z_u = spec.m_u > 0
                    ? Matrix(limit.rightCols(spec.m_u) + d.Z_r * ctx.ez3_zu_coeff)
                    : Matrix(s, 0);
    } else if (ctx.z_cov_half.size() > 0) {
        NormalSampler zrng(derive_seed(draw_seed, 0x7A11));
        Vector g(ctx.z_cov_half.rows());
        for (int i = 0; i < g.size(); ++i) g(i) = zrng.normal();
        Vector v = ctx.z_cov_half * g;
        int off = 0;
        d.Z_r = Matrix(s, stat_r);
        for (int j = 0; j < stat_r; ++j)
            for (int i = 0; i < s; ++i) d.Z_r(i, j) = v(off++);
        d.Z_u = Matrix(s, stat_u);
        for (int j = 0; j < stat_u; ++j)
            for (int i = 0; i < s; ++i) d.Z_u(i, j) = v(off++);
    }
    return d;
}

LimitSample run_sampler(const dgp::DgpSpec& spec, const dgp::CanonicalForm& canon, int N, int R,
                        std::uint64_t seed, const LimitOptions& opts, bool with_fm) {
    spec.validate();
    SamplerContext ctx = make_context(spec, canon, seed, opts);

    LimitSample out;
    out.proj = ctx.proj;
    out.draws.resize(R);
    for (int i = 0; i < R; ++i) {
        std::uint64_t base = derive_seed(seed, static_cast<std::uint64_t>(i));
        for (int attempt = 0;; ++attempt) {
            std::uint64_t s_try = attempt == 0 ? base : derive_seed(base, 1000003ULL + attempt);
            try {
                out.draws[i] = one_draw(ctx, N, s_try, opts, with_fm);
                break;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::SingularGram || attempt >= kMaxResample) throw;
                ++out.resample_count;
            }
        }
    }
    return out;
}

} // namespace

LimitSample limit_sampler_ols(const dgp::DgpSpec& spec, const dgp::CanonicalForm& canon, int N,
                              int R, std::uint64_t seed, const LimitOptions& opts) {
    return run_sampler(spec, canon, N, R, seed, opts, opts.with_fm);
}

LimitSample limit_sampler_fm(const dgp::DgpSpec& spec, const dgp::CanonicalForm& canon, int N,
                             int R, std::uint64_t seed, const LimitOptions& opts) {
    return run_sampler(spec, canon, N, R, seed, opts, true);
}

void write_draws_csv(std::ostream& os, const std::vector<LimitDraw>& draws) {
    if (draws.empty()) return;
    using Field = std::pair<const char*, const Matrix LimitDraw::*>;
    const std::vector<Field> fields = {
        {"M_r", &LimitDraw::M_r},           {"M_u", &LimitDraw::M_u},
        {"N_r", &LimitDraw::N_r},           {"Z_r", &LimitDraw::Z_r},
        {"Z_u", &LimitDraw::Z_u},           {"M_r_plus", &LimitDraw::M_r_plus},
        {"M_u_plus", &LimitDraw::M_u_plus}, {"correction", &LimitDraw::correction},
        {"correction_fm", &LimitDraw::correction_fm},
    };
    bool first = true;
    for (const auto& [name, ptr] : fields) {
        const Matrix& m = draws.front().*ptr;
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                if (!first) os << ',';
                os << name << '_' << (i + 1) << '_' << (j + 1);
                first = false;
            }
    }
    os << '\n';
    for (const auto& d : draws) {
        first = true;
        for (const auto& [name, ptr] : fields) {
            const Matrix& m = d.*ptr;
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                for (Eigen::Index j = 0; j < m.cols(); ++j) {
                    if (!first) os << ',';
                    os << format_double(m(i, j));
                    first = false;
                }
        }
        os << '\n';
    }
}

} // namespace rankreg::asymptotics
