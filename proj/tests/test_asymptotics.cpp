#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rankreg/asymptotics.hpp"
#include "rankreg/mc.hpp"
#include "test_util.hpp"

using namespace rankreg;
using namespace rankreg::asymptotics;
using testutil::random_matrix;
using testutil::rel_err;

namespace {

Matrix ramp_path(int N) {
    Matrix p(1, N + 1);
    for (int i = 0; i <= N; ++i) p(0, i) = static_cast<double>(i) / N;
    return p;
}

// Naive re-summation oracle for f(E, W).
Matrix functional_oracle(const Matrix& e, const Matrix& w) {
    const int N = static_cast<int>(e.cols()) - 1;
    Matrix de_w = Matrix::Zero(e.rows(), w.rows());
    Matrix ww = Matrix::Zero(w.rows(), w.rows());
    for (int i = 0; i < N; ++i) {
        de_w += (e.col(i + 1) - e.col(i)) * w.col(i).transpose();
        ww += w.col(i) * w.col(i).transpose() / N;
    }
    return de_w * ww.inverse();
}

} // namespace

TEST_CASE("scaling blocks") {
    auto spec = dgp::make_cy_positive_spec(3, 3, 2, 2, 1, 2, 1, 11);
    auto canon = dgp::canonical_form(spec);
    ScalingScheme sc = scaling(canon, spec, 400);
    CHECK(sc.d_zr.size() == 3);
    CHECK(sc.d_zr(0) == doctest::Approx(1.0 / 400));
    CHECK(sc.d_zr(1) == doctest::Approx(1.0 / 400));
    CHECK(sc.d_zr(2) == doctest::Approx(1.0 / 20));
    CHECK(sc.d_zu(0) == doctest::Approx(1.0 / 400));
    CHECK(sc.d_zu(1) == doctest::Approx(1.0 / 20));
    CHECK(sc.d_y(0) == doctest::Approx(1.0 / 400));
    CHECK(sc.d_y(1) == doctest::Approx(1.0 / 20));
    CHECK(sc.d_z().size() == 5);

    auto stat = dgp::make_random_spec(2, 2, 0, 0, 0, 1, 0, 12);
    auto canon2 = dgp::canonical_form(stat);
    ScalingScheme sc2 = scaling(canon2, stat, 100);
    CHECK(sc2.d_zr(0) == doctest::Approx(0.1));
    CHECK(sc2.d_zr(1) == doctest::Approx(0.1));
}

TEST_CASE("brownian_paths basics") {
    Matrix bad(1, 1);
    bad << 0.0;
    CHECK_THROWS_AS(brownian_paths(1, 16, 1, bad), Error);

    Matrix cov(1, 1);
    cov << 2.5;
    Matrix p = brownian_paths(1, 16, 7, cov);
    CHECK(p(0, 0) == 0.0);
    // increments reproduce the generating recipe bit for bit
    NormalSampler rng(7);
    double acc = 0.0;
    const double step = std::sqrt(2.5 / 16.0);
    for (int i = 1; i <= 16; ++i) {
        acc += step * rng.normal();
        CHECK(p(0, i) == acc);
    }

    // W(1) variance across seeded draws
    double var = 0.0;
    const int R = 10000;
    for (int r = 0; r < R; ++r) {
        Matrix w = brownian_paths(1, 64, derive_seed(99, r), cov);
        var += w(0, 64) * w(0, 64);
    }
    CHECK(var / R == doctest::Approx(2.5).epsilon(0.05));
}

TEST_CASE("functional_f: deterministic ramp and orthogonal pair") {
    Matrix e = ramp_path(1000), w = ramp_path(1000);
    Matrix f = functional_f(e, w);
    CHECK(f(0, 0) == doctest::Approx(1.5).epsilon(0.01 / 1.5));

    // O(1/N) decay of the discretization error
    double e1000 = std::abs(functional_f(ramp_path(1000), ramp_path(1000))(0, 0) - 1.5);
    double e2000 = std::abs(functional_f(ramp_path(2000), ramp_path(2000))(0, 0) - 1.5);
    CHECK(e2000 < 0.6 * e1000);

    // constant E: dE = 0 exactly
    Matrix c = Matrix::Ones(1, 1001);
    CHECK(functional_f(c, w).norm() == 0.0);
}

TEST_CASE("functional_f against the naive summation oracle") {
    Matrix cov = testutil::random_spd(3, 21);
    Matrix w = brownian_paths(3, 500, 5, cov);
    Matrix e = brownian_paths(2, 500, 6, testutil::random_spd(2, 22));
    CHECK(rel_err(functional_f(e, w), functional_oracle(e, w)) < 1e-12);
}

TEST_CASE("functional_f is linear in its first argument") {
    Matrix cov = testutil::random_spd(2, 31);
    Matrix w = brownian_paths(2, 300, 8, cov);
    Matrix e1 = brownian_paths(2, 300, 9, cov);
    Matrix e2 = brownian_paths(2, 300, 10, cov);
    Matrix lhs = functional_f(e1 + e2, w);
    Matrix rhs = functional_f(e1, w) + functional_f(e2, w);
    CHECK(rel_err(lhs, rhs) < 1e-12);
}

TEST_CASE("detrend_path removes the projected component") {
    Matrix w = brownian_paths(2, 400, 13, testutil::random_spd(2, 41));
    Matrix dm = detrend_path(w, dgp::Preproc::Demean);
    Vector mean = Vector::Zero(2);
    for (int i = 0; i < 400; ++i) mean += dm.col(i);
    CHECK((mean / 400).cwiseAbs().maxCoeff() < 1e-12);

    // The correction weights are the continuum dual basis; residual
    // orthogonality on the grid holds up to the O(1/N) discretization.
    auto moments = [](const Matrix& path) {
        const int N = static_cast<int>(path.cols()) - 1;
        Vector m0 = Vector::Zero(2), m1 = Vector::Zero(2);
        for (int i = 0; i < N; ++i) {
            m0 += path.col(i) / N;
            m1 += (static_cast<double>(i) / N) * path.col(i) / N;
        }
        return std::make_pair(m0, m1);
    };
    auto [a0, a1] = moments(detrend_path(w, dgp::Preproc::Detrend));
    CHECK(a0.cwiseAbs().maxCoeff() < 3.0 / 400);
    CHECK(a1.cwiseAbs().maxCoeff() < 3.0 / 400);
    Matrix w2 = brownian_paths(2, 6400, 13, testutil::random_spd(2, 41));
    auto [b0, b1] = moments(detrend_path(w2, dgp::Preproc::Detrend));
    CHECK(b0.cwiseAbs().maxCoeff() < 3.0 / 6400);
    CHECK(b1.cwiseAbs().maxCoeff() < 3.0 / 6400);
}

TEST_CASE("true_long_run closed forms") {
    // q = 1, C_1 = I, Sigma = I
    dgp::DgpSpec spec;
    spec.s = 2; spec.m_r = 2; spec.m_u = 0; spec.k = 2;
    spec.c_r = 0; spec.c_u = 0; spec.n = 0;
    spec.Lambda = Matrix::Identity(2, 2);
    spec.Sigma = Matrix::Identity(2, 2);
    spec.b_r = Matrix::Zero(2, 2);
    spec.b_u = Matrix(2, 0);
    spec.H_r = Matrix::Identity(2, 2);
    spec.H_u = Matrix(0, 0);
    spec.ma_coeffs = {Matrix::Identity(2, 2)};
    LongRunTrue lr = true_long_run(spec);
    CHECK(rel_err(lr.omega, Matrix::Identity(2, 2)) < 1e-14);
    CHECK(rel_err(lr.delta, Matrix::Identity(2, 2)) < 1e-14);

    // q = 2 scalar, coefficients (1, 0.5), noise variance 2
    dgp::DgpSpec sc;
    sc.s = 1; sc.m_r = 1; sc.m_u = 0; sc.k = 1;
    sc.c_r = 0; sc.c_u = 0; sc.n = 0;
    sc.Lambda = Matrix::Identity(1, 1);
    sc.Sigma = 2.0 * Matrix::Identity(1, 1);
    sc.b_r = Matrix::Zero(1, 1);
    sc.b_u = Matrix(1, 0);
    sc.H_r = Matrix::Identity(1, 1);
    sc.H_u = Matrix(0, 0);
    Matrix c1(1, 1), c2(1, 1);
    c1 << 1.0;
    c2 << 0.5;
    sc.ma_coeffs = {c1, c2};
    LongRunTrue lr2 = true_long_run(sc);
    CHECK(lr2.omega(0, 0) == doctest::Approx(1.5 * 1.5 * 2.0));

    // brute-force lag summation oracle
    double brute = 0.0;
    for (int j = -5; j <= 5; ++j) brute += dgp::nu_autocov(sc, j)(0, 0);
    CHECK(lr2.omega(0, 0) == doctest::Approx(brute));

    // index identity Omega = Delta + Delta' - Gamma(0)
    auto spec3 = dgp::make_random_spec(2, 3, 1, 1, 0, 1, 1, 51);
    LongRunTrue lr3 = true_long_run(spec3);
    CHECK(rel_err(lr3.omega, Matrix(lr3.delta + lr3.delta.transpose() - lr3.gamma0)) < 1e-12);
}

TEST_CASE("correction projectors: special-case identities") {
    // Anderson: O2 O2+ = [0,I]'[-S21 S11^{-1}, I] and P = 0 (Gamma32 square)
    for (std::uint64_t seed : {61, 62}) {
        Matrix g = random_matrix(2, 2, seed);
        Matrix sw = g * g.transpose() + 0.5 * Matrix::Identity(2, 2);
        Matrix ups(1, 1);
        ups << -0.6;
        auto spec = dgp::make_anderson_var1(ups, sw, 1);
        auto canon = dgp::canonical_form(spec);
        auto proj = correction_projectors(spec, canon);

        Matrix o2o2d = canon.O2 * proj.O2_dagger; // 2x2
        Matrix want(2, 2);
        want.row(0).setZero();
        want(1, 0) = -sw(1, 0) / sw(0, 0);
        want(1, 1) = 1.0;
        CHECK((o2o2d - want).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(proj.P.cwiseAbs().maxCoeff() < 1e-10);

        // block-inversion route for the same identity
        Matrix q = random_matrix(1, 1, seed + 7);
        Matrix yy(2, 2);
        yy << sw(0, 0), sw(0, 1), sw(1, 0), sw(1, 1) + q(0, 0) * q(0, 0) + 1.0;
        Matrix inv = linalg::block_inverse(yy.topLeftCorner(1, 1), yy.topRightCorner(1, 1),
                                           yy.bottomLeftCorner(1, 1), yy.bottomRightCorner(1, 1));
        Matrix sel(2, 1);
        sel << 0, 1;
        Matrix od = (sel.transpose() * inv * sel).inverse() * sel.transpose() * inv;
        CHECK(((sel * od) - (sel * Matrix((sel.transpose() * yy.inverse() * sel).inverse() *
                                          sel.transpose() * yy.inverse())))
                  .cwiseAbs()
                  .maxCoeff() < 1e-10);
    }

    // O2 square nonsingular -> I - O2 O2+ = 0
    {
        auto spec = dgp::make_random_spec(2, 3, 0, 1, 0, 2, 0, 63);
        auto canon = dgp::canonical_form(spec);
        REQUIRE(canon.O2.rows() == canon.O2.cols());
        auto proj = correction_projectors(spec, canon);
        Matrix io2 = Matrix::Identity(2, 2) - canon.O2 * proj.O2_dagger;
        CHECK(io2.cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("projector algebra invariants") {
    for (std::uint64_t seed : {71, 72, 73}) {
        auto spec = dgp::make_cy_positive_spec(3, 3, 1, 2, 0, 2, 1, seed);
        auto canon = dgp::canonical_form(spec);
        auto proj = correction_projectors(spec, canon);
        Matrix io2 = Matrix::Identity(2, 2) - canon.O2 * proj.O2_dagger;
        CHECK((io2 * canon.O2).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((proj.P * proj.Ez3Pi * canon.Gamma32).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("limit sampler: stationary case draws match the Kronecker target") {
    auto spec = dgp::make_random_spec(2, 2, 1, 0, 0, 1, 0, 81);
    auto canon = dgp::canonical_form(spec);
    LimitOptions opts;
    LimitSample ls = limit_sampler_ols(spec, canon, 64, 4000, 2024, opts);
    REQUIRE(ls.draws.size() == 4000);
    CHECK(ls.draws[0].M_r.cols() == 0);
    CHECK(ls.draws[0].M_u.cols() == 0);
    CHECK(ls.draws[0].N_r.size() == 0);

    // empirical covariance of the assembled limit vec([Z_r, Zu - Zr E..])
    // against (E z~z~')^{-1} (x) (TyL) Sigma (TyL)'
    const int s = 2, m = 3;
    Matrix tblk = Matrix::Zero(m, m);
    tblk.topLeftCorner(2, 2) = canon.T_zr;
    tblk.bottomRightCorner(1, 1) = canon.T_zu;
    Matrix ezz = tblk * stationary_regressor_cov(spec) * tblk.transpose();
    Matrix coeff = ezz.bottomRightCorner(1, 1).inverse() * ezz.topRightCorner(2, 1).transpose();
    Matrix lsl = canon.T_y * spec.Lambda * spec.Sigma * spec.Lambda.transpose() *
                 canon.T_y.transpose();
    Matrix ezz_inv = ezz.inverse();
    Matrix target(m * s, m * s);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) target.block(i * s, j * s, s, s) = ezz_inv(i, j) * lsl;

    Matrix acc = Matrix::Zero(m * s, m * s);
    for (const auto& d : ls.draws) {
        Matrix lim(s, m);
        lim.leftCols(2) = d.Z_r;
        lim.rightCols(1) = d.Z_u - d.Z_r * coeff.transpose();
        Vector v(m * s);
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < s; ++i) v(j * s + i) = lim(i, j);
        acc += v * v.transpose();
    }
    acc /= static_cast<double>(ls.draws.size());
    CHECK((acc - target).norm() / target.norm() < 0.10);
}

TEST_CASE("limit sampler: noiseless Lambda gives exactly zero M draws") {
    auto spec = dgp::make_cy_positive_spec(2, 2, 0, 1, 0, 1, 1, 91);
    spec.Lambda.setZero();
    auto canon = dgp::canonical_form(spec);
    LimitOptions opts;
    opts.with_z = false;
    LimitSample ls = limit_sampler_ols(spec, canon, 64, 50, 7, opts);
    for (const auto& d : ls.draws) CHECK(d.M_r.norm() == 0.0);
}

TEST_CASE("limit sampler: two-resolution self-consistency of M_r") {
    // scalar pure-random-walk spec
    dgp::DgpSpec spec;
    spec.s = 1; spec.m_r = 1; spec.m_u = 0; spec.k = 1;
    spec.c_r = 1; spec.c_u = 0; spec.n = 1;
    spec.Lambda = Matrix::Identity(1, 1);
    spec.Sigma = Matrix::Identity(1, 1);
    spec.b_r = Matrix::Identity(1, 1);
    spec.b_u = Matrix(1, 0);
    spec.H_r = Matrix::Identity(1, 1);
    spec.H_u = Matrix(0, 0);
    spec.ma_coeffs = {Matrix::Identity(1, 1)};
    spec.validate();
    auto canon = dgp::canonical_form(spec);

    LimitOptions opts;
    opts.with_z = false;
    auto a = limit_sampler_ols(spec, canon, 500, 2000, 30, opts);
    auto b = limit_sampler_ols(spec, canon, 2000, 2000, 31, opts);
    std::vector<double> va, vb;
    for (const auto& d : a.draws) va.push_back(d.M_r(0, 0));
    for (const auto& d : b.draws) vb.push_back(d.M_r(0, 0));
    CHECK(mc::ks_distance(va, vb) < 0.05);
}

TEST_CASE("fm limit sampler: vanishing correction gives matched draws") {
    // Noise loads on eps_1 only, regressors on eps_2: Omega_{u,dn} = 0.
    dgp::DgpSpec spec;
    spec.s = 1; spec.m_r = 1; spec.m_u = 0; spec.k = 2;
    spec.c_r = 1; spec.c_u = 0; spec.n = 1;
    spec.Lambda = Matrix::Zero(1, 2);
    spec.Lambda(0, 0) = 1.0;
    spec.Sigma = Matrix::Identity(2, 2);
    spec.b_r = Matrix::Identity(1, 1);
    spec.b_u = Matrix(1, 0);
    spec.H_r = Matrix::Identity(1, 1);
    spec.H_u = Matrix(0, 0);
    Matrix c1 = Matrix::Zero(1, 2);
    c1(0, 1) = 1.0;
    spec.ma_coeffs = {c1};
    spec.validate();
    auto canon = dgp::canonical_form(spec);

    LimitOptions opts;
    opts.with_z = false;
    auto fm = limit_sampler_fm(spec, canon, 128, 100, 17, opts);
    for (const auto& d : fm.draws) {
        CHECK(d.M_r_plus.cols() == 1);
        CHECK((d.M_r_plus - d.M_r).norm() == 0.0); // B = Lambda W exactly
    }
}

TEST_CASE("fm limit sampler: Anderson correction factor and linearity") {
    Matrix ups(1, 1);
    ups << -0.5;
    Matrix sw(2, 2);
    sw << 1.0, 0.4, 0.4, 1.3;
    auto spec = dgp::make_anderson_var1(ups, sw, 1);
    auto canon = dgp::canonical_form(spec);

    // analytic factor: Omega_{u,dn}(Omega_nn)^{-1} = [I, (S11)^{-1} S12]'
    Matrix ctil = nonstationary_transfer(spec, canon);
    Matrix rho = spec.Lambda * spec.Sigma * ctil.transpose() *
                 (ctil * spec.Sigma * ctil.transpose()).inverse();
    Matrix want(2, 1);
    want << 1.0, sw(1, 0) / sw(0, 0);
    CHECK((rho - want).cwiseAbs().maxCoeff() < 1e-10);

    // matched-seed draws: M_r_plus - M_r = f((Bmat - TyL) W, Wz_pi), i.e.
    // linearity of f in its first argument; verified against the OLS draws.
    LimitOptions opts;
    opts.with_z = false;
    auto fm = limit_sampler_fm(spec, canon, 256, 50, 19, opts);
    auto ols_side = limit_sampler_ols(spec, canon, 256, 50, 19, opts);
    for (size_t i = 0; i < fm.draws.size(); ++i) {
        CHECK((fm.draws[i].M_r - ols_side.draws[i].M_r).norm() == 0.0);
        // the correction factor rotates W_1 out of the first component:
        // first row of B is W_1 - W_1 = 0, so M_r_plus row 0 is 0
        CHECK(std::abs(fm.draws[i].M_r_plus(0, 0)) < 1e-12);
    }
}

TEST_CASE("limit sampler: integrated spec with stationary block uses the proxy") {
    auto spec = dgp::make_cy_positive_spec(2, 2, 0, 1, 0, 1, 1, 101);
    auto canon = dgp::canonical_form(spec);
    LimitOptions opts;
    opts.z_proxy_T = 2000;
    opts.z_proxy_reps = 40;
    LimitSample ls = limit_sampler_ols(spec, canon, 64, 200, 23, opts);
    REQUIRE(ls.draws.size() == 200);
    CHECK(ls.draws[0].Z_r.cols() == 1);
    double var = 0.0;
    for (const auto& d : ls.draws) var += d.Z_r.squaredNorm();
    CHECK(var > 0.0); // proxy covariance produced nondegenerate draws
}
