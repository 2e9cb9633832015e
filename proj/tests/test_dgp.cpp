#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rankreg/dgp.hpp"
#include "rankreg/estimators.hpp"
#include "test_util.hpp"

using namespace rankreg;
using namespace rankreg::dgp;
using testutil::random_matrix;
using testutil::rel_err;

namespace {

// nu_t = sum C_j eps_{t-j} recomputed directly from the eps output.
Matrix nu_from_eps(const DgpSpec& spec, const SeriesMatrix& eps, int t /*1-based*/) {
    Matrix nu = Matrix::Zero(spec.m_r + spec.m_u, 1);
    for (int j = 1; j <= spec.q(); ++j) {
        const int tau = t - j;
        if (tau >= 1) nu += spec.ma_coeffs[j - 1] * eps.values.col(tau - 1);
    }
    return nu;
}

DgpSpec zero_coefficient_spec() {
    DgpSpec spec;
    spec.s = 2; spec.m_r = 2; spec.m_u = 0; spec.k = 2;
    spec.c_r = 0; spec.c_u = 0; spec.n = 0;
    spec.Lambda = Matrix::Identity(2, 2);
    spec.Sigma = Matrix::Identity(2, 2);
    spec.b_r = Matrix::Zero(2, 2);
    spec.b_u = Matrix(2, 0);
    spec.H_r = Matrix::Identity(2, 2);
    spec.H_u = Matrix(0, 0);
    spec.ma_coeffs = {Matrix::Identity(2, 2)};
    return spec;
}

} // namespace

TEST_CASE("simulate: all coefficients zero gives y = eps exactly") {
    DgpSpec spec = zero_coefficient_spec();
    SimOutput sim = simulate(spec, 3, 99);
    CHECK((sim.y.values - sim.eps.values).norm() == 0.0);
}

TEST_CASE("simulate: zero initial condition for integrated coordinates") {
    DgpSpec spec;
    spec.s = 1; spec.m_r = 1; spec.m_u = 0; spec.k = 1;
    spec.c_r = 1; spec.c_u = 0; spec.n = 0;
    spec.Lambda = Matrix::Identity(1, 1);
    spec.Sigma = Matrix::Identity(1, 1);
    spec.b_r = Matrix::Zero(1, 1);
    spec.b_u = Matrix(1, 0);
    spec.H_r = Matrix::Identity(1, 1);
    spec.H_u = Matrix(0, 0);
    spec.ma_coeffs = {Matrix::Identity(1, 1)};
    SimOutput sim = simulate(spec, 5, 7);
    CHECK(sim.z_r.values(0, 0) == 0.0); // nu_1 = C_1 eps_0 = 0
}

TEST_CASE("simulate: noiseless exact-fit oracle recovers the coefficients") {
    DgpSpec spec = make_random_spec(2, 3, 2, 1, 1, 2, 1, 404);
    spec.Lambda.setZero(); // noiseless diagnostic case
    SimOutput sim = simulate(spec, 400, 11);
    auto sample = estimators::make_sample(sim.y, sim.z_r, sim.z_u);
    auto est = estimators::ols(sample);
    CHECK(rel_err(est.beta_r, spec.b_r) < 1e-8);
    CHECK(rel_err(est.beta_u, spec.b_u) < 1e-8);
}

TEST_CASE("simulate: deterministic and prefix-consistent") {
    DgpSpec spec = make_random_spec(2, 3, 1, 1, 0, 1, 1, 505);
    SimOutput a = simulate(spec, 150, 42);
    SimOutput b = simulate(spec, 150, 42);
    CHECK((a.y.values - b.y.values).norm() == 0.0);
    CHECK((a.z_r.values - b.z_r.values).norm() == 0.0);

    SimOutput longer = simulate(spec, 300, 42);
    CHECK((longer.y.values.leftCols(150) - a.y.values).norm() == 0.0);
    CHECK((longer.z_r.values.leftCols(150) - a.z_r.values).norm() == 0.0);
    CHECK((longer.z_u.values.leftCols(150) - a.z_u.values).norm() == 0.0);

    SimOutput other = simulate(spec, 150, 43);
    CHECK((other.y.values - a.y.values).norm() > 0.0);
}

TEST_CASE("simulate: integrated directions difference to the nu rows") {
    DgpSpec spec = make_random_spec(2, 3, 2, 2, 1, 2, 1, 606);
    const int T = 80;
    SimOutput sim = simulate(spec, T, 3);
    Matrix hpar_zr = spec.H_r.leftCols(spec.c_r).transpose() * sim.z_r.values;
    Matrix hpar_zu = spec.H_u.leftCols(spec.c_u).transpose() * sim.z_u.values;
    for (int t = 1; t <= T; ++t) {
        Matrix nu = nu_from_eps(spec, sim.eps, t);
        Matrix d_r = hpar_zr.col(t - 1) -
                     (t > 1 ? Matrix(hpar_zr.col(t - 2)) : Matrix(Matrix::Zero(spec.c_r, 1)));
        CHECK((d_r - nu.topRows(spec.c_r)).cwiseAbs().maxCoeff() < 1e-10);
        Matrix d_u = hpar_zu.col(t - 1) -
                     (t > 1 ? Matrix(hpar_zu.col(t - 2)) : Matrix(Matrix::Zero(spec.c_u, 1)));
        CHECK((d_u - nu.middleRows(spec.m_r, spec.c_u)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("simulate: uniform noise variant matches the target variance roughly") {
    DgpSpec spec = zero_coefficient_spec();
    spec.noise = NoiseKind::Uniform;
    spec.Sigma << 4.0, 0.0, 0.0, 1.0;
    SimOutput sim = simulate(spec, 20000, 8);
    Matrix cov = sim.eps.values * sim.eps.values.transpose() / 20000.0;
    CHECK(cov(0, 0) == doctest::Approx(4.0).epsilon(0.1));
    CHECK(cov(1, 1) == doctest::Approx(1.0).epsilon(0.1));
    CHECK(std::abs(sim.eps.values.maxCoeff()) < 2.0 * std::sqrt(3.0) + 1e-9); // bounded support
}

TEST_CASE("canonical_form: stationary spec has identity T_y and c_y = 0") {
    DgpSpec spec = make_random_spec(2, 3, 1, 0, 0, 1, 0, 707);
    CanonicalForm canon = canonical_form(spec);
    CHECK(canon.c_y == 0);
    CHECK(rel_err(canon.T_y, Matrix::Identity(2, 2)) == 0.0);
    Matrix got = canon.T_y * spec.b_r * canon.T_zr.inverse();
    CHECK(rel_err(got, canon.b_tilde_r) < 1e-10);
}

TEST_CASE("canonical_form: random spec with c_y = 1 matches the pattern") {
    DgpSpec spec = make_cy_positive_spec(3, 3, 0, 2, 0, 2, 1, 808);
    CanonicalForm canon = canonical_form(spec);
    CHECK(canon.c_y == 1);
    Matrix got = canon.T_y * spec.b_r * canon.T_zr.inverse();
    CHECK((got - canon.b_tilde_r).cwiseAbs().maxCoeff() < 1e-10 * spec.b_r.norm());

    // pattern structure: [[I, 0, 0], [0, 0, O2 G32']]
    CHECK(canon.b_tilde_r(0, 0) == 1.0);
    CHECK(canon.b_tilde_r.block(0, 1, 1, 2).norm() == 0.0);
    CHECK(canon.b_tilde_r.block(1, 0, 2, 2).norm() == 0.0);
    // Gamma32' S_p22 = I normalization
    CHECK(canon.Gamma32.rows() == 1);
    CHECK(canon.Gamma32.cols() == 1);
}

TEST_CASE("canonical_form: round trip on simulated data") {
    DgpSpec spec = make_cy_positive_spec(3, 3, 1, 2, 0, 2, 1, 909);
    CanonicalForm canon = canonical_form(spec);
    const int T = 200;
    SimOutput sim = simulate(spec, T, 5);
    Matrix lhs = canon.T_y * (sim.y.values - spec.b_u * sim.z_u.values);
    Matrix rhs = canon.b_tilde_r * (canon.T_zr * sim.z_r.values) +
                 canon.T_y * spec.Lambda * sim.eps.values;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + lhs.cwiseAbs().maxCoeff()));
}

TEST_CASE("canonical_form: cointegrating directions of z_r are stationary") {
    DgpSpec spec = make_cy_positive_spec(3, 3, 0, 2, 0, 2, 1, 1010);
    CanonicalForm canon = canonical_form(spec);
    const int T = 4000;
    SimOutput sim = simulate(spec, T, 17);
    Matrix stat = (canon.T_zr * sim.z_r.values).bottomRows(spec.m_r - spec.c_r);
    auto var_of = [&](int from, int len) {
        Matrix block = stat.middleCols(from, len);
        Vector mean = block.rowwise().mean();
        block.colwise() -= mean;
        return block.squaredNorm() / len;
    };
    double ratio = var_of(T / 2, T / 2) / var_of(0, T / 2);
    CHECK(ratio > 0.5);
    CHECK(ratio < 2.0);
}

TEST_CASE("canonical_form: ambiguous rank split is rejected") {
    DgpSpec spec;
    spec.s = 3; spec.m_r = 3; spec.m_u = 0; spec.k = 3;
    spec.c_r = 3; spec.c_u = 0; spec.n = 2;
    Matrix u = testutil::random_orthogonal(3, 900);
    Matrix v = testutil::random_orthogonal(3, 901);
    Vector sv(3);
    sv << 1.0, 5e-9, 0.0;
    spec.b_r = u * sv.asDiagonal() * v.transpose();
    spec.b_u = Matrix(3, 0);
    spec.Lambda = Matrix::Identity(3, 3);
    spec.Sigma = Matrix::Identity(3, 3);
    spec.H_r = Matrix::Identity(3, 3);
    spec.H_u = Matrix(0, 0);
    spec.ma_coeffs = {Matrix::Identity(3, 3)};
    CHECK_THROWS_AS(canonical_form(spec), Error);
    try {
        canonical_form(spec);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::RankDeficiencyAmbiguous);
    }
}

TEST_CASE("make_anderson_var1: scalar AR(1) and white-noise cases") {
    Matrix ups(1, 1);
    ups << -0.5;
    DgpSpec spec = make_anderson_var1(ups, Matrix::Identity(2, 2), 1);
    CHECK(spec.c_r == 1);
    CHECK(spec.n == 1);

    // X_{t,2} is AR(1) with coefficient 0.5: regression on the lag recovers it
    SimOutput sim = simulate(spec, 4000, 21);
    // z_r = X_{t-1}; its second row at t+1 is X_{t,2}
    double num = 0, den = 0;
    for (int t = 1; t < 4000; ++t) {
        num += sim.z_r.values(1, t) * sim.z_r.values(1, t - 1);
        den += sim.z_r.values(1, t - 1) * sim.z_r.values(1, t - 1);
    }
    CHECK(num / den == doctest::Approx(0.5).epsilon(0.1));

    Matrix ups_w(1, 1);
    ups_w << -1.0; // I + U22 = 0: white noise
    DgpSpec white = make_anderson_var1(ups_w, Matrix::Identity(2, 2), 1);
    CHECK(white.q() == 1);

    Matrix unstable(1, 1);
    unstable << 0.1;
    CHECK_THROWS_AS(make_anderson_var1(unstable, Matrix::Identity(2, 2), 1), Error);
}

TEST_CASE("make_anderson_var1: recursion oracle at T = 10") {
    Matrix ups(2, 2);
    ups << -0.6, 0.2, 0.1, -0.5;
    Matrix sigma(3, 3);
    sigma << 1.0, 0.2, 0.1, 0.2, 1.0, 0.3, 0.1, 0.3, 1.5;
    DgpSpec spec = make_anderson_var1(ups, sigma, 1);
    const int T = 10;
    SimOutput sim = simulate(spec, T, 77);

    // oracle: X_t = X_{t-1} + Upsilon X_{t-1} + W_t with X_0 = 0 and
    // W_t = eps_t from the simulated output.
    Matrix full_ups = Matrix::Zero(3, 3);
    full_ups.bottomRightCorner(2, 2) = ups;
    Matrix x = Matrix::Zero(3, T + 1);
    for (int t = 1; t <= T; ++t)
        x.col(t) = x.col(t - 1) + full_ups * x.col(t - 1) + sim.eps.values.col(t - 1);
    for (int t = 1; t <= T; ++t) {
        // z_r holds X_{t-1}, y holds dX_t
        CHECK((sim.z_r.values.col(t - 1) - x.col(t - 1)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((sim.y.values.col(t - 1) - (x.col(t) - x.col(t - 1))).cwiseAbs().maxCoeff() <
              1e-12);
    }

    // canonical form: already in the right coordinates
    CanonicalForm canon = canonical_form(spec);
    CHECK(canon.c_y == 0);
    CHECK(rel_err(canon.T_y, Matrix::Identity(3, 3)) == 0.0);
    CHECK(rel_err(canon.T_zr, Matrix::Identity(3, 3)) == 0.0);
}

TEST_CASE("make_johansen_vecm: one-lag case matches the VAR(1) builder") {
    Matrix alpha(2, 1), beta(2, 1);
    alpha << 0.0, -0.5;
    beta << 0.0, 1.0;
    DgpSpec vecm = make_johansen_vecm(alpha, beta, {}, Matrix::Identity(2, 2));
    Matrix ups(1, 1);
    ups << -0.5;
    DgpSpec anderson = make_anderson_var1(ups, Matrix::Identity(2, 2), 1);

    SimOutput a = simulate(vecm, 50, 33);
    SimOutput b = simulate(anderson, 50, 33);
    CHECK((a.y.values - b.y.values).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.z_r.values - b.z_r.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("make_johansen_vecm: recursion oracle with one lag coefficient") {
    Matrix alpha(2, 1), beta(2, 1);
    alpha << 0.0, -0.5;
    beta << 0.0, 1.0;
    std::vector<Matrix> lags = {0.2 * Matrix::Identity(2, 2)};
    Matrix sigma(2, 2);
    sigma << 1.0, 0.25, 0.25, 1.0;
    DgpSpec spec = make_johansen_vecm(alpha, beta, lags, sigma);
    CHECK(spec.m_u == 2);
    CHECK(spec.c_r == 1);

    const int T = 8;
    SimOutput sim = simulate(spec, T, 13);
    // oracle: dX_t = alpha beta' X_{t-1} + Phi_1 dX_{t-1} + eps_t, X_0 = 0
    Matrix x = Matrix::Zero(2, T + 1);
    Matrix dx = Matrix::Zero(2, T + 1);
    for (int t = 1; t <= T; ++t) {
        dx.col(t) = alpha * (beta.transpose() * x.col(t - 1)) + lags[0] * dx.col(t - 1) +
                    sim.eps.values.col(t - 1);
        x.col(t) = x.col(t - 1) + dx.col(t);
    }
    for (int t = 1; t <= T; ++t) {
        CHECK((sim.y.values.col(t - 1) - dx.col(t)).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((sim.z_r.values.col(t - 1) - x.col(t - 1)).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((sim.z_u.values.col(t - 1) - dx.col(t - 1)).cwiseAbs().maxCoeff() < 1e-10);
    }

    CanonicalForm canon = canonical_form(spec);
    CHECK(canon.c_y == 0);
}

TEST_CASE("make_johansen_vecm: no cointegration is rejected") {
    Matrix alpha = Matrix::Zero(2, 1), beta(2, 1);
    beta << 0.0, 1.0;
    CHECK_THROWS_AS(make_johansen_vecm(alpha, beta, {}, Matrix::Identity(2, 2)), Error);
    try {
        make_johansen_vecm(alpha, beta, {}, Matrix::Identity(2, 2));
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotI1);
    }
}

TEST_CASE("make_cy_positive_spec") {
    DgpSpec spec = make_cy_positive_spec(2, 2, 0, 1, 0, 1, 1, 2020);
    Eigen::JacobiSVD<Matrix> svd(spec.b_r * spec.H_r.leftCols(1));
    CHECK(svd.singularValues()(0) > 1e-6);

    CanonicalForm canon = canonical_form(spec);
    CHECK(canon.c_y == 1);

    CHECK_THROWS_AS(make_cy_positive_spec(2, 2, 0, 1, 0, 1, 2, 1), Error);  // c_y > n
    CHECK_THROWS_AS(make_cy_positive_spec(2, 2, 0, 1, 0, 1, 0, 1), Error);  // c_y < 1
    CHECK_THROWS_AS(make_cy_positive_spec(3, 3, 0, 3, 0, 2, 1, 1), Error);  // n - c_y > m_r - c_r
}

TEST_CASE("detrend") {
    SeriesMatrix constant(1, 10);
    constant.values.setConstant(3.5);
    CHECK(detrend(constant, Preproc::Demean).values.norm() < 1e-12);

    SeriesMatrix ramp(1, 20);
    for (int t = 0; t < 20; ++t) ramp.values(0, t) = 3.0 * (t + 1);
    CHECK(detrend(ramp, Preproc::Detrend).values.cwiseAbs().maxCoeff() < 1e-10);

    SeriesMatrix noise(2, 50);
    noise.values = random_matrix(2, 50, 3030);
    SeriesMatrix res = detrend(noise, Preproc::Detrend);
    Matrix d(2, 50);
    for (int t = 0; t < 50; ++t) { d(0, t) = 1.0; d(1, t) = t + 1.0; }
    CHECK((res.values * d.transpose() / 50.0).cwiseAbs().maxCoeff() < 1e-10);

    CHECK((detrend(noise, Preproc::None).values - noise.values).norm() == 0.0);
    SeriesMatrix tiny(1, 2);
    tiny.values << 1, 2;
    CHECK_THROWS_AS(detrend(tiny, Preproc::Detrend), Error);
    SeriesMatrix one(1, 1);
    one.values << 1;
    CHECK_THROWS_AS(detrend(one, Preproc::Demean), Error);
}

TEST_CASE("burn-in warms only the stationary coordinates") {
    DgpSpec spec = make_random_spec(2, 2, 0, 1, 0, 1, 0, 4040);
    spec.burn_in = 30;
    spec.validate();
    SimOutput sim = simulate(spec, 60, 9);
    // integrated coordinate still starts at the pinned zero initial state:
    // H_par' z_1 = nu_1 (pinned) which only involves eps_{t<=0} = 0
    Matrix h_par_z1 = spec.H_r.leftCols(1).transpose() * sim.z_r.values.col(0);
    // with q = 2 the pinned nu_1 is exactly 0
    CHECK(h_par_z1.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("invalid specs are rejected with InvalidSpec") {
    DgpSpec spec = zero_coefficient_spec();
    spec.H_r(0, 0) = 2.0; // not orthogonal
    CHECK_THROWS_AS(spec.validate(), Error);

    DgpSpec spec2 = zero_coefficient_spec();
    spec2.n = 1; // rank(b_r) = 0 != 1
    CHECK_THROWS_AS(spec2.validate(), Error);

    DgpSpec spec3 = zero_coefficient_spec();
    spec3.Sigma(0, 1) = 5.0; // not symmetric/PD
    CHECK_THROWS_AS(spec3.validate(), Error);
}
