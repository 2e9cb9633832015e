#include "rankreg/dgp.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "rankreg/rng.hpp"

namespace rankreg::dgp {

namespace {

constexpr int kMaxMaOrder = 50;
constexpr std::uint64_t kPilotSeed = 0x9D2C5680u; // fixed stream for validate()

Matrix seeded_gaussian(int rows, int cols, NormalSampler& rng) {
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            m(i, j) = rng.normal();
    return m;
}

Matrix random_orthogonal(int dim, NormalSampler& rng) {
    if (dim == 0) return Matrix(0, 0);
    Matrix g = seeded_gaussian(dim, dim, rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    // Fix signs so the factor is unique given the draw.
    Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < dim; ++j)
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    return q;
}

double spectral_radius(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    return m.eigenvalues().cwiseAbs().maxCoeff();
}

SimOutput simulate_impl(const DgpSpec& spec, int T, std::uint64_t seed);

} // namespace

Matrix DgpSpec::c1() const {
    Matrix sum = Matrix::Zero(m_r + m_u, k);
    for (const auto& cj : ma_coeffs) sum += cj;
    return sum;
}

void DgpSpec::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidSpec, what); };

    if (s < 1 || m_r < 1 || m_u < 0 || k < 1) fail("dimensions must be positive (m_u may be 0)");
    if (c_r < 0 || c_r > m_r || c_u < 0 || c_u > m_u) fail("integrated counts out of range");
    if (n < 0 || n > std::min(s, m_r)) fail("rank n out of range");
    if (q() < 1) fail("at least one MA coefficient required");
    if (q() > kMaxMaOrder) fail("MA order above cap");
    if (burn_in < 0) fail("negative burn-in");

    if (Lambda.rows() != s || Lambda.cols() != k) fail("Lambda shape");
    if (Sigma.rows() != k || Sigma.cols() != k) fail("Sigma shape");
    if (b_r.rows() != s || b_r.cols() != m_r) fail("b_r shape");
    if (b_u.rows() != s || b_u.cols() != m_u) fail("b_u shape");
    if (H_r.rows() != m_r || H_r.cols() != m_r) fail("H_r shape");
    if (H_u.rows() != m_u || H_u.cols() != m_u) fail("H_u shape");
    for (const auto& cj : ma_coeffs)
        if (cj.rows() != m_r + m_u || cj.cols() != k) fail("MA coefficient shape");

    if ((H_r.transpose() * H_r - Matrix::Identity(m_r, m_r)).norm() > 1e-10 * std::max(1.0, H_r.norm()))
        fail("H_r not orthogonal");
    if (m_u > 0 &&
        (H_u.transpose() * H_u - Matrix::Identity(m_u, m_u)).norm() > 1e-10 * std::max(1.0, H_u.norm()))
        fail("H_u not orthogonal");

    if (!linalg::is_symmetric(Sigma) || Sigma.size() == 0)
        fail("Sigma not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(Sigma);
    if (es.eigenvalues().minCoeff() <= 0.0) fail("Sigma not positive definite");

    // rank(b_r) = n via singular-value gap.
    if (b_r.size() > 0) {
        Eigen::JacobiSVD<Matrix> svd(b_r);
        const Vector& sv = svd.singularValues();
        const double smax = sv.size() ? sv(0) : 0.0;
        int rank = 0;
        for (int i = 0; i < sv.size(); ++i)
            if (sv(i) > 1e-10 * std::max(smax, 1e-300)) ++rank;
        if (rank != n) fail("rank(b_r) != n");
    } else if (n != 0) {
        fail("rank(b_r) != n");
    }

    // Lambda is either of full row rank or exactly zero (the noiseless
    // diagnostic case used by the exact-fit and zero-error checks).
    if (Lambda.size() > 0 && Lambda.norm() > 0.0) {
        Eigen::JacobiSVD<Matrix> svd(Lambda);
        if (svd.singularValues().minCoeff() <= 1e-10 * svd.singularValues().maxCoeff())
            fail("Lambda not of full row rank");
        if (Lambda.rows() > Lambda.cols()) fail("Lambda cannot have full row rank (k < s)");
    }

    {
        // The integrated coordinates must not be cointegrated among
        // themselves: the rows of c(1) driving them are jointly of full row
        // rank. (The all-rows version of this condition cannot hold for
        // models that reuse lagged differences as regressors; the stationary
        // directions are covered by the covariance condition below.)
        Matrix c_one = c1();
        const int n_int = c_r + c_u;
        if (n_int > 0) {
            Matrix rows(n_int, k);
            rows.topRows(c_r) = c_one.topRows(c_r);
            rows.bottomRows(c_u) = c_one.middleRows(m_r, c_u);
            if (n_int > k) fail("c(1) integrated rows cannot have full row rank (k too small)");
            Eigen::JacobiSVD<Matrix> svd(rows);
            if (svd.singularValues().minCoeff() <= 1e-10 * svd.singularValues().maxCoeff())
                fail("c(1) integrated rows not of full row rank");
        } else if (c_one.norm() == 0.0) {
            fail("c(1) is zero");
        }
    }

    // Stationary-direction covariance condition, checked on a pilot sample.
    const int n_stat = (m_r - c_r) + (m_u - c_u);
    if (n_stat > 0) {
        const int pilot_T = std::max(2000, 4 * q());
        SimOutput pilot = simulate_impl(*this, pilot_T, kPilotSeed);
        Matrix stat(n_stat, pilot_T);
        if (m_r - c_r > 0)
            stat.topRows(m_r - c_r) = H_r.rightCols(m_r - c_r).transpose() * pilot.z_r.values;
        if (m_u - c_u > 0)
            stat.bottomRows(m_u - c_u) = H_u.rightCols(m_u - c_u).transpose() * pilot.z_u.values;
        Matrix cov = stat * stat.transpose() / static_cast<double>(pilot_T);
        Eigen::SelfAdjointEigenSolver<Matrix> es_cov(cov);
        if (es_cov.eigenvalues().minCoeff() <= 1e-8)
            fail("stationary-direction covariance near singular");
    }
}

namespace {

SimOutput simulate_impl(const DgpSpec& spec, int T, std::uint64_t seed) {
    const int q = spec.q();
    const int B = spec.burn_in;
    const int k = spec.k;

    // Noise for t = 1-B..T, time-ordered so prefixes are length-invariant.
    NormalSampler rng(seed);
    Matrix sqrt_sigma = linalg::sym_sqrt(spec.Sigma);
    Matrix eps_ext(k, T + B); // column b + t - 1 holds eps_{t}, t = 1-B..T
    for (int col = 0; col < T + B; ++col)
        for (int i = 0; i < k; ++i)
            eps_ext(i, col) = (spec.noise == NoiseKind::Gaussian) ? rng.normal() : rng.uniform_unit_var();
    eps_ext = sqrt_sigma * eps_ext;

    auto eps_at = [&](int t) -> Matrix { // eps_t, zero outside the generated range
        const int col = B + t - 1;
        if (col < 0 || col >= T + B) return Matrix::Zero(k, 1);
        return eps_ext.col(col);
    };

    // nu_t = sum_j C_j eps_{t-j}; the warm stream uses the burn-in draws,
    // the pinned stream treats eps_{t<=0} as zero so the integrated
    // coordinates keep their zero initial condition.
    const int m = spec.m_r + spec.m_u;
    Matrix nu_warm = Matrix::Zero(m, T);
    Matrix nu_pinned = Matrix::Zero(m, T);
    for (int t = 1; t <= T; ++t) {
        for (int j = 1; j <= q; ++j) {
            const int tau = t - j;
            if (tau >= 1) {
                Matrix e = eps_at(tau);
                nu_warm.col(t - 1) += spec.ma_coeffs[j - 1] * e;
                nu_pinned.col(t - 1) += spec.ma_coeffs[j - 1] * e;
            } else if (tau >= 1 - B) {
                nu_warm.col(t - 1) += spec.ma_coeffs[j - 1] * eps_at(tau);
            }
        }
    }

    auto assemble = [&](const Matrix& H, int dim, int c, int row0) -> SeriesMatrix {
        if (dim == 0) return SeriesMatrix(0, T);
        Matrix coords(dim, T);
        // integrated coordinates: partial sums of the pinned stream
        for (int i = 0; i < c; ++i) {
            double acc = 0.0;
            for (int t = 0; t < T; ++t) {
                acc += nu_pinned(row0 + i, t);
                coords(i, t) = acc;
            }
        }
        // stationary coordinates: the (optionally warmed) MA values
        for (int i = c; i < dim; ++i)
            coords.row(i) = nu_warm.row(row0 + i);
        return SeriesMatrix(H * coords);
    };

    SimOutput out;
    out.z_r = assemble(spec.H_r, spec.m_r, spec.c_r, 0);
    out.z_u = assemble(spec.H_u, spec.m_u, spec.c_u, spec.m_r);
    out.eps = SeriesMatrix(eps_ext.rightCols(T));
    out.y = SeriesMatrix(spec.Lambda * out.eps.values);
    if (spec.m_r > 0) out.y.values += spec.b_r * out.z_r.values;
    if (spec.m_u > 0) out.y.values += spec.b_u * out.z_u.values;
    return out;
}

} // namespace

SimOutput simulate(const DgpSpec& spec, int T, std::uint64_t seed) {
    spec.validate();
    if (T < 1)
        throw Error(ErrorCode::InvalidSpec, "simulate: T must be positive");
    return simulate_impl(spec, T, seed);
}

CanonicalForm canonical_form(const DgpSpec& spec) {
    spec.validate();
    const int s = spec.s, m_r = spec.m_r, c_r = spec.c_r, n = spec.n;

    CanonicalForm out;
    out.T_zu = spec.m_u > 0 ? Matrix(spec.H_u.transpose()) : Matrix(0, 0);

    // Rank and separating rotation of b_r restricted to the integrated
    // regressor directions. The reference scale is sigma_max(b_r): the
    // product b_r H_par of an exactly-cointegrated system is zero only up
    // to rounding, and its own largest singular value would make the
    // relative threshold meaningless.
    Matrix b_par = spec.b_r * spec.H_r.leftCols(c_r); // s x c_r
    double b_scale = 0.0;
    {
        Eigen::JacobiSVD<Matrix> svd_b(spec.b_r);
        b_scale = svd_b.singularValues().size() ? svd_b.singularValues()(0) : 0.0;
    }

    Matrix T_y = Matrix::Identity(s, s);
    Matrix C = Matrix::Identity(c_r, c_r);
    int c_y = 0;
    if (c_r > 0 && b_scale > 0.0) {
        Eigen::JacobiSVD<Matrix> svd(b_par, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Vector& sv = svd.singularValues();
        const double thresh = 1e-10 * b_scale;
        for (int i = 0; i < sv.size(); ++i)
            if (sv(i) > thresh) ++c_y;
        if (c_y < sv.size() && c_y > 0 && (sv(c_y - 1) - sv(c_y)) < 1e-8 * b_scale)
            throw Error(ErrorCode::RankDeficiencyAmbiguous,
                        "canonical_form: singular-value gap of b_r H_par too small");
        if (c_y > 0) {
            // T_y b_r H_par C = [[I_{c_y}, 0], [0, 0]]
            T_y.topRows(c_y) = sv.head(c_y).cwiseInverse().asDiagonal() *
                               svd.matrixU().leftCols(c_y).transpose();
            T_y.bottomRows(s - c_y) = svd.matrixU().rightCols(s - c_y).transpose();
            C = svd.matrixV();
        }
    }
    if (c_y > n)
        throw Error(ErrorCode::InvalidSpec, "canonical_form: c_y exceeds rank n");

    Matrix T_zr_bar(m_r, m_r);
    T_zr_bar.topRows(c_r) = C.transpose() * spec.H_r.leftCols(c_r).transpose();
    T_zr_bar.bottomRows(m_r - c_r) = spec.H_r.rightCols(m_r - c_r).transpose();
    // C is orthogonal here, so diag(C^{-1}, I) H_r' = [C', H_perp']'.

    Matrix diag_c = Matrix::Identity(m_r, m_r);
    diag_c.topLeftCorner(c_r, c_r) = C;
    Matrix b_bar = T_y * spec.b_r * spec.H_r * diag_c;
    // b_bar = [[I, 0, b13], [0, 0, b23]]; absorb b13 into the transform.
    Matrix b13 = b_bar.topRightCorner(c_y, m_r - c_r);
    Matrix tri = Matrix::Identity(m_r, m_r);
    tri.topRightCorner(c_y, m_r - c_r) = b13;
    Matrix T_zr = tri * T_zr_bar;

    Matrix b23 = b_bar.bottomRightCorner(s - c_y, m_r - c_r);

    out.T_y = T_y;
    out.T_zr = T_zr;
    out.c_y = c_y;

    // Factor the (2,3) block at rank n - c_y, normalized so Gamma32' S_p22 = I.
    const int n2 = n - c_y;
    if (n2 > 0) {
        if (n2 > std::min<int>(s - c_y, m_r - c_r))
            throw Error(ErrorCode::InvalidSpec, "canonical_form: residual rank exceeds block size");
        linalg::TruncatedSvd tsvd = linalg::truncated_svd(b23, n2);
        Matrix O2 = tsvd.U * tsvd.singvals.asDiagonal();
        Matrix G32 = tsvd.V;
        // Selector normalization is shared with the estimators module; a
        // forward declaration would drag that header in, so inline the
        // pivoted selection here (largest pivots of a QR on Gamma').
        Eigen::ColPivHouseholderQR<Matrix> qr(G32.transpose());
        Matrix sel = Matrix::Zero(m_r - c_r, n2);
        for (int i = 0; i < n2; ++i)
            sel(qr.colsPermutation().indices()(i), i) = 1.0;
        Matrix a = sel.transpose() * G32;
        if (linalg::cond(a) >= 1e10)
            throw Error(ErrorCode::SelectorSingular, "canonical_form: Gamma32 selector");
        out.Gamma32 = G32 * a.partialPivLu().solve(Matrix::Identity(n2, n2));
        out.O2 = O2 * a.transpose();
    } else {
        out.O2 = Matrix(s - c_y, 0);
        out.Gamma32 = Matrix(m_r - c_r, 0);
    }

    out.b_tilde_r = Matrix::Zero(s, m_r);
    out.b_tilde_r.topLeftCorner(c_y, c_y) = Matrix::Identity(c_y, c_y);
    out.b_tilde_r.bottomRightCorner(s - c_y, m_r - c_r) = out.O2 * out.Gamma32.transpose();
    return out;
}

DgpSpec make_anderson_var1(const Matrix& upsilon22, const Matrix& sigma_w, int c_y_block) {
    const int s2 = static_cast<int>(upsilon22.rows());
    if (upsilon22.cols() != s2)
        throw Error(ErrorCode::InvalidSpec, "make_anderson_var1: Upsilon22 must be square");
    const int s = c_y_block + s2;
    if (c_y_block < 0 || s < 1)
        throw Error(ErrorCode::InvalidSpec, "make_anderson_var1: bad block sizes");
    if (sigma_w.rows() != s || sigma_w.cols() != s)
        throw Error(ErrorCode::InvalidSpec, "make_anderson_var1: Sigma_W shape");

    Matrix a22 = Matrix::Identity(s2, s2) + upsilon22;
    if (spectral_radius(a22) >= 1.0)
        throw Error(ErrorCode::UnstableBlock, "make_anderson_var1: |lambda_max(I + Upsilon22)| >= 1");

    DgpSpec spec;
    spec.s = s;
    spec.m_r = s;
    spec.m_u = 0;
    spec.k = s;
    spec.c_r = c_y_block;
    spec.c_u = 0;
    spec.n = s2;
    spec.Lambda = Matrix::Identity(s, s);
    spec.Sigma = sigma_w;
    spec.b_r = Matrix::Zero(s, s);
    spec.b_r.bottomRightCorner(s2, s2) = upsilon22;
    spec.b_u = Matrix(s, 0);
    spec.H_r = Matrix::Identity(s, s);
    spec.H_u = Matrix(0, 0);

    // z_t = X_{t-1}: the random-walk block differences to W_{t-1,1}, the
    // stable block is X_{t-1,2} = sum_{j>=1} (I+U22)^{j-1} W_{t-j,2}.
    // Truncate once the AR powers are below machine noise.
    int q = 1;
    {
        double rho = spectral_radius(a22);
        if (s2 > 0 && rho > 0.0) {
            q = std::min<int>(kMaxMaOrder, std::max(1, static_cast<int>(std::ceil(
                                               std::log(1e-16) / std::log(rho) + 1))));
        }
    }
    Matrix power = Matrix::Identity(s2, s2);
    for (int j = 1; j <= q; ++j) {
        Matrix cj = Matrix::Zero(s, s);
        if (j == 1 && c_y_block > 0)
            cj.topLeftCorner(c_y_block, c_y_block) = Matrix::Identity(c_y_block, c_y_block);
        if (s2 > 0) {
            cj.bottomRightCorner(s2, s2) = power;
            power = power * a22;
        }
        spec.ma_coeffs.push_back(cj);
    }
    spec.validate();
    return spec;
}

DgpSpec make_johansen_vecm(const Matrix& alpha, const Matrix& beta,
                           const std::vector<Matrix>& lag_coeffs, const Matrix& sigma) {
    const int sx = static_cast<int>(alpha.rows());
    const int r = static_cast<int>(alpha.cols());
    const int L = static_cast<int>(lag_coeffs.size());
    if (beta.rows() != sx || beta.cols() != r)
        throw Error(ErrorCode::InvalidSpec, "make_johansen_vecm: alpha/beta shapes");
    if (sigma.rows() != sx || sigma.cols() != sx)
        throw Error(ErrorCode::InvalidSpec, "make_johansen_vecm: Sigma shape");
    for (const auto& phi : lag_coeffs)
        if (phi.rows() != sx || phi.cols() != sx)
            throw Error(ErrorCode::InvalidSpec, "make_johansen_vecm: lag coefficient shape");
    if (r < 1 || r >= sx)
        throw Error(ErrorCode::NotI1, "make_johansen_vecm: cointegrating rank must satisfy 0 < r < s");
    {
        Eigen::JacobiSVD<Matrix> sa(alpha), sb(beta);
        if (sa.singularValues().minCoeff() <= 1e-10 * std::max(1.0, sa.singularValues().maxCoeff()) ||
            sb.singularValues().minCoeff() <= 1e-10 * std::max(1.0, sb.singularValues().maxCoeff()))
            throw Error(ErrorCode::NotI1, "make_johansen_vecm: alpha or beta rank deficient");
    }

    // Stationary companion state: xi_t = [beta'X_t; dX_t; ...; dX_{t-Lst+1}]
    // with at least one dX block so lagged differences stay addressable.
    //   dX_t    = alpha (beta'X_{t-1}) + sum Phi_i dX_{t-i} + eps_t
    //   beta'X_t = (I + beta'alpha) beta'X_{t-1} + sum beta'Phi_i dX_{t-i} + beta'eps_t
    const int Lst = std::max(L, 1);
    const int dim_state = r + Lst * sx;
    Matrix A = Matrix::Zero(dim_state, dim_state);
    Matrix Bmat = Matrix::Zero(dim_state, sx);
    A.topLeftCorner(r, r) = Matrix::Identity(r, r) + beta.transpose() * alpha;
    for (int i = 0; i < L; ++i) {
        A.block(0, r + i * sx, r, sx) = beta.transpose() * lag_coeffs[i];
        A.block(r, r + i * sx, sx, sx) = lag_coeffs[i];
    }
    A.block(r, 0, sx, r) = alpha;
    for (int i = 1; i < Lst; ++i)
        A.block(r + i * sx, r + (i - 1) * sx, sx, sx) = Matrix::Identity(sx, sx);
    Bmat.topRows(r) = beta.transpose();
    Bmat.middleRows(r, sx) = Matrix::Identity(sx, sx);

    if (spectral_radius(A) >= 1.0 - 1e-10)
        throw Error(ErrorCode::NotI1, "make_johansen_vecm: companion dynamics not stable");

    // Johansen I(1) condition: alpha_perp' (I - sum Phi_i) beta_perp nonsingular.
    {
        auto perp = [&](const Matrix& mat) {
            Eigen::JacobiSVD<Matrix> svd(mat, Eigen::ComputeFullU);
            return Matrix(svd.matrixU().rightCols(sx - r));
        };
        Matrix gamma_j = Matrix::Identity(sx, sx);
        for (const auto& phi : lag_coeffs) gamma_j -= phi;
        Matrix test = perp(alpha).transpose() * gamma_j * perp(beta);
        if (linalg::cond(test) >= linalg::kCondLimit)
            throw Error(ErrorCode::NotI1, "make_johansen_vecm: alpha_perp' Gamma beta_perp singular");
    }

    DgpSpec spec;
    spec.s = sx;
    spec.m_r = sx;
    spec.m_u = L * sx;
    spec.k = sx;
    spec.c_r = sx - r;
    spec.c_u = 0;
    spec.n = r;
    spec.Lambda = Matrix::Identity(sx, sx);
    spec.Sigma = sigma;
    spec.b_r = alpha * beta.transpose();
    spec.b_u = Matrix(sx, spec.m_u);
    for (int i = 0; i < L; ++i) spec.b_u.middleCols(i * sx, sx) = lag_coeffs[i];

    // H_r: integrated directions span beta_perp, cointegrating ones span beta.
    {
        Eigen::JacobiSVD<Matrix> svd(beta, Eigen::ComputeFullU);
        Matrix h(sx, sx);
        h.leftCols(sx - r) = svd.matrixU().rightCols(sx - r); // beta_perp basis
        h.rightCols(r) = svd.matrixU().leftCols(r);           // col span of beta
        spec.H_r = h;
    }
    spec.H_u = Matrix::Identity(spec.m_u, spec.m_u);

    // MA list: v rows from the companion recursion, truncated at machine noise.
    const double rho = spectral_radius(A);
    int q = std::min<int>(kMaxMaOrder,
                          std::max(L + 1, rho > 0.0 ? static_cast<int>(std::ceil(std::log(1e-16) /
                                                                                 std::log(std::max(rho, 1e-3)))) + 1
                                                    : L + 1));
    Matrix sel_dx = Matrix::Zero(sx, dim_state);
    sel_dx.middleCols(r, sx) = Matrix::Identity(sx, sx);
    Matrix sel_bx = Matrix::Zero(r, dim_state);
    sel_bx.leftCols(r) = Matrix::Identity(r, r);
    Matrix h_par_t = spec.H_r.leftCols(spec.c_r).transpose(); // (s-r) x s

    // H_perp lies in the column span of beta, so H_perp' X = G' beta' X
    // with G = (beta'beta)^{-1} beta' H_perp.
    Matrix gt = ((beta.transpose() * beta)
                     .ldlt()
                     .solve(beta.transpose() * spec.H_r.rightCols(r)))
                    .transpose();

    std::vector<Matrix> powA(q);
    powA[0] = Matrix::Identity(dim_state, dim_state);
    for (int j = 1; j < q; ++j) powA[j] = powA[j - 1] * A;

    for (int j = 1; j <= q; ++j) {
        Matrix cj = Matrix::Zero(spec.m_r + spec.m_u, sx);
        // xi_{t-1} = sum_{i>=0} A^i B eps_{t-1-i}: the eps_{t-j} coefficient
        // is A^{j-1} B. z^r = X_{t-1}: integrated rows difference to
        // H_par' dX_{t-1}, cointegrating rows read G' beta' X_{t-1}.
        Matrix state_coeff = powA[j - 1] * Bmat;
        cj.topRows(spec.c_r) = h_par_t * sel_dx * state_coeff;
        cj.middleRows(spec.c_r, r) = gt * sel_bx * state_coeff;
        // z^u row block i holds dX_{t-1-i}; its eps_{t-j} coefficient sits
        // at companion power j-1-i.
        for (int i = 0; i < L; ++i) {
            const int lag = j - 1 - i;
            if (lag >= 0)
                cj.middleRows(spec.m_r + i * sx, sx) = sel_dx * powA[lag] * Bmat;
        }
        spec.ma_coeffs.push_back(cj);
    }
    spec.validate();
    return spec;
}

DgpSpec make_random_spec(int s, int m_r, int m_u, int c_r, int c_u, int n, int c_y,
                         std::uint64_t seed) {
    if (s < 1 || m_r < 1 || m_u < 0)
        throw Error(ErrorCode::InfeasibleDimensions, "make_random_spec: dimensions");
    if (c_r < 0 || c_r > m_r || c_u < 0 || c_u > m_u)
        throw Error(ErrorCode::InfeasibleDimensions, "make_random_spec: integrated counts");
    if (n < 1 || n > std::min(s, m_r))
        throw Error(ErrorCode::InfeasibleDimensions, "make_random_spec: rank n");
    if (c_y < 0 || c_y > std::min(n, c_r))
        throw Error(ErrorCode::InfeasibleDimensions, "make_random_spec: c_y");
    if (n - c_y > m_r - c_r)
        throw Error(ErrorCode::InfeasibleDimensions,
                    "make_random_spec: rank in the stationary block exceeds its width");
    if (n - c_y > s - c_y)
        throw Error(ErrorCode::InfeasibleDimensions, "make_random_spec: rank exceeds output block");

    NormalSampler rng(derive_seed(seed, 0xD6));
    DgpSpec spec;
    spec.s = s;
    spec.m_r = m_r;
    spec.m_u = m_u;
    spec.k = std::max(s, m_r + m_u);
    spec.c_r = c_r;
    spec.c_u = c_u;
    spec.n = n;
    spec.H_r = random_orthogonal(m_r, rng);
    spec.H_u = random_orthogonal(m_u, rng);

    // b_r = O Gamma' with rank(Gamma' H_par) = c_y by construction:
    // in H_r coordinates Gamma' = [A, B], A = U_A V_A' of rank c_y.
    Matrix O = seeded_gaussian(s, n, rng);
    Matrix A = Matrix::Zero(n, c_r);
    if (c_y > 0)
        A = seeded_gaussian(n, c_y, rng) * seeded_gaussian(c_y, c_r, rng);
    Matrix Bblk = Matrix::Zero(n, m_r - c_r);
    if (n - c_y > 0 && m_r - c_r > 0) {
        Bblk = 0.3 * seeded_gaussian(n, m_r - c_r, rng);
        // Give the stationary block full residual rank without swamping A.
        Matrix bump = Matrix::Zero(n, m_r - c_r);
        bump.bottomLeftCorner(n - c_y, std::min(n - c_y, m_r - c_r)).setIdentity();
        Bblk += bump;
    }
    Matrix gamma_t = Matrix(n, m_r);
    gamma_t.leftCols(c_r) = A;
    gamma_t.rightCols(m_r - c_r) = Bblk;
    spec.b_r = O * gamma_t * spec.H_r.transpose();
    spec.b_u = m_u > 0 ? Matrix(0.5 * seeded_gaussian(s, m_u, rng)) : Matrix(s, 0);

    spec.Lambda = Matrix::Zero(s, spec.k);
    spec.Lambda.leftCols(s) = Matrix::Identity(s, s) + 0.2 * seeded_gaussian(s, s, rng);
    {
        Matrix g = 0.2 * seeded_gaussian(spec.k, spec.k, rng);
        spec.Sigma = Matrix::Identity(spec.k, spec.k) + 0.5 * (g + g.transpose());
        Eigen::SelfAdjointEigenSolver<Matrix> es(spec.Sigma);
        if (es.eigenvalues().minCoeff() < 0.1)
            spec.Sigma += (0.1 - es.eigenvalues().minCoeff()) * Matrix::Identity(spec.k, spec.k);
    }

    const int m = m_r + m_u;
    Matrix c_1 = Matrix::Zero(m, spec.k);
    c_1.leftCols(m) = Matrix::Identity(m, m);
    c_1 += 0.25 * seeded_gaussian(m, spec.k, rng);
    Matrix c_2 = 0.2 * seeded_gaussian(m, spec.k, rng);
    spec.ma_coeffs = {c_1, c_2};
    spec.validate();
    return spec;
}

DgpSpec make_cy_positive_spec(int s, int m_r, int m_u, int c_r, int c_u, int n, int c_y,
                              std::uint64_t seed) {
    if (c_y < 1)
        throw Error(ErrorCode::InfeasibleDimensions, "make_cy_positive_spec: c_y must be >= 1");
    if (c_y > std::min(n, c_r) || n > std::min(s, m_r))
        throw Error(ErrorCode::InfeasibleDimensions, "make_cy_positive_spec: dimension constraints");
    DgpSpec spec = make_random_spec(s, m_r, m_u, c_r, c_u, n, c_y, seed);
    // The construction pins rank(b_r H_par) = c_y; double-check numerically.
    Matrix b_par = spec.b_r * spec.H_r.leftCols(c_r);
    Eigen::JacobiSVD<Matrix> svd(b_par);
    int rank = 0;
    Eigen::JacobiSVD<Matrix> svd_b(spec.b_r);
    for (int i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > 1e-10 * svd_b.singularValues()(0)) ++rank;
    if (rank != c_y)
        throw Error(ErrorCode::InfeasibleDimensions, "make_cy_positive_spec: achieved rank mismatch");
    return spec;
}

SeriesMatrix detrend(const SeriesMatrix& a, Preproc mode) {
    if (mode == Preproc::None) return a;
    const int T = a.length();
    if (mode == Preproc::Demean && T < 2) throw Error(ErrorCode::TooShort, "detrend: demean needs T >= 2");
    if (mode == Preproc::Detrend && T < 3) throw Error(ErrorCode::TooShort, "detrend: detrend needs T >= 3");

    SeriesMatrix out = a;
    if (mode == Preproc::Demean) {
        Vector mean = a.values.rowwise().mean();
        out.values.colwise() -= mean;
        return out;
    }
    // Regress on d_t = [1, t]' and keep residuals.
    Matrix d(2, T);
    for (int t = 0; t < T; ++t) {
        d(0, t) = 1.0;
        d(1, t) = static_cast<double>(t + 1);
    }
    Matrix dd = d * d.transpose() / static_cast<double>(T);
    Matrix ad = a.values * d.transpose() / static_cast<double>(T);
    out.values = a.values - ad * dd.ldlt().solve(d);
    return out;
}

Matrix nu_autocov(const DgpSpec& spec, int j) {
    const int m = spec.m_r + spec.m_u;
    Matrix out = Matrix::Zero(m, m);
    const int q = spec.q();
    // E nu_t nu_{t-j}' = sum_b C_{j+b} Sigma C_b' over valid indices.
    for (int b = std::max(1, 1 - j); b <= q; ++b) {
        const int a = j + b;
        if (a < 1 || a > q) continue;
        out += spec.ma_coeffs[a - 1] * spec.Sigma * spec.ma_coeffs[b - 1].transpose();
    }
    return out;
}

} // namespace rankreg::dgp
