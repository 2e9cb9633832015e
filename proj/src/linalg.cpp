#include "rankreg/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

namespace rankreg {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::NotSymmetric: return "NotSymmetric";
        case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorCode::RankTooLarge: return "RankTooLarge";
        case ErrorCode::DegenerateSpectrum: return "DegenerateSpectrum";
        case ErrorCode::SingularNormalMatrix: return "SingularNormalMatrix";
        case ErrorCode::SingularBlock: return "SingularBlock";
        case ErrorCode::SingularSchurComplement: return "SingularSchurComplement";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
        case ErrorCode::RankDeficiencyAmbiguous: return "RankDeficiencyAmbiguous";
        case ErrorCode::UnstableBlock: return "UnstableBlock";
        case ErrorCode::NotI1: return "NotI1";
        case ErrorCode::InfeasibleDimensions: return "InfeasibleDimensions";
        case ErrorCode::TooShort: return "TooShort";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::LagOutOfRange: return "LagOutOfRange";
        case ErrorCode::SingularGram: return "SingularGram";
        case ErrorCode::SingularLongRun: return "SingularLongRun";
        case ErrorCode::WffNotPositiveDefinite: return "WffNotPositiveDefinite";
        case ErrorCode::SelectorSingular: return "SelectorSingular";
        case ErrorCode::SingularMoment: return "SingularMoment";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::IoError: return "IoError";
    }
    return "UnknownError";
}

namespace linalg {

namespace {

// Eigendecomposition of a symmetric matrix with the symmetry gate applied.
Eigen::SelfAdjointEigenSolver<Matrix> sym_eig(const Matrix& m, const char* who) {
    if (m.rows() != m.cols() || !is_symmetric(m))
        throw Error(ErrorCode::NotSymmetric, who);
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    if (es.info() != Eigen::Success)
        throw Error(ErrorCode::NotSymmetric, std::string(who) + ": eigensolver failed");
    return es;
}

void require_spd_eigs(const Vector& eigs, const char* who) {
    if (eigs.size() == 0) return;
    if (eigs.minCoeff() <= 0.0)
        throw Error(ErrorCode::NotPositiveDefinite, who);
    if (eigs.maxCoeff() / eigs.minCoeff() >= kCondLimit)
        throw Error(ErrorCode::NotPositiveDefinite, std::string(who) + ": condition number above limit");
}

void fix_signs(Matrix& u, Matrix& v) {
    for (Eigen::Index j = 0; j < u.cols(); ++j) {
        Eigen::Index imax = 0;
        u.col(j).cwiseAbs().maxCoeff(&imax);
        if (u(imax, j) < 0.0) {
            u.col(j) = -u.col(j);
            if (j < v.cols()) v.col(j) = -v.col(j);
        }
    }
}

} // namespace

bool is_symmetric(const Matrix& m, double rel_tol) {
    if (m.rows() != m.cols()) return false;
    double scale = m.norm();
    if (scale == 0.0) return true;
    return (m - m.transpose()).norm() <= rel_tol * scale;
}

double cond(const Matrix& m) {
    if (m.size() == 0) return 1.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    double smin = svd.singularValues().minCoeff();
    double smax = svd.singularValues().maxCoeff();
    if (smin <= 0.0) return std::numeric_limits<double>::infinity();
    return smax / smin;
}

Matrix sym_sqrt(const Matrix& m) {
    auto es = sym_eig(m, "sym_sqrt");
    require_spd_eigs(es.eigenvalues(), "sym_sqrt");
    return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

Matrix sym_sqrt_inv(const Matrix& m) {
    auto es = sym_eig(m, "sym_sqrt_inv");
    require_spd_eigs(es.eigenvalues(), "sym_sqrt_inv");
    return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
           es.eigenvectors().transpose();
}

Matrix gram_factor(const Matrix& m, GramFactor kind) {
    auto es = sym_eig(m, "gram_factor");
    require_spd_eigs(es.eigenvalues(), "gram_factor");
    Matrix inv = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
                 es.eigenvectors().transpose();
    if (kind == GramFactor::Symmetric)
        return sym_sqrt(0.5 * (inv + inv.transpose()));
    Eigen::LLT<Matrix> llt(0.5 * (inv + inv.transpose()));
    if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::NotPositiveDefinite, "gram_factor: Cholesky failed");
    return Matrix(llt.matrixL());
}

TruncatedSvd truncated_svd(const Matrix& a, int n) {
    const int minmn = static_cast<int>(std::min(a.rows(), a.cols()));
    if (n < 1 || n > minmn)
        throw Error(ErrorCode::RankTooLarge, "truncated_svd: rank " + std::to_string(n) +
                                                 " outside [1, " + std::to_string(minmn) + "]");
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    if (sv(n - 1) <= 0.0)
        throw Error(ErrorCode::RankTooLarge, "truncated_svd: n-th singular value is zero");

    TruncatedSvd out;
    out.U = svd.matrixU().leftCols(n);
    out.V = svd.matrixV().leftCols(n);
    out.singvals = sv.head(n);
    fix_signs(out.U, out.V);
    out.residual = a - out.U * out.singvals.asDiagonal() * out.V.transpose();
    if (n < minmn)
        out.degenerate = (sv(n - 1) - sv(n)) < kDegenerateGap * sv(0);
    return out;
}

GenEig gen_eig_sym(const Matrix& q, const Matrix& m, int n) {
    if (q.rows() != q.cols() || !is_symmetric(q))
        throw Error(ErrorCode::NotSymmetric, "gen_eig_sym: Q");
    if (m.rows() != q.rows())
        throw Error(ErrorCode::LengthMismatch, "gen_eig_sym: dimension mismatch");
    if (n < 1 || n > m.rows())
        throw Error(ErrorCode::RankTooLarge, "gen_eig_sym: n");

    auto esm = sym_eig(m, "gen_eig_sym: M");
    require_spd_eigs(esm.eigenvalues(), "gen_eig_sym: M");
    Matrix w = esm.eigenvectors() * esm.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
               esm.eigenvectors().transpose(); // M^{-1/2}

    Matrix whitened = w * q * w;
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (whitened + whitened.transpose()));
    if (es.info() != Eigen::Success)
        throw Error(ErrorCode::NotSymmetric, "gen_eig_sym: whitened solve failed");

    // SelfAdjointEigenSolver sorts ascending; take the top n in descending order.
    const Eigen::Index dim = m.rows();
    GenEig out;
    out.values = Vector(n);
    out.vectors = Matrix(dim, n);
    for (int i = 0; i < n; ++i) {
        out.values(i) = es.eigenvalues()(dim - 1 - i);
        out.vectors.col(i) = w * es.eigenvectors().col(dim - 1 - i);
    }
    Matrix dummy(0, n);
    fix_signs(out.vectors, dummy);
    return out;
}

Matrix weighted_pinv(const Matrix& o, const Matrix& w) {
    if (w.rows() != w.cols() || w.rows() != o.rows())
        throw Error(ErrorCode::LengthMismatch, "weighted_pinv: W must be square s x s");
    Matrix w2 = w * w;
    Matrix normal = o.transpose() * w2 * o;
    if (cond(normal) >= kCondLimit)
        throw Error(ErrorCode::SingularNormalMatrix, "weighted_pinv");
    return normal.ldlt().solve(o.transpose() * w2);
}

Matrix block_inverse(const Matrix& a, const Matrix& b, const Matrix& c, const Matrix& d) {
    const Eigen::Index p = a.rows(), q = d.rows();
    if (a.cols() != p || d.cols() != q || b.rows() != p || b.cols() != q || c.rows() != q || c.cols() != p)
        throw Error(ErrorCode::LengthMismatch, "block_inverse: inconsistent block shapes");
    if (cond(a) >= kCondLimit)
        throw Error(ErrorCode::SingularBlock, "block_inverse: A");
    Matrix ainv = a.partialPivLu().solve(Matrix::Identity(p, p));
    Matrix schur = d - c * ainv * b;
    if (cond(schur) >= kCondLimit)
        throw Error(ErrorCode::SingularSchurComplement, "block_inverse");
    Matrix schur_inv = schur.partialPivLu().solve(Matrix::Identity(q, q));

    Matrix out = Matrix::Zero(p + q, p + q);
    out.topLeftCorner(p, p) = ainv;
    Matrix left(p + q, q);
    left.topRows(p) = -ainv * b;
    left.bottomRows(q) = Matrix::Identity(q, q);
    Matrix right(q, p + q);
    right.leftCols(p) = -c * ainv;
    right.rightCols(q) = Matrix::Identity(q, q);
    out += left * schur_inv * right;
    return out;
}

Matrix solve_spd(const Matrix& m, const Matrix& rhs, ErrorCode on_singular) {
    if (m.rows() != m.cols() || m.rows() != rhs.rows())
        throw Error(ErrorCode::LengthMismatch, "solve_spd");
    if (m.size() == 0) return Matrix(0, rhs.cols());
    if (cond(m) >= kCondLimit)
        throw Error(on_singular, "solve_spd: matrix near singular");
    return m.ldlt().solve(rhs);
}

Matrix inv_spd(const Matrix& m, ErrorCode on_singular) {
    return solve_spd(m, Matrix::Identity(m.rows(), m.cols()), on_singular);
}

} // namespace linalg
} // namespace rankreg
