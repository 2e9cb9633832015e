#include "rankreg/covest.hpp"

#include <cmath>

namespace rankreg::covest {

void KernelConfig::validate() const {
    if (!(b > 0.25 && b < 2.0 / 3.0))
        throw Error(ErrorCode::ConfigError, "kernel.b must lie in (1/4, 2/3)");
    if (!(c > 0.0))
        throw Error(ErrorCode::ConfigError, "kernel.c must be positive");
}

Matrix sample_moment(const SeriesMatrix& a, const SeriesMatrix& b) {
    if (a.length() != b.length())
        throw Error(ErrorCode::LengthMismatch, "sample_moment");
    const double T = static_cast<double>(a.length());
    return (a.values * b.values.transpose()) / T;
}

Matrix lagged_cov(const SeriesMatrix& a, const SeriesMatrix& b, int j) {
    if (a.length() != b.length())
        throw Error(ErrorCode::LengthMismatch, "lagged_cov");
    const int T = a.length();
    if (std::abs(j) > T - 1)
        throw Error(ErrorCode::LagOutOfRange, "lagged_cov: |j| > T-1");
    Matrix out = Matrix::Zero(a.dim(), b.dim());
    // b_{t-j} contributes only when t-j falls inside [1, T].
    const int t_lo = std::max(1, 1 + j);
    const int t_hi = std::min(T, T + j);
    for (int t = t_lo; t <= t_hi; ++t)
        out.noalias() += a.values.col(t - 1) * b.values.col(t - j - 1).transpose();
    return out / static_cast<double>(T);
}

double kernel_weight(double x, const KernelConfig& cfg) {
    const double ax = std::abs(x);
    if (ax >= 1.0) return 0.0;
    if (cfg.kernel == KernelKind::Quartic) {
        const double u = 1.0 - x * x;
        return u * u;
    }
    // Parzen
    if (ax <= 0.5) return 1.0 - 6.0 * ax * ax + 6.0 * ax * ax * ax;
    const double u = 1.0 - ax;
    return 2.0 * u * u * u;
}

int bandwidth(int T, const KernelConfig& cfg) {
    if (T < 4) throw Error(ErrorCode::TooShort, "bandwidth: T < 4");
    const double raw = cfg.c * std::pow(static_cast<double>(T), cfg.b);
    int K = static_cast<int>(std::llround(raw));
    if (K < 1) K = 1;
    if (K > T - 1) K = T - 1;
    return K;
}

LongRunSet long_run_set(const SeriesMatrix& a, const SeriesMatrix& b, const KernelConfig& cfg) {
    if (a.length() != b.length())
        throw Error(ErrorCode::LengthMismatch, "long_run_set");
    const int T = a.length();
    const int K = bandwidth(T, cfg);

    LongRunSet out;
    out.K_used = K;
    out.omega = Matrix::Zero(a.dim(), b.dim());
    out.delta = Matrix::Zero(a.dim(), b.dim());
    // w((j/K)) vanishes for |j| >= K, so the sums over j = 1-T .. T-1
    // collapse to |j| <= K-1.
    const int jmax = std::min(K - 1, T - 1);
    for (int j = -jmax; j <= jmax; ++j) {
        const double w = kernel_weight(static_cast<double>(j) / K, cfg);
        if (w == 0.0) continue;
        Matrix g = lagged_cov(a, b, j);
        out.omega += w * g;
        if (j >= 0) out.delta += w * g;
    }
    return out;
}

LongRunSet omega_hat(const SeriesMatrix& a, const SeriesMatrix& b, const KernelConfig& cfg) {
    return long_run_set(a, b, cfg);
}

LongRunSet delta_hat(const SeriesMatrix& a, const SeriesMatrix& b, const KernelConfig& cfg) {
    return long_run_set(a, b, cfg);
}

SeriesMatrix diff(const SeriesMatrix& a) {
    SeriesMatrix out(a.dim(), a.length());
    out.values.col(0) = a.values.col(0);
    for (int t = 1; t < a.length(); ++t)
        out.values.col(t) = a.values.col(t) - a.values.col(t - 1);
    return out;
}

} // namespace rankreg::covest
