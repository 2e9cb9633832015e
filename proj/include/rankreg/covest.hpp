#pragma once

#include "rankreg/series.hpp"

namespace rankreg::covest {

enum class KernelKind { Quartic, Parzen };

struct KernelConfig {
    KernelKind kernel = KernelKind::Quartic;
    double b = 1.0 / 3.0; // bandwidth exponent, must lie in (1/4, 2/3)
    double c = 1.0;       // bandwidth scale, > 0

    void validate() const;
};

struct LongRunSet {
    Matrix omega; // two-sided weighted sum of lagged covariances
    Matrix delta; // one-sided (j >= 0) weighted sum
    int K_used = 0;
};

// <a_t, b_t> = T^{-1} sum_t a_t b_t'.
Matrix sample_moment(const SeriesMatrix& a, const SeriesMatrix& b);

// Gamma_{a,b}(j) = T^{-1} sum_{t=1}^T a_t b_{t-j}', zeros outside the sample.
Matrix lagged_cov(const SeriesMatrix& a, const SeriesMatrix& b, int j);

double kernel_weight(double x, const KernelConfig& cfg);

// K = max(1, round(c * T^b)) clipped to T-1.
int bandwidth(int T, const KernelConfig& cfg);

// Omega and Delta computed together (they share the lagged covariances).
LongRunSet long_run_set(const SeriesMatrix& a, const SeriesMatrix& b, const KernelConfig& cfg);

LongRunSet omega_hat(const SeriesMatrix& a, const SeriesMatrix& b, const KernelConfig& cfg);
LongRunSet delta_hat(const SeriesMatrix& a, const SeriesMatrix& b, const KernelConfig& cfg);

// First differences under the z_0 := 0 convention (so diff(a)_1 = a_1).
SeriesMatrix diff(const SeriesMatrix& a);

} // namespace rankreg::covest
