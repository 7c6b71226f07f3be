#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "grv/pearson3.hpp"

namespace {

TEST(Pearson3, ZeroSkewnessIsStandardNormal) {
    EXPECT_DOUBLE_EQ(grv::pearson3_cdf(0.0, 0.0), 0.5);
    EXPECT_NEAR(grv::pearson3_cdf(1.959963984540054, 0.0), 0.975, 1e-9);
    EXPECT_NEAR(grv::pearson3_cdf(-1.0, 0.0), 0.15865525393145707, 1e-12);
}

TEST(Pearson3, MonotoneOnDenseGrid) {
    for (double gamma : {0.0, 0.3, 1.5, -0.7, -2.0}) {
        double prev = -1.0;
        for (int i = 0; i <= 10000; ++i) {
            const double t = -8.0 + 16.0 * i / 10000.0;
            const double c = grv::pearson3_cdf(t, gamma);
            EXPECT_GE(c, prev) << "gamma=" << gamma << " t=" << t;
            EXPECT_GE(c, 0.0);
            EXPECT_LE(c, 1.0);
            prev = c;
        }
    }
}

TEST(Pearson3, MatchesShiftedGammaSampling) {
    std::mt19937_64 eng(2024);
    for (double gamma : {0.8, -0.5}) {
        const double a = 4.0 / (gamma * gamma);
        std::gamma_distribution<double> dist(a, 1.0);
        const int n = 1000000;
        std::vector<double> draws(n);
        for (int i = 0; i < n; ++i) {
            const double x = dist(eng);
            const double t = (x - a) / std::sqrt(a);
            draws[i] = gamma > 0.0 ? t : -t;
        }
        std::sort(draws.begin(), draws.end());
        double sup = 0.0;
        for (int i = 0; i < n; ++i) {
            const double f = grv::pearson3_cdf(draws[i], gamma);
            const double lo = static_cast<double>(i) / n;
            const double hi = static_cast<double>(i + 1) / n;
            sup = std::max({sup, std::abs(f - lo), std::abs(f - hi)});
        }
        EXPECT_LT(sup, 0.005) << "gamma=" << gamma;
    }
}

TEST(Pearson3, SmallSkewnessConvergesToNormal) {
    double sup = 0.0;
    for (int i = 0; i <= 1200; ++i) {
        const double t = -6.0 + i / 100.0;
        sup = std::max(sup, std::abs(grv::pearson3_cdf(t, 1e-4) - grv::pearson3_cdf(t, 0.0)));
    }
    EXPECT_LT(sup, 1e-3);
}

TEST(Pearson3, DensityIntegratesToOne) {
    for (double gamma : {0.0, 0.5, -1.2, 2.0}) {
        // Clip to the support: the density is discontinuous at t = -2/gamma
        // (a jump for shape 1), and Simpson needs a smooth integrand.
        double lo = -40.0, hi = 80.0;
        if (gamma > 0.0) lo = -2.0 / gamma;
        if (gamma < 0.0) hi = -2.0 / gamma;
        const int n = 160000;  // even, Simpson
        const double h = (hi - lo) / n;
        double sum = grv::pearson3_pdf(lo, gamma) + grv::pearson3_pdf(hi, gamma);
        for (int i = 1; i < n; ++i)
            sum += (i % 2 == 1 ? 4.0 : 2.0) * grv::pearson3_pdf(lo + i * h, gamma);
        EXPECT_NEAR(sum * h / 3.0, 1.0, 1e-6) << "gamma=" << gamma;
    }
}

TEST(Pearson3, ReflectionIdentity) {
    for (double gamma : {0.4, 1.1, 3.0}) {
        for (double t : {-3.0, -0.5, 0.0, 0.7, 2.5}) {
            EXPECT_NEAR(grv::pearson3_cdf(t, -gamma), 1.0 - grv::pearson3_cdf(-t, gamma), 1e-14);
        }
    }
}

TEST(Pearson3, RightTailComplementsCdf) {
    for (double gamma : {0.0, 0.9, -1.4}) {
        for (double t : {-2.0, 0.0, 1.0, 3.5}) {
            EXPECT_NEAR(grv::pearson3_cdf(t, gamma) + grv::pearson3_right_tail(t, gamma), 1.0,
                        1e-12);
        }
    }
    // Far tail keeps relative precision instead of rounding to zero.
    const double far = grv::pearson3_right_tail(14.0, 0.5);
    EXPECT_GT(far, 0.0);
    EXPECT_LT(far, 1e-12);
}

TEST(Pearson3, SupportBoundaryForPositiveSkewness) {
    // For gamma > 0 the law lives on t >= -2/gamma.
    EXPECT_EQ(grv::pearson3_cdf(-2.0 / 0.5 - 0.01, 0.5), 0.0);
    EXPECT_EQ(grv::pearson3_pdf(-2.0 / 0.5 - 0.01, 0.5), 0.0);
    EXPECT_EQ(grv::pearson3_cdf(2.0 / 0.5 + 0.01, -0.5), 1.0);
}

TEST(Pearson3, NullMappingStandardizes) {
    grv::PearsonIIINull null{0.3, 2.0, 0.5, 10.0};
    const double v = 0.35;
    const double t = (v * 10.0 - 2.0) / 0.5;
    EXPECT_DOUBLE_EQ(null.standardize(v), t);
    EXPECT_DOUBLE_EQ(null.cdf(v), grv::pearson3_cdf(t, 0.3));
    EXPECT_DOUBLE_EQ(null.right_tail(v), grv::pearson3_right_tail(t, 0.3));
    EXPECT_THROW(grv::pearson3_cdf(std::nan(""), 0.0), grv::ValidationError);
}

}  // namespace
