#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "grv/association.hpp"
#include "grv/errors.hpp"
#include "grv/moments.hpp"
#include "grv/parallel.hpp"
#include "grv/pearson3.hpp"
#include "grv/rng.hpp"

namespace grv {

enum class TestMethod { analytic, monte_carlo, exhaustive };

inline const char* method_name(TestMethod m) {
    switch (m) {
        case TestMethod::analytic: return "analytic";
        case TestMethod::monte_carlo: return "monte_carlo";
        case TestMethod::exhaustive: return "exhaustive";
    }
    return "unknown";
}

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    TestMethod method = TestMethod::analytic;
    std::uint64_t n_permutations = 0;
    std::optional<std::uint64_t> seed;  // Monte Carlo only

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["statistic"] = statistic;
        j["p_value"] = p_value;
        j["method"] = method_name(method);
        j["n_permutations"] = n_permutations;
        if (seed) j["seed"] = *seed;
        return j;
    }
};

namespace detail {

// Relative slack when counting tail permutations, so that exact ties produced
// by symmetric inputs are not lost to rounding in the trace accumulation.
inline constexpr double tie_slack = 1e-12;

inline double trace_permuted(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                             const std::vector<int>& pi) {
    const Eigen::Index n = a.rows();
    double t = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int bi = pi[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < n; ++j)
            t += a(i, j) * b(bi, pi[static_cast<std::size_t>(j)]);
    }
    return t;
}

inline std::uint64_t factorial_if_small(Eigen::Index n, std::uint64_t cap) {
    std::uint64_t f = 1;
    for (Eigen::Index i = 2; i <= n; ++i) {
        const auto k = static_cast<std::uint64_t>(i);
        if (f > cap / k) return 0;  // beyond the budget (checked before multiplying)
        f *= k;
    }
    return f;
}

}  // namespace detail

// Fits the Pearson type III null for T = tr(Gx Gy_pi) on the GRV scale.
// Throws DegenerateInputError when the permutation variance is numerically
// zero, in which case permutation p-values are the caller's fallback.
inline PearsonIIINull pearson3_null(const GramMatrix& gx, const GramMatrix& gy) {
    const PermutationMoments m = permutation_moments_closed_form(gx, gy);
    const double np = gx.frobenius_norm() * gy.frobenius_norm();
    if (m.sigma2 < 1e-24 * np * np)
        throw DegenerateInputError(
            "permutation distribution is degenerate (sigma^2 = " + std::to_string(m.sigma2) +
            "); use a permutation p-value instead");
    return PearsonIIINull{m.gamma, m.mu, std::sqrt(m.sigma2), np};
}

inline TestResult grv_pvalue_analytic(const GramMatrix& gx, const GramMatrix& gy) {
    const double v = grv(gx, gy).value;
    const PearsonIIINull null = pearson3_null(gx, gy);
    const double p = std::clamp(null.right_tail(v), 0.0, 1.0);
    return TestResult{v, p, TestMethod::analytic, 0, std::nullopt};
}

// Exhaustive right-tail permutation p for GRV: the proportion of all N!
// simultaneous row/column permutations of Gy whose trace reaches the observed
// one. The identity permutation is part of the reference set, so p > 0.
inline TestResult grv_pvalue_exhaustive(const GramMatrix& gx, const GramMatrix& gy) {
    const double v = grv(gx, gy).value;
    const double np = gx.frobenius_norm() * gy.frobenius_norm();
    const double threshold = v * np - detail::tie_slack * np;
    if (gx.n() > 9)
        throw BudgetError("exhaustive permutation p-value requires N <= 9 (N! permutations)");
    std::uint64_t total = 0, hits = 0;
    detail::enumerate_permutation_traces(gx.values(), gy.values(), [&](double t) {
        ++total;
        if (t >= threshold) ++hits;
    });
    const double p = static_cast<double>(hits) / static_cast<double>(total);
    return TestResult{v, p, TestMethod::exhaustive, total, std::nullopt};
}

// Monte Carlo right-tail permutation p with the add-one rule. Permutation i
// draws from its own stream derived from (seed, i), so the result is bitwise
// identical for a fixed seed under any worker count or schedule. When the full
// permutation group is no larger than the requested budget, enumeration
// replaces sampling and the method reports itself as exhaustive.
inline TestResult grv_pvalue_permutation(const GramMatrix& gx, const GramMatrix& gy,
                                         std::uint64_t n_perm, std::uint64_t seed,
                                         unsigned workers = 1) {
    if (n_perm == 0) throw ValidationError("n_perm must be at least 1");
    const double v = grv(gx, gy).value;
    if (gx.n() <= 9) {
        const std::uint64_t group = detail::factorial_if_small(gx.n(), n_perm);
        if (group != 0 && group <= n_perm) return grv_pvalue_exhaustive(gx, gy);
    }

    const double np = gx.frobenius_norm() * gy.frobenius_norm();
    const double threshold = v * np - detail::tie_slack * np;
    const std::size_t n = static_cast<std::size_t>(gx.n());
    const auto& a = gx.values();
    const auto& b = gy.values();

    std::vector<std::uint8_t> hit(n_perm, 0);
    parallel_for(n_perm, workers, [&](std::uint64_t i) {
        auto eng = make_engine(derive_seed(seed, {i}));
        const std::vector<int> pi = random_permutation(static_cast<int>(n), eng);
        hit[i] = detail::trace_permuted(a, b, pi) >= threshold ? 1 : 0;
    });
    const std::uint64_t hits = std::accumulate(hit.begin(), hit.end(), std::uint64_t{0});
    const double p = static_cast<double>(1 + hits) / static_cast<double>(n_perm + 1);
    return TestResult{v, p, TestMethod::monte_carlo, n_perm, seed};
}

namespace detail {

// Upper-triangle-standardized copy of a distance matrix: entries are
// (d_ij - mean)/sd over the A = N(N-1)/2 distinct pairs, with the (A-1)
// denominator, laid out as a full symmetric matrix with zero diagonal so that
// permuted lookups stay O(1). The multiset of off-diagonal entries is
// permutation-invariant, so one standardization serves every permutation.
inline Eigen::MatrixXd mantel_standardized(const DistanceMatrix& d) {
    const Eigen::Index n = d.n();
    if (n < 3) throw ValidationError("Mantel permutation test requires N >= 3");
    const double a_pairs = static_cast<double>(n) * (n - 1) / 2.0;
    double mean = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) mean += d(i, j);
    mean /= a_pairs;
    double ss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) ss += (d(i, j) - mean) * (d(i, j) - mean);
    const double sd = std::sqrt(ss / (a_pairs - 1.0));
    if (!(sd > 0.0)) throw DegenerateInputError("distance matrix has zero variance");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j) out(i, j) = (d(i, j) - mean) / sd;
    return out;
}

inline double mantel_permuted(const Eigen::MatrixXd& ux, const Eigen::MatrixXd& uy,
                              const std::vector<int>& pi) {
    const Eigen::Index n = ux.rows();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int yi = pi[static_cast<std::size_t>(i)];
        for (Eigen::Index j = i + 1; j < n; ++j)
            sum += ux(i, j) * uy(yi, pi[static_cast<std::size_t>(j)]);
    }
    const double a_pairs = static_cast<double>(n) * (n - 1) / 2.0;
    return sum / (a_pairs - 1.0);
}

}  // namespace detail

inline TestResult mantel_pvalue_exhaustive(const DistanceMatrix& dx, const DistanceMatrix& dy) {
    if (dx.n() != dy.n())
        throw ValidationError("distance matrices disagree on N: " + std::to_string(dx.n()) +
                              " vs " + std::to_string(dy.n()));
    if (dx.n() > 9)
        throw BudgetError("exhaustive permutation p-value requires N <= 9 (N! permutations)");
    const double r_obs = mantel(dx, dy).value;
    const Eigen::MatrixXd ux = detail::mantel_standardized(dx);
    const Eigen::MatrixXd uy = detail::mantel_standardized(dy);
    const double threshold = r_obs - detail::tie_slack;

    const std::size_t n = static_cast<std::size_t>(dx.n());
    std::vector<int> pi(n);
    std::iota(pi.begin(), pi.end(), 0);
    std::uint64_t total = 0, hits = 0;
    do {
        ++total;
        if (detail::mantel_permuted(ux, uy, pi) >= threshold) ++hits;
    } while (std::next_permutation(pi.begin(), pi.end()));
    const double p = static_cast<double>(hits) / static_cast<double>(total);
    return TestResult{r_obs, p, TestMethod::exhaustive, total, std::nullopt};
}

inline TestResult mantel_pvalue_permutation(const DistanceMatrix& dx, const DistanceMatrix& dy,
                                            std::uint64_t n_perm, std::uint64_t seed,
                                            unsigned workers = 1) {
    if (n_perm == 0) throw ValidationError("n_perm must be at least 1");
    if (dx.n() != dy.n())
        throw ValidationError("distance matrices disagree on N: " + std::to_string(dx.n()) +
                              " vs " + std::to_string(dy.n()));
    if (dx.n() <= 9) {
        const std::uint64_t group = detail::factorial_if_small(dx.n(), n_perm);
        if (group != 0 && group <= n_perm) return mantel_pvalue_exhaustive(dx, dy);
    }

    const double r_obs = mantel(dx, dy).value;
    const Eigen::MatrixXd ux = detail::mantel_standardized(dx);
    const Eigen::MatrixXd uy = detail::mantel_standardized(dy);
    const double threshold = r_obs - detail::tie_slack;
    const std::size_t n = static_cast<std::size_t>(dx.n());

    std::vector<std::uint8_t> hit(n_perm, 0);
    parallel_for(n_perm, workers, [&](std::uint64_t i) {
        auto eng = make_engine(derive_seed(seed, {i}));
        const std::vector<int> pi = random_permutation(static_cast<int>(n), eng);
        hit[i] = detail::mantel_permuted(ux, uy, pi) >= threshold ? 1 : 0;
    });
    const std::uint64_t hits = std::accumulate(hit.begin(), hit.end(), std::uint64_t{0});
    const double p = static_cast<double>(1 + hits) / static_cast<double>(n_perm + 1);
    return TestResult{r_obs, p, TestMethod::monte_carlo, n_perm, seed};
}

}  // namespace grv
