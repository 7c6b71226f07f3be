#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "grv/distances.hpp"
#include "grv/errors.hpp"
#include "grv/gram.hpp"
#include "grv/inference.hpp"
#include "grv/rng.hpp"

namespace grv {

// eQTL-style paired-block generator: N x P genotypes under Hardy-Weinberg
// with per-SNP MAF ~ U(maf_low, maf_high), and N x Q expression rows
// y_i = z_i * 1_Q + e_i where z_i is the sample's allele-count row sum and
// e_i ~ N_Q(mu, Sigma) with mu_q ~ U(0,1) and Sigma a Wishart(Q+1, I) draw.
// associated=false drops the z_i term so the blocks are independent.
struct EqtlConfig {
    int n = 50;
    int p = 2;
    int q = 10;
    double maf_low = 0.1;
    double maf_high = 0.5;
    bool associated = true;
    std::uint64_t seed = 0;
    // Multiplies the noise Cholesky factor; 1.0 is the plain Wishart draw.
    double noise_scale = 1.0;
    // When false, mu and Sigma are drawn once per run instead of per dataset.
    bool redraw_noise_per_dataset = true;
};

struct PairedDataset {
    GenotypeMatrix genotypes;
    RealMatrix expression;
};

enum class TestKind { grv_analytic, grv_permutation, mantel_permutation };

inline const char* test_kind_name(TestKind t) {
    switch (t) {
        case TestKind::grv_analytic: return "grv_analytic";
        case TestKind::grv_permutation: return "grv_permutation";
        case TestKind::mantel_permutation: return "mantel_permutation";
    }
    return "unknown";
}

inline TestKind parse_test_kind(const std::string& name) {
    if (name == "grv_analytic") return TestKind::grv_analytic;
    if (name == "grv_permutation") return TestKind::grv_permutation;
    if (name == "mantel_permutation") return TestKind::mantel_permutation;
    throw ValidationError("unknown test '" + name +
                          "' (expected grv_analytic, grv_permutation, or mantel_permutation)");
}

struct PowerEstimate {
    double mean_power = 0.0;
    double sd = 0.0;
    std::uint64_t runs = 0;
    std::uint64_t datasets_per_run = 0;
    double alpha = 0.0;
    std::uint64_t skipped = 0;  // datasets dropped for degenerate inputs
};

struct SizeEstimate {
    double alpha = 0.0;
    double mean_proportion = 0.0;
    double sd = 0.0;
};

namespace detail {

inline void validate_eqtl(const EqtlConfig& cfg) {
    if (cfg.n < 1) throw ValidationError("eqtl config: n must be at least 1");
    if (cfg.p < 1) throw ValidationError("eqtl config: p must be at least 1");
    if (cfg.q < 1) throw ValidationError("eqtl config: q must be at least 1");
    if (!(cfg.maf_low > 0.0) || !(cfg.maf_high <= 0.5) || cfg.maf_low > cfg.maf_high)
        throw ValidationError("eqtl config: need 0 < maf_low <= maf_high <= 0.5");
    if (!(cfg.noise_scale >= 0.0)) throw ValidationError("eqtl config: noise_scale must be >= 0");
}

struct NoiseParams {
    Eigen::VectorXd mu;    // Q
    Eigen::MatrixXd chol;  // lower-triangular factor of Sigma
};

// Bartlett decomposition of Wishart(df = q+1, I): lower-triangular A with
// A_ii^2 ~ chi^2(df - i) and subdiagonal N(0,1); Sigma = A A^T.
inline NoiseParams draw_noise_params(int q, std::mt19937_64& eng) {
    NoiseParams out;
    out.mu.resize(q);
    for (int i = 0; i < q; ++i) out.mu(i) = uniform01(eng);
    out.chol = Eigen::MatrixXd::Zero(q, q);
    std::normal_distribution<double> normal;
    const int df = q + 1;
    for (int i = 0; i < q; ++i) {
        std::chi_squared_distribution<double> chi2(static_cast<double>(df - i));
        out.chol(i, i) = std::sqrt(chi2(eng));
        for (int j = 0; j < i; ++j) out.chol(i, j) = normal(eng);
    }
    return out;
}

inline PairedDataset generate_with_params(const EqtlConfig& cfg, const NoiseParams& params,
                                          std::mt19937_64& eng) {
    Eigen::MatrixXd geno(cfg.n, cfg.p);
    std::vector<double> maf(static_cast<std::size_t>(cfg.p));
    for (int j = 0; j < cfg.p; ++j) maf[static_cast<std::size_t>(j)] = uniform(eng, cfg.maf_low, cfg.maf_high);
    for (int j = 0; j < cfg.p; ++j) {
        const double m = maf[static_cast<std::size_t>(j)];
        const double p0 = (1.0 - m) * (1.0 - m);
        const double p1 = p0 + 2.0 * m * (1.0 - m);
        for (int i = 0; i < cfg.n; ++i) {
            const double u = uniform01(eng);
            geno(i, j) = u < p0 ? 0.0 : (u < p1 ? 1.0 : 2.0);
        }
    }
    const Eigen::VectorXd z = geno.rowwise().sum();

    std::normal_distribution<double> normal;
    Eigen::MatrixXd expr(cfg.n, cfg.q);
    Eigen::VectorXd g(cfg.q);
    for (int i = 0; i < cfg.n; ++i) {
        for (int k = 0; k < cfg.q; ++k) g(k) = normal(eng);
        Eigen::VectorXd e = params.mu + cfg.noise_scale * (params.chol * g);
        if (cfg.associated) e.array() += z(i);
        expr.row(i) = e.transpose();
    }
    return PairedDataset{GenotypeMatrix::from_real(geno), RealMatrix::from_values(expr)};
}

}  // namespace detail

inline PairedDataset generate_eqtl(const EqtlConfig& cfg) {
    detail::validate_eqtl(cfg);
    auto eng = make_engine(cfg.seed);
    const detail::NoiseParams params = detail::draw_noise_params(cfg.q, eng);
    return detail::generate_with_params(cfg, params, eng);
}

namespace detail {

inline DistanceMatrix dataset_distances(const PairedDataset& data, DistanceMeasure gen_measure,
                                        DistanceMeasure gex_measure, bool genotype_side) {
    if (genotype_side) {
        if (is_genotype_measure(gen_measure)) return pairwise_genotype(data.genotypes, gen_measure);
        return pairwise_real(
            RealMatrix::from_values(data.genotypes.values().cast<double>()), gen_measure);
    }
    return pairwise_real(data.expression, gex_measure);
}

inline double dataset_pvalue(const PairedDataset& data, DistanceMeasure gen_measure,
                             DistanceMeasure gex_measure, TestKind test, std::uint64_t n_perm,
                             std::uint64_t perm_seed, unsigned workers) {
    const DistanceMatrix dx = dataset_distances(data, gen_measure, gex_measure, true);
    const DistanceMatrix dy = dataset_distances(data, gen_measure, gex_measure, false);
    if (test == TestKind::mantel_permutation)
        return mantel_pvalue_permutation(dx, dy, n_perm, perm_seed, workers).p_value;
    const GramMatrix gx = gower_center(dx);
    const GramMatrix gy = gower_center(dy);
    if (test == TestKind::grv_analytic) return grv_pvalue_analytic(gx, gy).p_value;
    return grv_pvalue_permutation(gx, gy, n_perm, perm_seed, workers).p_value;
}

struct PvaluesByRun {
    std::vector<std::vector<double>> runs;
    std::uint64_t skipped = 0;
};

// One p-value per (run, dataset), with per-dataset RNG streams derived from
// (seed, run, dataset) so the collection is schedule-independent. Datasets
// whose distances or moments degenerate are skipped and counted.
inline PvaluesByRun collect_pvalues(const EqtlConfig& cfg, DistanceMeasure gen_measure,
                                    DistanceMeasure gex_measure, TestKind test,
                                    std::uint64_t runs, std::uint64_t datasets_per_run,
                                    std::uint64_t seed, std::uint64_t n_perm, unsigned workers) {
    validate_eqtl(cfg);
    if (runs < 1 || datasets_per_run < 1)
        throw ValidationError("power/size estimation needs runs >= 1 and datasets_per_run >= 1");
    PvaluesByRun out;
    out.runs.resize(runs);
    for (std::uint64_t r = 0; r < runs; ++r) {
        auto run_eng = make_engine(derive_seed(seed, {0xA11, r}));
        NoiseParams shared;
        if (!cfg.redraw_noise_per_dataset) shared = draw_noise_params(cfg.q, run_eng);
        out.runs[r].reserve(datasets_per_run);
        for (std::uint64_t d = 0; d < datasets_per_run; ++d) {
            auto eng = make_engine(derive_seed(seed, {r, d}));
            const NoiseParams params =
                cfg.redraw_noise_per_dataset ? draw_noise_params(cfg.q, eng) : shared;
            const PairedDataset data = generate_with_params(cfg, params, eng);
            try {
                out.runs[r].push_back(dataset_pvalue(data, gen_measure, gex_measure, test, n_perm,
                                                     derive_seed(seed, {r, d, 0xBEEF}), workers));
            } catch (const DegenerateInputError&) {
                ++out.skipped;
            }
        }
    }
    return out;
}

inline std::pair<double, double> mean_sd(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

inline std::vector<double> rejection_rates(const PvaluesByRun& pv, double alpha) {
    std::vector<double> rates;
    rates.reserve(pv.runs.size());
    for (const auto& run : pv.runs) {
        if (run.empty()) continue;
        std::uint64_t hits = 0;
        for (double p : run)
            if (p <= alpha) ++hits;
        rates.push_back(static_cast<double>(hits) / static_cast<double>(run.size()));
    }
    return rates;
}

}  // namespace detail

inline PowerEstimate estimate_power(const EqtlConfig& cfg, DistanceMeasure gen_measure,
                                    DistanceMeasure gex_measure, TestKind test,
                                    std::uint64_t runs, std::uint64_t datasets_per_run,
                                    double alpha, std::uint64_t seed,
                                    std::uint64_t n_perm = 10000, unsigned workers = 1) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
    const auto pv = detail::collect_pvalues(cfg, gen_measure, gex_measure, test, runs,
                                            datasets_per_run, seed, n_perm, workers);
    const auto [mean, sd] = detail::mean_sd(detail::rejection_rates(pv, alpha));
    return PowerEstimate{mean, sd, runs, datasets_per_run, alpha, pv.skipped};
}

// Size of the test under the null: the config's associated flag is forced off
// and each requested level gets its own rejection-rate summary.
inline std::vector<SizeEstimate> estimate_size(const EqtlConfig& cfg, DistanceMeasure gen_measure,
                                               DistanceMeasure gex_measure, TestKind test,
                                               const std::vector<double>& levels,
                                               std::uint64_t runs, std::uint64_t datasets_per_run,
                                               std::uint64_t seed, std::uint64_t n_perm = 10000,
                                               unsigned workers = 1) {
    if (levels.empty()) throw ValidationError("estimate_size needs at least one level");
    for (double a : levels)
        if (!(a > 0.0 && a <= 1.0)) throw ValidationError("levels must lie in (0, 1]");
    EqtlConfig null_cfg = cfg;
    null_cfg.associated = false;
    const auto pv = detail::collect_pvalues(null_cfg, gen_measure, gex_measure, test, runs,
                                            datasets_per_run, seed, n_perm, workers);
    std::vector<SizeEstimate> out;
    out.reserve(levels.size());
    for (double a : levels) {
        const auto [mean, sd] = detail::mean_sd(detail::rejection_rates(pv, a));
        out.push_back(SizeEstimate{a, mean, sd});
    }
    return out;
}

}  // namespace grv
