// Simulates one small eQTL cohort, then runs the three association tests this
// library offers on the same pair of distance matrices.

#include <iostream>

#include "grv/association.hpp"
#include "grv/inference.hpp"
#include "grv/simulation.hpp"

int main() {
    grv::EqtlConfig cfg;
    cfg.n = 60;   // samples
    cfg.p = 2;    // causal SNPs
    cfg.q = 8;    // expression probes
    cfg.seed = 42;
    const grv::PairedDataset data = grv::generate_eqtl(cfg);

    const grv::DistanceMatrix dx = grv::pairwise_genotype(data.genotypes, grv::DistanceMeasure::IBS);
    const grv::DistanceMatrix dy = grv::pairwise_real(data.expression, grv::DistanceMeasure::Mahalanobis);

    const grv::GramMatrix gx = grv::gower_center(dx);
    const grv::GramMatrix gy = grv::gower_center(dy);
    std::cout << "GRV statistic: " << grv::grv(gx, gy).value << '\n';

    const grv::TestResult analytic = grv::grv_pvalue_analytic(gx, gy);
    std::cout << "analytic p:    " << analytic.p_value << '\n';

    const grv::TestResult sampled = grv::grv_pvalue_permutation(gx, gy, 10000, cfg.seed);
    std::cout << "sampled p:     " << sampled.p_value << "  (" << sampled.n_permutations
              << " permutations)\n";

    const grv::TestResult mantel = grv::mantel_pvalue_permutation(dx, dy, 10000, cfg.seed);
    std::cout << "mantel p:      " << mantel.p_value << "  (statistic " << mantel.statistic
              << ")\n";
    return 0;
}
