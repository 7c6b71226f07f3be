#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "grv/errors.hpp"
#include "grv/gram.hpp"

namespace grv {

// First three moments of T = tr(Gx Gy_pi) over the uniform permutation group.
struct PermutationMoments {
    double mu = 0.0;
    double sigma2 = 0.0;
    double gamma = 0.0;
};

namespace detail {

// ============================================================================
// Closed-form machinery.
//
// Write T^k as a sum over k index pairs (i_t, j_t). Group assignments of the
// 2k index slots by their equality pattern, a set partition sigma: slots in a
// block share one index value, distinct blocks hold distinct values. For a
// fixed pattern with r blocks the permutation maps the block values to a
// uniformly random injective r-tuple, so
//
//   E[T^k] = sum_sigma W_sigma(A) * W_sigma(B) / (N)_r,
//
// where W_sigma(M) sums the k-fold entry product over assignments realizing
// the pattern exactly and (N)_r is the falling factorial. Each W is recovered
// from the "relaxed" sums U_tau (same-block slots equal, distinct blocks
// unconstrained) by Mobius inversion on the partition lattice, and every U_tau
// factors over the connected components of its pattern graph into a short
// list of matrix contractions. All of this is exact for every N >= 2, which
// is what lets the closed form agree with exhaustive enumeration at small N.
// ============================================================================

struct PatternBasis {
    std::vector<std::vector<int>> partitions;  // slot -> block id, block ids dense from 0
    std::vector<int> block_count;
    // expansion[s]: pairs (t, c) with partition t coarser than or equal to s,
    // such that W_s = sum c * U_t.
    std::vector<std::vector<std::pair<int, double>>> expansion;
};

inline void enumerate_partitions(int slots, std::vector<std::vector<int>>& out) {
    std::vector<int> a(static_cast<std::size_t>(slots), 0);
    auto rec = [&](auto&& self, int pos, int maxb) -> void {
        if (pos == slots) {
            out.push_back(a);
            return;
        }
        for (int b = 0; b <= maxb + 1; ++b) {
            a[static_cast<std::size_t>(pos)] = b;
            self(self, pos + 1, std::max(maxb, b));
        }
    };
    if (slots == 0) return;
    rec(rec, 1, 0);
}

// Is t coarser than or equal to s (every block of s contained in one block of t)?
inline bool is_coarsening(const std::vector<int>& s, const std::vector<int>& t, int s_blocks) {
    std::vector<int> image(static_cast<std::size_t>(s_blocks), -1);
    for (std::size_t slot = 0; slot < s.size(); ++slot) {
        int& img = image[static_cast<std::size_t>(s[slot])];
        if (img == -1) img = t[slot];
        else if (img != t[slot]) return false;
    }
    return true;
}

inline const PatternBasis& pattern_basis(int slots) {
    static const std::array<PatternBasis, 3> cache = [] {
        std::array<PatternBasis, 3> all;
        const double factorial[6] = {1, 1, 2, 6, 24, 120};
        for (int idx = 0; idx < 3; ++idx) {
            PatternBasis& basis = all[static_cast<std::size_t>(idx)];
            const int m = 2 * (idx + 1);
            enumerate_partitions(m, basis.partitions);
            const std::size_t count = basis.partitions.size();
            basis.block_count.resize(count);
            basis.expansion.resize(count);
            for (std::size_t s = 0; s < count; ++s)
                basis.block_count[s] = *std::max_element(basis.partitions[s].begin(),
                                                         basis.partitions[s].end()) + 1;
            for (std::size_t s = 0; s < count; ++s) {
                for (std::size_t t = 0; t < count; ++t) {
                    if (!is_coarsening(basis.partitions[s], basis.partitions[t], basis.block_count[s]))
                        continue;
                    // Mobius coefficient: product over t-blocks of
                    // (-1)^(m-1) (m-1)! with m = number of s-blocks merged.
                    std::vector<int> merged(static_cast<std::size_t>(basis.block_count[t]), 0);
                    std::vector<int> seen(static_cast<std::size_t>(basis.block_count[s]), 0);
                    for (std::size_t slot = 0; slot < basis.partitions[s].size(); ++slot) {
                        const int sb = basis.partitions[s][slot];
                        if (!seen[static_cast<std::size_t>(sb)]) {
                            seen[static_cast<std::size_t>(sb)] = 1;
                            ++merged[static_cast<std::size_t>(basis.partitions[t][slot])];
                        }
                    }
                    double coeff = 1.0;
                    for (int m_b : merged)
                        coeff *= (m_b % 2 ? 1.0 : -1.0) * factorial[m_b - 1];
                    basis.expansion[s].emplace_back(static_cast<int>(t), coeff);
                }
            }
        }
        return all;
    }();
    return cache[static_cast<std::size_t>(slots / 2 - 1)];
}

// The contraction values every relaxed pattern sum factors into; one pass per
// matrix. d = diagonal, r = row sums, w = row sums of squares.
struct ContractionStats {
    double t, g, s2, s3, q2, q3;
    double dr, d2r, dw, dAd, dr2, dAr, wr, trA3, rAr, r3, rr;
};

inline ContractionStats contraction_stats(const Eigen::MatrixXd& a) {
    const Eigen::VectorXd d = a.diagonal();
    const Eigen::VectorXd r = a.rowwise().sum();
    const Eigen::VectorXd w = a.cwiseProduct(a).rowwise().sum();
    const Eigen::VectorXd ad = a * d;
    const Eigen::VectorXd ar = a * r;
    ContractionStats s;
    s.t = d.sum();
    s.g = r.sum();
    s.s2 = d.squaredNorm();
    s.s3 = d.array().cube().sum();
    s.q2 = a.squaredNorm();
    s.q3 = a.array().cube().sum();
    s.dr = d.dot(r);
    s.d2r = (d.array().square() * r.array()).sum();
    s.dw = d.dot(w);
    s.dAd = d.dot(ad);
    s.dr2 = (d.array() * r.array().square()).sum();
    s.dAr = d.dot(ar);
    s.wr = w.dot(r);
    s.trA3 = (a * a).cwiseProduct(a).sum();
    s.rAr = r.dot(ar);
    s.r3 = r.array().cube().sum();
    s.rr = r.squaredNorm();
    return s;
}

// Value of one connected pattern-graph component (vertices are index blocks,
// each edge is one matrix factor, loops allowed). With at most three edges the
// classification below is exhaustive.
inline double component_value(const std::vector<std::pair<int, int>>& edges,
                              const ContractionStats& s) {
    const int e = static_cast<int>(edges.size());
    int loops = 0;
    std::vector<int> verts;
    for (auto [u, v] : edges) {
        verts.push_back(u);
        verts.push_back(v);
        if (u == v) ++loops;
    }
    std::sort(verts.begin(), verts.end());
    verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
    const int nv = static_cast<int>(verts.size());

    if (e == 1) return loops ? s.t : s.g;
    if (e == 2) {
        if (loops == 2) return s.s2;   // two loops on one vertex
        if (loops == 1) return s.dr;   // loop plus incident edge
        return nv == 2 ? s.q2 : s.rr;  // double edge / two-edge path
    }
    // e == 3
    if (loops == 3) return s.s3;
    if (loops == 2) {
        // both loops on one vertex + edge, or two looped vertices joined
        for (int v : verts) {
            int c = 0;
            for (auto [a, b] : edges)
                if (a == v && b == v) ++c;
            if (c == 2) return s.d2r;
        }
        return s.dAd;
    }
    if (loops == 1) {
        if (nv == 2) return s.dw;  // loop on an endpoint of a double edge
        int lv = -1;
        for (auto [a, b] : edges)
            if (a == b) lv = a;
        int deg = 0;
        for (auto [a, b] : edges)
            if (a != b && (a == lv || b == lv)) ++deg;
        return deg == 2 ? s.dr2 : s.dAr;  // loop at center / loop at path end
    }
    // no loops
    if (nv == 2) return s.q3;  // triple edge
    if (nv == 3) {
        for (std::size_t i = 0; i < edges.size(); ++i)
            for (std::size_t j = i + 1; j < edges.size(); ++j) {
                auto [a, b] = edges[i];
                auto [c, d] = edges[j];
                if ((a == c && b == d) || (a == d && b == c))
                    return s.wr;  // double edge + pendant edge
            }
        return s.trA3;  // triangle
    }
    // nv == 4: star or three-edge path
    for (int v : verts) {
        int deg = 0;
        for (auto [a, b] : edges)
            if (a == v || b == v) ++deg;
        if (deg == 3) return s.r3;
    }
    return s.rAr;
}

// U_tau: factor the pattern graph into connected components and multiply.
inline double relaxed_sum(const std::vector<int>& tau, int blocks, const ContractionStats& s) {
    const int k = static_cast<int>(tau.size()) / 2;
    std::vector<int> parent(static_cast<std::size_t>(blocks));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    std::vector<std::pair<int, int>> all_edges;
    all_edges.reserve(static_cast<std::size_t>(k));
    for (int f = 0; f < k; ++f) {
        const int u = tau[static_cast<std::size_t>(2 * f)];
        const int v = tau[static_cast<std::size_t>(2 * f + 1)];
        all_edges.emplace_back(u, v);
        parent[static_cast<std::size_t>(find(u))] = find(v);
    }
    double product = 1.0;
    std::vector<std::pair<int, int>> comp_edges;
    std::vector<char> done(static_cast<std::size_t>(blocks), 0);
    for (int root = 0; root < blocks; ++root) {
        if (find(root) != root || done[static_cast<std::size_t>(root)]) continue;
        done[static_cast<std::size_t>(root)] = 1;
        comp_edges.clear();
        for (auto& e : all_edges)
            if (find(e.first) == root) comp_edges.push_back(e);
        product *= component_value(comp_edges, s);
    }
    return product;
}

inline long double falling_factorial(int n, int r) {
    long double f = 1.0L;
    for (int i = 0; i < r; ++i) f *= static_cast<long double>(n - i);
    return f;
}

// E[T^k] for k in {1,2,3}.
inline long double pattern_raw_moment(int k, const ContractionStats& sa,
                                      const ContractionStats& sb, int n) {
    const PatternBasis& basis = pattern_basis(2 * k);
    const std::size_t count = basis.partitions.size();
    std::vector<double> ua(count), ub(count);
    for (std::size_t t = 0; t < count; ++t) {
        ua[t] = relaxed_sum(basis.partitions[t], basis.block_count[t], sa);
        ub[t] = relaxed_sum(basis.partitions[t], basis.block_count[t], sb);
    }
    long double total = 0.0L;
    for (std::size_t s = 0; s < count; ++s) {
        const int r = basis.block_count[s];
        if (r > n) continue;  // no injective assignment exists; the term is empty
        long double wa = 0.0L, wb = 0.0L;
        for (auto [t, c] : basis.expansion[s]) {
            wa += static_cast<long double>(c) * ua[static_cast<std::size_t>(t)];
            wb += static_cast<long double>(c) * ub[static_cast<std::size_t>(t)];
        }
        total += wa * wb / falling_factorial(n, r);
    }
    return total;
}

// Visit T = tr(A B_pi) for every permutation pi of 0..n-1 (n! of them).
template <typename Fn>
void enumerate_permutation_traces(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Fn&& fn) {
    const int n = static_cast<int>(a.rows());
    std::vector<int> pi(static_cast<std::size_t>(n));
    std::iota(pi.begin(), pi.end(), 0);
    do {
        double t = 0.0;
        for (int i = 0; i < n; ++i) {
            const int pi_i = pi[static_cast<std::size_t>(i)];
            for (int j = 0; j < n; ++j)
                t += a(i, j) * b(pi_i, pi[static_cast<std::size_t>(j)]);
        }
        fn(t);
    } while (std::next_permutation(pi.begin(), pi.end()));
}

}  // namespace detail

// Exact closed-form moments of T = tr(Gx Gy_pi). Works on the norm-scaled
// matrices and rescales afterwards so the long-double accumulation stays well
// conditioned regardless of the input scale.
inline PermutationMoments permutation_moments_closed_form(const GramMatrix& gx, const GramMatrix& gy) {
    if (gx.n() != gy.n())
        throw ValidationError("permutation moments: sample counts differ");
    const int n = gx.n();
    if (n < 3) throw ValidationError("closed-form permutation moments need N >= 3");
    const double nx = gx.frobenius_norm();
    const double ny = gy.frobenius_norm();
    if (nx <= 0.0 || ny <= 0.0)
        throw DegenerateInputError("permutation moments: zero-norm Gram matrix");

    const detail::ContractionStats sa = detail::contraction_stats(gx.values() / nx);
    const detail::ContractionStats sb = detail::contraction_stats(gy.values() / ny);
    const long double e1 = detail::pattern_raw_moment(1, sa, sb, n);
    const long double e2 = detail::pattern_raw_moment(2, sa, sb, n);
    const long double e3 = detail::pattern_raw_moment(3, sa, sb, n);

    const long double var = e2 - e1 * e1;
    const long double m3 = e3 - 3.0L * e1 * e2 + 2.0L * e1 * e1 * e1;
    const long double scale = static_cast<long double>(nx) * static_cast<long double>(ny);

    PermutationMoments out;
    out.mu = static_cast<double>(e1 * scale);
    out.sigma2 = static_cast<double>(std::max(var, 0.0L) * scale * scale);
    out.gamma = var > 0.0L ? static_cast<double>(m3 / (var * std::sqrt(var))) : 0.0;
    return out;
}

// Brute-force oracle: moments by full enumeration of all N! permutations.
inline PermutationMoments permutation_moments_exhaustive(const GramMatrix& gx, const GramMatrix& gy) {
    if (gx.n() != gy.n())
        throw ValidationError("permutation moments: sample counts differ");
    const int n = gx.n();
    if (n < 2) throw ValidationError("exhaustive permutation moments need N >= 2");
    if (n > 9) throw BudgetError("exhaustive enumeration limited to N <= 9 (N! permutations)");

    std::vector<double> traces;
    detail::enumerate_permutation_traces(gx.values(), gy.values(),
                                         [&](double t) { traces.push_back(t); });
    const long double count = static_cast<long double>(traces.size());
    long double mean = 0.0L;
    for (double t : traces) mean += t;
    mean /= count;
    long double var = 0.0L, m3 = 0.0L;
    for (double t : traces) {
        const long double c = static_cast<long double>(t) - mean;
        var += c * c;
        m3 += c * c * c;
    }
    var /= count;
    m3 /= count;

    PermutationMoments out;
    out.mu = static_cast<double>(mean);
    out.sigma2 = static_cast<double>(var);
    out.gamma = var > 0.0L ? static_cast<double>(m3 / (var * std::sqrt(var))) : 0.0;
    return out;
}

}  // namespace grv
