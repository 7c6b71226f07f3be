#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "grv/csv.hpp"
#include "grv/errors.hpp"
#include "grv/parallel.hpp"
#include "grv/rng.hpp"

namespace grv {

// maxP combination: the maximum of k independent uniform p-values has CDF
// x^k, so (max p_i)^k is itself a p-value under independence.
inline double combine_maxp(const std::vector<double>& pvalues) {
    if (pvalues.empty()) throw ValidationError("combine_maxp needs at least one p-value");
    double mx = 0.0;
    for (double p : pvalues) {
        if (!(p >= 0.0 && p <= 1.0))
            throw ValidationError("p-values must lie in [0, 1]; found " + std::to_string(p));
        mx = std::max(mx, p);
    }
    return std::pow(mx, static_cast<double>(pvalues.size()));
}

// IDs ordered by significance: position 0 is rank 1, the most significant.
struct RankedList {
    std::vector<std::string> ids;

    static RankedList from_ids(std::vector<std::string> ids) {
        std::unordered_set<std::string> seen;
        for (const auto& id : ids) {
            if (id.empty()) throw ValidationError("ranked list entries must be nonempty");
            if (!seen.insert(id).second)
                throw ValidationError("duplicate id in ranked list: " + id);
        }
        return RankedList{std::move(ids)};
    }

    std::size_t size() const { return ids.size(); }
};

inline RankedList read_ranked_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open ranked list file: " + path);
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        const std::string id{detail::trim(line)};
        if (!id.empty()) ids.push_back(id);
    }
    return RankedList::from_ids(std::move(ids));
}

inline void write_ranked_list(const std::string& path, const RankedList& list) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open file for writing: " + path);
    for (const auto& id : list.ids) out << id << '\n';
    if (!out) throw IoError("failed writing ranked list: " + path);
}

namespace detail {

// Expected top-k Canberra distance between two uniformly random rankings of n
// items, with ranks outside the top k truncated to k+1. Conditioning on one
// fixed list, the other list's truncated rank is uniform on {1..k} with mass
// 1/n each and k+1 with mass (n-k)/n, which gives the exact closed form used
// here; dividing by it makes the random-ranking baseline average exactly 1.
inline double canberra_topk_expectation(std::size_t n, std::size_t k) {
    double within = 0.0;
    for (std::size_t u = 1; u <= k; ++u)
        for (std::size_t v = 1; v <= k; ++v)
            within += std::abs(static_cast<double>(u) - static_cast<double>(v)) /
                      static_cast<double>(u + v);
    double edge = 0.0;
    for (std::size_t u = 1; u <= k; ++u)
        edge += static_cast<double>(k + 1 - u) / static_cast<double>(u + k + 1);
    return (within + 2.0 * static_cast<double>(n - k) * edge) / static_cast<double>(n);
}

// Truncated rank per id, in the order of `universe`.
inline std::vector<double> truncated_ranks(const RankedList& list,
                                           const std::vector<std::string>& universe,
                                           std::size_t k) {
    std::unordered_map<std::string, std::size_t> rank;
    rank.reserve(list.ids.size());
    for (std::size_t i = 0; i < list.ids.size(); ++i) rank[list.ids[i]] = i + 1;
    std::vector<double> out;
    out.reserve(universe.size());
    for (const auto& id : universe) {
        const auto it = rank.find(id);
        if (it == rank.end())
            throw ValidationError("ranked lists disagree on the id universe: missing " + id);
        out.push_back(static_cast<double>(std::min(it->second, k + 1)));
    }
    return out;
}

inline double canberra_raw(const std::vector<double>& ua, const std::vector<double>& ub) {
    double sum = 0.0;
    for (std::size_t i = 0; i < ua.size(); ++i) {
        const double num = std::abs(ua[i] - ub[i]);
        if (num > 0.0) sum += num / (ua[i] + ub[i]);
    }
    return sum;
}

}  // namespace detail

// Normalized top-k Canberra distance between two rankings of the same ids.
// Ranks beyond the top k are truncated to k+1; the raw distance is divided by
// the expected distance between random rankings, so values compare across k
// and random agreement sits at 1 on average.
inline double canberra_topk(const RankedList& list_a, const RankedList& list_b, std::size_t k) {
    if (list_a.size() != list_b.size())
        throw ValidationError("ranked lists disagree on the id universe: sizes " +
                              std::to_string(list_a.size()) + " vs " +
                              std::to_string(list_b.size()));
    if (list_a.size() == 0) throw ValidationError("ranked lists must be nonempty");
    if (k < 1 || k > list_a.size())
        throw ValidationError("k must lie in [1, " + std::to_string(list_a.size()) + "]");
    const auto ua = detail::truncated_ranks(list_a, list_a.ids, k);
    const auto ub = detail::truncated_ranks(list_b, list_a.ids, k);
    return detail::canberra_raw(ua, ub) / detail::canberra_topk_expectation(list_a.size(), k);
}

// Left-tailed permutation p-value for the observed top-k distance: the
// add-one fraction of uniformly re-ranked second lists that come at least as
// close to the first list. Permutation i draws from a stream derived from
// (seed, i), so results are identical under any worker count.
inline double rank_overlap_pvalue(const RankedList& list_a, const RankedList& list_b,
                                  std::size_t k, std::uint64_t n_perm, std::uint64_t seed,
                                  unsigned workers = 1) {
    if (n_perm == 0) throw ValidationError("n_perm must be at least 1");
    const double observed = canberra_topk(list_a, list_b, k);
    const auto ua = detail::truncated_ranks(list_a, list_a.ids, k);
    const std::size_t n = list_a.size();
    const double norm = detail::canberra_topk_expectation(n, k);
    const double threshold = observed + 1e-12;

    std::vector<std::uint8_t> hit(n_perm, 0);
    parallel_for(n_perm, workers, [&](std::uint64_t i) {
        auto eng = make_engine(derive_seed(seed, {i}));
        const std::vector<int> pi = random_permutation(static_cast<int>(n), eng);
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double ub = static_cast<double>(
                std::min<std::size_t>(static_cast<std::size_t>(pi[j]) + 1, k + 1));
            const double num = std::abs(ua[j] - ub);
            if (num > 0.0) sum += num / (ua[j] + ub);
        }
        hit[i] = (sum / norm <= threshold) ? 1 : 0;
    });
    const std::uint64_t hits = std::accumulate(hit.begin(), hit.end(), std::uint64_t{0});
    return static_cast<double>(1 + hits) / static_cast<double>(n_perm + 1);
}

// Benjamini-Hochberg step-up adjustment; output is aligned with the input.
inline std::vector<double> bh_fdr(const std::vector<double>& pvalues) {
    const std::size_t n = pvalues.size();
    for (double p : pvalues)
        if (!(p >= 0.0 && p <= 1.0))
            throw ValidationError("p-values must lie in [0, 1]; found " + std::to_string(p));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });
    std::vector<double> adjusted(n, 0.0);
    double running = 1.0;
    for (std::size_t r = n; r-- > 0;) {
        const double candidate =
            pvalues[order[r]] * static_cast<double>(n) / static_cast<double>(r + 1);
        running = std::min(running, candidate);
        adjusted[order[r]] = running;
    }
    return adjusted;
}

// Per-pathway p-values across the distance-pair sweep: one row per unit, one
// column per measure pairing.
struct PValueMatrix {
    std::vector<std::string> units;
    std::vector<std::string> pair_names;
    Eigen::MatrixXd values;

    static PValueMatrix from_parts(std::vector<std::string> units,
                                   std::vector<std::string> pair_names, Eigen::MatrixXd values) {
        if (values.rows() != static_cast<Eigen::Index>(units.size()) ||
            values.cols() != static_cast<Eigen::Index>(pair_names.size()) || values.cols() < 1)
            throw ValidationError("p-value matrix shape does not match its labels");
        std::unordered_set<std::string> seen;
        for (const auto& u : units)
            if (!seen.insert(u).second) throw ValidationError("duplicate unit id: " + u);
        for (Eigen::Index i = 0; i < values.size(); ++i) {
            const double p = values.data()[i];
            if (!(p >= 0.0 && p <= 1.0))
                throw ValidationError("p-values must lie in [0, 1]; found " + std::to_string(p));
        }
        return PValueMatrix{std::move(units), std::move(pair_names), std::move(values)};
    }

    std::size_t k() const { return static_cast<std::size_t>(values.cols()); }
};

inline PValueMatrix read_pvalue_matrix(const std::string& path) {
    auto table = read_table(path, /*has_ids=*/true);
    return PValueMatrix::from_parts(std::move(table.row_ids), std::move(table.col_names),
                                    std::move(table.values));
}

// maxP-combined p per unit, then units ordered most-significant-first with
// lexicographic id tie-breaking so rankings are deterministic.
inline std::vector<double> combined_maxp_rows(const PValueMatrix& m) {
    std::vector<double> out;
    out.reserve(m.units.size());
    for (Eigen::Index r = 0; r < m.values.rows(); ++r) {
        double mx = 0.0;
        for (Eigen::Index c = 0; c < m.values.cols(); ++c) mx = std::max(mx, m.values(r, c));
        out.push_back(std::pow(mx, static_cast<double>(m.values.cols())));
    }
    return out;
}

inline RankedList rank_by_combined(const PValueMatrix& m) {
    const std::vector<double> combined = combined_maxp_rows(m);
    std::vector<std::size_t> order(m.units.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (combined[a] != combined[b]) return combined[a] < combined[b];
        return m.units[a] < m.units[b];
    });
    std::vector<std::string> ids;
    ids.reserve(order.size());
    for (std::size_t i : order) ids.push_back(m.units[i]);
    return RankedList::from_ids(std::move(ids));
}

}  // namespace grv
