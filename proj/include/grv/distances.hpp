#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "grv/distance_matrix.hpp"
#include "grv/errors.hpp"

namespace grv {

enum class DistanceMeasure {
    IBS,
    SimpleMatching,
    SokalSneath,
    RogersTanimotoI,
    HammanI,
    Euclidean,
    Manhattan,
    Maximum,
    BrayCurtis,
    Mahalanobis,
    PearsonCorr,
    Cosine,
    SpearmanCorr,
    NMI,
};

inline const char* measure_name(DistanceMeasure m) {
    switch (m) {
        case DistanceMeasure::IBS: return "ibs";
        case DistanceMeasure::SimpleMatching: return "simple_matching";
        case DistanceMeasure::SokalSneath: return "sokal_sneath";
        case DistanceMeasure::RogersTanimotoI: return "rogers_tanimoto_i";
        case DistanceMeasure::HammanI: return "hamman_i";
        case DistanceMeasure::Euclidean: return "euclidean";
        case DistanceMeasure::Manhattan: return "manhattan";
        case DistanceMeasure::Maximum: return "maximum";
        case DistanceMeasure::BrayCurtis: return "bray_curtis";
        case DistanceMeasure::Mahalanobis: return "mahalanobis";
        case DistanceMeasure::PearsonCorr: return "pearson";
        case DistanceMeasure::Cosine: return "cosine";
        case DistanceMeasure::SpearmanCorr: return "spearman";
        case DistanceMeasure::NMI: return "nmi";
    }
    return "?";
}

inline DistanceMeasure parse_measure(std::string name) {
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    static const std::vector<DistanceMeasure> all = {
        DistanceMeasure::IBS, DistanceMeasure::SimpleMatching, DistanceMeasure::SokalSneath,
        DistanceMeasure::RogersTanimotoI, DistanceMeasure::HammanI, DistanceMeasure::Euclidean,
        DistanceMeasure::Manhattan, DistanceMeasure::Maximum, DistanceMeasure::BrayCurtis,
        DistanceMeasure::Mahalanobis, DistanceMeasure::PearsonCorr, DistanceMeasure::Cosine,
        DistanceMeasure::SpearmanCorr, DistanceMeasure::NMI};
    for (auto m : all)
        if (name == measure_name(m)) return m;
    std::ostringstream msg;
    msg << "unknown distance measure '" << name << "'; valid:";
    for (auto m : all) msg << ' ' << measure_name(m);
    throw ValidationError(msg.str());
}

// Declared metricity. Only Euclidean is flagged metric; every other measure is
// flagged semi-metric by the taxonomy this library follows, including Manhattan
// and Maximum even though both do satisfy the triangle inequality (run
// audit_metricity to verify the stronger property on a concrete matrix).
inline Metricity metricity_of(DistanceMeasure m) {
    return m == DistanceMeasure::Euclidean ? Metricity::metric : Metricity::semi_metric;
}

inline bool is_genotype_measure(DistanceMeasure m) {
    switch (m) {
        case DistanceMeasure::IBS:
        case DistanceMeasure::SimpleMatching:
        case DistanceMeasure::SokalSneath:
        case DistanceMeasure::RogersTanimotoI:
        case DistanceMeasure::HammanI:
            return true;
        default:
            return false;
    }
}

// N x P minor-allele counts, entries in {0,1,2}.
class GenotypeMatrix {
public:
    static GenotypeMatrix from_values(Eigen::MatrixXi values) {
        if (values.rows() < 1 || values.cols() < 1)
            throw ValidationError("genotype matrix must be nonempty");
        for (Eigen::Index i = 0; i < values.size(); ++i) {
            const int v = values.data()[i];
            if (v < 0 || v > 2)
                throw ValidationError("genotype entries must be 0, 1 or 2; found " + std::to_string(v));
        }
        return GenotypeMatrix(std::move(values));
    }

    static GenotypeMatrix from_real(const Eigen::MatrixXd& values) {
        Eigen::MatrixXi g(values.rows(), values.cols());
        for (Eigen::Index i = 0; i < values.size(); ++i) {
            const double v = values.data()[i];
            if (v != 0.0 && v != 1.0 && v != 2.0) {
                std::ostringstream msg;
                msg << "genotype entries must be 0, 1 or 2; found " << v;
                throw ValidationError(msg.str());
            }
            g.data()[i] = static_cast<int>(v);
        }
        return from_values(std::move(g));
    }

    int n() const { return static_cast<int>(values_.rows()); }
    int p() const { return static_cast<int>(values_.cols()); }
    const Eigen::MatrixXi& values() const { return values_; }

private:
    explicit GenotypeMatrix(Eigen::MatrixXi values) : values_(std::move(values)) {}
    Eigen::MatrixXi values_;
};

// N x Q real-valued features (expression levels, coordinates, ...).
class RealMatrix {
public:
    static RealMatrix from_values(Eigen::MatrixXd values) {
        if (values.rows() < 1 || values.cols() < 1)
            throw ValidationError("real matrix must be nonempty");
        if (!values.allFinite())
            throw ValidationError("real matrix contains non-finite entries");
        return RealMatrix(std::move(values));
    }

    int n() const { return static_cast<int>(values_.rows()); }
    int q() const { return static_cast<int>(values_.cols()); }
    const Eigen::MatrixXd& values() const { return values_; }

private:
    explicit RealMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {}
    Eigen::MatrixXd values_;
};

namespace detail {

inline int nmi_bins(int p) {
    return std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(p)))));
}

// Right-closed equal-width bin over [lo, hi]; the lowest value lands in bin 0.
inline int nmi_bin_index(double v, double lo, double hi, int m) {
    if (hi <= lo) return 0;
    const double u = (v - lo) / (hi - lo);
    int k = static_cast<int>(std::ceil(u * m)) - 1;
    return std::clamp(k, 0, m - 1);
}

inline double entropy(const std::vector<double>& counts, double total) {
    double e = 0.0;
    for (double c : counts) {
        if (c > 0.0) {
            const double p = c / total;
            e -= p * std::log(p);
        }
    }
    return e;
}

}  // namespace detail

// Normalized mutual-information distance between two real vectors: histogram
// both on floor(sqrt(P)) equal-width bins over their own ranges, then
// 1 - I(x,y)/max{E(x),E(y)}. When both marginal entropies are zero there is no
// shared information to measure and the distance is defined as 1.
inline double nmi_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() != y.size()) throw ValidationError("nmi_distance: length mismatch");
    const int p = static_cast<int>(x.size());
    if (p < 2) throw ValidationError("nmi_distance needs vectors of length >= 2");
    const int m = detail::nmi_bins(p);

    const double xlo = x.minCoeff(), xhi = x.maxCoeff();
    const double ylo = y.minCoeff(), yhi = y.maxCoeff();
    std::vector<double> px(static_cast<std::size_t>(m), 0.0);
    std::vector<double> py(static_cast<std::size_t>(m), 0.0);
    std::vector<double> pxy(static_cast<std::size_t>(m) * m, 0.0);
    for (int i = 0; i < p; ++i) {
        const int bx = detail::nmi_bin_index(x(i), xlo, xhi, m);
        const int by = detail::nmi_bin_index(y(i), ylo, yhi, m);
        px[static_cast<std::size_t>(bx)] += 1.0;
        py[static_cast<std::size_t>(by)] += 1.0;
        pxy[static_cast<std::size_t>(bx) * m + by] += 1.0;
    }
    const double ex = detail::entropy(px, p);
    const double ey = detail::entropy(py, p);
    const double exy = detail::entropy(pxy, p);
    const double emax = std::max(ex, ey);
    if (emax <= 0.0) return 1.0;
    const double mi = std::clamp(ex + ey - exy, 0.0, emax);
    return std::clamp(1.0 - mi / emax, 0.0, 1.0);
}

// Ranks with rank 1 assigned to the largest value; ties receive the mean of the
// ranks they span.
inline Eigen::VectorXd spearman_ranks(const Eigen::VectorXd& x) {
    const Eigen::Index n = x.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return x(a) > x(b); });
    Eigen::VectorXd ranks(n);
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i;
        while (j + 1 < n && x(order[static_cast<std::size_t>(j + 1)]) == x(order[static_cast<std::size_t>(i)])) ++j;
        const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (Eigen::Index k = i; k <= j; ++k)
            ranks(order[static_cast<std::size_t>(k)]) = mean_rank;
        i = j + 1;
    }
    return ranks;
}

struct RealDistanceOptions {
    // Ridge added to an ill-conditioned Mahalanobis covariance, as a fraction of
    // the average diagonal; 0 disables the repair and singular inputs throw.
    double mahalanobis_ridge = 1e-8;
    double condition_limit = 1e12;
};

namespace detail {

template <typename PairFn>
DistanceMatrix build_pairwise(Eigen::Index n, Metricity metricity, PairFn&& fn) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            d(i, j) = d(j, i) = fn(i, j);
    return DistanceMatrix::from_trusted(std::move(d), metricity);
}

inline DistanceMatrix correlation_distance(const Eigen::MatrixXd& rows, Metricity metricity,
                                           const char* what) {
    const Eigen::Index n = rows.rows();
    Eigen::MatrixXd centered(n, rows.cols());
    Eigen::VectorXd norms(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::RowVectorXd c = rows.row(i).array() - rows.row(i).mean();
        centered.row(i) = c;
        norms(i) = c.norm();
        if (norms(i) <= 1e-13 * std::max(1.0, rows.row(i).norm())) {
            std::ostringstream msg;
            msg << what << ": correlation undefined for constant sample " << i;
            throw DegenerateInputError(msg.str());
        }
    }
    return build_pairwise(n, metricity, [&](Eigen::Index i, Eigen::Index j) {
        const double c = centered.row(i).dot(centered.row(j)) / (norms(i) * norms(j));
        return std::max(0.0, 1.0 - c);
    });
}

}  // namespace detail

inline DistanceMatrix pairwise_genotype(const GenotypeMatrix& gm, DistanceMeasure measure) {
    if (!is_genotype_measure(measure)) {
        std::ostringstream msg;
        msg << "measure '" << measure_name(measure) << "' does not apply to genotype data";
        throw ValidationError(msg.str());
    }
    const Eigen::MatrixXi& x = gm.values();
    const Eigen::Index n = x.rows();
    const double p = static_cast<double>(x.cols());
    const Metricity met = metricity_of(measure);

    const auto matches = [&](Eigen::Index i, Eigen::Index j) {
        return static_cast<double>((x.row(i).array() == x.row(j).array()).count());
    };

    switch (measure) {
        case DistanceMeasure::IBS:
            // Allele-sharing score per SNP is 2 - |x_p - y_p|, so the distance
            // reduces to the mean absolute genotype difference over 2P.
            return detail::build_pairwise(n, met, [&](Eigen::Index i, Eigen::Index j) {
                const double diff = static_cast<double>((x.row(i) - x.row(j)).cwiseAbs().sum());
                return diff / (2.0 * p);
            });
        case DistanceMeasure::SimpleMatching:
            return detail::build_pairwise(n, met, [&](Eigen::Index i, Eigen::Index j) {
                return (p - matches(i, j)) / p;
            });
        case DistanceMeasure::SokalSneath:
            return detail::build_pairwise(n, met, [&](Eigen::Index i, Eigen::Index j) {
                const double mp = matches(i, j), mm = p - mp;
                return 1.0 - mp / (mp + 0.5 * mm);
            });
        case DistanceMeasure::RogersTanimotoI:
            return detail::build_pairwise(n, met, [&](Eigen::Index i, Eigen::Index j) {
                const double mp = matches(i, j), mm = p - mp;
                return 1.0 - mp / (mp + 2.0 * mm);
            });
        case DistanceMeasure::HammanI: {
            // Collection-wide normalization: shift the pairwise similarities
            // s = (m+ - m-)/P to be nonnegative, then rescale by the pool
            // maximum. Self-pairs (s = 1, the largest possible value) are part
            // of the pool, which pins the maximum and makes d(i,i) = 0.
            Eigen::MatrixXd s(n, n);
            for (Eigen::Index i = 0; i < n; ++i) {
                s(i, i) = 1.0;
                for (Eigen::Index j = i + 1; j < n; ++j) {
                    const double mp = matches(i, j);
                    s(i, j) = s(j, i) = (2.0 * mp - p) / p;
                }
            }
            const double shift = std::abs(s.minCoeff());
            const double smax = s.maxCoeff() + shift;
            return detail::build_pairwise(n, met, [&](Eigen::Index i, Eigen::Index j) {
                return std::max(0.0, 1.0 - (s(i, j) + shift) / smax);
            });
        }
        default:
            throw ValidationError("unreachable genotype measure");
    }
}

inline DistanceMatrix pairwise_real(const RealMatrix& rm, DistanceMeasure measure,
                                    const RealDistanceOptions& opts = {}) {
    if (is_genotype_measure(measure)) {
        std::ostringstream msg;
        msg << "measure '" << measure_name(measure) << "' applies to genotype data, not real vectors";
        throw ValidationError(msg.str());
    }
    const Eigen::MatrixXd& x = rm.values();
    const Eigen::Index n = x.rows();
    const Eigen::Index q = x.cols();
    const Metricity met = metricity_of(measure);

    switch (measure) {
        case DistanceMeasure::Euclidean:
            return detail::build_pairwise(n, met, [&](Eigen::Index i, Eigen::Index j) {
                return (x.row(i) - x.row(j)).norm();
            });
        case DistanceMeasure::Manhattan:
            return detail::build_pairwise(n, met, [&](Eigen::Index i, Eigen::Index j) {
                return (x.row(i) - x.row(j)).cwiseAbs().sum();
            });
        case DistanceMeasure::Maximum:
            return detail::build_pairwise(n, met, [&](Eigen::Index i, Eigen::Index j) {
                return (x.row(i) - x.row(j)).cwiseAbs().maxCoeff();
            });
        case DistanceMeasure::BrayCurtis: {
            if (x.minCoeff() < 0.0)
                throw ValidationError("Bray-Curtis requires nonnegative entries");
            return detail::build_pairwise(n, met, [&](Eigen::Index i, Eigen::Index j) {
                const double num = (x.row(i) - x.row(j)).cwiseAbs().sum();
                const double den = x.row(i).sum() + x.row(j).sum();
                return den > 0.0 ? num / den : 0.0;
            });
        }
        case DistanceMeasure::Mahalanobis: {
            if (q >= n) {
                std::ostringstream msg;
                msg << "Mahalanobis needs more samples than features (N=" << n << ", Q=" << q << ")";
                throw ValidationError(msg.str());
            }
            Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
            Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
            auto condition_of = [](const Eigen::MatrixXd& s) {
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
                const double lo = es.eigenvalues().minCoeff();
                const double hi = es.eigenvalues().maxCoeff();
                return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
            };
            double cond = condition_of(cov);
            if (cond > opts.condition_limit && opts.mahalanobis_ridge > 0.0) {
                cov += opts.mahalanobis_ridge * (cov.trace() / static_cast<double>(q)) *
                       Eigen::MatrixXd::Identity(q, q);
                cond = condition_of(cov);
            }
            if (!(cond <= opts.condition_limit)) {
                std::ostringstream msg;
                msg << "Mahalanobis covariance is singular or ill-conditioned (condition number "
                    << cond << ")";
                throw NumericError(msg.str());
            }
            Eigen::LLT<Eigen::MatrixXd> llt(cov);
            if (llt.info() != Eigen::Success)
                throw NumericError("Mahalanobis covariance factorization failed");
            Eigen::MatrixXd prec = llt.solve(Eigen::MatrixXd::Identity(q, q));
            return detail::build_pairwise(n, met, [&](Eigen::Index i, Eigen::Index j) {
                Eigen::VectorXd v = (x.row(i) - x.row(j)).transpose();
                return std::sqrt(std::max(0.0, v.dot(prec * v)));
            });
        }
        case DistanceMeasure::PearsonCorr:
            return detail::correlation_distance(x, met, "pearson");
        case DistanceMeasure::Cosine: {
            Eigen::VectorXd norms(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                norms(i) = x.row(i).norm();
                if (norms(i) <= 0.0) {
                    std::ostringstream msg;
                    msg << "cosine: undefined for all-zero sample " << i;
                    throw DegenerateInputError(msg.str());
                }
            }
            return detail::build_pairwise(n, met, [&](Eigen::Index i, Eigen::Index j) {
                return std::max(0.0, 1.0 - x.row(i).dot(x.row(j)) / (norms(i) * norms(j)));
            });
        }
        case DistanceMeasure::SpearmanCorr: {
            Eigen::MatrixXd ranks(n, q);
            for (Eigen::Index i = 0; i < n; ++i)
                ranks.row(i) = spearman_ranks(x.row(i).transpose()).transpose();
            return detail::correlation_distance(ranks, met, "spearman");
        }
        case DistanceMeasure::NMI:
            return detail::build_pairwise(n, met, [&](Eigen::Index i, Eigen::Index j) {
                return nmi_distance(x.row(i).transpose(), x.row(j).transpose());
            });
        default:
            throw ValidationError("unreachable real measure");
    }
}

}  // namespace grv
