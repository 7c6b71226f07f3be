#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "grv/errors.hpp"

namespace grv {

enum class Metricity { metric, semi_metric, unknown };

inline const char* metricity_name(Metricity m) {
    switch (m) {
        case Metricity::metric: return "metric";
        case Metricity::semi_metric: return "semi_metric";
        default: return "unknown";
    }
}

// N x N symmetric nonnegative dissimilarities with zero diagonal. The metricity
// flag is declared by the producing distance measure, never inferred; use
// audit_metricity for an explicit O(N^3) triangle check on unknown inputs.
class DistanceMatrix {
public:
    static DistanceMatrix from_values(Eigen::MatrixXd values, Metricity metricity = Metricity::unknown) {
        if (values.rows() != values.cols())
            throw ValidationError("distance matrix must be square");
        const Eigen::Index n = values.rows();
        if (n < 1) throw ValidationError("distance matrix must be nonempty");
        const double scale = values.cwiseAbs().maxCoeff();
        const double tol = 1e-12 * std::max(1.0, scale);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::abs(values(i, i)) > tol) {
                std::ostringstream msg;
                msg << "distance matrix diagonal entry (" << i << "," << i << ") is "
                    << values(i, i) << ", expected 0";
                throw ValidationError(msg.str());
            }
            values(i, i) = 0.0;
            for (Eigen::Index j = i + 1; j < n; ++j) {
                if (std::abs(values(i, j) - values(j, i)) > tol) {
                    std::ostringstream msg;
                    msg << "distance matrix asymmetric at (" << i << "," << j << "): "
                        << values(i, j) << " vs " << values(j, i);
                    throw ValidationError(msg.str());
                }
                double v = 0.5 * (values(i, j) + values(j, i));
                if (v < -tol) {
                    std::ostringstream msg;
                    msg << "negative distance " << v << " at (" << i << "," << j << ")";
                    throw ValidationError(msg.str());
                }
                if (v < 0.0) v = 0.0;
                values(i, j) = values(j, i) = v;
            }
        }
        return DistanceMatrix(std::move(values), metricity);
    }

    // For producers that construct entries pairwise and already guarantee the
    // invariants exactly; skips the validation pass.
    static DistanceMatrix from_trusted(Eigen::MatrixXd values, Metricity metricity) {
        return DistanceMatrix(std::move(values), metricity);
    }

    int n() const { return static_cast<int>(values_.rows()); }
    const Eigen::MatrixXd& values() const { return values_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }
    Metricity metricity() const { return metricity_; }

private:
    DistanceMatrix(Eigen::MatrixXd values, Metricity metricity)
        : values_(std::move(values)), metricity_(metricity) {}

    Eigen::MatrixXd values_;
    Metricity metricity_;
};

// O(N^3) triangle-inequality audit; intended for matrices declared `unknown`.
inline Metricity audit_metricity(const DistanceMatrix& d, double tol = 1e-12) {
    const auto& m = d.values();
    const Eigen::Index n = m.rows();
    const double scale = std::max(1.0, m.maxCoeff());
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            for (Eigen::Index k = 0; k < n; ++k)
                if (m(i, j) > m(i, k) + m(k, j) + tol * scale)
                    return Metricity::semi_metric;
    return Metricity::metric;
}

}  // namespace grv
