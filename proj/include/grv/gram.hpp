#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <vector>

#include "grv/distance_matrix.hpp"
#include "grv/errors.hpp"

namespace grv {

// Gower-centered inner-product matrix G = -1/2 C (D o D) C with C = I - J/N.
// Symmetric, all row and column sums zero; caches its Frobenius norm. A zero
// matrix is a legal GramMatrix (identical samples) but is rejected by grv().
class GramMatrix {
public:
    static GramMatrix from_values(const Eigen::MatrixXd& values) {
        if (values.rows() != values.cols())
            throw ValidationError("Gram matrix must be square");
        const Eigen::Index n = values.rows();
        if (n < 2) throw ValidationError("Gram matrix needs at least 2 samples");
        const double scale = values.cwiseAbs().maxCoeff();
        const double tol = 1e-10 * static_cast<double>(n) * std::max(1.0, scale);
        if ((values - values.transpose()).cwiseAbs().maxCoeff() > tol)
            throw ValidationError("Gram matrix is not symmetric");
        Eigen::VectorXd rowsum = values.rowwise().sum();
        if (rowsum.cwiseAbs().maxCoeff() > tol) {
            std::ostringstream msg;
            msg << "Gram matrix is not centered: max |row sum| = "
                << rowsum.cwiseAbs().maxCoeff() << " exceeds tolerance " << tol;
            throw ValidationError(msg.str());
        }
        return GramMatrix(values);
    }

    // For gower_center and tests that construct exactly-centered matrices.
    static GramMatrix from_trusted(Eigen::MatrixXd values) {
        return GramMatrix(std::move(values));
    }

    int n() const { return static_cast<int>(values_.rows()); }
    const Eigen::MatrixXd& values() const { return values_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }
    double frobenius_norm() const { return frobenius_norm_; }

private:
    explicit GramMatrix(Eigen::MatrixXd values)
        : values_(std::move(values)), frobenius_norm_(values_.norm()) {}

    Eigen::MatrixXd values_;
    double frobenius_norm_;
};

inline GramMatrix gower_center(const DistanceMatrix& d) {
    const Eigen::Index n = d.values().rows();
    if (n < 2) throw ValidationError("Gower centering needs at least 2 samples");
    Eigen::MatrixXd s = d.values().cwiseProduct(d.values());
    // -1/2 C S C, expanded so each entry needs only row/column/grand means.
    const Eigen::VectorXd rmean = s.rowwise().mean();
    const double gmean = s.mean();
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            const double v = -0.5 * (s(i, j) - rmean(i) - rmean(j) + gmean);
            g(i, j) = v;
            g(j, i) = v;
        }
    }
    return GramMatrix::from_trusted(std::move(g));
}

// Classical MDS embedding of a centered Gram matrix. Negative eigenvalues (the
// semi-metric case) get their axes zeroed and are reported alongside the
// Frobenius error of rebuilding G from the retained axes; no exception is thrown.
struct PrincipalCoordinates {
    int n = 0;
    Eigen::MatrixXd coords;                   // rows are points, columns are axes
    std::vector<double> negative_eigenvalues; // eigenvalues dropped by the embedding
    double reconstruction_error = 0.0;        // || G - X X^T ||_F
};

inline PrincipalCoordinates principal_coordinates(const GramMatrix& g) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g.values());
    if (solver.info() != Eigen::Success)
        throw NumericError("eigendecomposition failed in principal_coordinates");
    const Eigen::Index n = g.values().rows();
    const Eigen::VectorXd& evals = solver.eigenvalues();  // ascending
    const Eigen::MatrixXd& evecs = solver.eigenvectors();

    PrincipalCoordinates out;
    out.n = static_cast<int>(n);
    out.coords = Eigen::MatrixXd::Zero(n, n);
    const double eps = 1e-12 * static_cast<double>(n) * std::max(1.0, evals.cwiseAbs().maxCoeff());
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index src = n - 1 - k;  // descending order of eigenvalue
        const double lambda = evals(src);
        if (lambda > eps) {
            out.coords.col(k) = evecs.col(src) * std::sqrt(lambda);
        } else if (lambda < -eps) {
            out.negative_eigenvalues.push_back(lambda);
        }
    }
    out.reconstruction_error = (g.values() - out.coords * out.coords.transpose()).norm();
    return out;
}

}  // namespace grv
