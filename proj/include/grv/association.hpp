#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>

#include "grv/distance_matrix.hpp"
#include "grv/errors.hpp"
#include "grv/gram.hpp"

namespace grv {

struct GrvBounds {
    double lower = 0.0;
    double upper = 0.0;
};

struct GrvValue {
    double value = 0.0;
    // Eigenvalue bounds are O(N^3); filled in only when requested.
    std::optional<GrvBounds> bounds;
};

struct MantelValue {
    double value = 0.0;
    int a = 0;  // number of upper-triangular pairs, N(N-1)/2
};

// tr(Gx Gy) via the elementwise-product sum, valid because both matrices are
// symmetric; O(N^2) instead of an O(N^3) product.
inline double gram_trace_product(const GramMatrix& gx, const GramMatrix& gy) {
    return gx.values().cwiseProduct(gy.values()).sum();
}

inline GrvValue grv(const GramMatrix& gx, const GramMatrix& gy) {
    if (gx.n() != gy.n())
        throw ValidationError("grv: sample counts differ (" + std::to_string(gx.n()) + " vs " +
                              std::to_string(gy.n()) + ")");
    const double nx = gx.frobenius_norm();
    const double ny = gy.frobenius_norm();
    if (nx <= 0.0 || ny <= 0.0)
        throw DegenerateInputError("grv: zero-norm Gram matrix (all samples identical on one side)");
    GrvValue out;
    out.value = gram_trace_product(gx, gy) / (nx * ny);
    return out;
}

inline GrvBounds grv_bounds(const GramMatrix& gx, const GramMatrix& gy) {
    if (gx.n() != gy.n()) throw ValidationError("grv_bounds: sample counts differ");
    const double nx = gx.frobenius_norm();
    const double ny = gy.frobenius_norm();
    if (nx <= 0.0 || ny <= 0.0)
        throw DegenerateInputError("grv_bounds: zero-norm Gram matrix");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sx(gx.values(), Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sy(gy.values(), Eigen::EigenvaluesOnly);
    if (sx.info() != Eigen::Success || sy.info() != Eigen::Success)
        throw NumericError("eigendecomposition failed in grv_bounds");
    const Eigen::VectorXd lx = sx.eigenvalues();  // ascending
    const Eigen::VectorXd ly = sy.eigenvalues();
    const Eigen::Index n = lx.size();
    double upper = 0.0, lower = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        upper += lx(i) * ly(i);              // both sorted the same way
        lower += lx(i) * ly(n - 1 - i);      // opposed order minimizes the sum
    }
    return GrvBounds{lower / (nx * ny), upper / (nx * ny)};
}

inline GrvValue grv_with_bounds(const GramMatrix& gx, const GramMatrix& gy) {
    GrvValue v = grv(gx, gy);
    v.bounds = grv_bounds(gx, gy);
    return v;
}

// Frobenius distance between the norm-scaled Gram matrices, sqrt(2(1 - GRV)).
inline double frobenius_from_grv(double grv_value) {
    if (grv_value > 1.0 + 1e-9)
        throw NumericError("frobenius_from_grv: GRV value " + std::to_string(grv_value) +
                           " exceeds 1, inconsistent input");
    return std::sqrt(std::max(0.0, 2.0 * (1.0 - grv_value)));
}

namespace detail {

// Upper-triangular entries flattened row-major; the index layout is shared by
// the Mantel permutation loop.
inline Eigen::VectorXd upper_triangle(const Eigen::MatrixXd& m) {
    const Eigen::Index n = m.rows();
    Eigen::VectorXd v(n * (n - 1) / 2);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) v(k++) = m(i, j);
    return v;
}

}  // namespace detail

inline MantelValue mantel(const DistanceMatrix& dx, const DistanceMatrix& dy) {
    if (dx.n() != dy.n())
        throw ValidationError("mantel: sample counts differ (" + std::to_string(dx.n()) + " vs " +
                              std::to_string(dy.n()) + ")");
    if (dx.n() < 3) throw ValidationError("mantel needs at least 3 samples");
    Eigen::VectorXd vx = detail::upper_triangle(dx.values());
    Eigen::VectorXd vy = detail::upper_triangle(dy.values());
    const Eigen::Index a = vx.size();
    const double mx = vx.mean(), my = vy.mean();
    vx.array() -= mx;
    vy.array() -= my;
    // (A-1)-denominator standardization; the denominators cancel in the
    // correlation except for guarding zero variance.
    const double sx = std::sqrt(vx.squaredNorm() / static_cast<double>(a - 1));
    const double sy = std::sqrt(vy.squaredNorm() / static_cast<double>(a - 1));
    if (sx <= 0.0 || sy <= 0.0)
        throw DegenerateInputError("mantel: distances are constant on one side");
    MantelValue out;
    out.a = static_cast<int>(a);
    out.value = vx.dot(vy) / (static_cast<double>(a - 1) * sx * sy);
    return out;
}

}  // namespace grv
