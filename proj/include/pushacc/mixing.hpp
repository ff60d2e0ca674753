#pragma once

#include "pushacc/core.hpp"
#include "pushacc/graph.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace pushacc {

/// Column-stochastic mixing matrix C with its Perron vector p (C p = p, 1'p = n)
/// and sigma = spectral radius of C - p 1'/n.
struct MixingMatrix {
    Matrix C;
    Vector p;
    double sigma = 0.0;

    Eigen::Index n() const { return C.rows(); }

    /// C - p 1'/n, the error-propagation map of push-sum mixing.
    Matrix deviation() const {
        const auto nn = static_cast<double>(n());
        return C - p * Vector::Ones(n()).transpose() / nn;
    }

    /// I - p 1'/n.
    Matrix projector() const {
        const auto nn = static_cast<double>(n());
        return Matrix::Identity(n(), n()) - p * Vector::Ones(n()).transpose() / nn;
    }
};

struct PerronOptions {
    double tol = 1e-12;
    /// 0 means the default cap 100 n log(n) + 10^4.
    std::size_t max_iterations = 0;
};

/// Positive right eigenvector of a regular column-stochastic matrix, scaled to 1'p = n.
/// Power iteration from the all-ones vector.
inline Vector perron_vector(const Matrix& C, const PerronOptions& opts = {}) {
    require(C.rows() == C.cols() && C.rows() > 0, "mixing matrix must be square and non-empty");
    const auto n = C.rows();
    const double nn = static_cast<double>(n);
    const std::size_t cap = opts.max_iterations > 0
                                ? opts.max_iterations
                                : static_cast<std::size_t>(100.0 * nn * std::log(nn)) + 10000;
    Vector p = Vector::Ones(n);
    Vector next(n);
    double best = std::numeric_limits<double>::infinity();
    bool reached = false;
    for (std::size_t it = 0; it < cap; ++it) {
        next.noalias() = C * p;
        next *= nn / next.sum();
        const double resid = (C * next - next).norm();
        // past the tolerance, keep going while the residual still shrinks so that p is
        // accurate to rounding level
        if (reached && !(resid < best)) break;
        p.swap(next);
        best = std::min(best, resid);
        if (resid <= opts.tol * p.norm()) reached = true;
    }
    if (reached) {
        p *= nn / p.sum();
        if (p.minCoeff() <= 0.0) throw NumericalError("Perron vector has non-positive entries");
        return p;
    }
    throw NumericalError("power iteration did not converge in " + std::to_string(cap) +
                         " iterations; mixing matrix is likely not regular");
}

/// Spectral radius of C - p 1'/n by a dense eigensolve. Throws if it is not below 1.
inline double contraction_factor(const Matrix& C, const Vector& p) {
    const auto n = C.rows();
    const Matrix M = C - p * Vector::Ones(n).transpose() / static_cast<double>(n);
    Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) throw NumericalError("eigenvalue computation failed");
    const double rho = es.eigenvalues().cwiseAbs().maxCoeff();
    if (!(rho < 1.0)) throw NumericalError("contraction factor " + std::to_string(rho) + " is not below 1");
    return rho;
}

/// Validates nonnegativity and column sums, then fills in p and sigma.
inline MixingMatrix make_mixing_matrix(Matrix C, const PerronOptions& opts = {}) {
    require(C.rows() == C.cols() && C.rows() > 0, "mixing matrix must be square and non-empty");
    require(C.minCoeff() >= 0.0, "mixing matrix has negative entries");
    const double col_err = (C.colwise().sum().array() - 1.0).abs().maxCoeff();
    require(col_err <= 1e-12, "mixing matrix is not column stochastic (max column-sum error " +
                                  std::to_string(col_err) + ")");
    MixingMatrix W;
    W.p = perron_vector(C, opts);
    W.sigma = contraction_factor(C, W.p);
    W.C = std::move(C);
    return W;
}

/// Sender j splits its mass equally among itself and its out-neighbors:
/// C(i, j) = 1 / (|out(j)| + 1) for i in {j} U out(j).
inline MixingMatrix uniform_out_weights(const DirectedGraph& g, const PerronOptions& opts = {}) {
    require(g.n >= 1, "empty graph");
    if (!is_strongly_connected(g)) throw ConfigError("graph is not strongly connected; mixing matrix would not be regular");
    const auto out = g.out_neighbors();
    Matrix C = Matrix::Zero(g.n, g.n);
    for (int j = 0; j < g.n; ++j) {
        const auto& nbrs = out[static_cast<std::size_t>(j)];
        const double w = 1.0 / static_cast<double>(nbrs.size() + 1);
        C(j, j) = w;
        for (int i : nbrs) C(i, j) = w;
    }
    return make_mixing_matrix(std::move(C), opts);
}

/// Weighted Euclidean norm x -> |Ctilde x| under which C - p 1'/n contracts by 1 - delta,
/// with |Ctilde x| <= |x| <= theta |Ctilde x|.
struct NormTransform {
    Matrix ctilde;
    Matrix ctilde_inv;
    double delta = 0.0;
    double theta = 1.0;
    double epsilon = 0.0;
    /// Measured induced norm of C - p 1'/n in this norm.
    double contraction = 0.0;
    /// Measured induced norm of I - p 1'/n in this norm.
    double projector_norm = 1.0;

    double norm(const Vector& x) const { return (ctilde * x).norm(); }

    /// Column-wise matrix norm of an n x p matrix: sqrt(sum_c |Ctilde A(:, c)|^2).
    double matrix_norm(const Matrix& A) const { return (ctilde * A).norm(); }

    /// Induced operator norm of an n x n matrix.
    double induced_norm(const Matrix& A) const {
        return Eigen::JacobiSVD<Matrix>(ctilde * A * ctilde_inv).singularValues()(0);
    }
};

namespace detail {

/// Solves P = I + A' P A for rho(A) < 1 by the doubling recursion
/// P <- P + Ak' P Ak, Ak <- Ak^2.
inline Matrix solve_stein(const Matrix& A) {
    Matrix P = Matrix::Identity(A.rows(), A.cols());
    Matrix Ak = A;
    for (int it = 0; it < 80; ++it) {
        P = (P + Ak.transpose() * P * Ak).eval();
        Ak = (Ak * Ak).eval();
        if (!P.allFinite()) break;
        if (Ak.norm() <= 1e-18) return 0.5 * (P + P.transpose());
    }
    throw NumericalError("Stein equation did not converge; deviation map is not contractive");
}

}  // namespace detail

/// Builds a contraction norm with induced norm of M = C - p 1'/n at most sigma + epsilon.
///
/// Coordinates: x = Q a + p c with Q an orthonormal basis of {1'x = 0} and c = 1'x / n.
/// M kills p and maps into span(Q), so it acts only on a via Mr = Q' M Q. With
/// A = Mr / (sigma + epsilon) and P solving P = I + A' P A, T = P^{1/2} gives
/// |T A T^{-1}| = sqrt(1 - 1/lambda_max(P)) < 1. The norm |x|^2 = |T a|^2 + gamma^2 c^2 keeps
/// the two components orthogonal, so I - p 1'/n has norm exactly 1.
inline NormTransform build_contraction_norm(const MixingMatrix& W, std::optional<double> epsilon = std::nullopt) {
    const double eps = epsilon.value_or((1.0 - W.sigma) / 2.0);
    if (!(eps > 0.0 && W.sigma + eps < 1.0))
        throw ConfigError("epsilon must lie in (0, 1 - sigma) = (0, " + std::to_string(1.0 - W.sigma) + ")");
    const auto n = W.n();
    NormTransform nt;
    nt.epsilon = eps;
    nt.delta = 1.0 - W.sigma - eps;

    if (n == 1) {
        nt.ctilde = Matrix::Identity(1, 1);
        nt.ctilde_inv = Matrix::Identity(1, 1);
        nt.theta = 1.0;
        nt.contraction = 0.0;
        nt.projector_norm = 0.0;
        return nt;
    }

    const double nn = static_cast<double>(n);
    const Vector ones = Vector::Ones(n);
    const Matrix Qfull = Eigen::HouseholderQR<Matrix>(ones).householderQ();
    const Matrix Q = Qfull.rightCols(n - 1);
    const Matrix M = W.deviation();
    const Matrix Mr = Q.transpose() * M * Q;
    const Matrix P = detail::solve_stein(Mr / (W.sigma + eps));
    const Matrix T = Eigen::SelfAdjointEigenSolver<Matrix>(P).operatorSqrt();

    const double gamma = W.p.norm();
    Matrix raw(n, n);
    raw.topRows(n - 1) = T * Q.transpose() * W.projector();
    raw.bottomRows(1) = gamma * ones.transpose() / nn;

    const Vector sv = Eigen::JacobiSVD<Matrix>(raw).singularValues();
    nt.ctilde = raw / sv(0);
    nt.theta = sv(0) / sv(n - 1);
    nt.ctilde_inv = nt.ctilde.inverse();
    nt.contraction = nt.induced_norm(M);
    nt.projector_norm = nt.induced_norm(W.projector());
    return nt;
}

}  // namespace pushacc
