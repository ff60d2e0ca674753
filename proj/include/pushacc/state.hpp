#pragma once

#include "pushacc/core.hpp"

#include <algorithm>
#include <cstddef>

namespace pushacc {

/// Stacked iterates of all agents (row i belongs to agent i) plus push-sum weights.
struct SolverState {
    Matrix X, Y, Z, G;
    Vector v;
    std::size_t k = 0;
    /// Running max of 1 / min_i v_i, an empirical bound on |V^{-1}|.
    double vhat_seen = 1.0;
    /// grad F(V^{-1} X) at the current iterate, reused by the next tracking update.
    Matrix grad_cache;

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index dim() const { return X.cols(); }

    /// Row-scaled estimates V^{-1} A.
    Matrix descale(const Matrix& A) const { return v.cwiseInverse().asDiagonal() * A; }

    void note_weights() { vhat_seen = std::max(vhat_seen, 1.0 / v.minCoeff()); }

    bool finite() const {
        return X.allFinite() && Y.allFinite() && Z.allFinite() && G.allFinite() && v.allFinite() && v.minCoeff() > 0.0;
    }
};

/// Parameters for the accelerated method on smooth convex objectives.
/// Schedules: tau_k = wb / (1 + wa k), alpha_k = pa / tau_k.
struct APDParams {
    double eta = 0.0;
    double pa = 0.25;
    double wa = 0.25;
    double wb = 1.0;
    std::size_t K = 0;

    double tau(std::size_t k) const { return wb / (1.0 + wa * static_cast<double>(k)); }
    double alpha(std::size_t k) const { return pa / tau(k); }

    void validate() const {
        require(eta > 0.0, "eta must be positive");
        require(pa > 0.0 && pa < 1.0, "pa must lie in (0, 1)");
        require(wa > 0.0, "wa must be positive");
        require(wb > 0.0 && wb <= 1.0, "wb must lie in (0, 1]");
    }
};

/// Parameters for the accelerated method on strongly convex objectives (constant tau).
struct APDSCParams {
    double eta = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double tau = 0.0;
    std::size_t K = 0;

    void validate() const {
        require(eta > 0.0, "eta must be positive");
        require(alpha > 0.0, "alpha must be positive");
        require(beta >= 0.0 && beta < 1.0, "beta must lie in [0, 1)");
        require(tau > 0.0 && tau < 1.0, "tau must lie in (0, 1)");
    }
};

}  // namespace pushacc
