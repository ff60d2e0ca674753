#pragma once

#include "pushacc/core.hpp"
#include "pushacc/diagnostics.hpp"
#include "pushacc/mixing.hpp"
#include "pushacc/objectives.hpp"
#include "pushacc/state.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace pushacc {

struct RunOptions {
    /// When set, a RunTrace is recorded against this reference.
    const TraceOptions* trace = nullptr;
    /// Called with the initial state and after every step.
    std::function<void(const SolverState&)> on_state;
};

struct RunResult {
    Matrix output;
    RunTrace trace;
    SolverState final_state;
};

/// X = Y = Z = X0, v = v0, G = grad F(V0^{-1} X0).
inline SolverState init_state(const Matrix& X0, const Vector& v0, const ObjectiveSuite& suite) {
    const auto n = X0.rows();
    require(n == suite.n() && X0.cols() == suite.dim(), "X0 must be n x dim for the objective suite");
    require(v0.size() == n, "v0 must have one entry per agent");
    require(v0.minCoeff() > 0.0, "v0 must be entrywise positive");
    require(std::abs(v0.sum() - static_cast<double>(n)) <= 1e-10 * static_cast<double>(n), "v0 must sum to n");
    require(X0.allFinite(), "X0 must be finite");
    SolverState s;
    s.X = X0;
    s.Y = X0;
    s.Z = X0;
    s.v = v0;
    s.grad_cache = suite.gradient_batch(s.descale(X0));
    s.G = s.grad_cache;
    s.k = 0;
    s.vhat_seen = 1.0;
    s.note_weights();
    return s;
}

namespace detail {

inline void check_finite(const SolverState& s) {
    if (!s.finite()) throw DivergenceError(s.k, "non-finite iterate");
}

/// G+ = C G + grad F(V+^{-1} X+) - grad F(V^{-1} X), reusing the cached previous batch.
inline void track_gradient(SolverState& s, const Matrix& C, const ObjectiveSuite& suite) {
    Matrix fresh = suite.gradient_batch(s.descale(s.X));
    s.G = C * s.G + fresh - s.grad_cache;
    s.grad_cache = std::move(fresh);
}

}  // namespace detail

/// One iteration of the accelerated method with decaying tau (smooth convex case).
inline void apd_step(SolverState& s, const MixingMatrix& W, const ObjectiveSuite& suite, const APDParams& prm) {
    const Matrix& C = W.C;
    const double ak = prm.alpha(s.k);
    const double tnext = prm.tau(s.k + 1);
    s.v = C * s.v;
    s.Y = C * (s.X - prm.eta * s.G);
    s.Z = C * (s.Z - (ak * prm.eta) * s.G);
    s.X = (1.0 - tnext) * s.Y + tnext * s.Z;
    if (!s.X.allFinite() || !s.v.allFinite()) throw DivergenceError(s.k + 1, "non-finite iterate");
    detail::track_gradient(s, C, suite);
    ++s.k;
    s.note_weights();
    detail::check_finite(s);
}

/// One iteration of the accelerated method with constant tau (strongly convex case).
inline void apdsc_step(SolverState& s, const MixingMatrix& W, const ObjectiveSuite& suite, const APDSCParams& prm) {
    const Matrix& C = W.C;
    s.v = C * s.v;
    const Matrix Ynew = C * (s.X - prm.eta * s.G);
    s.Z = C * ((1.0 - prm.beta) * s.Z + prm.beta * s.X - (prm.alpha * prm.eta) * s.G);
    s.Y = Ynew;
    s.X = (1.0 - prm.tau) * s.Y + prm.tau * s.Z;
    if (!s.X.allFinite() || !s.v.allFinite()) throw DivergenceError(s.k + 1, "non-finite iterate");
    detail::track_gradient(s, C, suite);
    ++s.k;
    s.note_weights();
    detail::check_finite(s);
}

/// Gradient-tracking push-sum step: v+ = C v, X+ = C (X - eta G), tracked G.
inline void push_diging_step(SolverState& s, const MixingMatrix& W, const ObjectiveSuite& suite, double eta) {
    const Matrix& C = W.C;
    s.v = C * s.v;
    s.X = C * (s.X - eta * s.G);
    s.Y = s.X;
    s.Z = s.X;
    if (!s.X.allFinite() || !s.v.allFinite()) throw DivergenceError(s.k + 1, "non-finite iterate");
    detail::track_gradient(s, C, suite);
    ++s.k;
    s.note_weights();
    detail::check_finite(s);
}

/// Push-sum subgradient step: v+ = C v, X+ = C X - eta_k grad F(V^{-1} X), eta_k = c / sqrt(k + 1).
/// G holds the local gradients at the current ratios.
inline void subgradient_push_step(SolverState& s, const MixingMatrix& W, const ObjectiveSuite& suite, double step_c) {
    const Matrix& C = W.C;
    const double eta_k = step_c / std::sqrt(static_cast<double>(s.k) + 1.0);
    s.v = C * s.v;
    s.X = C * s.X - eta_k * s.grad_cache;
    s.Y = s.X;
    s.Z = s.X;
    if (!s.X.allFinite() || !s.v.allFinite()) throw DivergenceError(s.k + 1, "non-finite iterate");
    s.grad_cache = suite.gradient_batch(s.descale(s.X));
    s.G = s.grad_cache;
    ++s.k;
    s.note_weights();
    detail::check_finite(s);
}

namespace detail {

template <class Step>
RunResult drive(SolverState s, std::size_t K, const MixingMatrix& W, const ObjectiveSuite& suite, OutputRule rule,
                LyapunovSpec lyap, const RunOptions& opts, const std::string& label, Step&& step) {
    require(W.n() == s.n(), "mixing matrix size does not match the number of agents");
    std::optional<TraceRecorder> rec;
    if (opts.trace) rec.emplace(suite, *opts.trace, rule, std::move(lyap), K);
    auto observe = [&] {
        if (rec) rec->observe(s, W.p);
        if (opts.on_state) opts.on_state(s);
    };
    observe();
    for (std::size_t it = 0; it < K; ++it) {
        step(s);
        observe();
    }
    RunResult res;
    res.output = s.descale(rule == OutputRule::from_y ? s.Y : s.X);
    if (rec) res.trace = rec->take(label);
    else res.trace.label = label;
    res.final_state = std::move(s);
    return res;
}

}  // namespace detail

/// Runs K accelerated steps; the output rows are v_{K,i}^{-1} y_{K,i}.
inline RunResult apd_run(const Matrix& X0, const Vector& v0, const MixingMatrix& W, const ObjectiveSuite& suite,
                         const APDParams& prm, const RunOptions& opts = {}) {
    prm.validate();
    LyapunovSpec lyap;
    lyap.kind = LyapunovSpec::Kind::smooth;
    lyap.smooth = prm;
    return detail::drive(init_state(X0, v0, suite), prm.K, W, suite, OutputRule::from_y, lyap, opts, "apd",
                         [&](SolverState& s) { apd_step(s, W, suite, prm); });
}

inline RunResult apdsc_run(const Matrix& X0, const Vector& v0, const MixingMatrix& W, const ObjectiveSuite& suite,
                           const APDSCParams& prm, const RunOptions& opts = {}) {
    prm.validate();
    LyapunovSpec lyap;
    lyap.kind = LyapunovSpec::Kind::strongly_convex;
    lyap.sc = prm;
    return detail::drive(init_state(X0, v0, suite), prm.K, W, suite, OutputRule::from_y, lyap, opts, "apdsc",
                         [&](SolverState& s) { apdsc_step(s, W, suite, prm); });
}

/// Output rows are v_{K,i}^{-1} x_{K,i}.
inline RunResult push_diging_run(const Matrix& X0, const Vector& v0, const MixingMatrix& W, const ObjectiveSuite& suite,
                                 double eta, std::size_t K, const RunOptions& opts = {}) {
    require(eta > 0.0, "eta must be positive");
    return detail::drive(init_state(X0, v0, suite), K, W, suite, OutputRule::from_x, {}, opts, "pushdiging",
                         [&](SolverState& s) { push_diging_step(s, W, suite, eta); });
}

inline RunResult subgradient_push_run(const Matrix& X0, const Vector& v0, const MixingMatrix& W,
                                      const ObjectiveSuite& suite, double step_c, std::size_t K,
                                      const RunOptions& opts = {}) {
    require(step_c > 0.0, "step constant must be positive");
    return detail::drive(init_state(X0, v0, suite), K, W, suite, OutputRule::from_x, {}, opts, "subgradpush",
                         [&](SolverState& s) { subgradient_push_step(s, W, suite, step_c); });
}

struct AGMIterate {
    Vector x, y, z;
};

/// Centralized linear-coupling recursion on the average objective:
/// y+ = x - eta grad f(x), z+ = z - alpha_k eta grad f(x), x+ = (1 - tau_{k+1}) y+ + tau_{k+1} z+.
/// Returns the iterates for k = 0..K.
inline std::vector<AGMIterate> centralized_agm_run(const Vector& x0, const ObjectiveSuite& suite, double eta, double pa,
                                                   double wa, double wb, std::size_t K) {
    require(eta > 0.0, "eta must be positive");
    require(x0.size() == suite.dim(), "x0 has the wrong dimension");
    APDParams sched{eta, pa, wa, wb, K};
    std::vector<AGMIterate> out;
    out.reserve(K + 1);
    AGMIterate cur{x0, x0, x0};
    out.push_back(cur);
    for (std::size_t k = 0; k < K; ++k) {
        const Vector g = suite.average_gradient(cur.x);
        AGMIterate next;
        next.y = cur.x - eta * g;
        next.z = cur.z - (sched.alpha(k) * eta) * g;
        const double t = sched.tau(k + 1);
        next.x = (1.0 - t) * next.y + t * next.z;
        if (!next.x.allFinite() || !next.z.allFinite()) throw DivergenceError(k + 1, "non-finite centralized iterate");
        out.push_back(next);
        cur = std::move(next);
    }
    return out;
}

enum class ParamMode { practical, theoretical };

/// Graph quantities the theoretical stepsize ceilings depend on.
struct TheoryInputs {
    double n = 1.0;
    double delta = 0.5;
    double theta = 1.0;
    double vhat = 1.0;
    /// |v0 - p| under Ctilde.
    double v0_dev = 0.0;
};

inline const double kGradientDiffConstant = 26.0 * std::sqrt(std::exp(1.0));

/// Observes pure push-sum from v0 for a few iterations to estimate vhat.
inline TheoryInputs calibrate_theory_inputs(const MixingMatrix& W, const NormTransform& nt, const Vector& v0,
                                            std::size_t iterations = 50) {
    TheoryInputs ti;
    ti.n = static_cast<double>(W.n());
    ti.delta = nt.delta;
    ti.theta = nt.theta;
    ti.v0_dev = nt.norm(v0 - W.p);
    Vector v = v0;
    double vhat = 1.0;
    for (std::size_t k = 0; k <= iterations; ++k) {
        vhat = std::max(vhat, 1.0 / v.minCoeff());
        v = W.C * v;
    }
    ti.vhat = vhat;
    return ti;
}

/// Smallest of the stepsize ceilings for the decaying-tau method.
inline double smooth_stepsize_ceiling(double L, double pa, double wa, double wb, const TheoryInputs& t) {
    const double d = t.delta, th = t.theta, vh = t.vhat;
    const double c3 = lyapunov_c3(d, pa), c4 = kGradientDiffConstant;
    const double d4 = std::pow(d, 4);
    double eta = std::sqrt(pa) * d4 / (std::sqrt(96.0 * (15.0 + 9.0 * pa) * c3 * c4) * th * vh * L);
    if (t.v0_dev > 0.0)
        eta = std::min(eta, t.n * pa * std::pow(d, 6) /
                                (1920.0 * t.v0_dev * t.v0_dev * th * th * vh * vh * (1.0 + pa) * (1.0 + pa) * c4 * L));
    eta = std::min(eta, 1.0 / (8.0 * pa * L));
    eta = std::min(eta, d4 / (12.0 * th * vh * std::sqrt(c3 * c4 * (6.0 + pa)) * L));
    eta = std::min(eta, std::sqrt(wb) * d4 / (12.0 * std::sqrt(3.0 * wa * c3 * c4) * th * vh * L));
    eta = std::min(eta, d4 / (12.0 * th * vh * std::sqrt(c3 * c4) * L));
    return eta;
}

/// Smallest of the stepsize ceilings for the constant-tau method; at = alpha * tau.
inline double sc_stepsize_ceiling(double L, double at, const TheoryInputs& t) {
    const double d = t.delta, th = t.theta, vh = t.vhat;
    const double c5 = lyapunov_c5(d, at);
    const double d3 = std::pow(d, 3);
    double eta = std::numeric_limits<double>::infinity();
    if (t.v0_dev > 0.0)
        eta = at * t.n * std::pow(d, 4) /
              (2160.0 * th * th * vh * vh * (1.0 + at) * (1.0 + at) * t.v0_dev * t.v0_dev * L);
    eta = std::min(eta, std::sqrt(at) * d3 / (8.0 * std::sqrt(5.0 * c5 * (15.0 + 9.0 * at)) * th * vh * L));
    eta = std::min(eta, 1.0 / (24.0 * at * L));
    eta = std::min(eta, d3 / (8.0 * std::sqrt(5.0 * c5 * (18.0 + 3.0 * at)) * th * vh * L));
    eta = std::min(eta, d3 / (8.0 * std::sqrt(15.0 * c5) * th * vh * L));
    return eta;
}

/// pa = 1/4, wb = 1, wa = wb/4; eta = c_prac / L in practical mode or the ceiling minimum in
/// theoretical mode.
inline APDParams default_params_smooth(double L, ParamMode mode, const std::optional<TheoryInputs>& theory = std::nullopt,
                                       double c_prac = 0.3, std::size_t K = 0) {
    require(L > 0.0, "L must be positive");
    APDParams prm;
    prm.pa = 0.25;
    prm.wb = 1.0;
    prm.wa = prm.wb / 4.0;
    prm.K = K;
    if (mode == ParamMode::practical) {
        require(c_prac > 0.0, "c_prac must be positive");
        prm.eta = c_prac / L;
    } else {
        if (!theory) throw ConfigError("theoretical parameters need graph inputs (delta, theta, vhat, |v0 - p|)");
        prm.eta = smooth_stepsize_ceiling(L, prm.pa, prm.wa, prm.wb, *theory);
    }
    return prm;
}

/// Completes the constant-tau parameters for a given stepsize.
inline APDSCParams sc_params_for_eta(double eta, double mu, const std::optional<TheoryInputs>& theory, std::size_t K) {
    APDSCParams prm;
    prm.eta = eta;
    prm.K = K;
    prm.tau = std::sqrt(mu * eta / 24.0);
    prm.alpha = 1.0 / (12.0 * prm.tau);
    prm.beta = std::min(prm.tau, mu * prm.alpha * eta / 2.0);
    if (theory) {
        const double d = theory->delta;
        prm.beta = std::min({prm.beta, d / 16.0, d * d / (8.0 * prm.tau)});
    }
    return prm;
}

/// tau = sqrt(mu eta / 24), alpha = 1 / (12 tau), beta = min{tau, mu alpha eta / 2} further capped by
/// delta/16 and delta^2/(8 tau) when graph inputs are available.
inline APDSCParams default_params_sc(double L, double mu, ParamMode mode,
                                     const std::optional<TheoryInputs>& theory = std::nullopt, double c_prac = 0.3,
                                     std::size_t K = 0) {
    require(mu > 0.0 && mu <= L, "need 0 < mu <= L");
    APDSCParams prm;
    prm.K = K;
    if (mode == ParamMode::practical) {
        require(c_prac > 0.0, "c_prac must be positive");
        prm.eta = c_prac / L;
    } else {
        if (!theory) throw ConfigError("theoretical parameters need graph inputs (delta, theta, vhat, |v0 - p|)");
        prm.eta = sc_stepsize_ceiling(L, 1.0 / 12.0, *theory);
    }
    return sc_params_for_eta(prm.eta, mu, theory, K);
}

}  // namespace pushacc
