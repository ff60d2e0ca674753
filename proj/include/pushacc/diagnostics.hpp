#pragma once

#include "pushacc/core.hpp"
#include "pushacc/mixing.hpp"
#include "pushacc/objectives.hpp"
#include "pushacc/state.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace pushacc {

struct TraceRecord {
    std::size_t k = 0;
    double loss = 0.0;
    double consensus_error = 0.0;
    double projection_error = 0.0;
    double grad_avg_norm = 0.0;
    std::optional<double> phi1, phi2, phi3, phi4;
    double v_min = 0.0;
    /// |grad F(U_k) - grad F(U_{k-1})|_F; absent at k = 0 or when the previous step was not recorded.
    std::optional<double> grad_change;
};

struct RunTrace {
    std::string label;
    std::vector<TraceRecord> records;

    bool empty() const { return records.empty(); }
    const TraceRecord& back() const { return records.back(); }
};

/// Column-wise mean (1/n) 1'A as a row vector.
inline RowVector row_mean(const Matrix& A) { return A.colwise().mean(); }

/// (1/n) sum_i f(row_i) - f*, where f is the average objective.
inline double optimality_gap(const ObjectiveSuite& suite, const Matrix& output, const Vector& xstar, double fstar) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < output.rows(); ++i) acc += suite.average_gap(output.row(i).transpose(), xstar);
    return acc / static_cast<double>(output.rows()) + (suite.average_value(xstar) - fstar);
}

struct ConsensusErrors {
    /// |V^{-1} X - 1 xbar|_F with xbar = (1/n) 1'X.
    double u_err = 0.0;
    /// |(I - p 1'/n) X|_F.
    double proj_err = 0.0;
};

inline ConsensusErrors consensus_error(const SolverState& s, const Vector& p) {
    const auto n = static_cast<double>(s.n());
    const RowVector xbar = row_mean(s.X);
    Matrix U = s.descale(s.X);
    U.rowwise() -= xbar;
    const Matrix proj = s.X - p * (Vector::Ones(s.n()).transpose() * s.X) / n;
    return {U.norm(), proj.norm()};
}

/// Upper bound on u_err^2 from the projected iterate and the push-sum weight deviation.
inline double consensus_bound(const SolverState& s, const MixingMatrix& W, const NormTransform& nt, double vhat,
                              const Vector& v0) {
    const Matrix proj = W.projector() * s.X;
    const double decay = std::pow(1.0 - nt.delta, 2.0 * static_cast<double>(s.k));
    const double dev0 = nt.norm(v0 - W.p);
    return 2.0 * nt.theta * nt.theta * vhat * vhat *
           (std::pow(nt.matrix_norm(proj), 2) + decay * dev0 * dev0 * row_mean(s.X).squaredNorm());
}

/// Constant of the consensus Lyapunov function for the decaying-tau method.
inline double lyapunov_c3(double delta, double pa) { return 3.0 * (delta * delta + 2.0 * pa * pa * delta + 4.0 * pa * pa); }

/// Constant of the consensus Lyapunov function for the constant-tau method; at = alpha * tau.
inline double lyapunov_c5(double delta, double at) {
    return (8.0 / 7.0) * (1.5 * delta + 6.0 * at * at * delta + 48.0 * at * at / 7.0);
}

struct LyapunovValues {
    double average = 0.0;    // weighted decay of the average iterates
    double consensus = 0.0;  // consensus-error composite
};

namespace detail {

inline double squared_pinorm(const Matrix& A, const MixingMatrix& W, const NormTransform& nt) {
    return std::pow(nt.matrix_norm(W.projector() * A), 2);
}

}  // namespace detail

/// Lyapunov pair for the decaying-tau method at iteration k:
/// average   = (1-d)^{2k} (|xbar|^2 + 8/d^2 tau_k^2 |zbar|^2)
/// consensus = |Pi X|^2 + 6/d^2 w |Pi Z|^2 + c3 eta^2/d^4 |Pi G|^2   (norms under Ctilde)
/// with w = tau_k^2 by default. The one-step recursion is derived for that weighting; with
/// w = 1 (tau_weighted_z = false) it fails once alpha is large, because Z is driven by alpha eta G.
inline LyapunovValues lyapunov_smooth(const SolverState& s, std::size_t k, const APDParams& prm, const MixingMatrix& W,
                                      const NormTransform& nt, bool tau_weighted_z = true) {
    const double d = nt.delta;
    const double tk = prm.tau(k);
    const double wz = tau_weighted_z ? tk * tk : 1.0;
    LyapunovValues out;
    out.average = std::pow(1.0 - d, 2.0 * static_cast<double>(k)) *
                  (row_mean(s.X).squaredNorm() + 8.0 / (d * d) * tk * tk * row_mean(s.Z).squaredNorm());
    out.consensus = detail::squared_pinorm(s.X, W, nt) + 6.0 / (d * d) * wz * detail::squared_pinorm(s.Z, W, nt) +
                    lyapunov_c3(d, prm.pa) * prm.eta * prm.eta / std::pow(d, 4) * detail::squared_pinorm(s.G, W, nt);
    return out;
}

/// Constant-tau analogue:
/// average   = (1-d)^{2k} (|xbar|^2 + 8/d^2 tau^2 |zbar|^2)
/// consensus = |Pi X|^2 + 24/(7 d^2) w |Pi Z|^2 + c5 eta^2/d^4 |Pi G|^2, w = tau^2 (default) or 1
inline LyapunovValues lyapunov_sc(const SolverState& s, std::size_t k, const APDSCParams& prm, const MixingMatrix& W,
                                  const NormTransform& nt, bool tau_weighted_z = true) {
    const double d = nt.delta;
    const double t = prm.tau;
    const double wz = tau_weighted_z ? t * t : 1.0;
    LyapunovValues out;
    out.average = std::pow(1.0 - d, 2.0 * static_cast<double>(k)) *
                  (row_mean(s.X).squaredNorm() + 8.0 / (d * d) * t * t * row_mean(s.Z).squaredNorm());
    out.consensus = detail::squared_pinorm(s.X, W, nt) + 24.0 / (7.0 * d * d) * wz * detail::squared_pinorm(s.Z, W, nt) +
                    lyapunov_c5(d, prm.alpha * prm.tau) * prm.eta * prm.eta / std::pow(d, 4) *
                        detail::squared_pinorm(s.G, W, nt);
    return out;
}

/// Slack (right side minus left side) of the one-step recursion
/// Phi_{k+1} <= (1 - d/8) Phi_k + c5 eta^2 / d^5 |grad F(U_{k+1}) - grad F(U_k)|_F^2
/// for every consecutive record pair (k, k+1) with k + 1 < K. A pair violates the inequality when
/// slack < -(tol * max(lhs, rhs) + rounding_floor); rounding_floor is an absolute allowance for the
/// level below which Phi only measures accumulated rounding.
struct RecursionReport {
    double min_slack = std::numeric_limits<double>::infinity();
    /// Worst slack divided by the magnitude of the larger side.
    double min_relative_slack = std::numeric_limits<double>::infinity();
    std::size_t checked = 0;
    std::size_t violations = 0;
};

inline RecursionReport check_sc_recursion(const RunTrace& trace, const APDSCParams& prm, const NormTransform& nt,
                                          double tol = 1e-8, double rounding_floor = 0.0) {
    RecursionReport rep;
    const double d = nt.delta;
    const double forcing = lyapunov_c5(d, prm.alpha * prm.tau) * prm.eta * prm.eta / std::pow(d, 5);
    for (std::size_t r = 0; r + 1 < trace.records.size(); ++r) {
        const auto& a = trace.records[r];
        const auto& b = trace.records[r + 1];
        if (b.k != a.k + 1 || b.k + 1 > prm.K || !a.phi4 || !b.phi4 || !b.grad_change) continue;
        const double rhs = (1.0 - d / 8.0) * *a.phi4 + forcing * *b.grad_change * *b.grad_change;
        const double slack = rhs - *b.phi4;
        const double scale = std::max({*b.phi4, rhs, std::numeric_limits<double>::min()});
        rep.min_slack = std::min(rep.min_slack, slack);
        rep.min_relative_slack = std::min(rep.min_relative_slack, slack / scale);
        ++rep.checked;
        if (slack < -(tol * scale + rounding_floor)) ++rep.violations;
    }
    return rep;
}

struct InequalityReport {
    std::size_t trials = 0;
    std::size_t violations = 0;
    /// Smallest (right side - left side) over the sampled pairs.
    double min_slack = std::numeric_limits<double>::infinity();
    /// Slack of the strongly convex bound at (xbar, x*), when requested.
    std::optional<double> sc_slack;
    bool sc_violated = false;
};

/// Samples pairs (a, b) around the current average and checks
///   f(a) - f(b) <= <gbar, a - b> + L/(2n) |U - 1a|_F^2,
/// and, when xstar is given and mu > 0,
///   f(xbar) <= f(x*) + <gbar, xbar - x*> - mu/4 |xbar - x*|^2 + L/n |U - 1 xbar|_F^2.
/// U = V^{-1} X and gbar = (1/n) 1'G (the tracked gradient average).
inline InequalityReport check_inexact_bounds(const ObjectiveSuite& suite, const SolverState& s, std::size_t trials,
                                             std::uint64_t seed, const std::optional<Vector>& xstar = std::nullopt,
                                             double tol = 1e-8) {
    InequalityReport rep;
    const double L = suite.L();
    const double n = static_cast<double>(s.n());
    const Matrix U = s.descale(s.X);
    const Vector xbar = row_mean(s.X).transpose();
    const Vector gbar = row_mean(s.G).transpose();
    auto spread_to = [&](const Vector& a) { return (U.rowwise() - a.transpose()).squaredNorm(); };

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double radius = 1.0 + xbar.norm() + std::sqrt(spread_to(xbar) / n);
    for (std::size_t t = 0; t < trials; ++t) {
        Vector a = xbar, b = xbar;
        for (Eigen::Index c = 0; c < a.size(); ++c) {
            a(c) += radius * gauss(rng);
            b(c) += radius * gauss(rng);
        }
        const double lhs = suite.average_gap(a, b);
        const double rhs = gbar.dot(a - b) + L / (2.0 * n) * spread_to(a);
        const double slack = rhs - lhs;
        rep.min_slack = std::min(rep.min_slack, slack);
        ++rep.trials;
        if (slack < -tol * (1.0 + std::abs(lhs) + std::abs(rhs))) ++rep.violations;
    }
    if (xstar) {
        const Vector d = xbar - *xstar;
        const double lhs = suite.average_gap(xbar, *xstar);
        const double rhs = gbar.dot(d) - suite.mu() / 4.0 * d.squaredNorm() + L / n * spread_to(xbar);
        rep.sc_slack = rhs - lhs;
        rep.sc_violated = *rep.sc_slack < -tol * (1.0 + std::abs(lhs) + std::abs(rhs));
    }
    return rep;
}

namespace detail {

inline std::pair<std::vector<double>, std::vector<double>> window(const RunTrace& trace, std::size_t k_lo,
                                                                  std::size_t k_hi, bool log_k) {
    require(k_hi > k_lo && k_lo >= (log_k ? 1u : 0u), "rate window must satisfy k_hi > k_lo (>= 1 for power laws)");
    std::vector<double> xs, ys;
    for (const auto& r : trace.records) {
        if (r.k < k_lo || r.k > k_hi) continue;
        if (!(r.loss > 0.0))
            throw NumericalError("non-positive loss at k = " + std::to_string(r.k) + "; rate fit undefined at the noise floor");
        xs.push_back(log_k ? std::log(static_cast<double>(r.k)) : static_cast<double>(r.k));
        ys.push_back(std::log(r.loss));
    }
    if (xs.size() < 2) throw NumericalError("rate window holds fewer than two records");
    return {xs, ys};
}

inline double ls_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    const double m = static_cast<double>(xs.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
    }
    const double mx = sx / m, my = sy / m;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace detail

/// Least-squares slope of log(loss) against log(k) over records with k in [k_lo, k_hi].
inline double fit_sublinear_rate(const RunTrace& trace, std::size_t k_lo, std::size_t k_hi) {
    const auto [xs, ys] = detail::window(trace, k_lo, k_hi, true);
    return detail::ls_slope(xs, ys);
}

/// exp of the least-squares slope of log(loss) against k: the per-iteration contraction factor.
inline double fit_linear_rate(const RunTrace& trace, std::size_t k_lo, std::size_t k_hi) {
    const auto [xs, ys] = detail::window(trace, k_lo, k_hi, false);
    return std::exp(detail::ls_slope(xs, ys));
}

/// First recorded iteration whose loss is at or below the threshold.
inline std::optional<std::size_t> iterations_to(const RunTrace& trace, double threshold) {
    for (const auto& r : trace.records)
        if (r.loss <= threshold) return r.k;
    return std::nullopt;
}

/// Largest excess of |v_k - p| over (1 - delta)^k |v0 - p| (norms under Ctilde) for k = 0..K,
/// after subtracting a rounding allowance proportional to machine precision. Nonpositive means the
/// geometric bound holds.
struct DecayReport {
    double worst_excess = -std::numeric_limits<double>::infinity();
    std::size_t worst_k = 0;
    std::vector<double> deviations;
};

inline DecayReport check_pushsum_decay(const MixingMatrix& W, const NormTransform& nt, const Vector& v0, std::size_t K) {
    DecayReport rep;
    const double allowance = 16.0 * static_cast<double>(W.n()) * std::numeric_limits<double>::epsilon() * W.p.norm();
    const double dev0 = nt.norm(v0 - W.p);
    Vector v = v0;
    for (std::size_t k = 0; k <= K; ++k) {
        const double dev = nt.norm(v - W.p);
        rep.deviations.push_back(dev);
        const double excess = dev - std::pow(1.0 - nt.delta, static_cast<double>(k)) * dev0 - allowance;
        if (excess > rep.worst_excess) {
            rep.worst_excess = excess;
            rep.worst_k = k;
        }
        v = W.C * v;
    }
    return rep;
}

enum class OutputRule { from_y, from_x };

/// Which Lyapunov pair to attach to each record.
struct LyapunovSpec {
    enum class Kind { none, smooth, strongly_convex } kind = Kind::none;
    APDParams smooth;
    APDSCParams sc;
};

struct TraceOptions {
    Vector xstar;
    double fstar = 0.0;
    /// Enables phi1..phi4 when set together with the mixing matrix.
    const NormTransform* norm = nullptr;
    const MixingMatrix* mixing = nullptr;
    std::size_t stride = 1;
    /// Beyond this iteration only every 10th stride point is kept.
    std::size_t dense_until = 10000;
};

/// Accumulates a RunTrace from successive solver states.
class TraceRecorder {
public:
    TraceRecorder(const ObjectiveSuite& suite, const TraceOptions& opts, OutputRule rule, LyapunovSpec lyap, std::size_t K)
        : suite_(suite), opts_(opts), rule_(rule), lyap_(std::move(lyap)), K_(K) {
        require(opts_.stride >= 1, "trace stride must be >= 1");
        require(opts_.xstar.size() == suite.dim(), "trace reference point has the wrong dimension");
    }

    bool wants(std::size_t k) const {
        if (k == 0 || k == K_) return true;
        const std::size_t step = k > opts_.dense_until ? 10 * opts_.stride : opts_.stride;
        return k % step == 0;
    }

    void observe(const SolverState& s, const Vector& p) {
        const bool want = wants(s.k);
        const bool want_next = s.k + 1 <= K_ && wants(s.k + 1);
        if (!want) {
            if (want_next) prev_grad_ = s.grad_cache, prev_k_ = s.k;
            return;
        }
        TraceRecord r;
        r.k = s.k;
        const Matrix out = s.descale(rule_ == OutputRule::from_y ? s.Y : s.X);
        r.loss = optimality_gap(suite_, out, opts_.xstar, opts_.fstar);
        const auto ce = consensus_error(s, p);
        r.consensus_error = ce.u_err;
        r.projection_error = ce.proj_err;
        r.grad_avg_norm = row_mean(s.G).norm();
        r.v_min = s.v.minCoeff();
        if (prev_k_ && *prev_k_ + 1 == s.k) r.grad_change = (s.grad_cache - prev_grad_).norm();
        if (opts_.norm && opts_.mixing) {
            if (lyap_.kind == LyapunovSpec::Kind::smooth) {
                const auto lv = lyapunov_smooth(s, s.k, lyap_.smooth, *opts_.mixing, *opts_.norm);
                r.phi1 = lv.average;
                r.phi2 = lv.consensus;
            } else if (lyap_.kind == LyapunovSpec::Kind::strongly_convex) {
                const auto lv = lyapunov_sc(s, s.k, lyap_.sc, *opts_.mixing, *opts_.norm);
                r.phi3 = lv.average;
                r.phi4 = lv.consensus;
            }
        }
        trace_.records.push_back(std::move(r));
        if (want_next) prev_grad_ = s.grad_cache, prev_k_ = s.k;
        else prev_k_.reset();
    }

    RunTrace take(std::string label) {
        trace_.label = std::move(label);
        return std::move(trace_);
    }

private:
    const ObjectiveSuite& suite_;
    TraceOptions opts_;
    OutputRule rule_;
    LyapunovSpec lyap_;
    std::size_t K_;
    RunTrace trace_;
    Matrix prev_grad_;
    std::optional<std::size_t> prev_k_;
};

}  // namespace pushacc
