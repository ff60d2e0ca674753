#pragma once

#include "pushacc/core.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace pushacc {

enum class ObjectiveKind { quadratic, logistic };

inline const char* to_string(ObjectiveKind k) { return k == ObjectiveKind::quadratic ? "quadratic" : "logistic"; }

/// Feature vectors with labels in {-1, +1}; all rows share one dimension.
struct LabeledDataset {
    Matrix features;  // rows x dim
    Vector labels;    // rows, entries -1 or +1

    Eigen::Index size() const { return features.rows(); }
    Eigen::Index dim() const { return features.cols(); }

    /// Copy with each feature column shifted to zero mean and scaled to unit variance.
    LabeledDataset standardized() const {
        LabeledDataset out = *this;
        if (size() == 0) return out;
        const RowVector mean = features.colwise().mean();
        out.features.rowwise() -= mean;
        const RowVector sd = (out.features.array().square().colwise().sum() / static_cast<double>(size())).sqrt();
        for (Eigen::Index c = 0; c < dim(); ++c)
            if (sd(c) > 0.0) out.features.col(c) /= sd(c);
        return out;
    }
};

namespace detail {

inline double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

/// 1 / (1 + exp(-t)) without overflow.
inline double logistic(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

/// softplus(a) - softplus(a - d), accurate when d is tiny.
inline double softplus_diff(double a, double d) {
    const double aref = a - d;
    if (std::abs(d) > 30.0) return softplus(a) - softplus(aref);
    return std::log1p(logistic(aref) * std::expm1(d));
}

struct QuadraticAgent {
    Matrix H;
    Vector b;
};

struct LogisticAgent {
    Matrix Z;       // examples x dim
    Vector labels;  // examples
};

}  // namespace detail

/// n per-agent smooth convex functions sharing one decision dimension, with certified
/// smoothness constant L and strong-convexity constant mu (0 when merely convex).
///
/// quadratic: f_i(x) = 1/2 x'H_i x - b_i'x
/// logistic:  f_i(x) = sum_j log(1 + exp(-l_j z_j'x)) + mu/2 |x|^2
class ObjectiveSuite {
public:
    static ObjectiveSuite quadratic(std::vector<Matrix> H, std::vector<Vector> b) {
        require(!H.empty() && H.size() == b.size(), "quadratic suite needs matching H and b lists");
        ObjectiveSuite s;
        s.kind_ = ObjectiveKind::quadratic;
        s.n_ = static_cast<Eigen::Index>(H.size());
        s.dim_ = H.front().rows();
        s.L_ = 0.0;
        s.mu_ = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < H.size(); ++i) {
            require(H[i].rows() == s.dim_ && H[i].cols() == s.dim_ && b[i].size() == s.dim_,
                    "quadratic suite: inconsistent dimensions");
            Matrix Hs = 0.5 * (H[i] + H[i].transpose());
            Eigen::SelfAdjointEigenSolver<Matrix> es(Hs, Eigen::EigenvaluesOnly);
            s.L_ = std::max(s.L_, es.eigenvalues().maxCoeff());
            s.mu_ = std::min(s.mu_, es.eigenvalues().minCoeff());
            s.quad_.push_back({std::move(Hs), std::move(b[i])});
        }
        require(s.mu_ >= 0.0, "quadratic suite: Hessians must be positive semidefinite");
        return s;
    }

    static ObjectiveSuite logistic(std::vector<Matrix> Z, std::vector<Vector> labels, double mu) {
        require(!Z.empty() && Z.size() == labels.size(), "logistic suite needs matching shard lists");
        require(mu >= 0.0, "logistic suite: mu must be nonnegative");
        ObjectiveSuite s;
        s.kind_ = ObjectiveKind::logistic;
        s.n_ = static_cast<Eigen::Index>(Z.size());
        s.dim_ = Z.front().cols();
        s.mu_ = mu;
        double worst = 0.0;
        for (std::size_t i = 0; i < Z.size(); ++i) {
            require(Z[i].cols() == s.dim_ && Z[i].rows() == labels[i].size() && Z[i].rows() > 0,
                    "logistic suite: inconsistent shard dimensions");
            worst = std::max(worst, 0.25 * Z[i].squaredNorm());
            s.logi_.push_back({std::move(Z[i]), std::move(labels[i])});
        }
        s.L_ = worst + mu;
        return s;
    }

    ObjectiveKind kind() const { return kind_; }
    Eigen::Index n() const { return n_; }
    Eigen::Index dim() const { return dim_; }
    double L() const { return L_; }
    double mu() const { return mu_; }

    const Matrix& hessian_matrix(Eigen::Index i) const { return quad_.at(static_cast<std::size_t>(i)).H; }
    const Vector& linear_term(Eigen::Index i) const { return quad_.at(static_cast<std::size_t>(i)).b; }

    double value(Eigen::Index i, const Vector& x) const {
        if (kind_ == ObjectiveKind::quadratic) {
            const auto& a = quad_[static_cast<std::size_t>(i)];
            return 0.5 * x.dot(a.H * x) - a.b.dot(x);
        }
        const auto& a = logi_[static_cast<std::size_t>(i)];
        const Vector margins = a.labels.cwiseProduct(a.Z * x);
        double acc = 0.0;
        for (Eigen::Index j = 0; j < margins.size(); ++j) acc += detail::softplus(-margins(j));
        return acc + 0.5 * mu_ * x.squaredNorm();
    }

    Vector gradient(Eigen::Index i, const Vector& x) const {
        if (kind_ == ObjectiveKind::quadratic) {
            const auto& a = quad_[static_cast<std::size_t>(i)];
            return a.H * x - a.b;
        }
        const auto& a = logi_[static_cast<std::size_t>(i)];
        const Vector margins = a.labels.cwiseProduct(a.Z * x);
        Vector w(margins.size());
        for (Eigen::Index j = 0; j < margins.size(); ++j) w(j) = -a.labels(j) * detail::logistic(-margins(j));
        return a.Z.transpose() * w + mu_ * x;
    }

    Matrix hessian(Eigen::Index i, const Vector& x) const {
        if (kind_ == ObjectiveKind::quadratic) return quad_[static_cast<std::size_t>(i)].H;
        const auto& a = logi_[static_cast<std::size_t>(i)];
        const Vector margins = a.labels.cwiseProduct(a.Z * x);
        Vector w(margins.size());
        for (Eigen::Index j = 0; j < margins.size(); ++j) {
            const double s = detail::logistic(margins(j));
            w(j) = s * (1.0 - s);
        }
        return a.Z.transpose() * w.asDiagonal() * a.Z + mu_ * Matrix::Identity(dim_, dim_);
    }

    /// f_i(x) - f_i(xref), evaluated through x - xref so that tiny gaps keep their relative accuracy.
    double value_gap(Eigen::Index i, const Vector& x, const Vector& xref) const {
        const Vector d = x - xref;
        if (kind_ == ObjectiveKind::quadratic) {
            const auto& a = quad_[static_cast<std::size_t>(i)];
            return 0.5 * d.dot(a.H * d) + (a.H * xref - a.b).dot(d);
        }
        const auto& a = logi_[static_cast<std::size_t>(i)];
        const Vector arg = -a.labels.cwiseProduct(a.Z * x);
        const Vector darg = -a.labels.cwiseProduct(a.Z * d);
        double acc = 0.0;
        for (Eigen::Index j = 0; j < arg.size(); ++j) acc += detail::softplus_diff(arg(j), darg(j));
        return acc + 0.5 * mu_ * d.dot(x + xref);
    }

    /// Row i of the result is grad f_i evaluated at row i of U.
    Matrix gradient_batch(const Matrix& U) const {
        require(U.rows() == n_ && U.cols() == dim_, "gradient_batch: U must be n x dim");
        Matrix out(n_, dim_);
        for (Eigen::Index i = 0; i < n_; ++i) out.row(i) = gradient(i, U.row(i).transpose()).transpose();
        return out;
    }

    /// Average objective f = (1/n) sum_i f_i.
    double average_value(const Vector& x) const {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n_; ++i) acc += value(i, x);
        return acc / static_cast<double>(n_);
    }

    double average_gap(const Vector& x, const Vector& xref) const {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n_; ++i) acc += value_gap(i, x, xref);
        return acc / static_cast<double>(n_);
    }

    Vector average_gradient(const Vector& x) const {
        Vector g = Vector::Zero(dim_);
        for (Eigen::Index i = 0; i < n_; ++i) g += gradient(i, x);
        return g / static_cast<double>(n_);
    }

    Matrix average_hessian(const Vector& x) const {
        Matrix h = Matrix::Zero(dim_, dim_);
        for (Eigen::Index i = 0; i < n_; ++i) h += hessian(i, x);
        return h / static_cast<double>(n_);
    }

    /// Magnitude of the terms summed into the average gradient; sets its rounding floor.
    double gradient_scale(const Vector& x) const {
        double acc = 0.0;
        if (kind_ == ObjectiveKind::quadratic) {
            for (const auto& a : quad_) acc += a.H.norm() * x.norm() + a.b.norm();
        } else {
            for (const auto& a : logi_) acc += a.Z.rowwise().norm().sum() + mu_ * x.norm();
        }
        return acc / static_cast<double>(n_);
    }

private:
    ObjectiveSuite() = default;

    ObjectiveKind kind_ = ObjectiveKind::quadratic;
    Eigen::Index n_ = 0;
    Eigen::Index dim_ = 0;
    double L_ = 0.0;
    double mu_ = 0.0;
    std::vector<detail::QuadraticAgent> quad_;
    std::vector<detail::LogisticAgent> logi_;
};

/// Random quadratic suite: H_i = Q_i diag(s_i) Q_i' with Q_i Haar-orthogonal and spectrum s_i
/// containing both mu_base and mu_base * kappa (interior values log-uniform), b_i = H_i c_i
/// with c_i standard normal. Hence L = mu_base * kappa and mu = mu_base exactly when dim >= 2.
inline ObjectiveSuite make_quadratic_suite(Eigen::Index n, Eigen::Index dim, double kappa, double mu_base,
                                           std::uint64_t seed) {
    require(n >= 1 && dim >= 1, "quadratic suite needs n >= 1 and dim >= 1");
    require(kappa >= 1.0, "kappa must be >= 1");
    require(mu_base > 0.0, "mu_base must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Matrix> H;
    std::vector<Vector> b;
    for (Eigen::Index i = 0; i < n; ++i) {
        Matrix G(dim, dim);
        for (Eigen::Index r = 0; r < dim; ++r)
            for (Eigen::Index c = 0; c < dim; ++c) G(r, c) = gauss(rng);
        Eigen::HouseholderQR<Matrix> qr(G);
        Matrix Q = qr.householderQ();
        // sign fix makes Q Haar-distributed
        const Vector rdiag = qr.matrixQR().diagonal();
        for (Eigen::Index c = 0; c < dim; ++c)
            if (rdiag(c) < 0.0) Q.col(c) *= -1.0;
        Vector spec(dim);
        for (Eigen::Index c = 0; c < dim; ++c) spec(c) = mu_base * std::pow(kappa, unif(rng));
        spec(0) = mu_base;
        if (dim >= 2) spec(dim - 1) = mu_base * kappa;
        Matrix Hi = Q * spec.asDiagonal() * Q.transpose();
        Hi = 0.5 * (Hi + Hi.transpose()).eval();
        Vector c(dim);
        for (Eigen::Index r = 0; r < dim; ++r) c(r) = gauss(rng);
        b.push_back(Hi * c);
        H.push_back(std::move(Hi));
    }
    return ObjectiveSuite::quadratic(std::move(H), std::move(b));
}

/// Seeded shuffle of 0..rows-1 split into n contiguous shards whose sizes differ by at most one.
inline std::vector<std::vector<Eigen::Index>> partition_rows(Eigen::Index rows, Eigen::Index n, std::uint64_t seed) {
    require(n >= 1, "need at least one shard");
    require(rows >= n, "dataset has " + std::to_string(rows) + " rows, fewer than the " + std::to_string(n) + " agents");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(rows));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<Eigen::Index>> shards(static_cast<std::size_t>(n));
    const Eigen::Index base = rows / n, extra = rows % n;
    std::size_t pos = 0;
    for (Eigen::Index s = 0; s < n; ++s) {
        const Eigen::Index count = base + (s < extra ? 1 : 0);
        auto& shard = shards[static_cast<std::size_t>(s)];
        shard.assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                     order.begin() + static_cast<std::ptrdiff_t>(pos + static_cast<std::size_t>(count)));
        pos += static_cast<std::size_t>(count);
    }
    return shards;
}

/// Logistic-loss suite over a shuffled even split of the dataset. Each agent's loss is the sum
/// (not the mean) over its shard, plus mu/2 |x|^2.
inline ObjectiveSuite make_logistic_suite(const LabeledDataset& data, Eigen::Index n, double mu,
                                          std::uint64_t partition_seed, bool standardize = false) {
    require(data.size() > 0, "dataset is empty");
    const LabeledDataset& src = data;
    const LabeledDataset scaled = standardize ? data.standardized() : LabeledDataset{};
    const LabeledDataset& use = standardize ? scaled : src;
    const auto shards = partition_rows(use.size(), n, partition_seed);
    std::vector<Matrix> Z;
    std::vector<Vector> lab;
    for (const auto& shard : shards) {
        Matrix zi(static_cast<Eigen::Index>(shard.size()), use.dim());
        Vector li(static_cast<Eigen::Index>(shard.size()));
        for (std::size_t r = 0; r < shard.size(); ++r) {
            zi.row(static_cast<Eigen::Index>(r)) = use.features.row(shard[r]);
            li(static_cast<Eigen::Index>(r)) = use.labels(shard[r]);
        }
        Z.push_back(std::move(zi));
        lab.push_back(std::move(li));
    }
    return ObjectiveSuite::logistic(std::move(Z), std::move(lab), mu);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        fields.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return fields;
}

}  // namespace detail

/// Parses CSV rows "f1,...,fd,class" with class "0" -> -1 and "1" -> +1.
/// Lines whose first field is not numeric are treated as headers and skipped.
inline LabeledDataset parse_labeled_csv(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::vector<double> labels;
    std::string line;
    std::size_t lineno = 0;
    Eigen::Index dim = -1;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view view = detail::trim(line);
        if (view.empty()) continue;
        const auto fields = detail::split_commas(view);
        double first = 0.0;
        if (!detail::parse_double(fields.front(), first)) continue;  // header
        const auto where = "line " + std::to_string(lineno) + ": ";
        if (fields.size() < 2) throw ConfigError(where + "expected at least one feature and a class token");
        std::vector<double> feat;
        for (std::size_t f = 0; f + 1 < fields.size(); ++f) {
            double v = 0.0;
            if (!detail::parse_double(fields[f], v) || !std::isfinite(v))
                throw ConfigError(where + "malformed feature '" + std::string(fields[f]) + "'");
            feat.push_back(v);
        }
        const std::string_view cls = detail::trim(fields.back());
        double label = 0.0;
        if (cls == "0") label = -1.0;
        else if (cls == "1") label = 1.0;
        else throw ConfigError(where + "class token must be 0 or 1, got '" + std::string(cls) + "'");
        if (dim < 0) dim = static_cast<Eigen::Index>(feat.size());
        if (static_cast<Eigen::Index>(feat.size()) != dim)
            throw ConfigError(where + "expected " + std::to_string(dim) + " features, got " + std::to_string(feat.size()));
        rows.push_back(std::move(feat));
        labels.push_back(label);
    }
    if (rows.empty()) throw ConfigError("dataset contains no data rows");
    LabeledDataset ds;
    ds.features.resize(static_cast<Eigen::Index>(rows.size()), dim);
    ds.labels.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (Eigen::Index c = 0; c < dim; ++c) ds.features(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
        ds.labels(static_cast<Eigen::Index>(r)) = labels[r];
    }
    return ds;
}

inline LabeledDataset load_labeled_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read dataset " + path.string());
    try {
        return parse_labeled_csv(in);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

/// Two overlapping Gaussian classes, z = S (l * m + N(0, I)), with |m| = separation and S the
/// diagonal of feature_scales (identity when empty). A small scale on one feature gives the
/// objective a weakly curved direction.
inline LabeledDataset make_synthetic_logistic_dataset(Eigen::Index rows, Eigen::Index dim, std::uint64_t seed,
                                                      double separation = 1.0,
                                                      const std::vector<double>& feature_scales = {}) {
    require(rows >= 1 && dim >= 1, "synthetic dataset needs rows >= 1 and dim >= 1");
    require(feature_scales.empty() || static_cast<Eigen::Index>(feature_scales.size()) == dim,
            "feature_scales must be empty or have one entry per feature");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    Vector m(dim);
    for (Eigen::Index c = 0; c < dim; ++c) m(c) = gauss(rng);
    m *= separation / m.norm();
    LabeledDataset ds;
    ds.features.resize(rows, dim);
    ds.labels.resize(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const double l = coin(rng) ? 1.0 : -1.0;
        ds.labels(r) = l;
        for (Eigen::Index c = 0; c < dim; ++c) ds.features(r, c) = l * m(c) + gauss(rng);
    }
    for (std::size_t c = 0; c < feature_scales.size(); ++c) ds.features.col(static_cast<Eigen::Index>(c)) *= feature_scales[c];
    return ds;
}

struct MinimizerOptions {
    double tol = 1e-14;
    /// Run the accelerated-gradient path even when a closed form exists.
    bool force_iterative = false;
    std::size_t max_iterations = 500000;
};

struct Minimizer {
    Vector x;
    double f = 0.0;
    double grad_norm = 0.0;
    std::size_t iterations = 0;
};

namespace detail {

/// Gradient tolerance actually attainable in double precision at x.
inline double effective_tol(const ObjectiveSuite& s, const Vector& x, double tol) {
    return std::max(tol, 64.0 * std::numeric_limits<double>::epsilon() * s.gradient_scale(x));
}

}  // namespace detail

/// Minimizer of the average objective. Quadratic suites use the closed form
/// (sum H_i)^{-1} (sum b_i); otherwise accelerated gradient descent with adaptive restart,
/// followed for logistic suites by Newton refinement down to the requested gradient norm.
inline Minimizer global_minimizer(const ObjectiveSuite& s, const MinimizerOptions& opts = {}) {
    Minimizer out;
    const auto dim = s.dim();
    if (s.kind() == ObjectiveKind::quadratic && !opts.force_iterative) {
        Matrix Hsum = Matrix::Zero(dim, dim);
        Vector bsum = Vector::Zero(dim);
        for (Eigen::Index i = 0; i < s.n(); ++i) {
            Hsum += s.hessian_matrix(i);
            bsum += s.linear_term(i);
        }
        Eigen::LDLT<Matrix> ldlt(Hsum);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0)
            throw NumericalError("mean Hessian is not positive definite");
        out.x = ldlt.solve(bsum);
        out.f = s.average_value(out.x);
        out.grad_norm = s.average_gradient(out.x).norm();
        return out;
    }

    const bool newton = s.kind() == ObjectiveKind::logistic;
    const double step = 1.0 / s.L();
    Vector x = Vector::Zero(dim), y = x, xprev = x;
    double t = 1.0;
    Vector g = s.average_gradient(x);
    std::size_t it = 0;
    auto done = [&](const Vector& pt, const Vector& grad) {
        const double target = detail::effective_tol(s, pt, opts.tol);
        return grad.norm() <= (newton ? std::max(target, 1e-8 * (1.0 + s.gradient_scale(pt))) : target);
    };
    for (; it < opts.max_iterations && !done(x, g); ++it) {
        const Vector gy = s.average_gradient(y);
        xprev = x;
        x = y - step * gy;
        if (!x.allFinite()) throw DivergenceError(it, "centralized minimizer iterate is not finite");
        // gradient-based restart keeps the momentum from overshooting
        if (gy.dot(x - xprev) > 0.0) t = 1.0;
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = x + ((t - 1.0) / tn) * (x - xprev);
        t = tn;
        g = s.average_gradient(x);
    }
    if (newton) {
        for (int nit = 0; nit < 100 && g.norm() > detail::effective_tol(s, x, opts.tol); ++nit, ++it) {
            const Vector dx = s.average_hessian(x).ldlt().solve(g);
            double lr = 1.0;
            Vector cand = x - dx;
            while (s.average_gap(cand, x) > -1e-4 * lr * g.dot(dx) && lr > 1e-10) {
                lr *= 0.5;
                cand = x - lr * dx;
            }
            x = cand;
            g = s.average_gradient(x);
        }
    }
    out.x = x;
    out.f = s.average_value(x);
    out.grad_norm = g.norm();
    out.iterations = it;
    if (out.grad_norm > detail::effective_tol(s, x, opts.tol))
        throw NumericalError("global minimizer did not converge after " + std::to_string(it) +
                             " iterations; final gradient norm " + std::to_string(out.grad_norm));
    return out;
}

}  // namespace pushacc
