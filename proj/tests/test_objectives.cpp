#include "pushacc/objectives.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

using namespace pushacc;

namespace {

Vector random_vector(Eigen::Index d, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Vector v(d);
    for (auto& e : v) e = g(rng);
    return v;
}

ObjectiveSuite small_logistic(double mu, std::uint64_t seed = 3) {
    return make_logistic_suite(make_synthetic_logistic_dataset(60, 4, seed), 3, mu, seed);
}

// central differences of f_i along each coordinate
Vector fd_gradient(const ObjectiveSuite& s, Eigen::Index i, const Vector& x, double h) {
    Vector g(x.size());
    for (Eigen::Index c = 0; c < x.size(); ++c) {
        Vector xp = x, xm = x;
        xp(c) += h;
        xm(c) -= h;
        g(c) = (s.value(i, xp) - s.value(i, xm)) / (2.0 * h);
    }
    return g;
}

std::string csv_error(const std::string& text) {
    std::istringstream in(text);
    try {
        parse_labeled_csv(in);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "no error";
}

}  // namespace

TEST(Gradients, MatchFiniteDifferences) {
    std::mt19937_64 rng(5);
    const auto quad = make_quadratic_suite(4, 5, 30.0, 0.1, 2);
    const auto logi = small_logistic(0.05);
    for (const auto* s : {&quad, &logi}) {
        for (Eigen::Index i = 0; i < s->n(); ++i) {
            for (int t = 0; t < 3; ++t) {
                const Vector x = random_vector(s->dim(), rng);
                const Vector g = s->gradient(i, x);
                EXPECT_LE((g - fd_gradient(*s, i, x, 1e-6)).norm(), 1e-5 * std::max(1.0, g.norm()))
                    << to_string(s->kind()) << " agent " << i;
            }
        }
    }
}

TEST(Gradients, LogisticHessianMatchesGradientDifferences) {
    std::mt19937_64 rng(8);
    const auto s = small_logistic(0.1);
    const Vector x = random_vector(s.dim(), rng);
    const Matrix H = s.hessian(1, x);
    for (Eigen::Index c = 0; c < s.dim(); ++c) {
        Vector e = Vector::Zero(s.dim());
        e(c) = 1e-6;
        const Vector col = (s.gradient(1, x + e) - s.gradient(1, x - e)) / 2e-6;
        EXPECT_LE((col - H.col(c)).norm(), 1e-5 * std::max(1.0, H.norm()));
    }
}

TEST(Constants, ConvexityAndSmoothness) {
    std::mt19937_64 rng(13);
    const auto quad = make_quadratic_suite(3, 4, 50.0, 0.2, 9);
    const auto logi = small_logistic(0.05);
    for (const auto* s : {&quad, &logi}) {
        for (int t = 0; t < 50; ++t) {
            const Eigen::Index i = static_cast<Eigen::Index>(t) % s->n();
            const Vector x = random_vector(s->dim(), rng, 2.0), y = random_vector(s->dim(), rng, 2.0);
            const Vector gx = s->gradient(i, x);
            const double lin = s->value(i, x) + gx.dot(y - x);
            const double d2 = (y - x).squaredNorm();
            const double tol = 1e-9 * (1.0 + std::abs(s->value(i, y)));
            EXPECT_GE(s->value(i, y), lin + 0.5 * s->mu() * d2 - tol);
            EXPECT_LE(s->value(i, y), lin + 0.5 * s->L() * d2 + tol);
            EXPECT_LE((s->gradient(i, y) - gx).norm(), s->L() * std::sqrt(d2) * (1.0 + 1e-12));
        }
    }
}

TEST(QuadraticSuite, ConstantsAreExtremeEigenvalues) {
    const auto s = make_quadratic_suite(5, 6, 100.0, 0.01, 4);
    EXPECT_NEAR(s.L(), 1.0, 1e-12);
    EXPECT_NEAR(s.mu(), 0.01, 1e-12);
    for (Eigen::Index i = 0; i < s.n(); ++i) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(s.hessian_matrix(i));
        EXPECT_NEAR(es.eigenvalues()(0), 0.01, 1e-12);
        EXPECT_NEAR(es.eigenvalues()(5), 1.0, 1e-12);
    }
}

TEST(QuadraticSuite, UnitConditionNumber) {
    const auto s = make_quadratic_suite(3, 4, 1.0, 0.5, 1);
    EXPECT_NEAR(s.L(), s.mu(), 1e-12);
    EXPECT_NEAR(s.L(), 0.5, 1e-12);
}

TEST(QuadraticSuite, IdentityHessiansAverageTheCenters) {
    std::mt19937_64 rng(2);
    std::vector<Matrix> H;
    std::vector<Vector> b;
    Vector mean = Vector::Zero(3);
    for (int i = 0; i < 4; ++i) {
        H.push_back(Matrix::Identity(3, 3));
        b.push_back(random_vector(3, rng));
        mean += b.back() / 4.0;
    }
    const auto s = ObjectiveSuite::quadratic(H, b);
    EXPECT_LT((global_minimizer(s).x - mean).norm(), 1e-14);
}

TEST(QuadraticSuite, RejectsIndefiniteOrMismatched) {
    Matrix H(2, 2);
    H << 1.0, 0.0, 0.0, -1.0;
    EXPECT_THROW(ObjectiveSuite::quadratic({H}, {Vector::Zero(2)}), ConfigError);
    EXPECT_THROW(ObjectiveSuite::quadratic({Matrix::Identity(2, 2)}, {Vector::Zero(3)}), ConfigError);
    EXPECT_THROW(make_quadratic_suite(2, 2, 0.5, 1.0, 1), ConfigError);
}

TEST(GlobalMinimizer, QuadraticClosedFormAgreesWithIterative) {
    const auto s = make_quadratic_suite(6, 5, 20.0, 0.1, 12);
    const auto closed = global_minimizer(s);
    // independent solve through a full-pivot LU of the summed system
    Matrix Hs = Matrix::Zero(5, 5);
    Vector bs = Vector::Zero(5);
    for (Eigen::Index i = 0; i < s.n(); ++i) {
        Hs += s.hessian_matrix(i);
        bs += s.linear_term(i);
    }
    const Vector ref = Hs.fullPivLu().solve(bs);
    EXPECT_LT((closed.x - ref).norm(), 1e-12 * (1.0 + ref.norm()));

    MinimizerOptions it;
    it.force_iterative = true;
    const auto iterative = global_minimizer(s, it);
    EXPECT_LT((iterative.x - ref).norm(), 1e-10 * (1.0 + ref.norm()));
    EXPECT_GT(iterative.iterations, 0u);
}

TEST(GlobalMinimizer, LogisticStationaryPoint) {
    const auto s = small_logistic(0.05);
    const auto m = global_minimizer(s);
    EXPECT_LE(s.average_gradient(m.x).norm(), 1e-10);
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) EXPECT_GE(s.average_gap(m.x + random_vector(s.dim(), rng, 0.1), m.x), 0.0);
}

TEST(GlobalMinimizer, SymmetricDataGivesZero) {
    // every example appears with both labels, so the loss is even in x
    LabeledDataset ds;
    ds.features.resize(8, 2);
    ds.labels.resize(8);
    std::mt19937_64 rng(6);
    for (int r = 0; r < 4; ++r) {
        const Vector z = random_vector(2, rng);
        ds.features.row(2 * r) = z.transpose();
        ds.features.row(2 * r + 1) = z.transpose();
        ds.labels(2 * r) = 1.0;
        ds.labels(2 * r + 1) = -1.0;
    }
    const auto s = make_logistic_suite(ds, 2, 0.1, 1);
    EXPECT_LT(global_minimizer(s).x.norm(), 1e-12);
}

TEST(LogisticSuite, SmoothnessBound) {
    const auto data = make_synthetic_logistic_dataset(30, 3, 2);
    const auto s = make_logistic_suite(data, 3, 0.2, 7);
    double worst = 0.0;
    for (const auto& shard : partition_rows(30, 3, 7)) {
        double fro = 0.0;
        for (auto r : shard) fro += data.features.row(r).squaredNorm();
        worst = std::max(worst, fro / 4.0);
    }
    EXPECT_NEAR(s.L(), worst + 0.2, 1e-12);
    EXPECT_DOUBLE_EQ(s.mu(), 0.2);
}

TEST(PartitionRows, BijectionWithBalancedSizes) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Eigen::Index rows = 37 + static_cast<Eigen::Index>(seed), n = 5;
        const auto shards = partition_rows(rows, n, seed);
        ASSERT_EQ(shards.size(), 5u);
        std::set<Eigen::Index> seen;
        std::size_t lo = shards[0].size(), hi = lo;
        for (const auto& s : shards) {
            lo = std::min(lo, s.size());
            hi = std::max(hi, s.size());
            seen.insert(s.begin(), s.end());
        }
        EXPECT_LE(hi - lo, 1u);
        EXPECT_EQ(seen.size(), static_cast<std::size_t>(rows));
        EXPECT_EQ(*seen.begin(), 0);
        EXPECT_EQ(*seen.rbegin(), rows - 1);
    }
    EXPECT_EQ(partition_rows(20, 4, 3), partition_rows(20, 4, 3));
    EXPECT_THROW(partition_rows(3, 4, 1), ConfigError);
}

TEST(LabeledCsv, ParsesRowsAndLabels) {
    std::istringstream in("variance,skewness,curtosis,entropy,class\n"
                          "3.6,8.6,-2.8,-0.44,0\r\n"
                          "\n"
                          "-1.5, +2.25 ,0,1e-3,1\n");
    const auto ds = parse_labeled_csv(in);
    ASSERT_EQ(ds.size(), 2);
    ASSERT_EQ(ds.dim(), 4);
    EXPECT_DOUBLE_EQ(ds.features(0, 0), 3.6);
    EXPECT_DOUBLE_EQ(ds.features(0, 3), -0.44);
    EXPECT_DOUBLE_EQ(ds.features(1, 1), 2.25);
    EXPECT_DOUBLE_EQ(ds.features(1, 3), 1e-3);
    EXPECT_EQ(ds.labels(0), -1.0);
    EXPECT_EQ(ds.labels(1), 1.0);
}

TEST(LabeledCsv, ErrorsNameTheLine) {
    EXPECT_NE(csv_error("1,2,0\n1,x,1\n").find("line 2"), std::string::npos);
    EXPECT_NE(csv_error("1,2,0\n1,2,3,1\n").find("line 2"), std::string::npos);
    EXPECT_NE(csv_error("h\n1,2,2\n").find("line 2"), std::string::npos);
    EXPECT_NE(csv_error("1\n").find("line 1"), std::string::npos);
    EXPECT_NE(csv_error("").find("no data rows"), std::string::npos);
    EXPECT_NE(csv_error("a,b,c\n").find("no data rows"), std::string::npos);
    EXPECT_THROW(load_labeled_csv("/nonexistent/data.csv"), ConfigError);
}

TEST(LabeledDataset, Standardized) {
    const auto ds = make_synthetic_logistic_dataset(200, 3, 4, 2.0, {5.0, 1.0, 0.1}).standardized();
    const RowVector mean = ds.features.colwise().mean();
    EXPECT_LT(mean.cwiseAbs().maxCoeff(), 1e-12);
    for (Eigen::Index c = 0; c < 3; ++c) EXPECT_NEAR(ds.features.col(c).squaredNorm() / 200.0, 1.0, 1e-12);
}

TEST(SyntheticDataset, ShapeAndDeterminism) {
    const auto a = make_synthetic_logistic_dataset(50, 4, 11, 1.0, {1, 1, 1, 0.2});
    const auto b = make_synthetic_logistic_dataset(50, 4, 11, 1.0, {1, 1, 1, 0.2});
    EXPECT_EQ(a.features, b.features);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.size(), 50);
    for (Eigen::Index r = 0; r < 50; ++r) EXPECT_TRUE(a.labels(r) == 1.0 || a.labels(r) == -1.0);
    EXPECT_THROW(make_synthetic_logistic_dataset(5, 2, 1, 1.0, {1.0}), ConfigError);
}

TEST(ValueGap, MatchesDirectDifference) {
    std::mt19937_64 rng(21);
    const auto quad = make_quadratic_suite(2, 3, 10.0, 0.5, 3);
    const auto logi = small_logistic(0.05);
    for (const auto* s : {&quad, &logi}) {
        for (int t = 0; t < 10; ++t) {
            const Vector x = random_vector(s->dim(), rng), y = random_vector(s->dim(), rng);
            const double direct = s->value(0, x) - s->value(0, y);
            EXPECT_NEAR(s->value_gap(0, x, y), direct, 1e-11 * (1.0 + std::abs(s->value(0, x))));
        }
    }
}

TEST(ValueGap, KeepsRelativeAccuracyForTinySteps) {
    const auto s = small_logistic(0.05);
    const Vector xs = global_minimizer(s).x;
    Vector d = Vector::Ones(s.dim()) * 1e-7;
    // second-order model is exact to O(|d|^3) at a stationary point
    const double model = 0.5 * d.dot(s.average_hessian(xs) * d);
    EXPECT_NEAR(s.average_gap(xs + d, xs) / model, 1.0, 1e-3);
}
