#include "pushacc/optimizers.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace pushacc;

namespace {

// f(x) = x^2 / 2 for one agent on a self-loop
ObjectiveSuite half_square() { return ObjectiveSuite::quadratic({Matrix::Identity(1, 1)}, {Vector::Zero(1)}); }

MixingMatrix self_loop() { return make_mixing_matrix(Matrix::Ones(1, 1)); }

Matrix scalar(double x) { return Matrix::Constant(1, 1, x); }

ObjectiveSuite replicated(const ObjectiveSuite& one, Eigen::Index n) {
    std::vector<Matrix> H(static_cast<std::size_t>(n), one.hessian_matrix(0));
    std::vector<Vector> b(static_cast<std::size_t>(n), one.linear_term(0));
    return ObjectiveSuite::quadratic(H, b);
}

Vector positive_weights(Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    Vector v(n);
    for (auto& e : v) e = u(rng);
    return v * (static_cast<double>(n) / v.sum());
}

}  // namespace

TEST(APDStep, ScalarHandComputed) {
    const auto suite = half_square();
    const auto W = self_loop();
    auto s = init_state(scalar(1.0), Vector::Ones(1), suite);
    EXPECT_DOUBLE_EQ(s.G(0, 0), 1.0);
    const APDParams prm{1.0, 0.25, 0.25, 1.0, 1};
    EXPECT_DOUBLE_EQ(prm.tau(1), 0.8);
    EXPECT_DOUBLE_EQ(prm.alpha(0), 0.25);
    apd_step(s, W, suite, prm);
    EXPECT_DOUBLE_EQ(s.Y(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(s.Z(0, 0), 0.75);
    EXPECT_NEAR(s.X(0, 0), 0.6, 1e-15);
    EXPECT_NEAR(s.G(0, 0), 0.6, 1e-15);
    EXPECT_EQ(s.k, 1u);
}

TEST(APDSCStep, ScalarHandComputed) {
    const auto suite = half_square();
    auto s = init_state(scalar(1.0), Vector::Ones(1), suite);
    APDSCParams prm;
    prm.eta = 1.0;
    prm.tau = 0.5;
    prm.alpha = 1.0 / 6.0;
    prm.beta = 0.25;
    apdsc_step(s, self_loop(), suite, prm);
    EXPECT_DOUBLE_EQ(s.Y(0, 0), 0.0);
    EXPECT_NEAR(s.Z(0, 0), 5.0 / 6.0, 1e-15);
    EXPECT_NEAR(s.X(0, 0), 5.0 / 12.0, 1e-15);
    EXPECT_NEAR(s.G(0, 0), 5.0 / 12.0, 1e-15);
}

TEST(APDSCStep, ZeroBetaDropsTheCoupling) {
    // with beta = 0 the Z update is C (Z - alpha eta G), as in the decaying method
    const auto suite = make_quadratic_suite(4, 3, 10.0, 0.1, 5);
    const auto W = uniform_out_weights(build_cycle_plus_random(4, 2, 1));
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix X0(4, 3);
    for (auto& e : X0.reshaped()) e = g(rng);
    auto s = init_state(X0, positive_weights(4, 2), suite);
    const Matrix expected_z = W.C * (s.Z - 0.5 * 0.1 * s.G);
    const Matrix expected_y = W.C * (s.X - 0.1 * s.G);
    APDSCParams prm;
    prm.eta = 0.1;
    prm.alpha = 0.5;
    prm.beta = 0.0;
    prm.tau = 0.3;
    apdsc_step(s, W, suite, prm);
    EXPECT_LT((s.Z - expected_z).norm(), 1e-14);
    EXPECT_LT((s.X - (0.7 * expected_y + 0.3 * expected_z)).norm(), 1e-14);
}

TEST(APDRun, SingleAgentMatchesCentralized) {
    const auto suite = make_quadratic_suite(1, 3, 25.0, 0.04, 8);
    const Vector x0 = Vector::LinSpaced(3, -1.0, 2.0);
    const APDParams prm{0.3 / suite.L(), 0.25, 0.25, 1.0, 200};
    std::vector<Matrix> ys;
    RunOptions ro;
    ro.on_state = [&](const SolverState& s) { ys.push_back(s.descale(s.Y)); };
    apd_run(x0.transpose(), Vector::Ones(1), self_loop(), suite, prm, ro);
    const auto ref = centralized_agm_run(x0, suite, prm.eta, prm.pa, prm.wa, prm.wb, prm.K);
    ASSERT_EQ(ys.size(), ref.size());
    for (std::size_t k = 0; k < ref.size(); ++k)
        EXPECT_LE((ys[k].row(0).transpose() - ref[k].y).norm(), 1e-12 * (1.0 + ref[k].y.norm())) << k;
}

TEST(APDRun, IdenticalAgentsOnDoublyStochasticGraphStayTogether) {
    // a bidirected ring with uniform weights is doubly stochastic
    const auto W = uniform_out_weights(build_cycle_plus_random(6, 0, 0));
    EXPECT_LT((W.p - Vector::Ones(6)).norm(), 1e-12);
    const auto one = make_quadratic_suite(1, 2, 10.0, 0.1, 3);
    const auto suite = replicated(one, 6);
    const Vector x0(Vector::LinSpaced(2, 1.0, -1.0));
    const Matrix X0 = Vector::Ones(6) * x0.transpose();
    const APDParams prm{0.3 / suite.L(), 0.25, 0.25, 1.0, 100};
    const auto res = apd_run(X0, Vector::Ones(6), W, suite, prm);
    const auto ref = centralized_agm_run(x0, one, prm.eta, prm.pa, prm.wa, prm.wb, prm.K);
    for (Eigen::Index i = 0; i < 6; ++i)
        EXPECT_LE((res.output.row(i).transpose() - ref.back().y).norm(), 1e-12);
}

TEST(PushDIGing, SingleAgentIsGradientDescent) {
    const auto suite = make_quadratic_suite(1, 3, 10.0, 0.1, 6);
    Vector x = Vector::Ones(3);
    const double eta = 0.5 / suite.L();
    const auto res = push_diging_run(x.transpose(), Vector::Ones(1), self_loop(), suite, eta, 50);
    for (int k = 0; k < 50; ++k) x -= eta * suite.average_gradient(x);
    EXPECT_LT((res.output.row(0).transpose() - x).norm(), 1e-13);
}

TEST(SubgradientPush, ZeroGradientGivesAverageConsensus) {
    const Eigen::Index n = 8, dim = 2;
    const auto suite = ObjectiveSuite::quadratic(std::vector<Matrix>(n, Matrix::Zero(dim, dim)),
                                                 std::vector<Vector>(n, Vector::Zero(dim)));
    const auto W = uniform_out_weights(build_cycle_plus_random(8, 10, 4));
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix X0(n, dim);
    for (auto& e : X0.reshaped()) e = g(rng);
    const auto res = subgradient_push_run(X0, positive_weights(n, 5), W, suite, 1.0, 400);
    const RowVector avg = X0.colwise().sum() / static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) EXPECT_LT((res.output.row(i) - avg).norm(), 1e-10);
}

TEST(SubgradientPush, StepDecaysWithSqrtK) {
    const auto suite = half_square();
    auto s = init_state(scalar(1.0), Vector::Ones(1), suite);
    subgradient_push_step(s, self_loop(), suite, 0.5);
    EXPECT_DOUBLE_EQ(s.X(0, 0), 0.5);
    subgradient_push_step(s, self_loop(), suite, 0.5);
    EXPECT_NEAR(s.X(0, 0), 0.5 - 0.25 / std::sqrt(2.0), 1e-15);
}

TEST(DefaultParams, Practical) {
    const auto prm = default_params_smooth(1.0, ParamMode::practical);
    EXPECT_DOUBLE_EQ(prm.eta, 0.3);
    EXPECT_DOUBLE_EQ(prm.pa, 0.25);
    EXPECT_DOUBLE_EQ(prm.wb, 1.0);
    EXPECT_DOUBLE_EQ(prm.wa, 0.25);
    EXPECT_DOUBLE_EQ(default_params_smooth(4.0, ParamMode::practical, std::nullopt, 0.2).eta, 0.05);
}

TEST(DefaultParams, StronglyConvexSchedule) {
    const auto prm = default_params_sc(1.0, 1.0, ParamMode::practical, std::nullopt, 1.0 / 24.0, 10);
    EXPECT_NEAR(prm.tau, 1.0 / 24.0, 1e-15);
    EXPECT_NEAR(prm.alpha, 2.0, 1e-13);
    EXPECT_NEAR(prm.beta, 1.0 / 24.0, 1e-15);
    EXPECT_NEAR(prm.alpha * prm.tau, 1.0 / 12.0, 1e-15);
    EXPECT_EQ(prm.K, 10u);
    EXPECT_THROW(default_params_sc(1.0, 2.0, ParamMode::practical), ConfigError);
}

TEST(DefaultParams, GraphCapsOnBeta) {
    TheoryInputs ti;
    ti.delta = 0.1;
    const auto prm = sc_params_for_eta(0.3, 0.5, ti, 5);
    EXPECT_LE(prm.beta, 0.1 / 16.0);
    EXPECT_LE(prm.beta, 0.01 / (8.0 * prm.tau));
    const auto free = sc_params_for_eta(0.3, 0.5, std::nullopt, 5);
    EXPECT_GE(free.beta, prm.beta);
}

TEST(DefaultParams, TheoreticalCeilings) {
    const auto W = uniform_out_weights(build_cycle_plus_random(10, 15, 2));
    const auto nt = build_contraction_norm(W);
    const auto ti = calibrate_theory_inputs(W, nt, positive_weights(10, 3));
    EXPECT_GE(ti.vhat, 1.0);
    EXPECT_GT(ti.v0_dev, 0.0);
    const auto prm = default_params_smooth(2.0, ParamMode::theoretical, ti);
    EXPECT_GT(prm.eta, 0.0);
    EXPECT_LE(prm.eta, 1.0 / (8.0 * prm.pa * 2.0));
    const auto sc = default_params_sc(2.0, 0.1, ParamMode::theoretical, ti);
    EXPECT_GT(sc.eta, 0.0);
    EXPECT_LE(sc.eta, 1.0 / (24.0 * (1.0 / 12.0) * 2.0));
    EXPECT_THROW(default_params_smooth(1.0, ParamMode::theoretical), ConfigError);
    // a tighter graph margin can only shrink the ceiling
    TheoryInputs worse = ti;
    worse.delta /= 2.0;
    EXPECT_LT(smooth_stepsize_ceiling(2.0, 0.25, 0.25, 1.0, worse), prm.eta);
}

TEST(Validation, RejectsBadParameters) {
    EXPECT_NO_THROW((APDParams{0.012, 0.92, 0.006, 1.0, 10}.validate()));
    EXPECT_THROW((APDParams{0.0, 0.25, 0.25, 1.0, 1}.validate()), ConfigError);
    EXPECT_THROW((APDParams{0.1, 1.0, 0.25, 1.0, 1}.validate()), ConfigError);
    EXPECT_THROW((APDParams{0.1, 0.25, 0.0, 1.0, 1}.validate()), ConfigError);
    EXPECT_THROW((APDParams{0.1, 0.25, 0.25, 1.5, 1}.validate()), ConfigError);
    APDSCParams sc;
    sc.eta = 0.1;
    sc.alpha = 1.0;
    sc.beta = 0.1;
    sc.tau = 0.2;
    EXPECT_NO_THROW(sc.validate());
    sc.tau = 1.0;
    EXPECT_THROW(sc.validate(), ConfigError);
    sc.tau = 0.2;
    sc.beta = 1.0;
    EXPECT_THROW(sc.validate(), ConfigError);
}

TEST(Validation, RejectsBadPushSumWeights) {
    const auto suite = make_quadratic_suite(3, 2, 2.0, 1.0, 1);
    const Matrix X0 = Matrix::Zero(3, 2);
    Vector neg(3);
    neg << 2.0, 1.5, -0.5;
    EXPECT_THROW(init_state(X0, neg, suite), ConfigError);
    EXPECT_THROW(init_state(X0, Vector::Constant(3, 0.9), suite), ConfigError);
    EXPECT_THROW(init_state(X0, Vector::Ones(4), suite), ConfigError);
    EXPECT_THROW(init_state(Matrix::Zero(3, 3), Vector::Ones(3), suite), ConfigError);
}

TEST(APDRun, ZeroIterationsReturnsTheScaledStart) {
    const auto suite = make_quadratic_suite(3, 2, 2.0, 1.0, 1);
    const auto W = uniform_out_weights(build_cycle_plus_random(3, 0, 0));
    Matrix X0(3, 2);
    X0 << 1, 2, 3, 4, 5, 6;
    Vector v0(3);
    v0 << 0.5, 1.0, 1.5;
    const auto res = apd_run(X0, v0, W, suite, APDParams{0.1, 0.25, 0.25, 1.0, 0});
    EXPECT_LT((res.output - v0.cwiseInverse().asDiagonal() * X0).norm(), 1e-15);
    EXPECT_EQ(res.final_state.k, 0u);
}

TEST(APDRun, OversizedStepDiverges) {
    const auto suite = make_quadratic_suite(4, 3, 10.0, 0.1, 2);
    const auto W = uniform_out_weights(build_cycle_plus_random(4, 2, 3));
    const Matrix X0 = Matrix::Ones(4, 3);
    try {
        apd_run(X0, Vector::Ones(4), W, suite, APDParams{100.0 / suite.L(), 0.25, 0.25, 1.0, 100000});
        FAIL() << "expected divergence";
    } catch (const DivergenceError& e) {
        EXPECT_GT(e.iteration(), 0u);
        EXPECT_LT(e.iteration(), 100000u);
    }
}

TEST(APDRun, TrackingAndMassInvariants) {
    const auto suite = make_quadratic_suite(7, 3, 20.0, 0.05, 4);
    const auto W = uniform_out_weights(build_cycle_plus_random(7, 9, 6));
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix X0(7, 3);
    for (auto& e : X0.reshaped()) e = g(rng);
    double worst_mass = 0.0, worst_track = 0.0;
    RunOptions ro;
    ro.on_state = [&](const SolverState& s) {
        worst_mass = std::max(worst_mass, std::abs(s.v.sum() - 7.0));
        const Matrix fresh = suite.gradient_batch(s.descale(s.X));
        worst_track = std::max(worst_track, (s.G.colwise().sum() - fresh.colwise().sum()).norm());
    };
    apd_run(X0, positive_weights(7, 8), W, suite, APDParams{0.3 / suite.L(), 0.25, 0.25, 1.0, 300}, ro);
    EXPECT_LT(worst_mass, 1e-12);
    EXPECT_LT(worst_track, 1e-11);
}
