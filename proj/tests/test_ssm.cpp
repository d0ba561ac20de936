#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "raddet/selftest.hpp"
#include "raddet/ssm.hpp"

using namespace raddet;

namespace {

// Legendre P_n via the three-term recurrence; oracle helper.
double legendre(int n, double x) {
    if (n == 0) return 1.0;
    double p0 = 1.0, p1 = x;
    for (int k = 1; k < n; ++k) {
        double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

}  // namespace

TEST(HippoLegt, SmallCases) {
    auto [a1, b1] = hippo_legt(1, 1.0);
    EXPECT_DOUBLE_EQ(a1(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(b1(0), 1.0);

    auto [a2, b2] = hippo_legt(2, 1.0);
    EXPECT_DOUBLE_EQ(a2(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(a2(0, 1), -1.0);
    EXPECT_DOUBLE_EQ(a2(1, 0), 3.0);
    EXPECT_DOUBLE_EQ(a2(1, 1), -3.0);
    EXPECT_DOUBLE_EQ(b2(0), 1.0);
    EXPECT_DOUBLE_EQ(b2(1), -3.0);

    // theta scales every entry by 1/theta
    auto [a4, b4] = hippo_legt(2, 4.0);
    EXPECT_DOUBLE_EQ(a4(1, 0), 0.75);
    EXPECT_DOUBLE_EQ(b4(1), -0.75);
}

TEST(HippoLegt, Errors) {
    EXPECT_THROW(hippo_legt(0, 1.0), InvalidInput);
    EXPECT_THROW(hippo_legt(4, 0.0), InvalidInput);
    EXPECT_THROW(hippo_legt(4, -2.0), InvalidInput);
}

// Function-reconstruction oracle: drive the discretized LegT pair with a
// smooth input, then re-synthesize the trailing window from the state using
// Legendre polynomials. The state must encode the window to <10% relative L2
// error at N=32.
TEST(HippoLegt, WindowReconstructionOracle) {
    const int n = 32;
    const double theta = 1.0;
    const double dt = 1.0 / 512.0;
    auto [a, b] = hippo_legt(n, theta);
    ContinuousSSM cs;
    cs.A = a;
    cs.B = b;
    cs.C = Eigen::VectorXd::Zero(n);
    cs.D = 0.0;
    DiscreteSSM d = discretize_bilinear(cs, dt);

    auto f = [](double t) { return std::sin(2.0 * std::numbers::pi * t) + 0.3 * std::cos(5.0 * t) + 0.5; };

    // run over [0, 2*theta] so the window [theta, 2*theta] is fully interior
    const int steps = 2 * 512;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < steps; ++j) {
        double u = f((j + 0.5) * dt);  // midpoint approximates the step average
        x = d.A_bar * x + u * d.B_bar;
    }
    const double t_end = steps * dt;

    double num = 0.0, den = 0.0;
    for (int j = 0; j < 512; ++j) {
        double s = t_end - theta + (j + 0.5) / 512.0 * theta;
        double xi = 2.0 * (t_end - s) / theta - 1.0;  // newest sample at -1
        double recon = 0.0;
        for (int k = 0; k < n; ++k) recon += x(k) * legendre(k, xi);
        double truth = f(s);
        num += (recon - truth) * (recon - truth);
        den += truth * truth;
    }
    double rel_l2 = std::sqrt(num / den);
    EXPECT_LT(rel_l2, 0.1) << "reconstruction error " << rel_l2;
}

TEST(DiscretizeBilinear, ZeroStateMatrix) {
    ContinuousSSM cs;
    cs.A = Eigen::MatrixXd::Zero(3, 3);
    cs.B = Eigen::VectorXd::LinSpaced(3, 1.0, 3.0);
    cs.C = Eigen::VectorXd::Ones(3);
    cs.D = 0.5;
    DiscreteSSM d = discretize_bilinear(cs, 0.7);
    EXPECT_TRUE(d.A_bar.isApprox(Eigen::MatrixXd::Identity(3, 3), 1e-14));
    EXPECT_TRUE(d.B_bar.isApprox(0.7 * cs.B, 1e-14));
    EXPECT_DOUBLE_EQ(d.D, 0.5);
}

TEST(DiscretizeBilinear, ScalarIdentity) {
    ContinuousSSM cs;
    cs.A = Eigen::MatrixXd::Constant(1, 1, -1.0);
    cs.B = Eigen::VectorXd::Constant(1, 1.0);
    cs.C = Eigen::VectorXd::Constant(1, 1.0);
    DiscreteSSM d = discretize_bilinear(cs, 2.0);
    EXPECT_NEAR(d.A_bar(0, 0), 0.0, 1e-15);
    EXPECT_NEAR(d.B_bar(0), 1.0, 1e-15);
}

TEST(DiscretizeBilinear, HurwitzGivesSpectralRadiusBelowOne) {
    std::mt19937_64 rng = rng_for(12, 0);
    std::normal_distribution<double> norm(0.0, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
        Eigen::MatrixXd m(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) m(i, j) = norm(rng);
        double shift = Eigen::EigenSolver<Eigen::MatrixXd>(m).eigenvalues().real().maxCoeff();
        ContinuousSSM cs;
        cs.A = m - (std::abs(shift) + 0.3) * Eigen::MatrixXd::Identity(4, 4);
        cs.B = Eigen::VectorXd::Ones(4);
        cs.C = Eigen::VectorXd::Ones(4);
        DiscreteSSM d = discretize_bilinear(cs, 0.4);
        double rho =
            Eigen::EigenSolver<Eigen::MatrixXd>(d.A_bar).eigenvalues().cwiseAbs().maxCoeff();
        EXPECT_LT(rho, 1.0);
    }
}

TEST(DiscretizeBilinear, SingularMatrixThrowsWithStep) {
    ContinuousSSM cs;
    cs.A = Eigen::MatrixXd::Constant(1, 1, 4.0);  // I - dt/2*A = 0 at dt = 0.5
    cs.B = Eigen::VectorXd::Constant(1, 1.0);
    cs.C = Eigen::VectorXd::Constant(1, 1.0);
    try {
        discretize_bilinear(cs, 0.5);
        FAIL() << "expected SingularityError";
    } catch (const SingularityError& e) {
        EXPECT_DOUBLE_EQ(e.dt, 0.5);
    }
}

TEST(PicardSolve, ZeroInputStaysZero) {
    ContinuousSSM cs;
    cs.A = Eigen::MatrixXd::Constant(1, 1, -2.0);
    cs.B = Eigen::VectorXd::Constant(1, 1.0);
    cs.C = Eigen::VectorXd::Constant(1, 1.0);
    std::vector<double> u(32, 0.0);
    Eigen::MatrixXd x = picard_solve(cs, u, 0.05, 8);
    EXPECT_DOUBLE_EQ(x.cwiseAbs().maxCoeff(), 0.0);
}

TEST(PicardSolve, ZeroIterationsReturnsZeroTrajectory) {
    ContinuousSSM cs;
    cs.A = Eigen::MatrixXd::Constant(1, 1, -1.0);
    cs.B = Eigen::VectorXd::Constant(1, 1.0);
    cs.C = Eigen::VectorXd::Constant(1, 1.0);
    std::vector<double> u(16, 1.0);
    Eigen::MatrixXd x = picard_solve(cs, u, 0.05, 0);
    EXPECT_DOUBLE_EQ(x.cwiseAbs().maxCoeff(), 0.0);
}

TEST(PicardSolve, ScalarDecayClosedForm) {
    // x' = -x + 1, x(0)=0 has x(t) = 1 - e^-t
    ContinuousSSM cs;
    cs.A = Eigen::MatrixXd::Constant(1, 1, -1.0);
    cs.B = Eigen::VectorXd::Constant(1, 1.0);
    cs.C = Eigen::VectorXd::Constant(1, 1.0);
    const double dt = 0.01;
    std::vector<double> u(100, 1.0);
    Eigen::MatrixXd x = picard_solve(cs, u, dt, 60);
    EXPECT_NEAR(x(0, 99), 1.0 - std::exp(-1.0), 1e-3);
}

TEST(PicardSolve, SuccessiveIterateDistanceNonIncreasing) {
    ContinuousSSM cs;
    cs.A = Eigen::MatrixXd::Constant(1, 1, -1.0);
    cs.B = Eigen::VectorXd::Constant(1, 1.0);
    cs.C = Eigen::VectorXd::Constant(1, 1.0);
    const double dt = 0.01;  // contractive: dt*|A| << 1
    std::vector<double> u(100, 1.0);
    std::vector<Eigen::MatrixXd> iterates;
    for (int it = 0; it <= 8; ++it) iterates.push_back(picard_solve(cs, u, dt, it));
    double prev = kInf;
    for (int it = 2; it <= 8; ++it) {
        double dist = (iterates[it] - iterates[it - 1]).cwiseAbs().maxCoeff();
        EXPECT_LE(dist, prev + 1e-15);
        prev = dist;
    }
}

TEST(RecurrentForward, CumulativeSum) {
    DiscreteSSM d;
    d.A_bar = Eigen::MatrixXd::Identity(1, 1);
    d.B_bar = Eigen::VectorXd::Constant(1, 1.0);
    d.C = Eigen::VectorXd::Constant(1, 1.0);
    d.D = 0.0;
    d.dt = 1.0;
    auto y = ssm_recurrent_forward(d, {1.0, 1.0, 1.0});
    EXPECT_EQ(y, (std::vector<double>{1.0, 2.0, 3.0}));
}

TEST(RecurrentForward, MemorylessCase) {
    // y[n] = C*B_bar*u[n] + D*u[n] = 3*u[n]
    DiscreteSSM d;
    d.A_bar = Eigen::MatrixXd::Zero(1, 1);
    d.B_bar = Eigen::VectorXd::Constant(1, 1.0);
    d.C = Eigen::VectorXd::Constant(1, 1.0);
    d.D = 2.0;
    d.dt = 1.0;
    auto y = ssm_recurrent_forward(d, {3.0, 5.0});
    EXPECT_DOUBLE_EQ(y[0], 9.0);
    EXPECT_DOUBLE_EQ(y[1], 15.0);
}

TEST(RecurrentForward, MatchesConvolution) {
    DiscreteSSM d = selftest::detail::random_stable_dssm(4, 3);
    std::mt19937_64 rng = rng_for(3, 5);
    std::normal_distribution<double> norm(0.0, 1.0);
    std::vector<double> u(16);
    for (auto& x : u) x = norm(rng);
    auto y1 = ssm_recurrent_forward(d, u);
    auto y2 = conv_forward(krylov_kernel(d, 16), u, d.D);
    for (int i = 0; i < 16; ++i) EXPECT_NEAR(y1[i], y2[i], 1e-10);
}

TEST(KrylovKernel, ZeroStateMatrix) {
    DiscreteSSM d;
    d.A_bar = Eigen::MatrixXd::Zero(2, 2);
    d.B_bar = Eigen::VectorXd::LinSpaced(2, 1.0, 2.0);
    d.C = Eigen::VectorXd::LinSpaced(2, 3.0, 4.0);
    d.D = 0.0;
    d.dt = 1.0;
    SSMKernel k = krylov_kernel(d, 4);
    EXPECT_DOUBLE_EQ(k.k[0], d.C.dot(d.B_bar));
    for (int j = 1; j < 4; ++j) EXPECT_DOUBLE_EQ(k.k[j], 0.0);
}

TEST(KrylovKernel, ScalarGeometric) {
    DiscreteSSM d;
    d.A_bar = Eigen::MatrixXd::Constant(1, 1, 0.5);
    d.B_bar = Eigen::VectorXd::Constant(1, 1.0);
    d.C = Eigen::VectorXd::Constant(1, 1.0);
    d.D = 0.0;
    d.dt = 1.0;
    SSMKernel k = krylov_kernel(d, 5);
    for (int j = 0; j < 5; ++j) EXPECT_DOUBLE_EQ(k.k[j], std::pow(0.5, j));
}

TEST(KrylovKernel, MatchesDenseMatrixPowers) {
    DiscreteSSM d = selftest::detail::random_stable_dssm(3, 11);
    SSMKernel k = krylov_kernel(d, 12);
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(3, 3);
    for (int j = 0; j < 12; ++j) {
        double expected = d.C.dot(power * d.B_bar);
        EXPECT_NEAR(k.k[j], expected, 1e-12);
        power = power * d.A_bar;  // dense-power oracle
    }
}

TEST(ConvForward, ImpulseResponseIsKernel) {
    DiscreteSSM d = selftest::detail::random_stable_dssm(3, 13);
    SSMKernel k = krylov_kernel(d, 16);
    std::vector<double> u(16, 0.0);
    u[0] = 1.0;
    auto y = conv_forward(k, u, d.D);
    EXPECT_NEAR(y[0], k.k[0] + d.D, 1e-12);
    for (int j = 1; j < 16; ++j) EXPECT_NEAR(y[j], k.k[j], 1e-12);
}

TEST(ConvForward, IdentityKernelIsPassthrough) {
    SSMKernel k;
    k.k.assign(8, 0.0);
    k.k[0] = 1.0;
    std::vector<double> u{1, -2, 3, -4, 5, -6, 7, -8};
    auto y = conv_forward(k, u, 0.0);
    for (int j = 0; j < 8; ++j) EXPECT_NEAR(y[j], u[j], 1e-12);
}

TEST(ConvForward, MatchesDirectConvolution) {
    std::mt19937_64 rng = rng_for(17, 0);
    std::normal_distribution<double> norm(0.0, 1.0);
    const int L = 64;
    SSMKernel k;
    k.k.resize(L);
    std::vector<double> u(L);
    for (auto& x : k.k) x = norm(rng);
    for (auto& x : u) x = norm(rng);
    const double D = norm(rng);
    auto y = conv_forward(k, u, D);
    for (int n = 0; n < L; ++n) {
        double direct = D * u[n];
        for (int j = 0; j <= n; ++j) direct += k.k[j] * u[n - j];  // O(L^2) oracle
        EXPECT_NEAR(y[n], direct, 1e-9);
    }
}

TEST(ConvForward, LengthMismatchThrows) {
    SSMKernel k;
    k.k.assign(4, 1.0);
    EXPECT_THROW(conv_forward(k, {1.0, 2.0}, 0.0), InvalidInput);
}

TEST(SsmInvariants, RecurrenceEqualsConvolution) {
    EXPECT_NO_THROW(selftest::check_ssm_equivalence());
}

TEST(SsmInvariants, SecondOrderAccuracy) {
    EXPECT_NO_THROW(selftest::check_ssm_order_of_accuracy());
}

TEST(SsmInvariants, PicardConvergesToRecurrence) {
    EXPECT_NO_THROW(selftest::check_ssm_picard_limit());
}

TEST(SsmInvariants, BilinearStabilityMap) {
    EXPECT_NO_THROW(selftest::check_ssm_bilinear_stability());
}

TEST(SsmInvariants, Linearity) {
    EXPECT_NO_THROW(selftest::check_ssm_linearity());
}
