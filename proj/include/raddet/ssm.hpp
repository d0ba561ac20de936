// Linear state-space machinery: translated-Legendre (LegT) initialization,
// bilinear (trapezoidal) discretization, a Picard-iteration reference solver,
// the discrete recurrence, and the Krylov kernel / FFT convolution form.
//
// All paths are double precision; the recurrence and the convolution are two
// algebraically equivalent evaluations of the same discrete system and are
// cross-checked in the tests.

#ifndef RADDET_SSM_HPP
#define RADDET_SSM_HPP

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "raddet/common.hpp"
#include "raddet/fft.hpp"

namespace raddet {

// x'(t) = A x(t) + B u(t), y(t) = C.x(t) + D u(t)
struct ContinuousSSM {
    Eigen::MatrixXd A;  // N x N state matrix
    Eigen::VectorXd B;  // N   control vector
    Eigen::VectorXd C;  // N   output vector
    double D = 0.0;     //     command scalar

    int dim() const { return static_cast<int>(A.rows()); }
};

// x[n] = A_bar x[n-1] + B_bar u[n], y[n] = C.x[n] + D u[n], x[-1] = 0
struct DiscreteSSM {
    Eigen::MatrixXd A_bar;
    Eigen::VectorXd B_bar;
    Eigen::VectorXd C;
    double D = 0.0;
    double dt = 0.0;

    int dim() const { return static_cast<int>(A_bar.rows()); }
};

struct SSMKernel {
    std::vector<double> k;  // k[j] = C . A_bar^j . B_bar
};

// ---------------------------------------------------------------------------
// HiPPO-LegT pair
//
// With the window [t - theta, t] mapped so the newest sample sits at -1,
// the coefficient dynamics of the sliding Legendre projection are
//   A[n][k] = -(2n+1)/theta * ((-1)^(n-k) if k <= n else 1)
//   B[n]    =  (2n+1)/theta * (-1)^n
// and the state reconstructs the trailing window via
//   f(s) ~= sum_n x_n(t) P_n(2(t-s)/theta - 1).
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> hippo_legt(int N, double theta) {
    require(N >= 1, "hippo_legt: N must be >= 1");
    require(theta > 0.0, "hippo_legt: theta must be > 0");
    Eigen::MatrixXd A(N, N);
    Eigen::VectorXd B(N);
    for (int n = 0; n < N; ++n) {
        double scale = (2.0 * n + 1.0) / theta;
        for (int k = 0; k < N; ++k) {
            double sign = (k <= n) ? ((n - k) % 2 == 0 ? 1.0 : -1.0) : 1.0;
            A(n, k) = -scale * sign;
        }
        B(n) = scale * (n % 2 == 0 ? 1.0 : -1.0);
    }
    return {A, B};
}

// ---------------------------------------------------------------------------
// Bilinear discretization
//
//   A_bar = (I - dt/2 A)^-1 (I + dt/2 A)
//   B_bar = (I - dt/2 A)^-1 dt B

namespace detail {

// Partial-pivot LU solve with an explicit singularity check; a silent
// pseudo-inverse would hide a bad step size from the caller.
inline Eigen::MatrixXd lu_solve_checked(const Eigen::MatrixXd& M, const Eigen::MatrixXd& rhs,
                                        double dt) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
    Eigen::MatrixXd x = lu.solve(rhs);
    double scale = M.cwiseAbs().maxCoeff() * x.cwiseAbs().maxCoeff() + rhs.cwiseAbs().maxCoeff();
    double resid = (M * x - rhs).cwiseAbs().maxCoeff();
    if (!std::isfinite(resid) || resid > 1e-8 * std::max(scale, 1.0))
        throw SingularityError("discretize_bilinear: (I - dt/2 A) is singular", dt);
    return x;
}

}  // namespace detail

inline DiscreteSSM discretize_bilinear(const ContinuousSSM& ssm, double dt) {
    require(dt > 0.0, "discretize_bilinear: dt must be > 0");
    const int n = ssm.dim();
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd M = I - (dt / 2.0) * ssm.A;
    Eigen::MatrixXd P = I + (dt / 2.0) * ssm.A;
    DiscreteSSM out;
    out.A_bar = detail::lu_solve_checked(M, P, dt);
    out.B_bar = detail::lu_solve_checked(M, dt * ssm.B, dt);
    out.C = ssm.C;
    out.D = ssm.D;
    out.dt = dt;
    return out;
}

// ---------------------------------------------------------------------------
// Picard reference solver
//
// Fixed-point sweeps on the integral form of the ODE over a uniform grid,
// holding the previous iterate fixed inside the trapezoidal integrand:
//   X_l[j] = X_l[j-1] + dt/2 A (X_{l-1}[j] + X_{l-1}[j-1]) + dt B u[j]
// The fixed point of the sweep is exactly the bilinear recurrence, so this
// serves as the convergence oracle for ssm_recurrent_forward.
inline Eigen::MatrixXd picard_solve(const ContinuousSSM& ssm, const std::vector<double>& u,
                                    double dt, int iterations) {
    require(dt > 0.0, "picard_solve: dt must be > 0");
    require(iterations >= 0, "picard_solve: iterations must be >= 0");
    const int n = ssm.dim();
    const int L = static_cast<int>(u.size());
    Eigen::MatrixXd prev = Eigen::MatrixXd::Zero(n, L);  // X^(0) = 0 everywhere
    if (iterations == 0 || L == 0) return prev;
    Eigen::MatrixXd cur(n, L);
    Eigen::VectorXd acc(n), prev_col(n);
    for (int it = 0; it < iterations; ++it) {
        prev_col.setZero();  // X[-1] = 0
        for (int j = 0; j < L; ++j) {
            Eigen::VectorXd old_sum = prev.col(j);
            if (j > 0) old_sum += prev.col(j - 1);
            acc = prev_col + (dt / 2.0) * (ssm.A * old_sum) + dt * u[j] * ssm.B;
            cur.col(j) = acc;
            prev_col = acc;
        }
        prev = cur;
    }
    return prev;
}

// ---------------------------------------------------------------------------
// Discrete evaluation: recurrence and convolution

// Runs the recurrence; optionally exports the state trajectory (N x L).
inline std::vector<double> ssm_recurrent_forward(const DiscreteSSM& d,
                                                 const std::vector<double>& u,
                                                 Eigen::MatrixXd* states = nullptr) {
    require(!u.empty(), "ssm_recurrent_forward: empty input");
    const int n = d.dim();
    const int L = static_cast<int>(u.size());
    if (states) states->resize(n, L);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    std::vector<double> y(u.size());
    for (int j = 0; j < L; ++j) {
        x = d.A_bar * x + u[j] * d.B_bar;
        if (states) states->col(j) = x;
        y[j] = d.C.dot(x) + d.D * u[j];
    }
    return y;
}

// k[j] = C . A_bar^j . B_bar via iterated matrix-vector products.
inline SSMKernel krylov_kernel(const DiscreteSSM& d, int L) {
    require(L >= 1, "krylov_kernel: L must be >= 1");
    SSMKernel out;
    out.k.resize(L);
    Eigen::VectorXd v = d.B_bar;
    for (int j = 0; j < L; ++j) {
        out.k[j] = d.C.dot(v);
        if (j + 1 < L) v = d.A_bar * v;
    }
    return out;
}

// y[n] = sum_{j<=n} k[j] u[n-j] + D u[n], evaluated spectrally.
inline std::vector<double> conv_forward(const SSMKernel& kernel, const std::vector<double>& u,
                                        double D) {
    require(kernel.k.size() == u.size(), "conv_forward: kernel length must equal input length");
    require(!u.empty(), "conv_forward: empty input");
    std::vector<double> full = fft_convolve_full(kernel.k, u);
    std::vector<double> y(u.size());
    for (size_t i = 0; i < u.size(); ++i) y[i] = full[i] + D * u[i];
    return y;
}

}  // namespace raddet

#endif  // RADDET_SSM_HPP
