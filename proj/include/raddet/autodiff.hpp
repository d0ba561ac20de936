// Minimal reverse-mode differentiation engine covering exactly the operator
// set the detector needs. Operations are recorded on a Tape in construction
// order (which is topological); backward replays the adjoint rules in strict
// reverse order, so gradient accumulation is deterministic and re-running
// backward on the same tape is bitwise reproducible.

#ifndef RADDET_AUTODIFF_HPP
#define RADDET_AUTODIFF_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "raddet/common.hpp"

namespace raddet::ad {

struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;
    bool requires_grad = false;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
        Tensor t;
        t.shape = std::move(shape);
        t.v.assign(numel(t.shape), 0.0);
        t.requires_grad = requires_grad;
        return t;
    }
    static size_t numel(const std::vector<int>& shape) {
        size_t n = 1;
        for (int d : shape) n *= static_cast<size_t>(d);
        return n;
    }
    size_t size() const { return v.size(); }
};

struct Var {
    int id = -1;
};

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using CVecMap = Eigen::Map<const Eigen::VectorXd>;

class Tape {
  public:
    struct Node {
        const char* op;
        std::vector<int> shape;
        std::vector<double> val;
        std::vector<double> grad;
        bool requires_grad = false;
        std::function<void(Tape&)> backward;  // empty for leaves
    };

    // -- node access ---------------------------------------------------------

    const std::vector<double>& val(Var v) const { return node(v).val; }
    const std::vector<int>& shape(Var v) const { return node(v).shape; }
    const std::vector<double>& grad(Var v) const { return node(v).grad; }
    bool requires_grad(Var v) const { return node(v).requires_grad; }
    size_t size() const { return nodes_.size(); }

    // -- leaves ---------------------------------------------------------------

    Var leaf(const Tensor& t) { return push("leaf", t.shape, t.v, t.requires_grad, {}); }
    Var constant(std::vector<int> shape, std::vector<double> v) {
        return push("const", std::move(shape), std::move(v), false, {});
    }
    Var constant_scalar(double x) { return constant({1}, {x}); }

    // -- elementwise ----------------------------------------------------------

    Var add(Var a, Var b) {
        check_same_shape("add", a, b);
        std::vector<double> out(val(a).size());
        for (size_t i = 0; i < out.size(); ++i) out[i] = val(a)[i] + val(b)[i];
        return push("add", shape(a), std::move(out), requires_grad(a) || requires_grad(b),
                    [a, b](Tape& t) {
                        Var o = t.last_;
                        t.accumulate(a, t.grad(o));
                        t.accumulate(b, t.grad(o));
                    });
    }

    Var mul(Var a, Var b) {
        check_same_shape("mul", a, b);
        std::vector<double> out(val(a).size());
        for (size_t i = 0; i < out.size(); ++i) out[i] = val(a)[i] * val(b)[i];
        return push("mul", shape(a), std::move(out), requires_grad(a) || requires_grad(b),
                    [a, b](Tape& t) {
                        Var o = t.last_;
                        const auto& g = t.grad(o);
                        if (t.requires_grad(a)) {
                            auto& ga = t.node(a).grad;
                            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * t.val(b)[i];
                        }
                        if (t.requires_grad(b)) {
                            auto& gb = t.node(b).grad;
                            for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * t.val(a)[i];
                        }
                    });
    }

    Var scale_const(Var a, double c) {
        std::vector<double> out(val(a).size());
        for (size_t i = 0; i < out.size(); ++i) out[i] = c * val(a)[i];
        return push("scale_const", shape(a), std::move(out), requires_grad(a), [a, c](Tape& t) {
            Var o = t.last_;
            if (!t.requires_grad(a)) return;
            auto& ga = t.node(a).grad;
            const auto& g = t.grad(o);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
        });
    }

    // out = a * s with s a scalar variable
    Var scale(Var a, Var s) {
        require(val(s).size() == 1, "scale: scale factor must be a scalar");
        double sv = val(s)[0];
        std::vector<double> out(val(a).size());
        for (size_t i = 0; i < out.size(); ++i) out[i] = sv * val(a)[i];
        return push("scale", shape(a), std::move(out), requires_grad(a) || requires_grad(s),
                    [a, s, sv](Tape& t) {
                        Var o = t.last_;
                        const auto& g = t.grad(o);
                        if (t.requires_grad(a)) {
                            auto& ga = t.node(a).grad;
                            for (size_t i = 0; i < g.size(); ++i) ga[i] += sv * g[i];
                        }
                        if (t.requires_grad(s)) {
                            double acc = 0.0;
                            for (size_t i = 0; i < g.size(); ++i) acc += g[i] * t.val(a)[i];
                            t.node(s).grad[0] += acc;
                        }
                    });
    }

    Var exp_(Var a) {
        std::vector<double> out(val(a).size());
        for (size_t i = 0; i < out.size(); ++i) out[i] = std::exp(val(a)[i]);
        return push("exp", shape(a), std::move(out), requires_grad(a), [a](Tape& t) {
            Var o = t.last_;
            if (!t.requires_grad(a)) return;
            auto& ga = t.node(a).grad;
            const auto& g = t.grad(o);
            const auto& ov = t.val(o);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * ov[i];
        });
    }

    Var sigmoid(Var a) {
        std::vector<double> out(val(a).size());
        for (size_t i = 0; i < out.size(); ++i) {
            double x = val(a)[i];
            out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        }
        return push("sigmoid", shape(a), std::move(out), requires_grad(a), [a](Tape& t) {
            Var o = t.last_;
            if (!t.requires_grad(a)) return;
            auto& ga = t.node(a).grad;
            const auto& g = t.grad(o);
            const auto& s = t.val(o);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s[i] * (1.0 - s[i]);
        });
    }

    // Exact Gaussian-CDF form x * Phi(x).
    Var gelu(Var a) {
        std::vector<double> out(val(a).size());
        for (size_t i = 0; i < out.size(); ++i) {
            double x = val(a)[i];
            out[i] = x * normal_cdf(x);
        }
        return push("gelu", shape(a), std::move(out), requires_grad(a), [a](Tape& t) {
            Var o = t.last_;
            if (!t.requires_grad(a)) return;
            auto& ga = t.node(a).grad;
            const auto& g = t.grad(o);
            const auto& xv = t.val(a);
            for (size_t i = 0; i < g.size(); ++i) {
                double x = xv[i];
                ga[i] += g[i] * (normal_cdf(x) + x * normal_pdf(x));
            }
        });
    }

    // -- linear algebra --------------------------------------------------------

    Var matmul(Var a, Var b) {
        require(shape(a).size() == 2 && shape(b).size() == 2, "matmul: inputs must be matrices");
        int m = shape(a)[0], k = shape(a)[1], k2 = shape(b)[0], n = shape(b)[1];
        require(k == k2, "matmul: inner dimensions differ");
        std::vector<double> out(static_cast<size_t>(m) * n);
        MatMap(out.data(), m, n).noalias() =
            CMatMap(val(a).data(), m, k) * CMatMap(val(b).data(), k, n);
        return push("matmul", {m, n}, std::move(out), requires_grad(a) || requires_grad(b),
                    [a, b, m, k, n](Tape& t) {
                        Var o = t.last_;
                        CMatMap g(t.grad(o).data(), m, n);
                        if (t.requires_grad(a)) {
                            MatMap ga(t.node(a).grad.data(), m, k);
                            ga.noalias() += g * CMatMap(t.val(b).data(), k, n).transpose();
                        }
                        if (t.requires_grad(b)) {
                            MatMap gb(t.node(b).grad.data(), k, n);
                            gb.noalias() += CMatMap(t.val(a).data(), m, k).transpose() * g;
                        }
                    });
    }

    Var matvec(Var a, Var x) {
        require(shape(a).size() == 2 && shape(x).size() == 1, "matvec: need matrix and vector");
        int m = shape(a)[0], k = shape(a)[1];
        require(k == shape(x)[0], "matvec: dimensions differ");
        std::vector<double> out(static_cast<size_t>(m));
        VecMap(out.data(), m).noalias() =
            CMatMap(val(a).data(), m, k) * CVecMap(val(x).data(), k);
        return push("matvec", {m}, std::move(out), requires_grad(a) || requires_grad(x),
                    [a, x, m, k](Tape& t) {
                        Var o = t.last_;
                        CVecMap g(t.grad(o).data(), m);
                        if (t.requires_grad(a)) {
                            MatMap ga(t.node(a).grad.data(), m, k);
                            ga.noalias() += g * CVecMap(t.val(x).data(), k).transpose();
                        }
                        if (t.requires_grad(x)) {
                            VecMap gx(t.node(x).grad.data(), k);
                            gx.noalias() += CMatMap(t.val(a).data(), m, k).transpose() * g;
                        }
                    });
    }

    // Solves M X = R (M square, R may have several columns). The adjoint uses
    // the transposed solve: dR = M^-T G, dM = -dR X^T.
    Var linear_solve(Var m_var, Var rhs, double err_dt = 0.0) {
        require(shape(m_var).size() == 2 && shape(m_var)[0] == shape(m_var)[1],
                "linear_solve: matrix must be square");
        int n = shape(m_var)[0];
        bool vec_rhs = shape(rhs).size() == 1;
        int k = vec_rhs ? 1 : shape(rhs)[1];
        require((vec_rhs ? shape(rhs)[0] : shape(rhs)[0]) == n, "linear_solve: rhs rows differ");
        CMatMap M(val(m_var).data(), n, n);
        CMatMap R(val(rhs).data(), n, k);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
        RowMat X = lu.solve(R);
        double scale = M.cwiseAbs().maxCoeff() * X.cwiseAbs().maxCoeff() +
                       R.cwiseAbs().maxCoeff();
        double resid = (M * X - R).cwiseAbs().maxCoeff();
        if (!std::isfinite(resid) || resid > 1e-8 * std::max(scale, 1.0))
            throw SingularityError("linear_solve: singular matrix", err_dt);
        std::vector<double> out(X.data(), X.data() + X.size());
        return push("linear_solve", shape(rhs), std::move(out),
                    requires_grad(m_var) || requires_grad(rhs), [m_var, rhs, n, k](Tape& t) {
                        Var o = t.last_;
                        CMatMap M(t.val(m_var).data(), n, n);
                        CMatMap G(t.grad(o).data(), n, k);
                        CMatMap X(t.val(o).data(), n, k);
                        Eigen::PartialPivLU<Eigen::MatrixXd> luT(M.transpose());
                        RowMat S = luT.solve(G);
                        if (t.requires_grad(rhs)) MatMap(t.node(rhs).grad.data(), n, k) += S;
                        if (t.requires_grad(m_var)) {
                            MatMap gm(t.node(m_var).grad.data(), n, n);
                            gm.noalias() -= S * X.transpose();
                        }
                    });
    }

    // -- reductions / structure -------------------------------------------------

    Var mean_axis(Var a, int axis) {
        require(shape(a).size() == 2, "mean_axis: input must be a matrix");
        require(axis == 0 || axis == 1, "mean_axis: axis must be 0 or 1");
        int r = shape(a)[0], c = shape(a)[1];
        int out_len = axis == 0 ? c : r;
        int red = axis == 0 ? r : c;
        std::vector<double> out(static_cast<size_t>(out_len), 0.0);
        CMatMap A(val(a).data(), r, c);
        if (axis == 0)
            VecMap(out.data(), c) = A.colwise().mean().transpose();
        else
            VecMap(out.data(), r) = A.rowwise().mean();
        return push("mean_axis", {out_len}, std::move(out), requires_grad(a),
                    [a, axis, r, c, red](Tape& t) {
                        Var o = t.last_;
                        if (!t.requires_grad(a)) return;
                        MatMap ga(t.node(a).grad.data(), r, c);
                        CVecMap g(t.grad(o).data(), axis == 0 ? c : r);
                        double inv = 1.0 / red;
                        if (axis == 0)
                            ga.rowwise() += (inv * g).transpose();
                        else
                            ga.colwise() += inv * g;
                    });
    }

    Var index(Var v, int i) {
        require(shape(v).size() == 1, "index: input must be a vector");
        require(i >= 0 && i < shape(v)[0], "index: out of range");
        return push("index", {1}, {val(v)[i]}, requires_grad(v), [v, i](Tape& t) {
            Var o = t.last_;
            if (t.requires_grad(v)) t.node(v).grad[static_cast<size_t>(i)] += t.grad(o)[0];
        });
    }

    Var row(Var m, int i) {
        require(shape(m).size() == 2, "row: input must be a matrix");
        int r = shape(m)[0], c = shape(m)[1];
        require(i >= 0 && i < r, "row: out of range");
        std::vector<double> out(val(m).begin() + static_cast<size_t>(i) * c,
                                val(m).begin() + static_cast<size_t>(i + 1) * c);
        return push("row", {c}, std::move(out), requires_grad(m), [m, i, c](Tape& t) {
            Var o = t.last_;
            if (!t.requires_grad(m)) return;
            auto& gm = t.node(m).grad;
            const auto& g = t.grad(o);
            for (int j = 0; j < c; ++j) gm[static_cast<size_t>(i) * c + j] += g[j];
        });
    }

    Var stack_rows(const std::vector<Var>& rows) {
        require(!rows.empty(), "stack_rows: no rows");
        int c = shape(rows[0])[0];
        bool rg = false;
        std::vector<double> out;
        out.reserve(rows.size() * static_cast<size_t>(c));
        for (Var r : rows) {
            require(shape(r).size() == 1 && shape(r)[0] == c, "stack_rows: row length mismatch");
            out.insert(out.end(), val(r).begin(), val(r).end());
            rg = rg || requires_grad(r);
        }
        int h = static_cast<int>(rows.size());
        return push("stack_rows", {h, c}, std::move(out), rg, [rows, c](Tape& t) {
            Var o = t.last_;
            const auto& g = t.grad(o);
            for (size_t h = 0; h < rows.size(); ++h) {
                if (!t.requires_grad(rows[h])) continue;
                auto& gr = t.node(rows[h]).grad;
                for (int j = 0; j < c; ++j) gr[j] += g[h * static_cast<size_t>(c) + j];
            }
        });
    }

    // out[h][l] = m[h][l] + v[h]
    Var bias_rows(Var m, Var v) {
        require(shape(m).size() == 2 && shape(v).size() == 1, "bias_rows: need matrix and vector");
        int r = shape(m)[0], c = shape(m)[1];
        require(shape(v)[0] == r, "bias_rows: bias length mismatch");
        std::vector<double> out(val(m).size());
        for (int h = 0; h < r; ++h)
            for (int j = 0; j < c; ++j)
                out[static_cast<size_t>(h) * c + j] = val(m)[static_cast<size_t>(h) * c + j] + val(v)[h];
        return push("bias_rows", {r, c}, std::move(out), requires_grad(m) || requires_grad(v),
                    [m, v, r, c](Tape& t) {
                        Var o = t.last_;
                        const auto& g = t.grad(o);
                        if (t.requires_grad(m)) {
                            auto& gm = t.node(m).grad;
                            for (size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
                        }
                        if (t.requires_grad(v)) {
                            auto& gv = t.node(v).grad;
                            for (int h = 0; h < r; ++h) {
                                double acc = 0.0;
                                for (int j = 0; j < c; ++j) acc += g[static_cast<size_t>(h) * c + j];
                                gv[h] += acc;
                            }
                        }
                    });
    }

    // -- normalization / loss ----------------------------------------------------

    // Normalizes each column of x (H x L) over the channel axis, then applies
    // the per-channel affine (gain, bias).
    Var layer_norm(Var x, Var gain, Var bias, double eps) {
        require(eps > 0.0, "layer_norm: eps must be > 0");
        require(shape(x).size() == 2, "layer_norm: input must be a matrix");
        int h = shape(x)[0], l = shape(x)[1];
        require(shape(gain) == std::vector<int>{h} && shape(bias) == std::vector<int>{h},
                "layer_norm: gain/bias length mismatch");
        std::vector<double> out(val(x).size());
        std::vector<double> inv_std(static_cast<size_t>(l)), meanv(static_cast<size_t>(l));
        for (int j = 0; j < l; ++j) {
            double mu = 0.0;
            for (int i = 0; i < h; ++i) mu += val(x)[static_cast<size_t>(i) * l + j];
            mu /= h;
            double var = 0.0;
            for (int i = 0; i < h; ++i) {
                double d = val(x)[static_cast<size_t>(i) * l + j] - mu;
                var += d * d;
            }
            var /= h;
            meanv[j] = mu;
            inv_std[j] = 1.0 / std::sqrt(var + eps);
            for (int i = 0; i < h; ++i) {
                double xhat = (val(x)[static_cast<size_t>(i) * l + j] - mu) * inv_std[j];
                out[static_cast<size_t>(i) * l + j] = val(gain)[i] * xhat + val(bias)[i];
            }
        }
        return push("layer_norm", {h, l}, std::move(out),
                    requires_grad(x) || requires_grad(gain) || requires_grad(bias),
                    [x, gain, bias, h, l, meanv, inv_std](Tape& t) {
                        Var o = t.last_;
                        const auto& g = t.grad(o);
                        const auto& xv = t.val(x);
                        const auto& gv = t.val(gain);
                        for (int j = 0; j < l; ++j) {
                            double s1 = 0.0, s2 = 0.0;  // sums of dxhat and dxhat*xhat
                            for (int i = 0; i < h; ++i) {
                                size_t idx = static_cast<size_t>(i) * l + j;
                                double xhat = (xv[idx] - meanv[j]) * inv_std[j];
                                double dxhat = g[idx] * gv[i];
                                s1 += dxhat;
                                s2 += dxhat * xhat;
                                if (t.requires_grad(gain)) t.node(gain).grad[i] += g[idx] * xhat;
                                if (t.requires_grad(bias)) t.node(bias).grad[i] += g[idx];
                            }
                            if (!t.requires_grad(x)) continue;
                            auto& gx = t.node(x).grad;
                            for (int i = 0; i < h; ++i) {
                                size_t idx = static_cast<size_t>(i) * l + j;
                                double xhat = (xv[idx] - meanv[j]) * inv_std[j];
                                double dxhat = g[idx] * gv[i];
                                gx[idx] += inv_std[j] * (dxhat - s1 / h - xhat * s2 / h);
                            }
                        }
                    });
    }

    // Weighted binary cross-entropy with probabilities clamped to
    // [1e-7, 1-1e-7]: -mean(w y ln p + (1-y) ln(1-p)).
    Var bce_loss(Var p, Var y, double pos_weight) {
        check_same_shape("bce_loss", p, y);
        require(pos_weight > 0.0, "bce_loss: pos_weight must be > 0");
        const double lo = 1e-7, hi = 1.0 - 1e-7;
        const auto& pv = val(p);
        const auto& yv = val(y);
        double acc = 0.0;
        for (size_t i = 0; i < pv.size(); ++i) {
            double pc = std::min(hi, std::max(lo, pv[i]));
            acc += pos_weight * yv[i] * std::log(pc) + (1.0 - yv[i]) * std::log(1.0 - pc);
        }
        double loss = -acc / static_cast<double>(pv.size());
        return push("bce_loss", {1}, {loss}, requires_grad(p), [p, y, pos_weight, lo, hi](Tape& t) {
            Var o = t.last_;
            if (!t.requires_grad(p)) return;
            const auto& pv = t.val(p);
            const auto& yv = t.val(y);
            auto& gp = t.node(p).grad;
            double g = t.grad(o)[0] / static_cast<double>(pv.size());
            for (size_t i = 0; i < pv.size(); ++i) {
                if (pv[i] <= lo || pv[i] >= hi) continue;  // clamped: flat
                gp[i] -= g * (pos_weight * yv[i] / pv[i] - (1.0 - yv[i]) / (1.0 - pv[i]));
            }
        });
    }

    // Full SSM recurrence as one taped op:
    //   x[n] = A_bar x[n-1] + B_bar u[n],  y[n] = C.x[n] + D u[n],  x[-1] = 0.
    // The state trajectory is stored for the reverse sweep.
    Var ssm_recurrence(Var a_bar, Var b_bar, Var c, Var d, Var u) {
        require(shape(a_bar).size() == 2 && shape(a_bar)[0] == shape(a_bar)[1],
                "ssm_recurrence: A_bar must be square");
        int n = shape(a_bar)[0];
        require(shape(b_bar) == std::vector<int>{n} && shape(c) == std::vector<int>{n},
                "ssm_recurrence: B_bar/C dimension mismatch");
        require(val(d).size() == 1, "ssm_recurrence: D must be a scalar");
        require(shape(u).size() == 1 && shape(u)[0] >= 1, "ssm_recurrence: bad input length");
        int L = shape(u)[0];
        CMatMap A(val(a_bar).data(), n, n);
        CVecMap B(val(b_bar).data(), n), C(val(c).data(), n);
        double D = val(d)[0];
        const auto& uv = val(u);
        auto states = std::make_shared<Eigen::MatrixXd>(n, L);
        std::vector<double> y(static_cast<size_t>(L));
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
        for (int j = 0; j < L; ++j) {
            x = A * x + uv[j] * B;
            states->col(j) = x;
            y[j] = C.dot(x) + D * uv[j];
        }
        bool rg = requires_grad(a_bar) || requires_grad(b_bar) || requires_grad(c) ||
                  requires_grad(d) || requires_grad(u);
        return push("ssm_recurrence", {L}, std::move(y), rg,
                    [a_bar, b_bar, c, d, u, n, L, states](Tape& t) {
                        Var o = t.last_;
                        CMatMap A(t.val(a_bar).data(), n, n);
                        CVecMap B(t.val(b_bar).data(), n), C(t.val(c).data(), n);
                        double D = t.val(d)[0];
                        const auto& uv = t.val(u);
                        const auto& gy = t.grad(o);
                        bool need_a = t.requires_grad(a_bar), need_b = t.requires_grad(b_bar);
                        bool need_c = t.requires_grad(c), need_d = t.requires_grad(d);
                        bool need_u = t.requires_grad(u);
                        Eigen::VectorXd lam = Eigen::VectorXd::Zero(n);
                        double gd = 0.0;
                        for (int j = L - 1; j >= 0; --j) {
                            lam = A.transpose() * lam + gy[j] * C;
                            if (need_c)
                                VecMap(t.node(c).grad.data(), n).noalias() +=
                                    gy[j] * states->col(j);
                            if (need_d) gd += gy[j] * uv[j];
                            if (need_a && j > 0)
                                MatMap(t.node(a_bar).grad.data(), n, n).noalias() +=
                                    lam * states->col(j - 1).transpose();
                            if (need_b)
                                VecMap(t.node(b_bar).grad.data(), n).noalias() += uv[j] * lam;
                            if (need_u) t.node(u).grad[j] += B.dot(lam) + D * gy[j];
                        }
                        if (need_d) t.node(d).grad[0] += gd;
                    });
    }

    // -- backward ----------------------------------------------------------------

    void backward(Var loss) {
        require(val(loss).size() == 1, "backward: loss must be a scalar");
        for (auto& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), 0.0);
        node(loss).grad[0] = 1.0;
        for (int id = loss.id; id >= 0; --id) {
            Node& n = nodes_[static_cast<size_t>(id)];
            if (!n.requires_grad || !n.backward) continue;
            last_ = Var{id};
            n.backward(*this);
        }
    }

    static double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
    static double normal_pdf(double x) {
        return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    }

  private:
    friend struct TapeTestPeek;

    Node& node(Var v) { return nodes_.at(static_cast<size_t>(v.id)); }
    const Node& node(Var v) const { return nodes_.at(static_cast<size_t>(v.id)); }

    void accumulate(Var v, const std::vector<double>& g) {
        if (!requires_grad(v)) return;
        auto& gv = node(v).grad;
        for (size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
    }

    void check_same_shape(const char* op, Var a, Var b) const {
        if (shape(a) != shape(b)) throw InvalidInput(std::string(op) + ": shape mismatch");
    }

    Var push(const char* op, std::vector<int> shape, std::vector<double> val, bool rg,
             std::function<void(Tape&)> bw) {
        for (double x : val)
            if (!std::isfinite(x))
                throw NumericError(std::string("non-finite value produced by op '") + op + "'");
        Node n;
        n.op = op;
        n.shape = std::move(shape);
        n.grad.assign(val.size(), 0.0);
        n.val = std::move(val);
        n.requires_grad = rg;
        n.backward = std::move(bw);
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    std::vector<Node> nodes_;
    Var last_;  // node whose backward rule is currently running
};

// ---------------------------------------------------------------------------
// Finite-difference verification

struct GradcheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    bool pass = false;
};

struct GradcheckReport {
    std::vector<GradcheckEntry> entries;
    double tolerance = 0.0;
    bool pass = true;
};

// Builds the scalar loss on a fresh tape from leaves created for `params`
// (in order). Must be deterministic.
using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

inline GradcheckReport gradcheck(const LossBuilder& build,
                                 const std::vector<std::pair<std::string, Tensor*>>& params,
                                 double tolerance, double fd_step = 1e-5) {
    auto eval = [&](std::vector<std::vector<double>>* grads_out) {
        Tape tape;
        std::vector<Var> leaves;
        leaves.reserve(params.size());
        for (auto& [name, tensor] : params) leaves.push_back(tape.leaf(*tensor));
        Var loss = build(tape, leaves);
        require(tape.val(loss).size() == 1, "gradcheck: loss must be a scalar");
        double value = tape.val(loss)[0];
        if (grads_out) {
            tape.backward(loss);
            grads_out->clear();
            for (Var v : leaves) grads_out->push_back(tape.grad(v));
        }
        return value;
    };

    std::vector<std::vector<double>> analytic;
    eval(&analytic);

    GradcheckReport report;
    report.tolerance = tolerance;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor* t = params[pi].second;
        GradcheckEntry entry;
        entry.name = params[pi].first;
        for (size_t i = 0; i < t->v.size(); ++i) {
            double saved = t->v[i];
            t->v[i] = saved + fd_step;
            double f_plus = eval(nullptr);
            t->v[i] = saved - fd_step;
            double f_minus = eval(nullptr);
            t->v[i] = saved;
            double fd = (f_plus - f_minus) / (2.0 * fd_step);
            double an = analytic[pi][i];
            double denom = std::max({std::abs(an), std::abs(fd), 1e-4});
            entry.max_rel_err = std::max(entry.max_rel_err, std::abs(an - fd) / denom);
        }
        entry.pass = entry.max_rel_err < tolerance;
        report.pass = report.pass && entry.pass;
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace raddet::ad

#endif  // RADDET_AUTODIFF_HPP
