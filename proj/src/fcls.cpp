#include "unmix/fcls.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "unmix/errors.hpp"
#include "unmix/parallel.hpp"

namespace unmix {

namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct FclsWorkspace {
    Matrix G;        // A A^T + delta^2 * ones  (p x p normal matrix of the augmented system)
    Matrix A;        // p x L signatures
    double delta2;
};

FclsWorkspace make_workspace(const EndmemberSet& em, double delta) {
    const std::size_t p = em.count(), L = em.bands();
    FclsWorkspace ws;
    ws.A = Matrix(p, L);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t b = 0; b < L; ++b)
            ws.A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) = em.row(i)[b];
    ws.delta2 = delta * delta;
    ws.G = ws.A * ws.A.transpose();
    ws.G.array() += ws.delta2;
    Eigen::FullPivLU<Matrix> lu(ws.G);
    if (!lu.isInvertible())
        throw NumericalError("fcls: endmember matrix is rank deficient");
    return ws;
}

// Active-set NNLS on the normal equations (fnnls): min ||M x - b|| with
// M^T M = G, M^T b = c, subject to x >= 0. Outer iteration cap 3p; returns
// false when the cap was hit (caller falls back).
bool nnls_normal(const Matrix& G, const Vector& c, Vector& x) {
    const std::size_t p = static_cast<std::size_t>(G.rows());
    const double tol = 1e-12 * c.cwiseAbs().maxCoeff();
    std::vector<bool> passive(p, false);
    x = Vector::Zero(static_cast<Eigen::Index>(p));
    Vector w = c;  // gradient of the dual: c - G x
    const int cap = static_cast<int>(3 * p);
    for (int iter = 0; iter < cap; ++iter) {
        // most violated dual among the active (zero) set
        int best = -1;
        double best_w = tol;
        for (std::size_t j = 0; j < p; ++j)
            if (!passive[j] && w(static_cast<Eigen::Index>(j)) > best_w) {
                best_w = w(static_cast<Eigen::Index>(j));
                best = static_cast<int>(j);
            }
        if (best < 0) return true;  // KKT satisfied
        passive[static_cast<std::size_t>(best)] = true;

        for (int inner = 0; inner < static_cast<int>(p) + 1; ++inner) {
            std::vector<int> pset;
            for (std::size_t j = 0; j < p; ++j)
                if (passive[j]) pset.push_back(static_cast<int>(j));
            Matrix Gp(pset.size(), pset.size());
            Vector cp(pset.size());
            for (std::size_t a = 0; a < pset.size(); ++a) {
                cp(static_cast<Eigen::Index>(a)) = c(pset[a]);
                for (std::size_t b = 0; b < pset.size(); ++b)
                    Gp(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                        G(pset[a], pset[b]);
            }
            const Vector s = Gp.ldlt().solve(cp);
            bool feasible = true;
            for (Eigen::Index a = 0; a < s.size(); ++a)
                if (s(a) <= 0.0) feasible = false;
            if (feasible) {
                x.setZero();
                for (std::size_t a = 0; a < pset.size(); ++a) x(pset[a]) = s(static_cast<Eigen::Index>(a));
                break;
            }
            // step back along the segment to the first zero crossing
            double alpha = 1.0;
            for (std::size_t a = 0; a < pset.size(); ++a) {
                const double sa = s(static_cast<Eigen::Index>(a));
                const double xa = x(pset[a]);
                if (sa <= 0.0 && xa - sa > 0.0) alpha = std::min(alpha, xa / (xa - sa));
            }
            for (std::size_t a = 0; a < pset.size(); ++a) {
                const double sa = s(static_cast<Eigen::Index>(a));
                double nx = x(pset[a]) + alpha * (sa - x(pset[a]));
                if (nx <= 1e-14) {
                    nx = 0.0;
                    passive[static_cast<std::size_t>(pset[a])] = false;
                }
                x(pset[a]) = nx;
            }
        }
        w = c - G * x;
    }
    return false;
}

void solve_pixel(const FclsWorkspace& ws, const double* y, double* x_out, bool* converged) {
    const std::size_t p = static_cast<std::size_t>(ws.A.rows());
    const std::size_t L = static_cast<std::size_t>(ws.A.cols());
    Eigen::Map<const Vector> yv(y, static_cast<Eigen::Index>(L));
    Vector c = ws.A * yv;
    c.array() += ws.delta2;

    Vector x;
    bool ok = nnls_normal(ws.G, c, x);
    if (!ok) {
        // fallback: unconstrained solve, clipped to the nonnegative orthant
        x = ws.G.ldlt().solve(c);
        for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = std::max(0.0, x(j));
    }
    double sum = x.sum();
    if (sum <= 0.0) {
        x.setConstant(1.0 / static_cast<double>(p));
        sum = 1.0;
        ok = false;
    }
    for (std::size_t j = 0; j < p; ++j) x_out[j] = x(static_cast<Eigen::Index>(j)) / sum;
    *converged = ok;
}

FclsResult run(const Tensor& Y, const EndmemberSet& em, double delta, bool parallel) {
    if (Y.rank() != 2) throw DimensionError("fcls: expected Y [L x n]");
    const std::size_t L = Y.shape[0], n = Y.shape[1];
    if (em.bands() != L)
        throw DimensionError("fcls: endmember bands " + std::to_string(em.bands()) +
                             " != data bands " + std::to_string(L));
    const std::size_t p = em.count();
    const FclsWorkspace ws = make_workspace(em, delta);

    FclsResult result;
    result.abundances = Tensor::zeros({p, n});
    std::vector<unsigned char> fallback(n, 0);
    auto body = [&](std::size_t k) {
        std::vector<double> y(L), x(p);
        for (std::size_t b = 0; b < L; ++b) y[b] = Y.data[b * n + k];
        bool ok = true;
        solve_pixel(ws, y.data(), x.data(), &ok);
        for (std::size_t j = 0; j < p; ++j) result.abundances.data[j * n + k] = x[j];
        if (!ok) fallback[k] = 1;
    };
    if (parallel)
        par::parallel_for(n, body);
    else
        par::serial_for(n, body);
    for (std::size_t k = 0; k < n; ++k)
        if (fallback[k]) result.flagged.push_back(k);
    return result;
}

}  // namespace

FclsResult fcls(const Tensor& Y, const EndmemberSet& em, double delta) {
    return run(Y, em, delta, true);
}

FclsResult fcls_serial(const Tensor& Y, const EndmemberSet& em, double delta) {
    return run(Y, em, delta, false);
}

bool fcls_pixel(const double* y, std::size_t L, const EndmemberSet& em, double delta,
                double* x_out) {
    if (em.bands() != L) throw DimensionError("fcls_pixel: band mismatch");
    const FclsWorkspace ws = make_workspace(em, delta);
    bool ok = true;
    solve_pixel(ws, y, x_out, &ok);
    return ok;
}

AbundanceField fcls_field(const Tensor& Y, const EndmemberSet& em, std::size_t height,
                          std::size_t width, double delta) {
    const FclsResult res = fcls(Y, em, delta);
    const std::size_t p = em.count(), n = height * width;
    if (Y.shape[1] != n) throw DimensionError("fcls_field: pixel count mismatch");
    AbundanceField field;
    field.height = height;
    field.width = width;
    field.endmembers = p;
    field.fractions = Tensor::zeros({height, width, p});
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < p; ++j)
            field.fractions.data[k * p + j] = res.abundances.data[j * n + k];
    return field;
}

}  // namespace unmix
