#include "unmix/vca.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "unmix/errors.hpp"
#include "unmix/rng.hpp"

namespace unmix {

namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// leading d eigenvectors of the symmetric matrix C (descending eigenvalues)
Matrix leading_eigenvectors(const Matrix& C, std::size_t d, double* smallest_kept) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(C);
    if (es.info() != Eigen::Success) throw NumericalError("vca: eigendecomposition failed");
    const std::size_t L = static_cast<std::size_t>(C.rows());
    Matrix U(L, d);
    for (std::size_t j = 0; j < d; ++j)
        U.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(static_cast<Eigen::Index>(L - 1 - j));
    if (smallest_kept) *smallest_kept = es.eigenvalues()(static_cast<Eigen::Index>(L - d));
    return U;
}

}  // namespace

VcaResult vca(const Tensor& Yt, const VcaConfig& cfg) {
    if (Yt.rank() != 2) throw DimensionError("vca: expected Y [L x n]");
    const std::size_t L = Yt.shape[0], n = Yt.shape[1];
    const std::size_t p = cfg.endmembers;
    if (p < 2) throw DomainError("vca: p must be >= 2");
    if (p > std::min(L, n)) throw DomainError("vca: p exceeds min(bands, pixels)");

    Eigen::Map<const Matrix> Ymap(Yt.data.data(), static_cast<Eigen::Index>(n),
                                  static_cast<Eigen::Index>(L));
    // Tensor is row-major [L x n]; Eigen default is column-major, so the map
    // above views it as [n x L]; transpose to get Y as L x n.
    Matrix Y = Ymap.transpose();

    const Vector y_mean = Y.rowwise().mean();
    Matrix Y0 = Y.colwise() - y_mean;

    // SNR estimate on the p-dimensional mean-removed subspace
    double lam_min = 0.0;
    const Matrix Ud_p = leading_eigenvectors(Y0 * Y0.transpose() / static_cast<double>(n), p,
                                             &lam_min);
    const Matrix xp = Ud_p.transpose() * Y0;  // p x n
    const double P_y = Y.squaredNorm() / static_cast<double>(n);
    const double P_x = xp.squaredNorm() / static_cast<double>(n) + y_mean.squaredNorm();
    double snr;
    if (cfg.snr_estimate_override) {
        snr = *cfg.snr_estimate_override;
    } else {
        const double num = P_x - static_cast<double>(p) / static_cast<double>(L) * P_y;
        const double den = P_y - P_x;
        snr = (num <= 0.0 || den <= 0.0) ? 0.0 : 10.0 * std::log10(num / den);
    }
    const double snr_threshold = 15.0 + 10.0 * std::log10(static_cast<double>(p));

    VcaResult result;
    result.snr_estimate = snr;
    result.projective = snr > snr_threshold;

    Matrix y_proj;  // d' x n working representation
    if (result.projective) {
        const std::size_t d = p;
        double lam = 0.0;
        const Matrix Ud = leading_eigenvectors(Y * Y.transpose() / static_cast<double>(n), d, &lam);
        if (lam <= 1e-12 * std::max(1.0, Y.squaredNorm() / static_cast<double>(n)))
            throw NumericalError("vca: data rank below p (degenerate)");
        const Matrix x = Ud.transpose() * Y;  // d x n
        const Vector u = x.rowwise().mean();
        y_proj = Matrix(d, n);
        for (std::size_t j = 0; j < n; ++j) {
            const double denom = x.col(static_cast<Eigen::Index>(j)).dot(u);
            y_proj.col(static_cast<Eigen::Index>(j)) =
                x.col(static_cast<Eigen::Index>(j)) / (denom == 0.0 ? 1e-30 : denom);
        }
    } else {
        const std::size_t d = p - 1;
        if (lam_min < 0.0) throw NumericalError("vca: negative eigenvalue");
        const Matrix Ud = Ud_p.leftCols(static_cast<Eigen::Index>(d));
        const Matrix x = Ud.transpose() * Y0;  // d x n
        double c = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            c = std::max(c, x.col(static_cast<Eigen::Index>(j)).norm());
        y_proj = Matrix(p, n);
        y_proj.topRows(static_cast<Eigen::Index>(d)) = x;
        y_proj.bottomRows(1).setConstant(c);
    }

    // rank check on the working representation
    {
        Eigen::JacobiSVD<Matrix> svd(y_proj);
        const auto& sv = svd.singularValues();
        if (sv(sv.size() - 1) <= 1e-10 * sv(0))
            throw NumericalError("vca: projected data rank below p (degenerate)");
    }

    Rng rng(mix_seed(cfg.seed, 0x5CA1));
    Matrix selected = Matrix::Zero(p, p);
    selected(p - 1, 0) = 1.0;  // conventional bootstrap column
    std::vector<std::size_t> indices(p, 0);
    Matrix basis(p, 0);  // orthonormal basis of selected columns
    for (std::size_t i = 0; i < p; ++i) {
        Vector w(p);
        for (std::size_t j = 0; j < p; ++j) w(static_cast<Eigen::Index>(j)) = normal01(rng);
        // f: direction orthogonal to the span of already selected columns
        Vector f = w;
        if (basis.cols() > 0) f -= basis * (basis.transpose() * w);
        const double fn = f.norm();
        if (fn < 1e-12) throw NumericalError("vca: degenerate random direction");
        f /= fn;
        Eigen::Index best = 0;
        double best_v = -1.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double v = std::fabs(f.dot(y_proj.col(static_cast<Eigen::Index>(j))));
            if (v > best_v) {
                best_v = v;
                best = static_cast<Eigen::Index>(j);
            }
        }
        indices[i] = static_cast<std::size_t>(best);
        selected.col(static_cast<Eigen::Index>(i)) = y_proj.col(best);
        // extend the orthonormal basis with the new column (Gram-Schmidt)
        Vector b = y_proj.col(best);
        if (basis.cols() > 0) b -= basis * (basis.transpose() * b);
        const double bn = b.norm();
        if (bn > 1e-12) {
            basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
            basis.col(basis.cols() - 1) = b / bn;
        }
    }

    result.indices = indices;
    result.endmembers.signatures = Tensor::zeros({p, L});
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t b = 0; b < L; ++b)
            result.endmembers.signatures.data[i * L + b] =
                std::max(0.0, Y(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(indices[i])));
    result.endmembers.validate();
    return result;
}

}  // namespace unmix
