#include "unmix/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "unmix/errors.hpp"
#include "unmix/parallel.hpp"

namespace unmix {

std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost) {
    const std::size_t n = cost.size();
    for (const auto& row : cost)
        if (row.size() != n) throw DimensionError("hungarian: cost matrix must be square");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            std::size_t j1 = 0;
            double delta = inf;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> row_for_col(n, 0);
    for (std::size_t j = 1; j <= n; ++j) row_for_col[j - 1] = p[j] - 1;
    return row_for_col;
}

double spectral_angle(const double* a, const double* b, std::size_t L) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0)
        throw NumericalError("spectral_angle: degenerate input (zero-norm signature)");
    return std::acos(std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0));
}

std::vector<std::size_t> match_endmembers(const EndmemberSet& est, const EndmemberSet& gt) {
    const std::size_t p = gt.count();
    if (est.count() != p)
        throw DimensionError("match_endmembers: count mismatch (" + std::to_string(est.count()) +
                             " vs " + std::to_string(p) + ")");
    if (est.bands() != gt.bands()) throw DimensionError("match_endmembers: band count mismatch");
    std::vector<std::vector<double>> cost(p, std::vector<double>(p, 0.0));
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j)
            cost[i][j] = spectral_angle(est.row(i), gt.row(j), gt.bands());
    return hungarian(cost);  // row_for_col: est index per gt column
}

SadMetric sad_metric(const EndmemberSet& est, const EndmemberSet& gt,
                     const std::vector<std::size_t>& perm) {
    const std::size_t p = gt.count();
    if (perm.size() != p) throw DimensionError("sad_metric: bad permutation size");
    SadMetric out;
    out.per_endmember.resize(p);
    for (std::size_t j = 0; j < p; ++j) {
        out.per_endmember[j] = spectral_angle(est.row(perm[j]), gt.row(j), gt.bands());
        out.mean += out.per_endmember[j];
    }
    out.mean /= static_cast<double>(p);
    return out;
}

RmseMetric rmse_metric(const AbundanceField& est, const AbundanceField& gt,
                       const std::vector<std::size_t>& perm) {
    if (est.height != gt.height || est.width != gt.width || est.endmembers != gt.endmembers)
        throw DimensionError("rmse_metric: field shape mismatch");
    const std::size_t p = gt.endmembers, n = gt.pixels();
    if (perm.size() != p) throw DimensionError("rmse_metric: bad permutation size");
    RmseMetric out;
    out.per_endmember.assign(p, 0.0);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < p; ++j) {
            const double d = est.fractions.data[k * p + perm[j]] - gt.fractions.data[k * p + j];
            out.per_endmember[j] += d * d;
        }
    double total = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        total += out.per_endmember[j];
        out.per_endmember[j] = std::sqrt(out.per_endmember[j] / static_cast<double>(n));
        out.mean += out.per_endmember[j];
    }
    out.mean /= static_cast<double>(p);
    out.full_vector = std::sqrt(total / static_cast<double>(n));
    return out;
}

std::string MetricReport::to_json() const {
    nlohmann::json j;
    j["permutation"] = permutation;
    j["sad_per_endmember"] = sad.per_endmember;
    j["mean_sad"] = sad.mean;
    if (has_rmse) {
        j["rmse_per_endmember"] = rmse.per_endmember;
        j["mean_rmse"] = rmse.mean;
        j["rmse_full_vector"] = rmse.full_vector;
    }
    j["seed"] = seed;
    j["config_hash"] = config_hash;
    return j.dump(2) + "\n";
}

std::string MetricReport::to_table() const {
    std::ostringstream os;
    os << "endmember      SAD(rad)";
    if (has_rmse) os << "      RMSE";
    os << "\n";
    char buf[128];
    for (std::size_t j = 0; j < sad.per_endmember.size(); ++j) {
        if (has_rmse)
            std::snprintf(buf, sizeof buf, "#%-12zu %9.4f %9.4f\n", j, sad.per_endmember[j],
                          rmse.per_endmember[j]);
        else
            std::snprintf(buf, sizeof buf, "#%-12zu %9.4f\n", j, sad.per_endmember[j]);
        os << buf;
    }
    if (has_rmse) {
        std::snprintf(buf, sizeof buf, "mean          %9.4f %9.4f   (vector-form RMSE %.4f)\n",
                      sad.mean, rmse.mean, rmse.full_vector);
        os << buf;
    } else {
        std::snprintf(buf, sizeof buf, "mean          %9.4f\n", sad.mean);
        os << buf;
    }
    return os.str();
}

MetricReport evaluate(const EndmemberSet& est_endmembers, const AbundanceField* est_abundances,
                      const EndmemberSet& gt_endmembers, const AbundanceField* gt_abundances,
                      std::uint64_t seed, const std::string& config_hash) {
    MetricReport report;
    report.permutation = match_endmembers(est_endmembers, gt_endmembers);
    report.sad = sad_metric(est_endmembers, gt_endmembers, report.permutation);
    if (est_abundances && gt_abundances) {
        report.rmse = rmse_metric(*est_abundances, *gt_abundances, report.permutation);
        report.has_rmse = true;
    }
    report.seed = seed;
    report.config_hash = config_hash;
    return report;
}

}  // namespace unmix
