#include "unmix/slic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "unmix/errors.hpp"
#include "unmix/parallel.hpp"

namespace unmix {

namespace {

struct Cluster {
    double row = 0.0, col = 0.0;
    std::vector<double> abundance;
};

double sq(double v) { return v * v; }

double abundance_gradient(const AbundanceField& f, long r, long c) {
    const long H = static_cast<long>(f.height), W = static_cast<long>(f.width);
    const std::size_t p = f.endmembers;
    auto px = [&](long rr, long cc) {
        rr = std::clamp(rr, 0L, H - 1);
        cc = std::clamp(cc, 0L, W - 1);
        return &f.fractions.data[(static_cast<std::size_t>(rr) * f.width +
                                  static_cast<std::size_t>(cc)) * p];
    };
    const double* xr = px(r, c + 1);
    const double* xl = px(r, c - 1);
    const double* xd = px(r + 1, c);
    const double* xu = px(r - 1, c);
    double g = 0.0;
    for (std::size_t j = 0; j < p; ++j) g += sq(xr[j] - xl[j]) + sq(xd[j] - xu[j]);
    return g;
}

}  // namespace

void SlicConfig::validate() const {
    if (!target_count && size_s < 2.0)
        throw DomainError("slic: nominal size S must be >= 2");
    if (target_count && *target_count == 0) throw DomainError("slic: target count must be > 0");
    if (compactness < 0.0) throw DomainError("slic: compactness m must be >= 0");
    if (iterations < 1) throw DomainError("slic: iterations must be >= 1");
}

double compound_distance(std::size_t i, std::size_t j, const AbundanceField& field, double s,
                         double m) {
    const std::size_t W = field.width, p = field.endmembers;
    if (i >= field.pixels() || j >= field.pixels())
        throw DomainError("compound_distance: pixel index out of range");
    const double ri = static_cast<double>(i / W), ci = static_cast<double>(i % W);
    const double rj = static_cast<double>(j / W), cj = static_cast<double>(j % W);
    const double d_spa = std::sqrt(sq(ri - rj) + sq(ci - cj));
    const double* xi = &field.fractions.data[i * p];
    const double* xj = &field.fractions.data[j * p];
    double d_abu = 0.0;  // squared euclidean, as printed
    for (std::size_t k = 0; k < p; ++k) d_abu += sq(xi[k] - xj[k]);
    return std::sqrt(sq(d_abu) + sq(d_spa / s) * sq(m));
}

std::size_t center_pixel(const std::vector<std::size_t>& members, std::size_t width) {
    if (members.empty()) throw ContractViolation("center_pixel: empty member list");
    double mr = 0.0, mc = 0.0;
    for (std::size_t idx : members) {
        mr += static_cast<double>(idx / width);
        mc += static_cast<double>(idx % width);
    }
    mr /= static_cast<double>(members.size());
    mc /= static_cast<double>(members.size());
    std::size_t best = members[0];
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t idx : members) {
        const double d = sq(static_cast<double>(idx / width) - mr) +
                         sq(static_cast<double>(idx % width) - mc);
        // strict less keeps the first (lexicographically smallest) on ties,
        // members being in raster order
        if (d < best_d) {
            best_d = d;
            best = idx;
        }
    }
    return best;
}

void Segmentation::validate() const {
    const std::size_t n = height * width;
    if (labels.size() != n) throw ContractViolation("segmentation: label map size mismatch");
    std::vector<std::size_t> seen(superpixels.size(), 0);
    for (std::size_t k = 0; k < n; ++k) {
        const int id = labels[k];
        if (id < 0 || static_cast<std::size_t>(id) >= superpixels.size())
            throw ContractViolation("segmentation: label out of range");
        ++seen[static_cast<std::size_t>(id)];
    }
    for (std::size_t q = 0; q < superpixels.size(); ++q) {
        const auto& sp = superpixels[q];
        if (sp.members.empty()) throw ContractViolation("segmentation: empty superpixel");
        if (seen[q] != sp.members.size())
            throw ContractViolation("segmentation: member list disagrees with label map");
        for (std::size_t idx : sp.members)
            if (labels[idx] != static_cast<int>(q))
                throw ContractViolation("segmentation: member labelled elsewhere");
        if (!std::binary_search(sp.members.begin(), sp.members.end(), sp.center))
            throw ContractViolation("segmentation: center not a member");
        // 4-connectivity via flood fill over the member set
        std::vector<std::size_t> stack{sp.members[0]};
        std::vector<bool> visited_local(sp.members.size(), false);
        visited_local[0] = true;
        std::size_t reached = 1;
        while (!stack.empty()) {
            const std::size_t idx = stack.back();
            stack.pop_back();
            const long r = static_cast<long>(idx / width), c = static_cast<long>(idx % width);
            const long dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
            for (int d = 0; d < 4; ++d) {
                const long rr = r + dr[d], cc = c + dc[d];
                if (rr < 0 || cc < 0 || rr >= static_cast<long>(height) ||
                    cc >= static_cast<long>(width))
                    continue;
                const std::size_t nidx = static_cast<std::size_t>(rr) * width +
                                         static_cast<std::size_t>(cc);
                if (labels[nidx] != static_cast<int>(q)) continue;
                const auto it = std::lower_bound(sp.members.begin(), sp.members.end(), nidx);
                const std::size_t pos = static_cast<std::size_t>(it - sp.members.begin());
                if (!visited_local[pos]) {
                    visited_local[pos] = true;
                    ++reached;
                    stack.push_back(nidx);
                }
            }
        }
        if (reached != sp.members.size())
            throw ContractViolation("segmentation: superpixel " + std::to_string(q) +
                                    " is not 4-connected");
    }
}

Segmentation slic_segment(const AbundanceField& field, const SlicConfig& cfg) {
    cfg.validate();
    const std::size_t H = field.height, W = field.width, p = field.endmembers;
    const std::size_t n = H * W;
    const double S = cfg.target_count
                         ? std::sqrt(static_cast<double>(n) / static_cast<double>(*cfg.target_count))
                         : cfg.size_s;
    const double m = cfg.compactness;

    // regular grid seeds, perturbed to the lowest-gradient spot in a 3x3 patch
    const std::size_t ny = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                        std::llround(static_cast<double>(H) / S)));
    const std::size_t nx = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                        std::llround(static_cast<double>(W) / S)));
    std::vector<Cluster> clusters;
    clusters.reserve(nx * ny);
    for (std::size_t i = 0; i < ny; ++i)
        for (std::size_t j = 0; j < nx; ++j) {
            long r = static_cast<long>((static_cast<double>(i) + 0.5) * static_cast<double>(H) /
                                       static_cast<double>(ny));
            long c = static_cast<long>((static_cast<double>(j) + 0.5) * static_cast<double>(W) /
                                       static_cast<double>(nx));
            r = std::clamp<long>(r, 0, static_cast<long>(H) - 1);
            c = std::clamp<long>(c, 0, static_cast<long>(W) - 1);
            long br = r, bc = c;
            double bg = abundance_gradient(field, r, c);
            for (long dr = -1; dr <= 1; ++dr)
                for (long dc = -1; dc <= 1; ++dc) {
                    const long rr = r + dr, cc = c + dc;
                    if (rr < 0 || cc < 0 || rr >= static_cast<long>(H) || cc >= static_cast<long>(W))
                        continue;
                    const double g = abundance_gradient(field, rr, cc);
                    if (g < bg) {
                        bg = g;
                        br = rr;
                        bc = cc;
                    }
                }
            Cluster cl;
            cl.row = static_cast<double>(br);
            cl.col = static_cast<double>(bc);
            const std::size_t idx = static_cast<std::size_t>(br) * W + static_cast<std::size_t>(bc);
            cl.abundance.assign(&field.fractions.data[idx * p], &field.fractions.data[idx * p] + p);
            clusters.push_back(std::move(cl));
        }
    const std::size_t Q0 = clusters.size();
    const std::vector<Cluster> seeds_snapshot = clusters;

    // initial assignment: nearest seed by coordinates (lower id wins ties)
    std::vector<int> labels(n, 0);
    par::parallel_for(n, [&](std::size_t k) {
        const double r = static_cast<double>(k / W), c = static_cast<double>(k % W);
        double best = std::numeric_limits<double>::infinity();
        int best_id = 0;
        for (std::size_t q = 0; q < Q0; ++q) {
            const double d = sq(clusters[q].row - r) + sq(clusters[q].col - c);
            if (d < best) {
                best = d;
                best_id = static_cast<int>(q);
            }
        }
        labels[k] = best_id;
    });

    // spatial buckets over cluster centers for the windowed assignment
    const std::size_t cell = std::max<std::size_t>(1, static_cast<std::size_t>(S));
    const std::size_t bins_y = (H + cell - 1) / cell, bins_x = (W + cell - 1) / cell;
    std::vector<std::vector<int>> bins(bins_y * bins_x);
    auto rebuild_bins = [&] {
        for (auto& b : bins) b.clear();
        for (std::size_t q = 0; q < Q0; ++q) {
            const std::size_t by = std::min(bins_y - 1, static_cast<std::size_t>(clusters[q].row) / cell);
            const std::size_t bx = std::min(bins_x - 1, static_cast<std::size_t>(clusters[q].col) / cell);
            bins[by * bins_x + bx].push_back(static_cast<int>(q));
        }
    };

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        rebuild_bins();
        const long reach = static_cast<long>(std::ceil(S / static_cast<double>(cell))) + 1;
        par::parallel_for(n, [&](std::size_t k) {
            const double r = static_cast<double>(k / W), c = static_cast<double>(k % W);
            const double* x = &field.fractions.data[k * p];
            const long by = static_cast<long>((k / W) / cell), bx = static_cast<long>((k % W) / cell);
            double best = std::numeric_limits<double>::infinity();
            int best_id = -1;
            for (long iy = by - reach; iy <= by + reach; ++iy)
                for (long ix = bx - reach; ix <= bx + reach; ++ix) {
                    if (iy < 0 || ix < 0 || iy >= static_cast<long>(bins_y) ||
                        ix >= static_cast<long>(bins_x))
                        continue;
                    for (int q : bins[static_cast<std::size_t>(iy) * bins_x +
                                      static_cast<std::size_t>(ix)]) {
                        const Cluster& cl = clusters[static_cast<std::size_t>(q)];
                        // 2S x 2S search window around the center
                        if (std::fabs(cl.row - r) > S || std::fabs(cl.col - c) > S) continue;
                        double d_abu = 0.0;
                        for (std::size_t j = 0; j < p; ++j) d_abu += sq(cl.abundance[j] - x[j]);
                        const double d_spa2 = sq(cl.row - r) + sq(cl.col - c);
                        const double D = std::sqrt(sq(d_abu) + d_spa2 / sq(S) * sq(m));
                        if (D < best || (D == best && q < best_id)) {
                            best = D;
                            best_id = q;
                        }
                    }
                }
            if (best_id >= 0) labels[k] = best_id;
        });

        // recompute means (serial, fixed pixel order)
        std::vector<double> acc_r(Q0, 0.0), acc_c(Q0, 0.0);
        std::vector<double> acc_a(Q0 * p, 0.0);
        std::vector<std::size_t> cnt(Q0, 0);
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t q = static_cast<std::size_t>(labels[k]);
            acc_r[q] += static_cast<double>(k / W);
            acc_c[q] += static_cast<double>(k % W);
            const double* x = &field.fractions.data[k * p];
            for (std::size_t j = 0; j < p; ++j) acc_a[q * p + j] += x[j];
            ++cnt[q];
        }
        for (std::size_t q = 0; q < Q0; ++q) {
            if (cnt[q] == 0) continue;  // keep the previous center
            const double inv = 1.0 / static_cast<double>(cnt[q]);
            clusters[q].row = acc_r[q] * inv;
            clusters[q].col = acc_c[q] * inv;
            for (std::size_t j = 0; j < p; ++j) clusters[q].abundance[j] = acc_a[q * p + j] * inv;
        }
    }

    // connected components of the label map (4-connectivity)
    std::vector<int> comp(n, -1);
    std::vector<std::size_t> comp_size;
    std::vector<int> comp_label;
    for (std::size_t k = 0; k < n; ++k) {
        if (comp[k] >= 0) continue;
        const int cid = static_cast<int>(comp_size.size());
        std::size_t size = 0;
        std::queue<std::size_t> queue;
        queue.push(k);
        comp[k] = cid;
        while (!queue.empty()) {
            const std::size_t idx = queue.front();
            queue.pop();
            ++size;
            const long r = static_cast<long>(idx / W), c = static_cast<long>(idx % W);
            const long dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
            for (int d = 0; d < 4; ++d) {
                const long rr = r + dr[d], cc = c + dc[d];
                if (rr < 0 || cc < 0 || rr >= static_cast<long>(H) || cc >= static_cast<long>(W))
                    continue;
                const std::size_t nidx = static_cast<std::size_t>(rr) * W +
                                         static_cast<std::size_t>(cc);
                if (comp[nidx] < 0 && labels[nidx] == labels[k]) {
                    comp[nidx] = cid;
                    queue.push(nidx);
                }
            }
        }
        comp_size.push_back(size);
        comp_label.push_back(labels[k]);
    }
    const std::size_t ncomp = comp_size.size();

    // per label, the largest component survives; smaller ones are orphans
    std::vector<int> main_comp(Q0, -1);
    for (std::size_t cidx = 0; cidx < ncomp; ++cidx) {
        const int lab = comp_label[cidx];
        if (main_comp[static_cast<std::size_t>(lab)] < 0 ||
            comp_size[cidx] > comp_size[static_cast<std::size_t>(main_comp[static_cast<std::size_t>(lab)])])
            main_comp[static_cast<std::size_t>(lab)] = static_cast<int>(cidx);
    }

    std::vector<std::vector<std::size_t>> comp_pixels(ncomp);
    for (std::size_t k = 0; k < n; ++k)
        comp_pixels[static_cast<std::size_t>(comp[k])].push_back(k);

    // orphans below a quarter of the nominal area merge into the neighboring
    // component they touch the most; larger orphans become superpixels of
    // their own
    const double orphan_threshold = S * S / 4.0;
    std::vector<int> merge_into(ncomp);
    std::iota(merge_into.begin(), merge_into.end(), 0);
    std::vector<std::size_t> adjacency(ncomp, 0);
    for (std::size_t cidx = 0; cidx < ncomp; ++cidx) {
        const int lab = comp_label[cidx];
        if (static_cast<int>(cidx) == main_comp[static_cast<std::size_t>(lab)]) continue;
        if (static_cast<double>(comp_size[cidx]) >= orphan_threshold) continue;
        // dominant neighbour by boundary adjacency count
        std::fill(adjacency.begin(), adjacency.end(), 0);
        for (std::size_t k : comp_pixels[cidx]) {
            const long r = static_cast<long>(k / W), c = static_cast<long>(k % W);
            const long dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
            for (int d = 0; d < 4; ++d) {
                const long rr = r + dr[d], cc = c + dc[d];
                if (rr < 0 || cc < 0 || rr >= static_cast<long>(H) || cc >= static_cast<long>(W))
                    continue;
                const int nc = comp[static_cast<std::size_t>(rr) * W + static_cast<std::size_t>(cc)];
                if (nc != static_cast<int>(cidx)) ++adjacency[static_cast<std::size_t>(nc)];
            }
        }
        int best = -1;
        std::size_t best_count = 0;
        for (std::size_t oc = 0; oc < ncomp; ++oc)
            if (oc != cidx && adjacency[oc] > best_count) {
                best_count = adjacency[oc];
                best = static_cast<int>(oc);
            }
        if (best >= 0) merge_into[cidx] = best;
    }
    // resolve merge chains; mutually adjacent orphans can form a cycle, in
    // which case the lowest component index of the cycle becomes the root
    auto resolve = [&](int start) {
        std::vector<int> path;
        int cur = start;
        while (merge_into[static_cast<std::size_t>(cur)] != cur) {
            const auto it = std::find(path.begin(), path.end(), cur);
            if (it != path.end()) {
                int root = cur;
                for (auto jt = it; jt != path.end(); ++jt) root = std::min(root, *jt);
                merge_into[static_cast<std::size_t>(root)] = root;
                for (int x : path) merge_into[static_cast<std::size_t>(x)] = root;
                return root;
            }
            path.push_back(cur);
            cur = merge_into[static_cast<std::size_t>(cur)];
        }
        for (int x : path) merge_into[static_cast<std::size_t>(x)] = cur;
        return cur;
    };

    // dense relabel in raster order of resolved roots
    std::vector<int> root_to_final(ncomp, -1);
    Segmentation seg;
    seg.height = H;
    seg.width = W;
    for (const Cluster& cl : seeds_snapshot) seg.initial_seeds.push_back({cl.row, cl.col});
    seg.labels.assign(n, -1);
    int next_id = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const int root = resolve(comp[k]);
        if (root_to_final[static_cast<std::size_t>(root)] < 0)
            root_to_final[static_cast<std::size_t>(root)] = next_id++;
        seg.labels[k] = root_to_final[static_cast<std::size_t>(root)];
    }
    seg.superpixels.resize(static_cast<std::size_t>(next_id));
    for (std::size_t k = 0; k < n; ++k)
        seg.superpixels[static_cast<std::size_t>(seg.labels[k])].members.push_back(k);
    for (auto& sp : seg.superpixels) sp.center = center_pixel(sp.members, W);
    seg.validate();
    return seg;
}

}  // namespace unmix
