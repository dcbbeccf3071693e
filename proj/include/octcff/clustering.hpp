// Per-pixel feature construction, Ward-linkage agglomerative clustering and
// spatial label regularization.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "octcff/image.hpp"
#include "octcff/optics.hpp"

namespace octcff {

/// Per-pixel (intensity, attenuation) features, z-score normalized over the
/// image and pre-multiplied by the clustering weights.
struct FeatureField {
    int rows = 0;
    int cols = 0;
    double w_att = 0.7;  // w1, attenuation weight
    double w_int = 0.3;  // w2, intensity weight
    std::vector<double> f_int;
    std::vector<double> f_att;

    size_t size() const { return f_int.size(); }
};

/// z-score each channel over the whole image (a constant channel maps to 0),
/// then weight: w1 on attenuation, w2 on intensity. Weights are renormalized
/// to sum to 1.
inline FeatureField build_features(const Image& img, const AttenuationMap& att,
                                   double w1, double w2) {
    if (img.rows != att.rows || img.cols != att.cols)
        throw std::invalid_argument("build_features: dimension mismatch");
    if (w1 < 0.0 || w2 < 0.0 || w1 + w2 <= 0.0)
        throw std::invalid_argument("build_features: weights must be >= 0 with positive sum");
    const double wsum = w1 + w2;
    FeatureField ff;
    ff.rows = img.rows;
    ff.cols = img.cols;
    ff.w_att = w1 / wsum;
    ff.w_int = w2 / wsum;
    ff.f_int.resize(img.size());
    ff.f_att.resize(img.size());

    auto zscore = [](const std::vector<double>& src, std::vector<double>& dst, double w) {
        const double n = static_cast<double>(src.size());
        double s = 0.0;
        for (double v : src) s += v;
        const double mean = s / n;
        double ss = 0.0;
        for (double v : src) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / n);
        if (sd <= 0.0) {
            std::fill(dst.begin(), dst.end(), 0.0);
        } else {
            for (size_t i = 0; i < src.size(); ++i)
                dst[i] = w * (src[i] - mean) / sd;
        }
    };
    zscore(img.pixels, ff.f_int, ff.w_int);
    zscore(att.values, ff.f_att, ff.w_att);
    return ff;
}

namespace detail {

// Exact agglomerative Ward on n points (squared-Euclidean dissimilarities,
// Lance-Williams update), merging the globally closest pair each step until
// k clusters remain. Returns a cluster id in [0,k) per point.
// Ties resolve to the lowest index pair, so the result is deterministic.
inline std::vector<int> ward_exact(const std::vector<double>& fi,
                                   const std::vector<double>& fa, int k) {
    const int n = static_cast<int>(fi.size());
    std::vector<double> d(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double di = fi[i] - fi[j], da = fa[i] - fa[j];
            double v = di * di + da * da;
            d[static_cast<size_t>(i) * n + j] = v;
            d[static_cast<size_t>(j) * n + i] = v;
        }

    std::vector<double> sz(n, 1.0);
    std::vector<bool> active(n, true);
    // nearest active neighbor with higher index, lazily refreshed
    std::vector<int> nn(n, -1);
    std::vector<double> nnd(n, std::numeric_limits<double>::infinity());
    auto refresh = [&](int i) {
        nn[i] = -1;
        nnd[i] = std::numeric_limits<double>::infinity();
        for (int j = i + 1; j < n; ++j)
            if (active[j] && d[static_cast<size_t>(i) * n + j] < nnd[i]) {
                nnd[i] = d[static_cast<size_t>(i) * n + j];
                nn[i] = j;
            }
    };
    for (int i = 0; i < n; ++i) refresh(i);

    // parent links for final labeling
    std::vector<int> parent(n);
    for (int i = 0; i < n; ++i) parent[i] = i;

    int remaining = n;
    while (remaining > k) {
        int best = -1;
        double bestd = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i)
            if (active[i] && nn[i] >= 0 && nnd[i] < bestd) {
                bestd = nnd[i];
                best = i;
            }
        const int a = best, b = nn[best];
        // merge b into a (a < b); Lance-Williams Ward update
        const double dab = d[static_cast<size_t>(a) * n + b];
        for (int l = 0; l < n; ++l) {
            if (!active[l] || l == a || l == b) continue;
            const double dal = d[static_cast<size_t>(a) * n + l];
            const double dbl = d[static_cast<size_t>(b) * n + l];
            const double v = ((sz[a] + sz[l]) * dal + (sz[b] + sz[l]) * dbl -
                              sz[l] * dab) / (sz[a] + sz[b] + sz[l]);
            d[static_cast<size_t>(a) * n + l] = v;
            d[static_cast<size_t>(l) * n + a] = v;
        }
        sz[a] += sz[b];
        active[b] = false;
        parent[b] = a;
        --remaining;
        refresh(a);
        for (int i = 0; i < b; ++i) {
            if (!active[i] || i == a) continue;
            if (nn[i] == a || nn[i] == b)
                refresh(i);  // cached distance may be stale after the merge
            else if (i < a && d[static_cast<size_t>(i) * n + a] < nnd[i]) {
                nnd[i] = d[static_cast<size_t>(i) * n + a];
                nn[i] = a;
            }
        }
    }

    auto root = [&](int i) {
        while (parent[i] != i) i = parent[i];
        return i;
    };
    std::vector<int> cluster_of(n, -1);
    int next = 0;
    std::map<int, int> id;
    for (int i = 0; i < n; ++i) {
        int r = root(i);
        auto it = id.find(r);
        if (it == id.end()) it = id.emplace(r, next++).first;
        cluster_of[i] = it->second;
    }
    return cluster_of;
}

// uniform sample without replacement via partial Fisher-Yates, seeded
inline std::vector<size_t> sample_indices(size_t n, size_t m, uint64_t seed) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    std::mt19937_64 gen(mix64(seed));
    for (size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(gen)]);
    }
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace detail

/// Seeded-subsample Ward clustering with nearest-centroid assignment.
/// Clusters a uniform random sample of min(sample_size, N) pixels exactly,
/// assigns every pixel to the nearest cluster centroid (ties to the lowest
/// index), then relabels so label 1 is the brightest cluster.
inline LabelMap ward_cluster(const FeatureField& ff, int k, size_t sample_size,
                             uint64_t seed) {
    const size_t n = ff.size();
    if (k < 1) throw std::invalid_argument("ward_cluster: k must be >= 1");
    const size_t m = std::min(sample_size, n);
    if (static_cast<size_t>(k) > m)
        throw std::invalid_argument("ward_cluster: k exceeds sample size");

    std::vector<size_t> idx = detail::sample_indices(n, m, seed);
    std::vector<double> si(m), sa(m);
    for (size_t i = 0; i < m; ++i) {
        si[i] = ff.f_int[idx[i]];
        sa[i] = ff.f_att[idx[i]];
    }
    {
        std::vector<std::pair<double, double>> uniq(m);
        for (size_t i = 0; i < m; ++i) uniq[i] = {si[i], sa[i]};
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        if (static_cast<size_t>(k) > uniq.size())
            throw std::runtime_error("degenerate features");
    }

    std::vector<int> cluster_of = detail::ward_exact(si, sa, k);

    // centroids in feature space
    std::vector<double> ci(k, 0.0), ca(k, 0.0), cnt(k, 0.0);
    for (size_t i = 0; i < m; ++i) {
        ci[cluster_of[i]] += si[i];
        ca[cluster_of[i]] += sa[i];
        cnt[cluster_of[i]] += 1.0;
    }
    for (int c = 0; c < k; ++c) {
        ci[c] /= cnt[c];
        ca[c] /= cnt[c];
    }

    // label 1 = brightest cluster (largest intensity-feature centroid)
    std::vector<int> order(k);
    for (int c = 0; c < k; ++c) order[c] = c;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return ci[a] > ci[b]; });
    std::vector<int> label_of(k);
    for (int rank = 0; rank < k; ++rank) label_of[order[rank]] = rank + 1;

    LabelMap lm(ff.rows, ff.cols, k);
    parallel_for(ff.rows, [&](int i) {
        for (int j = 0; j < ff.cols; ++j) {
            const size_t p = static_cast<size_t>(i) * ff.cols + j;
            int best = 0;
            double bestd = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                double di = ff.f_int[p] - ci[c], da = ff.f_att[p] - ca[c];
                double v = di * di + da * da;
                if (v < bestd) {
                    bestd = v;
                    best = c;
                }
            }
            lm.labels[p] = label_of[best];
        }
    });
    return lm;
}

enum class SmoothMode { Max, Majority };

/// Spatial label regularization over a border-clipped window.
/// Max takes the literal maximum label; Majority takes the most frequent
/// label, ties to the lowest label.
inline LabelMap label_smooth(const LabelMap& lm, const WindowSpec& w, SmoothMode mode) {
    w.validate();
    LabelMap out(lm.rows, lm.cols, lm.k);
    const int hr = w.n1 / 2, hc = w.n2 / 2;
    parallel_for(lm.rows, [&](int i) {
        std::vector<int> counts(lm.k + 1, 0);
        const int r0 = std::max(0, i - hr), r1 = std::min(lm.rows - 1, i + hr);
        for (int j = 0; j < lm.cols; ++j) {
            const int c0 = std::max(0, j - hc), c1 = std::min(lm.cols - 1, j + hc);
            if (mode == SmoothMode::Max) {
                int mx = 0;
                for (int r = r0; r <= r1; ++r)
                    for (int c = c0; c <= c1; ++c)
                        mx = std::max(mx, lm.at(r, c));
                out.at(i, j) = mx;
            } else {
                std::fill(counts.begin(), counts.end(), 0);
                for (int r = r0; r <= r1; ++r)
                    for (int c = c0; c <= c1; ++c)
                        ++counts[lm.at(r, c)];
                int best = 1;
                for (int l = 2; l <= lm.k; ++l)
                    if (counts[l] > counts[best]) best = l;
                out.at(i, j) = best;
            }
        }
    });
    return out;
}

} // namespace octcff
