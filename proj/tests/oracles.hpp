// Independent brute-force references used to check the library. Everything
// here is written as plain per-pixel loops with long double accumulation and
// deliberately shares no code with the implementation under test.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "octcff/image.hpp"

namespace oracle {

struct Grid {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;
    double at(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }
};

inline Grid from_image(const octcff::Image& img) {
    return Grid{img.rows, img.cols, img.pixels};
}

// mean/variance of the clipped window around (i,j), optionally restricted to
// pixels whose label equals the center's
inline void window_stats(const Grid& g, const std::vector<int>* labels,
                         int i, int j, int n1, int n2,
                         double& mean, double& var, int& count) {
    const int hr = n1 / 2, hc = n2 / 2;
    const int center_label =
        labels ? (*labels)[static_cast<size_t>(i) * g.cols + j] : 0;
    long double s = 0, s2 = 0;
    count = 0;
    for (int r = i - hr; r <= i + hr; ++r) {
        if (r < 0 || r >= g.rows) continue;
        for (int c = j - hc; c <= j + hc; ++c) {
            if (c < 0 || c >= g.cols) continue;
            if (labels && (*labels)[static_cast<size_t>(r) * g.cols + c] != center_label)
                continue;
            long double x = g.at(r, c);
            s += x;
            s2 += x * x;
            ++count;
        }
    }
    mean = static_cast<double>(s / count);
    long double m = s / count;
    var = std::max(0.0, static_cast<double>(s2 / count - m * m));
}

inline void local_stats(const Grid& g, int n1, int n2,
                        std::vector<double>& mean, std::vector<double>& var) {
    mean.resize(g.v.size());
    var.resize(g.v.size());
    for (int i = 0; i < g.rows; ++i)
        for (int j = 0; j < g.cols; ++j) {
            int cnt;
            window_stats(g, nullptr, i, j, n1, n2,
                         mean[static_cast<size_t>(i) * g.cols + j],
                         var[static_cast<size_t>(i) * g.cols + j], cnt);
        }
}

inline void masked_stats(const Grid& g, const std::vector<int>& labels, int n1, int n2,
                         std::vector<double>& mean, std::vector<double>& var,
                         std::vector<int>& count) {
    mean.resize(g.v.size());
    var.resize(g.v.size());
    count.resize(g.v.size());
    for (int i = 0; i < g.rows; ++i)
        for (int j = 0; j < g.cols; ++j) {
            size_t p = static_cast<size_t>(i) * g.cols + j;
            window_stats(g, &labels, i, j, n1, n2, mean[p], var[p], count[p]);
        }
}

// full cluster-masked Wiener reference
inline std::vector<double> cff(const Grid& g, const std::vector<int>& labels,
                               int k, int n1, int n2) {
    std::vector<double> mean, var;
    std::vector<int> count;
    masked_stats(g, labels, n1, n2, mean, var, count);
    std::vector<long double> noise(k + 1, 0);
    std::vector<long long> members(k + 1, 0);
    for (size_t p = 0; p < g.v.size(); ++p) {
        noise[labels[p]] += var[p];
        ++members[labels[p]];
    }
    for (int l = 1; l <= k; ++l)
        if (members[l] > 0) noise[l] /= members[l];
    std::vector<double> out(g.v.size());
    for (size_t p = 0; p < g.v.size(); ++p) {
        double gain = 0.0;
        if (var[p] > 0.0)
            gain = std::clamp((var[p] - static_cast<double>(noise[labels[p]])) / var[p],
                              0.0, 1.0);
        out[p] = mean[p] + gain * (g.v[p] - mean[p]);
    }
    return out;
}

inline void region_stats(const Grid& g, int top, int left, int h, int w,
                         double& mean, double& var) {
    long double s = 0, s2 = 0;
    for (int i = top; i < top + h; ++i)
        for (int j = left; j < left + w; ++j) {
            long double x = g.at(i, j);
            s += x;
            s2 += x * x;
        }
    long double n = static_cast<long double>(h) * w;
    mean = static_cast<double>(s / n);
    var = static_cast<double>(s2 / n - (s / n) * (s / n));
}

inline double snr(const Grid& g, int btop, int bleft, int bh, int bw) {
    double mb, vb;
    region_stats(g, btop, bleft, bh, bw, mb, vb);
    double peak = 0.0;
    for (int i = 0; i < g.rows; ++i)
        for (int j = 0; j < g.cols; ++j) {
            bool in_bg = i >= btop && i < btop + bh && j >= bleft && j < bleft + bw;
            if (!in_bg) peak = std::max(peak, g.at(i, j) * g.at(i, j));
        }
    return 10.0 * std::log10(peak / vb);
}

struct Rect { int top, left, h, w; };

inline double cnr(const Grid& g, const std::vector<Rect>& rois, const Rect& bg) {
    double mb, vb;
    region_stats(g, bg.top, bg.left, bg.h, bg.w, mb, vb);
    long double sum = 0;
    for (const auto& r : rois) {
        double mr, vr;
        region_stats(g, r.top, r.left, r.h, r.w, mr, vr);
        sum += (mr - mb) / std::sqrt(vr + vb);
    }
    return static_cast<double>(sum / rois.size());
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    long double ma = 0, mb = 0;
    for (size_t i = 0; i < a.size(); ++i) { ma += a[i]; mb += b[i]; }
    ma /= a.size();
    mb /= b.size();
    long double sab = 0, saa = 0, sbb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        long double x = a[i] - ma, y = b[i] - mb;
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    return static_cast<double>(sab / std::sqrt(saa * sbb));
}

inline double epi(const Grid& a, const Grid& b) {
    std::vector<double> la, lb;
    for (int i = 1; i < a.rows - 1; ++i)
        for (int j = 1; j < a.cols - 1; ++j) {
            la.push_back(a.at(i - 1, j) + a.at(i + 1, j) + a.at(i, j - 1) +
                         a.at(i, j + 1) - 4 * a.at(i, j));
            lb.push_back(b.at(i - 1, j) + b.at(i + 1, j) + b.at(i, j - 1) +
                         b.at(i, j + 1) - 4 * b.at(i, j));
        }
    return pearson(la, lb);
}

// SSIM reference: same definition (11x11 Gaussian sigma 1.5, clipped window,
// renormalized weights), computed with naive loops and long doubles
inline double ssim(const Grid& a, const Grid& b) {
    const double c1 = 6.5025, c2 = 58.5225;
    long double total = 0;
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) {
            long double wsum = 0, mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
            for (int r = i - 5; r <= i + 5; ++r) {
                if (r < 0 || r >= a.rows) continue;
                for (int c = j - 5; c <= j + 5; ++c) {
                    if (c < 0 || c >= a.cols) continue;
                    long double w =
                        std::exp(-((r - i) * (r - i) + (c - j) * (c - j)) / 4.5L);
                    long double x = a.at(r, c), y = b.at(r, c);
                    wsum += w;
                    mx += w * x;
                    my += w * y;
                    sxx += w * x * x;
                    syy += w * y * y;
                    sxy += w * x * y;
                }
            }
            mx /= wsum;
            my /= wsum;
            long double vx = sxx / wsum - mx * mx;
            long double vy = syy / wsum - my * my;
            long double cov = sxy / wsum - mx * my;
            total += ((2 * mx * my + c1) * (2 * cov + c2)) /
                     ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    return static_cast<double>(total / (static_cast<long double>(a.rows) * a.cols));
}

// log-linear least-squares decay-rate fit for a single column, mu in mm^-1
inline double log_slope_mu(const std::vector<double>& column, double delta_mm) {
    long double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (size_t i = 0; i < column.size(); ++i) {
        if (column[i] <= 0) continue;
        long double x = i * delta_mm, y = std::log(column[i]);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
        ++n;
    }
    long double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return static_cast<double>(-slope / 2.0L);
}

// best pixel agreement between two label maps over all label permutations
// (k small enough to enumerate)
inline double best_permutation_agreement(const std::vector<int>& truth,
                                         const std::vector<int>& pred, int k) {
    std::vector<long long> confusion(static_cast<size_t>(k) * k, 0);
    for (size_t p = 0; p < truth.size(); ++p)
        ++confusion[static_cast<size_t>(truth[p] - 1) * k + (pred[p] - 1)];
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    long long best = 0;
    do {
        long long hits = 0;
        for (int t = 0; t < k; ++t)
            hits += confusion[static_cast<size_t>(t) * k + perm[t]];
        best = std::max(best, hits);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(truth.size());
}

// deterministic random image / label map generators for the oracle suites
inline octcff::Image random_image(int rows, int cols, uint64_t seed,
                                  double lo = 0.0, double hi = 1.0) {
    octcff::Image img(rows, cols);
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    for (double& v : img.pixels) v = u(gen);
    return img;
}

inline octcff::LabelMap random_labels(int rows, int cols, int k, uint64_t seed) {
    octcff::LabelMap lm(rows, cols, k);
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<int> u(1, k);
    for (int& l : lm.labels) l = u(gen);
    return lm;
}

inline double rel_err(double got, double want) {
    return std::abs(got - want) / std::max(1.0, std::abs(want));
}

} // namespace oracle
