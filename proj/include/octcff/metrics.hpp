// SNR, CNR, edge-preservation index and SSIM with the conventions used for
// the before/after de-speckling reports.
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "octcff/image.hpp"

namespace octcff {

struct MetricsReport {
    std::string image;
    double snr_db = 0.0;
    double cnr = 0.0;
    double epi = std::numeric_limits<double>::quiet_NaN();
    double ssim = std::numeric_limits<double>::quiet_NaN();
    int roi_count = 0;
};

namespace detail {

inline void roi_mean_var(const Image& img, const Roi& r, double& mean, double& var) {
    double s = 0.0, s2 = 0.0;
    for (int i = r.top; i < r.top + r.height; ++i)
        for (int j = r.left; j < r.left + r.width; ++j) {
            const double v = img.at(i, j);
            s += v;
            s2 += v * v;
        }
    const double n = static_cast<double>(r.height) * r.width;
    mean = s / n;
    var = std::max(0.0, s2 / n - mean * mean);
}

} // namespace detail

/// SNR = 10 log10(max(I^2) / sigma_b^2); the max is taken outside the
/// background ROI so a hot background pixel cannot define the signal.
inline double snr(const Image& img, const Roi& background) {
    background.validate(img.rows, img.cols);
    double mb, vb;
    detail::roi_mean_var(img, background, mb, vb);
    if (vb <= 0.0) throw std::runtime_error("degenerate background");
    double peak = 0.0;
    bool any = false;
    for (int i = 0; i < img.rows; ++i)
        for (int j = 0; j < img.cols; ++j) {
            if (background.contains(i, j)) continue;
            peak = std::max(peak, img.at(i, j) * img.at(i, j));
            any = true;
        }
    if (!any) {  // background covers the whole image; fall back to global max
        for (double v : img.pixels) peak = std::max(peak, v * v);
    }
    return 10.0 * std::log10(peak / vb);
}

/// CNR = mean over ROIs of (mu_r - mu_b) / sqrt(sigma_r^2 + sigma_b^2).
inline double cnr(const Image& img, const std::vector<Roi>& rois, const Roi& background) {
    if (rois.empty()) throw std::invalid_argument("cnr: need at least one ROI");
    background.validate(img.rows, img.cols);
    double mb, vb;
    detail::roi_mean_var(img, background, mb, vb);
    double sum = 0.0;
    for (const Roi& r : rois) {
        r.validate(img.rows, img.cols);
        double mr, vr;
        detail::roi_mean_var(img, r, mr, vr);
        if (vr + vb <= 0.0) throw std::runtime_error("cnr: zero variance in ROI pair");
        sum += (mr - mb) / std::sqrt(vr + vb);
    }
    return sum / static_cast<double>(rois.size());
}

/// Default background: top-left 20x20, clipped to the image.
inline Roi default_background(const Image& img) {
    return Roi{0, 0, std::min(20, img.rows), std::min(20, img.cols)};
}

/// Auto-placement for CNR: `count` equally spaced square ROIs along the
/// image midline.
inline std::vector<Roi> auto_rois(const Image& img, int count = 10) {
    if (count < 1) throw std::invalid_argument("auto_rois: count must be >= 1");
    int side = std::min({20, img.rows, std::max(1, img.cols / (2 * count))});
    std::vector<Roi> rois;
    const int top = std::clamp(img.rows / 2 - side / 2, 0, img.rows - side);
    for (int r = 0; r < count; ++r) {
        // centers spread evenly across the width
        int center = static_cast<int>((r + 0.5) * img.cols / count);
        int left = std::clamp(center - side / 2, 0, img.cols - side);
        rois.push_back(Roi{top, left, side, side});
    }
    return rois;
}

namespace detail {

// 3x3 Laplacian (center -4, 4-neighbors +1), interior pixels only
inline std::vector<double> laplacian_interior(const Image& img) {
    std::vector<double> out;
    if (img.rows < 3 || img.cols < 3) return out;
    out.reserve(static_cast<size_t>(img.rows - 2) * (img.cols - 2));
    for (int i = 1; i < img.rows - 1; ++i)
        for (int j = 1; j < img.cols - 1; ++j)
            out.push_back(img.at(i - 1, j) + img.at(i + 1, j) +
                          img.at(i, j - 1) + img.at(i, j + 1) - 4.0 * img.at(i, j));
    return out;
}

} // namespace detail

/// Edge preservation index: Pearson correlation between the 3x3-Laplacian
/// responses of the two images, border rows/cols excluded.
inline double epi(const Image& original, const Image& filtered) {
    if (!original.same_shape(filtered))
        throw std::invalid_argument("epi: dimension mismatch");
    std::vector<double> la = detail::laplacian_interior(original);
    std::vector<double> lb = detail::laplacian_interior(filtered);
    if (la.empty()) throw std::runtime_error("no edge content");
    const double n = static_cast<double>(la.size());
    double ma = 0.0, mb = 0.0;
    for (size_t i = 0; i < la.size(); ++i) { ma += la[i]; mb += lb[i]; }
    ma /= n; mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (size_t i = 0; i < la.size(); ++i) {
        const double a = la[i] - ma, b = lb[i] - mb;
        sab += a * b;
        saa += a * a;
        sbb += b * b;
    }
    if (saa <= 0.0 || sbb <= 0.0) throw std::runtime_error("no edge content");
    return sab / std::sqrt(saa * sbb);
}

inline constexpr double kSsimC1 = 6.5025;    // (0.01*255)^2
inline constexpr double kSsimC2 = 58.5225;   // (0.03*255)^2

/// Mean local SSIM with an 11x11 circular-symmetric Gaussian window
/// (sigma 1.5, weights normalized to 1). Inputs are expected on a [0,255]
/// dynamic range to match C1/C2; windows clip at borders with weight
/// renormalization. Symmetric in its arguments.
inline double ssim(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("ssim: dimension mismatch");
    constexpr int kHalf = 5;
    double kernel[2 * kHalf + 1][2 * kHalf + 1];
    {
        double sum = 0.0;
        for (int r = -kHalf; r <= kHalf; ++r)
            for (int c = -kHalf; c <= kHalf; ++c) {
                double v = std::exp(-(r * r + c * c) / (2.0 * 1.5 * 1.5));
                kernel[r + kHalf][c + kHalf] = v;
                sum += v;
            }
        for (auto& row : kernel)
            for (double& v : row) v /= sum;
    }

    std::vector<double> per_row(a.rows, 0.0);
    parallel_for(a.rows, [&](int i) {
        double acc = 0.0;
        for (int j = 0; j < a.cols; ++j) {
            double wsum = 0.0, mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
            const int r0 = std::max(0, i - kHalf), r1 = std::min(a.rows - 1, i + kHalf);
            const int c0 = std::max(0, j - kHalf), c1 = std::min(a.cols - 1, j + kHalf);
            for (int r = r0; r <= r1; ++r)
                for (int c = c0; c <= c1; ++c) {
                    const double w = kernel[r - i + kHalf][c - j + kHalf];
                    const double x = a.at(r, c), y = b.at(r, c);
                    wsum += w;
                    mx += w * x;
                    my += w * y;
                    sxx += w * x * x;
                    syy += w * y * y;
                    sxy += w * x * y;
                }
            mx /= wsum; my /= wsum;
            // no clamping: identical images must give vx = vy = cov exactly
            const double vx = sxx / wsum - mx * mx;
            const double vy = syy / wsum - my * my;
            const double cov = sxy / wsum - mx * my;
            acc += ((2.0 * mx * my + kSsimC1) * (2.0 * cov + kSsimC2)) /
                   ((mx * mx + my * my + kSsimC1) * (vx + vy + kSsimC2));
        }
        per_row[i] = acc;
    });
    double total = 0.0;
    for (double v : per_row) total += v;
    return total / static_cast<double>(a.size());
}

/// SSIM with both images jointly rescaled to [0,255] by their common peak.
/// Keeps symmetry and makes linear-intensity inputs compatible with C1/C2.
inline double ssim_scaled(const Image& a, const Image& b, double* scale_out = nullptr) {
    double peak = 0.0;
    for (double v : a.pixels) peak = std::max(peak, v);
    for (double v : b.pixels) peak = std::max(peak, v);
    const double scale = peak > 0.0 ? 255.0 / peak : 1.0;
    if (scale_out) *scale_out = scale;
    Image as = a, bs = b;
    for (double& v : as.pixels) v *= scale;
    for (double& v : bs.pixels) v *= scale;
    return ssim(as, bs);
}

} // namespace octcff
