// Adaptive Wiener baseline and the cluster-masked filter: window statistics
// restricted to same-cluster neighbors, one noise estimate per cluster.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "octcff/image.hpp"

namespace octcff {

/// Per-pixel cluster-masked window statistics.
struct MaskedStats {
    Image mean;
    Image var;
    std::vector<int> count;  // in-cluster neighbor count p, >= 1
};

/// One noise variance per cluster label (index 1..k; slot 0 unused).
struct ClusterNoiseProfile {
    std::vector<double> sigma2;
    std::vector<long long> cluster_size;

    double for_label(int label) const { return sigma2[label]; }
};

/// Adaptive Wiener: I^ = mu + max(0, sigma^2 - v^2)/sigma^2 * (I - mu), with
/// local mean/variance from local_stats. When no noise variance is supplied
/// the mean of the local-variance map is used. Gain is 0 where sigma^2 = 0.
inline Image wiener(const Image& img, const WindowSpec& w,
                    std::optional<double> noise_var = std::nullopt) {
    if (noise_var && (*noise_var < 0.0 || !std::isfinite(*noise_var)))
        throw std::invalid_argument("wiener: noise variance must be finite and >= 0");
    LocalStats st = local_stats(img, w);
    double v2;
    if (noise_var) {
        v2 = *noise_var;
    } else {
        double s = 0.0;
        for (double v : st.var.pixels) s += v;
        v2 = s / static_cast<double>(st.var.size());
    }
    Image out = st.mean;
    for (size_t i = 0; i < img.size(); ++i) {
        const double s2 = st.var.pixels[i];
        const double gain = s2 > 0.0 ? std::clamp((s2 - v2) / s2, 0.0, 1.0) : 0.0;
        out.pixels[i] = st.mean.pixels[i] + gain * (img.pixels[i] - st.mean.pixels[i]);
    }
    return out;
}

/// Mean and population variance over the window pixels sharing the center
/// pixel's label, normalized by their count. Windows clip at borders; the
/// center always participates, so count >= 1.
inline MaskedStats masked_stats(const Image& img, const LabelMap& lm, const WindowSpec& w) {
    if (!lm.same_shape(img))
        throw std::invalid_argument("masked_stats: dimension mismatch");
    w.validate();
    MaskedStats out{Image(img.rows, img.cols, 0.0, img.axial_um, img.lateral_um),
                    Image(img.rows, img.cols, 0.0, img.axial_um, img.lateral_um),
                    std::vector<int>(img.size(), 0)};
    const int hr = w.n1 / 2, hc = w.n2 / 2;
    parallel_for(img.rows, [&](int i) {
        const int r0 = std::max(0, i - hr), r1 = std::min(img.rows - 1, i + hr);
        for (int j = 0; j < img.cols; ++j) {
            const int c0 = std::max(0, j - hc), c1 = std::min(img.cols - 1, j + hc);
            const int label = lm.at(i, j);
            double s = 0.0, s2 = 0.0;
            int p = 0;
            for (int r = r0; r <= r1; ++r)
                for (int c = c0; c <= c1; ++c) {
                    if (lm.at(r, c) != label) continue;
                    const double v = img.at(r, c);
                    s += v;
                    s2 += v * v;
                    ++p;
                }
            const double m = s / p;
            out.mean.at(i, j) = m;
            out.var.at(i, j) = std::max(0.0, s2 / p - m * m);
            out.count[static_cast<size_t>(i) * img.cols + j] = p;
        }
    });
    return out;
}

/// Per-cluster noise variance: the mean of the masked local variances over
/// all pixels of the cluster.
inline ClusterNoiseProfile cluster_noise(const MaskedStats& ms, const LabelMap& lm) {
    if (!lm.same_shape(ms.var))
        throw std::invalid_argument("cluster_noise: dimension mismatch");
    ClusterNoiseProfile prof;
    prof.sigma2.assign(lm.k + 1, 0.0);
    prof.cluster_size.assign(lm.k + 1, 0);
    for (size_t i = 0; i < lm.labels.size(); ++i) {
        prof.sigma2[lm.labels[i]] += ms.var.pixels[i];
        ++prof.cluster_size[lm.labels[i]];
    }
    for (int l = 1; l <= lm.k; ++l)
        if (prof.cluster_size[l] > 0)
            prof.sigma2[l] /= static_cast<double>(prof.cluster_size[l]);
    return prof;
}

/// Cluster-masked adaptive Wiener: per pixel with label k,
///   gain = max(0, v_k^2 - sigma_k^2) / v_k^2   (0 where v_k^2 = 0)
///   I^   = mean_k + gain * (I - mean_k)
inline Image cff_filter(const Image& img, const LabelMap& lm, const WindowSpec& w) {
    MaskedStats ms = masked_stats(img, lm, w);
    ClusterNoiseProfile prof = cluster_noise(ms, lm);
    Image out = ms.mean;
    for (size_t i = 0; i < img.size(); ++i) {
        const double v2 = ms.var.pixels[i];
        const double n2 = prof.sigma2[lm.labels[i]];
        const double gain = v2 > 0.0 ? std::clamp((v2 - n2) / v2, 0.0, 1.0) : 0.0;
        out.pixels[i] = ms.mean.pixels[i] + gain * (img.pixels[i] - ms.mean.pixels[i]);
    }
    return out;
}

} // namespace octcff
