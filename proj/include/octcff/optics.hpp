// Attenuation-coefficient estimation, TiO2 phantom arithmetic and
// synthetic multilayer phantom generation.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "octcff/image.hpp"

namespace octcff {

/// Per-pixel attenuation coefficient in mm^-1, same grid as the source image.
struct AttenuationMap {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;

    AttenuationMap() = default;
    AttenuationMap(int r, int c)
        : rows(r), cols(c), values(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int i, int j) { return values[static_cast<size_t>(i) * cols + j]; }
    double at(int i, int j) const { return values[static_cast<size_t>(i) * cols + j]; }
};

struct LayerSpec {
    double thickness_um = 0.0;        // > 0
    double reduced_scattering = 0.0;  // mu's, cm^-1
    double backreflection = 1.0;      // rho in (0,1]
    double attenuation = -1.0;        // mu, mm^-1; < 0 means derive from mu's

    /// Decay constant used for the phantom, mm^-1. Derived from mu's via
    /// mu = mu's/(1-g) when not supplied directly; absorption neglected.
    double decay_mm(double g = 0.715) const {
        if (attenuation >= 0.0) return attenuation;
        return reduced_scattering / (1.0 - g) / 10.0;  // cm^-1 -> mm^-1
    }
};

struct PhantomSpec {
    std::vector<LayerSpec> layers;  // top to bottom
    int rows = 0;
    int cols = 0;
    double axial_um = 10.0;
    double lateral_um = 7.5;
    double incident_intensity = 1.0;  // I0
    double speckle_shape = 1.0;       // Gamma shape; 1 = fully developed speckle
    bool noiseless = false;
    uint64_t rng_seed = 0;
    double anisotropy = 0.715;

    void validate() const {
        if (layers.empty()) throw std::invalid_argument("PhantomSpec: no layers");
        if (rows < 1 || cols < 1)
            throw std::invalid_argument("PhantomSpec: rows and cols must be >= 1");
        if (axial_um <= 0.0) throw std::invalid_argument("PhantomSpec: axial_um must be > 0");
        if (incident_intensity <= 0.0)
            throw std::invalid_argument("PhantomSpec: incident_intensity must be > 0");
        if (!noiseless && speckle_shape <= 0.0)
            throw std::invalid_argument("PhantomSpec: speckle_shape must be > 0");
        for (const auto& l : layers) {
            if (l.thickness_um <= 0.0)
                throw std::invalid_argument("PhantomSpec: layer thickness must be > 0");
            if (l.backreflection <= 0.0 || l.backreflection > 1.0)
                throw std::invalid_argument("PhantomSpec: backreflection must be in (0,1]");
            if (l.decay_mm(anisotropy) < 0.0)
                throw std::invalid_argument("PhantomSpec: attenuation must be >= 0");
        }
    }
};

/// TiO2-in-polyurethane inputs for the sphere-concentration arithmetic.
struct MieInputs {
    double tio2_mass_g = 0.0;
    double polyurethane_volume_cm3 = 0.0;
    double sphere_radius_um = 0.075;
    double tio2_density = 4.23;  // g/cm^3
    double anisotropy = 0.715;

    void validate() const {
        if (tio2_mass_g <= 0.0 || polyurethane_volume_cm3 <= 0.0 ||
            sphere_radius_um <= 0.0 || tio2_density <= 0.0)
            throw std::invalid_argument("MieInputs: all fields must be > 0");
        if (anisotropy < 0.0 || anisotropy >= 1.0)
            throw std::invalid_argument("MieInputs: anisotropy must be in [0,1)");
    }
};

// ---------------------------------------------------------------------------

inline constexpr double kAttenuationCapMm = 100.0;  // clamp against signal-floor blowup
inline constexpr double kSignalEps = 1e-12;

/// Depth-resolved per-pixel attenuation estimate:
///   mu[i,j] = I[i,j] / (2 * delta_mm * sum_{l>i} I[l,j]).
/// The last row and columns whose tail sum falls below eps copy the nearest
/// valid value above (or 0 if none). Scale-invariant in the input image.
inline AttenuationMap estimate_attenuation(const Image& img) {
    img.validate();
    if (img.rows < 2)
        throw std::invalid_argument("estimate_attenuation: image needs >= 2 rows");
    bool any_signal = false;
    for (double v : img.pixels)
        if (v >= kSignalEps) { any_signal = true; break; }
    if (!any_signal) throw std::runtime_error("no signal");

    const double delta_mm = img.axial_um / 1000.0;
    AttenuationMap out(img.rows, img.cols);
    parallel_for(img.cols, [&](int j) {
        // tail[i] = sum of I[l,j] for l > i
        double tail = 0.0;
        std::vector<double> mu(img.rows, -1.0);
        for (int i = img.rows - 1; i >= 0; --i) {
            if (i < img.rows - 1 && tail >= kSignalEps)
                mu[i] = std::min(kAttenuationCapMm,
                                 std::max(0.0, img.at(i, j) / (2.0 * delta_mm * tail)));
            tail += img.at(i, j);
        }
        double last_valid = 0.0;
        for (int i = 0; i < img.rows; ++i) {
            if (mu[i] >= 0.0) last_valid = mu[i];
            out.at(i, j) = (mu[i] >= 0.0) ? mu[i] : last_valid;
        }
    });
    return out;
}

/// Cross-check variant: per-pixel log-linear slope fit over a vertical window
/// of fit_rows rows centered on the pixel; mu = -slope / (2 * delta_mm).
inline AttenuationMap estimate_attenuation_logslope(const Image& img, int fit_rows = 15) {
    img.validate();
    if (img.rows < 2)
        throw std::invalid_argument("estimate_attenuation: image needs >= 2 rows");
    if (fit_rows < 2) throw std::invalid_argument("fit_rows must be >= 2");
    const double delta_mm = img.axial_um / 1000.0;
    const int half = fit_rows / 2;
    AttenuationMap out(img.rows, img.cols);
    parallel_for(img.cols, [&](int j) {
        for (int i = 0; i < img.rows; ++i) {
            int r0 = std::max(0, i - half), r1 = std::min(img.rows - 1, i + half);
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            int n = 0;
            for (int r = r0; r <= r1; ++r) {
                double v = img.at(r, j);
                if (v < kSignalEps) continue;
                double x = r * delta_mm, y = std::log(v);
                sx += x; sy += y; sxx += x * x; sxy += x * y;
                ++n;
            }
            double mu = 0.0;
            if (n >= 2) {
                double denom = n * sxx - sx * sx;
                if (denom > 0.0) {
                    double slope = (n * sxy - sx * sy) / denom;
                    mu = std::clamp(-slope / 2.0, 0.0, kAttenuationCapMm);
                }
            }
            out.at(i, j) = mu;
        }
    });
    return out;
}

/// mu's = mu_s * (1 - g)
inline double reduced_scattering(double mu_s, double g) {
    if (mu_s < 0.0) throw std::invalid_argument("mu_s must be >= 0");
    if (g < 0.0 || g >= 1.0) throw std::invalid_argument("g must be in [0,1)");
    return mu_s * (1.0 - g);
}

struct Tio2Concentration {
    double sphere_volume_um3 = 0.0;  // (4/3) pi r^3
    double tio2_volume_cm3 = 0.0;    // m / rho
    double sphere_count = 0.0;       // tio2 volume over single-sphere volume
    double per_cm3 = 0.0;            // sphere_count / polyurethane volume
};

inline Tio2Concentration tio2_concentration(const MieInputs& inp) {
    inp.validate();
    Tio2Concentration c;
    c.sphere_volume_um3 = (4.0 / 3.0) * std::numbers::pi *
                          inp.sphere_radius_um * inp.sphere_radius_um * inp.sphere_radius_um;
    c.tio2_volume_cm3 = inp.tio2_mass_g / inp.tio2_density;
    const double sphere_volume_cm3 = c.sphere_volume_um3 * 1e-12;  // 1 um^3 = 1e-12 cm^3
    c.sphere_count = c.tio2_volume_cm3 / sphere_volume_cm3;
    c.per_cm3 = c.sphere_count / inp.polyurethane_volume_cm3;
    return c;
}

// ---------------------------------------------------------------------------
// Phantom synthesis

struct PhantomResult {
    Image noisy;
    Image clean;
    LabelMap truth;
};

namespace detail {

// splitmix64; decorrelates per-row streams derived from one seed
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

} // namespace detail

/// Noiseless layered decay, ground-truth labels, and the speckled image.
/// clean[i,*] = I0 * rho_layer * exp(-2 * accumulated mu * z); the exponent
/// accumulates through the layers above, so it is continuous across
/// boundaries. Speckle is i.i.d. multiplicative Gamma with mean 1; rows use
/// seed-derived independent streams so output is deterministic.
inline PhantomResult synthesize_phantom(const PhantomSpec& spec) {
    spec.validate();
    PhantomResult res{Image(spec.rows, spec.cols, 0.0, spec.axial_um, spec.lateral_um),
                      Image(spec.rows, spec.cols, 0.0, spec.axial_um, spec.lateral_um),
                      LabelMap(spec.rows, spec.cols, static_cast<int>(spec.layers.size()))};

    // layer start rows (boundaries rounded to integer rows)
    std::vector<int> start_row(spec.layers.size());
    double z_um = 0.0;
    for (size_t l = 0; l < spec.layers.size(); ++l) {
        start_row[l] = static_cast<int>(std::lround(z_um / spec.axial_um));
        z_um += spec.layers[l].thickness_um;
    }

    const double delta_mm = spec.axial_um / 1000.0;
    std::vector<double> row_clean(spec.rows);
    std::vector<int> row_label(spec.rows);
    {
        size_t layer = 0;
        double exponent = 0.0;  // accumulated 2*mu*z
        double prev_z = 0.0;
        for (int i = 0; i < spec.rows; ++i) {
            const double z = i * delta_mm;
            while (layer + 1 < spec.layers.size() && i >= start_row[layer + 1]) {
                exponent += 2.0 * spec.layers[layer].decay_mm(spec.anisotropy) *
                            (start_row[layer + 1] * delta_mm - prev_z);
                prev_z = start_row[layer + 1] * delta_mm;
                ++layer;
            }
            const double e = exponent +
                2.0 * spec.layers[layer].decay_mm(spec.anisotropy) * (z - prev_z);
            row_clean[i] = spec.incident_intensity *
                           spec.layers[layer].backreflection * std::exp(-e);
            row_label[i] = static_cast<int>(layer) + 1;
        }
    }

    for (int i = 0; i < spec.rows; ++i) {
        std::mt19937_64 gen(detail::mix64(spec.rng_seed ^ detail::mix64(i + 1)));
        std::gamma_distribution<double> gamma(spec.speckle_shape, 1.0 / spec.speckle_shape);
        for (int j = 0; j < spec.cols; ++j) {
            res.clean.at(i, j) = row_clean[i];
            res.truth.at(i, j) = row_label[i];
            res.noisy.at(i, j) = spec.noiseless ? row_clean[i]
                                                : row_clean[i] * gamma(gen);
        }
    }
    return res;
}

/// Pixelwise arithmetic mean of N same-sized frames.
inline Image average_frames(const std::vector<Image>& frames) {
    if (frames.empty()) throw std::invalid_argument("average_frames: no frames");
    Image out = frames[0];
    for (size_t f = 1; f < frames.size(); ++f) {
        if (!frames[f].same_shape(out))
            throw std::invalid_argument("average_frames: dimension mismatch");
        for (size_t i = 0; i < out.size(); ++i)
            out.pixels[i] += frames[f].pixels[i];
    }
    const double inv = 1.0 / static_cast<double>(frames.size());
    for (double& v : out.pixels) v *= inv;
    return out;
}

} // namespace octcff
