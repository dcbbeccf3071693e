// Run configuration, PhantomSpec JSON parsing and the end-to-end CFF
// pipeline used by the CLI and the acceptance suite.
#pragma once

#include <chrono>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "octcff/clustering.hpp"
#include "octcff/filtering.hpp"
#include "octcff/image.hpp"
#include "octcff/metrics.hpp"
#include "octcff/optics.hpp"

namespace octcff {

struct RunConfig {
    int k = 4;
    WindowSpec window{5, 5};
    double w1 = 0.7;  // attenuation weight
    double w2 = 0.3;  // intensity weight
    SmoothMode smooth_mode = SmoothMode::Majority;
    size_t sample_size = 2000;
    uint64_t seed = 0;
    std::optional<double> wiener_noise_var;

    void validate() const {
        if (k < 1) throw std::invalid_argument("config: k must be >= 1");
        window.validate();
        if (w1 < 0.0 || w2 < 0.0 || w1 + w2 <= 0.0)
            throw std::invalid_argument("config: weights must be >= 0 with positive sum");
        if (sample_size < static_cast<size_t>(k))
            throw std::invalid_argument("config: sample_size must be >= k");
    }

    std::string summary() const {
        std::string s = "k=" + std::to_string(k) +
            " window=" + std::to_string(window.n1) + "x" + std::to_string(window.n2) +
            " w1=" + std::to_string(w1) + " w2=" + std::to_string(w2) +
            " smooth=" + (smooth_mode == SmoothMode::Majority ? "majority" : "max") +
            " sample_size=" + std::to_string(sample_size) +
            " seed=" + std::to_string(seed);
        if (wiener_noise_var) s += " wiener_noise_var=" + std::to_string(*wiener_noise_var);
        return s;
    }
};

inline void apply_config_json(RunConfig& cfg, const nlohmann::json& j) {
    if (j.contains("k")) cfg.k = j.at("k").get<int>();
    if (j.contains("window_rows")) cfg.window.n1 = j.at("window_rows").get<int>();
    if (j.contains("window_cols")) cfg.window.n2 = j.at("window_cols").get<int>();
    if (j.contains("w1")) cfg.w1 = j.at("w1").get<double>();
    if (j.contains("w2")) cfg.w2 = j.at("w2").get<double>();
    if (j.contains("smooth")) {
        const auto m = j.at("smooth").get<std::string>();
        if (m == "max") cfg.smooth_mode = SmoothMode::Max;
        else if (m == "majority") cfg.smooth_mode = SmoothMode::Majority;
        else throw std::invalid_argument("config: smooth must be max or majority");
    }
    if (j.contains("sample_size")) cfg.sample_size = j.at("sample_size").get<size_t>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
    if (j.contains("wiener_noise_var"))
        cfg.wiener_noise_var = j.at("wiener_noise_var").get<double>();
}

inline PhantomSpec parse_phantom_spec(const nlohmann::json& j) {
    PhantomSpec spec;
    spec.rows = j.at("rows").get<int>();
    spec.cols = j.at("cols").get<int>();
    if (j.contains("axial_um")) spec.axial_um = j.at("axial_um").get<double>();
    if (j.contains("lateral_um")) spec.lateral_um = j.at("lateral_um").get<double>();
    if (j.contains("incident_intensity"))
        spec.incident_intensity = j.at("incident_intensity").get<double>();
    if (j.contains("speckle_shape")) spec.speckle_shape = j.at("speckle_shape").get<double>();
    if (j.contains("noiseless")) spec.noiseless = j.at("noiseless").get<bool>();
    if (j.contains("rng_seed")) spec.rng_seed = j.at("rng_seed").get<uint64_t>();
    if (j.contains("anisotropy")) spec.anisotropy = j.at("anisotropy").get<double>();
    for (const auto& jl : j.at("layers")) {
        LayerSpec l;
        l.thickness_um = jl.at("thickness_um").get<double>();
        if (jl.contains("reduced_scattering"))
            l.reduced_scattering = jl.at("reduced_scattering").get<double>();
        if (jl.contains("backreflection"))
            l.backreflection = jl.at("backreflection").get<double>();
        if (jl.contains("attenuation")) l.attenuation = jl.at("attenuation").get<double>();
        spec.layers.push_back(l);
    }
    spec.validate();
    return spec;
}

inline PhantomSpec load_phantom_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open phantom spec: " + path);
    nlohmann::json j;
    in >> j;
    return parse_phantom_spec(j);
}

struct CffResult {
    Image filtered;
    LabelMap labels;
    AttenuationMap attenuation;
    // wall-clock per stage, milliseconds
    double ms_attenuation = 0.0;
    double ms_features = 0.0;
    double ms_cluster = 0.0;
    double ms_smooth = 0.0;
    double ms_filter = 0.0;
    double ms_total = 0.0;
};

/// estimate_attenuation -> build_features -> ward_cluster -> label_smooth
/// -> cff_filter, with stage timings.
inline CffResult run_cff(const Image& img, const RunConfig& cfg) {
    cfg.validate();
    using clock = std::chrono::steady_clock;
    auto ms_since = [](clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    };
    CffResult res;
    const auto t_start = clock::now();

    auto t = clock::now();
    res.attenuation = estimate_attenuation(img);
    res.ms_attenuation = ms_since(t);

    t = clock::now();
    FeatureField ff = build_features(img, res.attenuation, cfg.w1, cfg.w2);
    res.ms_features = ms_since(t);

    t = clock::now();
    LabelMap raw = ward_cluster(ff, cfg.k, cfg.sample_size, cfg.seed);
    res.ms_cluster = ms_since(t);

    t = clock::now();
    res.labels = label_smooth(raw, cfg.window, cfg.smooth_mode);
    res.ms_smooth = ms_since(t);

    t = clock::now();
    res.filtered = cff_filter(img, res.labels, cfg.window);
    res.ms_filter = ms_since(t);

    res.ms_total = ms_since(t_start);
    return res;
}

/// Metrics for one image with the toolkit's ROI conventions. EPI/SSIM are
/// filled only when a reference is given.
inline MetricsReport compute_metrics(const Image& img, const Image* reference,
                                     const std::vector<Roi>* rois_opt,
                                     const Roi* background_opt,
                                     const std::string& name) {
    MetricsReport rep;
    rep.image = name;
    const Roi bg = background_opt ? *background_opt : default_background(img);
    const std::vector<Roi> rois = rois_opt ? *rois_opt : auto_rois(img);
    rep.snr_db = snr(img, bg);
    rep.cnr = cnr(img, rois, bg);
    rep.roi_count = static_cast<int>(rois.size());
    if (reference) {
        rep.epi = epi(*reference, img);
        rep.ssim = ssim_scaled(*reference, img);
    }
    return rep;
}

} // namespace octcff
