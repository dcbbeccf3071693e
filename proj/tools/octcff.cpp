// octcff: phantom synthesis, de-speckling and quality-metric reports for
// OCT-style B-scans.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "octcff/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

struct ConfigFlags {
    std::optional<int> k;
    std::optional<std::string> window;
    std::optional<double> w1, w2;
    std::optional<std::string> smooth;
    std::optional<size_t> sample_size;
    std::optional<uint64_t> seed;
    std::optional<double> wiener_noise_var;
    std::optional<std::string> config_path;
};

void add_config_flags(CLI::App* app, ConfigFlags& f) {
    app->add_option("--k", f.k, "cluster count (default 4)");
    app->add_option("--window", f.window, "window as N1xN2 (default 5x5)");
    app->add_option("--w1", f.w1, "attenuation feature weight (default 0.7)");
    app->add_option("--w2", f.w2, "intensity feature weight (default 0.3)");
    app->add_option("--smooth", f.smooth, "label smoothing: majority|max (default majority)");
    app->add_option("--sample-size", f.sample_size, "clustering sample size (default 2000)");
    app->add_option("--seed", f.seed, "RNG seed (default 0)");
    app->add_option("--wiener-noise-var", f.wiener_noise_var,
                    "noise variance for the wiener baseline (default: estimated)");
    app->add_option("--config", f.config_path, "JSON config file");
}

octcff::WindowSpec parse_window(const std::string& s) {
    auto x = s.find('x');
    if (x == std::string::npos) x = s.find('X');
    if (x == std::string::npos)
        throw std::invalid_argument("window must look like 5x5");
    octcff::WindowSpec w{std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
    w.validate();
    return w;
}

// flags override config file overrides built-in defaults
octcff::RunConfig resolve_config(const ConfigFlags& f) {
    octcff::RunConfig cfg;
    if (f.config_path) {
        std::ifstream in(*f.config_path);
        if (!in) throw std::runtime_error("cannot open config: " + *f.config_path);
        nlohmann::json j;
        in >> j;
        octcff::apply_config_json(cfg, j);
    }
    if (f.k) cfg.k = *f.k;
    if (f.window) cfg.window = parse_window(*f.window);
    if (f.w1) cfg.w1 = *f.w1;
    if (f.w2) cfg.w2 = *f.w2;
    if (f.smooth) {
        if (*f.smooth == "max") cfg.smooth_mode = octcff::SmoothMode::Max;
        else if (*f.smooth == "majority") cfg.smooth_mode = octcff::SmoothMode::Majority;
        else throw std::invalid_argument("--smooth must be max or majority");
    }
    if (f.sample_size) cfg.sample_size = *f.sample_size;
    if (f.seed) cfg.seed = *f.seed;
    if (f.wiener_noise_var) cfg.wiener_noise_var = *f.wiener_noise_var;
    cfg.validate();
    return cfg;
}

std::string csv_num(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void append_metrics_csv(const std::string& path, const octcff::RunConfig* cfg,
                        const std::vector<octcff::MetricsReport>& rows,
                        const std::vector<std::string>& extra_comments = {}) {
    const bool fresh = !std::filesystem::exists(path) ||
                       std::filesystem::file_size(path) == 0;
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("cannot write CSV: " + path);
    if (cfg) out << "# config: " << cfg->summary() << "\n";
    for (const auto& c : extra_comments) out << "# " << c << "\n";
    if (fresh) out << "image,snr_db,cnr,epi,ssim,roi_count\n";
    for (const auto& r : rows)
        out << r.image << "," << csv_num(r.snr_db) << "," << csv_num(r.cnr) << ","
            << csv_num(r.epi) << "," << csv_num(r.ssim) << "," << r.roi_count << "\n";
}

void log_timings(const octcff::CffResult& res) {
    std::fprintf(stderr,
                 "timing attenuation=%.1fms features=%.1fms cluster=%.1fms "
                 "smooth=%.1fms filter=%.1fms total=%.1fms\n",
                 res.ms_attenuation, res.ms_features, res.ms_cluster,
                 res.ms_smooth, res.ms_filter, res.ms_total);
}

std::string sibling_path(const std::string& path, const std::string& suffix,
                         const std::string& ext) {
    std::filesystem::path p(path);
    return (p.parent_path() / (p.stem().string() + suffix + ext)).string();
}

int cmd_phantom(const std::string& spec_path, const std::string& prefix) {
    octcff::PhantomSpec spec;
    try {
        spec = octcff::load_phantom_spec(spec_path);
    } catch (const std::exception& e) {
        std::cerr << "error: invalid phantom spec: " << e.what() << "\n";
        return kExitUsage;
    }
    octcff::PhantomResult res = octcff::synthesize_phantom(spec);
    octcff::save_image(res.noisy, prefix + "_noisy.f32");
    octcff::save_image(res.clean, prefix + "_clean.f32");
    octcff::save_label_map(res.truth, prefix + "_truth.pgm");
    return kExitOk;
}

int cmd_despeckle(const std::string& in_path, const std::string& out_path,
                  const octcff::RunConfig& cfg, const std::string& method) {
    octcff::Image img;
    try {
        img = octcff::load_image(in_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    if (method == "wiener") {
        using clock = std::chrono::steady_clock;
        auto t0 = clock::now();
        octcff::Image out = octcff::wiener(img, cfg.window, cfg.wiener_noise_var);
        std::fprintf(stderr, "timing wiener total=%.1fms\n",
                     std::chrono::duration<double, std::milli>(clock::now() - t0).count());
        octcff::save_image(out, out_path);
    } else {
        octcff::CffResult res = octcff::run_cff(img, cfg);
        log_timings(res);
        octcff::save_image(res.filtered, out_path);
        octcff::save_label_map(res.labels, sibling_path(out_path, "_labels", ".pgm"));
    }
    return kExitOk;
}

int cmd_metrics(const std::string& img_path, const std::optional<std::string>& ref_path,
                const std::optional<std::string>& roi_path, const std::string& csv_out,
                const octcff::RunConfig& cfg) {
    octcff::Image img, ref;
    std::optional<std::vector<octcff::Roi>> rois;
    try {
        img = octcff::load_image(img_path);
        if (ref_path) ref = octcff::load_image(*ref_path);
        if (roi_path) rois = octcff::load_roi_list(*roi_path, img.rows, img.cols);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    octcff::MetricsReport rep = octcff::compute_metrics(
        img, ref_path ? &ref : nullptr, rois ? &*rois : nullptr, nullptr, img_path);
    append_metrics_csv(csv_out, &cfg, {rep});
    return kExitOk;
}

int cmd_compare(const std::string& in_path, const std::optional<std::string>& ref_path,
                const std::optional<std::string>& roi_path, const std::string& csv_out,
                const octcff::RunConfig& cfg, bool sweep_weights,
                const std::string& sweep_prefix) {
    octcff::Image img, ref;
    std::optional<std::vector<octcff::Roi>> rois;
    try {
        img = octcff::load_image(in_path);
        if (!ref_path) {
            std::cerr << "error: compare needs --ref (a clean/gold-standard image); "
                         "refusing to invent one\n";
            return kExitUsage;
        }
        ref = octcff::load_image(*ref_path);
        if (roi_path) rois = octcff::load_roi_list(*roi_path, img.rows, img.cols);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    octcff::Image wiener_out = octcff::wiener(img, cfg.window, cfg.wiener_noise_var);
    octcff::CffResult cff = octcff::run_cff(img, cfg);
    log_timings(cff);

    auto rois_ptr = rois ? &*rois : nullptr;
    std::vector<octcff::MetricsReport> rows{
        octcff::compute_metrics(img, &ref, rois_ptr, nullptr, "original"),
        octcff::compute_metrics(wiener_out, &ref, rois_ptr, nullptr, "wiener"),
        octcff::compute_metrics(cff.filtered, &ref, rois_ptr, nullptr, "cff")};

    char d1[128], d2[128];
    std::snprintf(d1, sizeof(d1), "delta wiener-original: snr=%+.4f cnr=%+.4f",
                  rows[1].snr_db - rows[0].snr_db, rows[1].cnr - rows[0].cnr);
    std::snprintf(d2, sizeof(d2), "delta cff-original: snr=%+.4f cnr=%+.4f",
                  rows[2].snr_db - rows[0].snr_db, rows[2].cnr - rows[0].cnr);
    append_metrics_csv(csv_out, &cfg, rows, {d1, d2});

    if (sweep_weights) {
        // Fig. 4 style experiment: the w1+w2=1 grid in steps of 0.1
        octcff::AttenuationMap att = octcff::estimate_attenuation(img);
        for (int step = 0; step <= 10; ++step) {
            const double w1 = step / 10.0, w2 = 1.0 - w1;
            octcff::FeatureField ff = octcff::build_features(img, att, w1, w2);
            octcff::LabelMap lm = octcff::label_smooth(
                octcff::ward_cluster(ff, cfg.k, cfg.sample_size, cfg.seed),
                cfg.window, cfg.smooth_mode);
            char name[64];
            std::snprintf(name, sizeof(name), "_w1_%02d_w2_%02d", step, 10 - step);
            octcff::save_label_map(lm, sweep_prefix + name + ".pgm");
        }
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cluster-based de-speckling toolkit for OCT-style B-scans"};
    app.require_subcommand(1);

    // phantom
    auto* sp = app.add_subcommand("phantom", "synthesize a multilayer phantom");
    std::string spec_path, out_prefix;
    sp->add_option("spec", spec_path, "PhantomSpec JSON")->required();
    sp->add_option("out_prefix", out_prefix, "output path prefix")->required();

    // despeckle
    auto* sd = app.add_subcommand("despeckle", "filter one image");
    std::string in_path, out_path, method = "cff";
    ConfigFlags fd;
    sd->add_option("input", in_path, "input image")->required();
    sd->add_option("output", out_path, "output image")->required();
    sd->add_option("--method", method, "cff|wiener (default cff)");
    add_config_flags(sd, fd);

    // metrics
    auto* sm = app.add_subcommand("metrics", "compute quality metrics");
    std::string m_img, m_csv = "metrics.csv";
    std::optional<std::string> m_ref, m_roi;
    ConfigFlags fm;
    sm->add_option("image", m_img, "image to score")->required();
    sm->add_option("--ref", m_ref, "reference image for EPI/SSIM");
    sm->add_option("--roi", m_roi, "ROI list file (default: auto placement)");
    sm->add_option("--csv", m_csv, "CSV to append to (default metrics.csv)");
    add_config_flags(sm, fm);

    // compare
    auto* sc = app.add_subcommand("compare", "original vs wiener vs cff");
    std::string c_in, c_csv = "compare.csv", c_sweep_prefix = "sweep";
    std::optional<std::string> c_ref, c_roi;
    bool c_sweep = false;
    ConfigFlags fc;
    sc->add_option("input", c_in, "input image")->required();
    sc->add_option("--ref", c_ref, "reference image (required)");
    sc->add_option("--roi", c_roi, "ROI list file");
    sc->add_option("--csv", c_csv, "CSV output (default compare.csv)");
    sc->add_flag("--sweep-weights", c_sweep, "evaluate the w1+w2=1 weight grid");
    sc->add_option("--sweep-prefix", c_sweep_prefix, "label-map prefix for the sweep");
    add_config_flags(sc, fc);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sp->parsed()) return cmd_phantom(spec_path, out_prefix);
        octcff::RunConfig cfg;
        try {
            if (sd->parsed()) cfg = resolve_config(fd);
            else if (sm->parsed()) cfg = resolve_config(fm);
            else cfg = resolve_config(fc);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kExitUsage;
        }
        if (sd->parsed()) {
            if (method != "cff" && method != "wiener") {
                std::cerr << "error: --method must be cff or wiener\n";
                return kExitUsage;
            }
            return cmd_despeckle(in_path, out_path, cfg, method);
        }
        if (sm->parsed()) return cmd_metrics(m_img, m_ref, m_roi, m_csv, cfg);
        return cmd_compare(c_in, c_ref, c_roi, c_csv, cfg, c_sweep, c_sweep_prefix);
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}
