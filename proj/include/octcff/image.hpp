// Core image container, file I/O and windowed statistics for the
// OCT de-speckling toolkit.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace octcff {

/// 2-D B-scan of linear (non-log) intensities, row-major.
struct Image {
    int rows = 0;
    int cols = 0;
    std::vector<double> pixels;      // rows*cols, finite, >= 0
    double axial_um = 10.0;          // depth per row
    double lateral_um = 7.5;

    Image() = default;
    Image(int r, int c, double fill = 0.0,
          double ax_um = 10.0, double lat_um = 7.5)
        : rows(r), cols(c), pixels(static_cast<size_t>(r) * c, fill),
          axial_um(ax_um), lateral_um(lat_um) {
        if (r < 1 || c < 1)
            throw std::invalid_argument("Image: rows and cols must be >= 1");
    }

    double& at(int i, int j) { return pixels[static_cast<size_t>(i) * cols + j]; }
    double at(int i, int j) const { return pixels[static_cast<size_t>(i) * cols + j]; }
    size_t size() const { return pixels.size(); }

    bool same_shape(const Image& o) const { return rows == o.rows && cols == o.cols; }

    void validate() const {
        if (rows < 1 || cols < 1)
            throw std::invalid_argument("Image: rows and cols must be >= 1");
        if (pixels.size() != static_cast<size_t>(rows) * cols)
            throw std::invalid_argument("Image: pixel count != rows*cols");
        if (axial_um <= 0.0)
            throw std::invalid_argument("Image: axial pixel size must be > 0");
        for (double v : pixels)
            if (!std::isfinite(v) || v < 0.0)
                throw std::invalid_argument("Image: pixels must be finite and >= 0");
    }
};

/// Rectangular region of interest, fully inside its image.
struct Roi {
    int top = 0;
    int left = 0;
    int height = 1;
    int width = 1;

    void validate(int rows, int cols) const {
        if (height < 1 || width < 1)
            throw std::invalid_argument("Roi: height and width must be >= 1");
        if (top < 0 || left < 0 || top + height > rows || left + width > cols)
            throw std::invalid_argument("Roi: region outside image");
    }
    bool contains(int i, int j) const {
        return i >= top && i < top + height && j >= left && j < left + width;
    }
};

/// Odd-sized sliding window, n1 rows by n2 cols.
struct WindowSpec {
    int n1 = 5;
    int n2 = 5;

    void validate() const {
        if (n1 < 1 || n2 < 1 || n1 % 2 == 0 || n2 % 2 == 0)
            throw std::invalid_argument("WindowSpec: sizes must be odd and >= 1");
    }
};

/// Per-pixel cluster index in [1, K].
struct LabelMap {
    int rows = 0;
    int cols = 0;
    int k = 0;
    std::vector<int> labels;

    LabelMap() = default;
    LabelMap(int r, int c, int k_, int fill = 1)
        : rows(r), cols(c), k(k_), labels(static_cast<size_t>(r) * c, fill) {}

    int& at(int i, int j) { return labels[static_cast<size_t>(i) * cols + j]; }
    int at(int i, int j) const { return labels[static_cast<size_t>(i) * cols + j]; }

    bool same_shape(const Image& img) const {
        return rows == img.rows && cols == img.cols;
    }
};

/// 8-bit PGM with label value = pixel value (no normalization).
inline void save_label_map(const LabelMap& lm, const std::string& path) {
    if (lm.k > 255) throw std::invalid_argument("save_label_map: k > 255");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write label map: " + path);
    out << "P5\n" << lm.cols << " " << lm.rows << "\n255\n";
    std::vector<uint8_t> buf(lm.labels.size());
    for (size_t i = 0; i < buf.size(); ++i)
        buf[i] = static_cast<uint8_t>(lm.labels[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline LabelMap load_label_map(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open label map: " + path);
    std::string magic;
    in >> magic;
    int cols, rows, maxval;
    if (magic != "P5" || !(in >> cols >> rows >> maxval) || maxval > 255)
        throw std::runtime_error("not an 8-bit PGM label map: " + path);
    in.get();
    LabelMap lm(rows, cols, 0);
    std::vector<uint8_t> buf(lm.labels.size());
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
    if (static_cast<size_t>(in.gcount()) != buf.size())
        throw std::runtime_error("truncated label map: " + path);
    int k = 1;
    for (size_t i = 0; i < buf.size(); ++i) {
        lm.labels[i] = buf[i];
        k = std::max(k, lm.labels[i]);
    }
    lm.k = k;
    return lm;
}

// ---------------------------------------------------------------------------
// Internal parallelism. OCTD_THREADS caps the worker count (0 or unset = auto).
// Work items are independent per index, so results do not depend on the split.

inline int thread_cap() {
    const char* env = std::getenv("OCTD_THREADS");
    if (env) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    return hw > 0 ? hw : 1;
}

template <typename Fn>
void parallel_for(int n, Fn&& fn) {
    int workers = std::min(thread_cap(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    int chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        int lo = w * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (int i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Sliding-window statistics

struct LocalStats {
    Image mean;
    Image var;
};

/// Per-pixel mean and population variance of the window centered on each
/// pixel. Windows are clipped at the borders and normalized by the number
/// of in-image pixels; variance is clamped at 0 against rounding.
inline LocalStats local_stats(const Image& img, const WindowSpec& w) {
    w.validate();
    LocalStats out{Image(img.rows, img.cols, 0.0, img.axial_um, img.lateral_um),
                   Image(img.rows, img.cols, 0.0, img.axial_um, img.lateral_um)};
    const int hr = w.n1 / 2, hc = w.n2 / 2;
    parallel_for(img.rows, [&](int i) {
        const int r0 = std::max(0, i - hr), r1 = std::min(img.rows - 1, i + hr);
        for (int j = 0; j < img.cols; ++j) {
            const int c0 = std::max(0, j - hc), c1 = std::min(img.cols - 1, j + hc);
            double s = 0.0, s2 = 0.0;
            for (int r = r0; r <= r1; ++r)
                for (int c = c0; c <= c1; ++c) {
                    double v = img.at(r, c);
                    s += v;
                    s2 += v * v;
                }
            const double n = static_cast<double>((r1 - r0 + 1) * (c1 - c0 + 1));
            const double m = s / n;
            out.mean.at(i, j) = m;
            out.var.at(i, j) = std::max(0.0, s2 / n - m * m);
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// File I/O
//
// Raw-float: little-endian 32-bit floats, row-major, sidecar <stem>.hdr with
// lines rows=, cols=, axial_um=, lateral_um=.
// PGM: binary P5, maxval 255 or 65535 (16-bit samples big-endian),
// intensities normalized to [0,1] on load.

namespace detail {

inline std::string stem_path(const std::string& path) {
    std::filesystem::path p(path);
    return (p.parent_path() / p.stem()).string();
}

inline bool is_pgm(const std::string& path) {
    auto ext = std::filesystem::path(path).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".pgm";
}

inline void read_header(const std::string& hdr_path, int& rows, int& cols,
                        double& axial_um, double& lateral_um, bool required_dims) {
    std::ifstream hdr(hdr_path);
    if (!hdr) {
        if (required_dims)
            throw std::runtime_error("cannot open header: " + hdr_path);
        return;
    }
    bool got_rows = false, got_cols = false;
    std::string line;
    while (std::getline(hdr, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        try {
            if (key == "rows") { rows = std::stoi(val); got_rows = true; }
            else if (key == "cols") { cols = std::stoi(val); got_cols = true; }
            else if (key == "axial_um") axial_um = std::stod(val);
            else if (key == "lateral_um") lateral_um = std::stod(val);
        } catch (const std::exception&) {
            throw std::runtime_error("malformed header line in " + hdr_path + ": " + line);
        }
    }
    if (required_dims && (!got_rows || !got_cols))
        throw std::runtime_error("header missing rows/cols: " + hdr_path);
    if (required_dims && (rows < 1 || cols < 1))
        throw std::runtime_error("header has invalid dimensions: " + hdr_path);
}

inline int pgm_token(std::istream& in) {
    // skips whitespace and '#' comments between tokens
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string dummy;
            std::getline(in, dummy);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int v;
    if (!(in >> v)) throw std::runtime_error("malformed PGM header");
    return v;
}

} // namespace detail

inline Image load_image(const std::string& path) {
    if (detail::is_pgm(path)) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open image: " + path);
        char m0 = 0, m1 = 0;
        in.get(m0); in.get(m1);
        if (m0 != 'P' || m1 != '5')
            throw std::runtime_error("unsupported PGM magic in " + path);
        int cols = detail::pgm_token(in);
        int rows = detail::pgm_token(in);
        int maxval = detail::pgm_token(in);
        in.get();  // single whitespace before payload
        if (rows < 1 || cols < 1 || maxval < 1 || maxval > 65535)
            throw std::runtime_error("malformed PGM header in " + path);
        Image img(rows, cols);
        detail::read_header(detail::stem_path(path) + ".hdr",
                            rows, cols, img.axial_um, img.lateral_um, false);
        const size_t n = img.size();
        if (maxval <= 255) {
            std::vector<uint8_t> buf(n);
            in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
            if (static_cast<size_t>(in.gcount()) != n)
                throw std::runtime_error("truncated PGM payload in " + path);
            for (size_t i = 0; i < n; ++i)
                img.pixels[i] = static_cast<double>(buf[i]) / maxval;
        } else {
            std::vector<uint8_t> buf(2 * n);
            in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(2 * n));
            if (static_cast<size_t>(in.gcount()) != 2 * n)
                throw std::runtime_error("truncated PGM payload in " + path);
            for (size_t i = 0; i < n; ++i) {
                unsigned v = (static_cast<unsigned>(buf[2 * i]) << 8) | buf[2 * i + 1];
                img.pixels[i] = static_cast<double>(v) / maxval;
            }
        }
        return img;
    }

    int rows = 0, cols = 0;
    double ax = 10.0, lat = 7.5;
    detail::read_header(detail::stem_path(path) + ".hdr", rows, cols, ax, lat, true);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open image: " + path);
    Image img(rows, cols, 0.0, ax, lat);
    std::vector<float> buf(img.size());
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (static_cast<size_t>(in.gcount()) != buf.size() * sizeof(float))
        throw std::runtime_error("payload size does not match header in " + path);
    char extra;
    if (in.read(&extra, 1))
        throw std::runtime_error("payload size does not match header in " + path);
    for (size_t i = 0; i < buf.size(); ++i)
        img.pixels[i] = static_cast<double>(buf[i]);
    img.validate();
    return img;
}

inline void save_image(const Image& img, const std::string& path) {
    img.validate();
    if (detail::is_pgm(path)) {
        // 16-bit PGM, intensities clamped to [0,1]
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write image: " + path);
        out << "P5\n" << img.cols << " " << img.rows << "\n65535\n";
        std::vector<uint8_t> buf(2 * img.size());
        for (size_t i = 0; i < img.size(); ++i) {
            double v = std::clamp(img.pixels[i], 0.0, 1.0);
            unsigned q = static_cast<unsigned>(std::lround(v * 65535.0));
            buf[2 * i] = static_cast<uint8_t>(q >> 8);
            buf[2 * i + 1] = static_cast<uint8_t>(q & 0xff);
        }
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size()));
        if (!out) throw std::runtime_error("write failed: " + path);
        return;
    }
    {
        std::ofstream hdr(detail::stem_path(path) + ".hdr");
        if (!hdr) throw std::runtime_error("cannot write header for: " + path);
        hdr << "rows=" << img.rows << "\ncols=" << img.cols
            << "\naxial_um=" << img.axial_um
            << "\nlateral_um=" << img.lateral_um << "\n";
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write image: " + path);
    std::vector<float> buf(img.size());
    for (size_t i = 0; i < img.size(); ++i)
        buf[i] = static_cast<float>(img.pixels[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!out) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// ROI list: one ROI per line, "top left height width", '#' comments allowed.

inline std::vector<Roi> load_roi_list(const std::string& path, int rows, int cols) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open ROI file: " + path);
    std::vector<Roi> rois;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        Roi r;
        if (!(ss >> r.top)) continue;  // blank or comment-only line
        std::string trailing;
        if (!(ss >> r.left >> r.height >> r.width) || (ss >> trailing))
            throw std::runtime_error("malformed ROI at line " + std::to_string(lineno) +
                                     " of " + path);
        try {
            r.validate(rows, cols);
        } catch (const std::exception& e) {
            throw std::runtime_error("invalid ROI at line " + std::to_string(lineno) +
                                     " of " + path + ": " + e.what());
        }
        rois.push_back(r);
    }
    return rois;
}

} // namespace octcff
