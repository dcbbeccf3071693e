#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "octcff/optics.hpp"
#include "oracles.hpp"

using namespace octcff;

namespace {

PhantomSpec two_layer_spec() {
    // backreflection proportional to decay keeps the tail-sum estimator
    // unbiased across the boundary
    PhantomSpec spec;
    spec.rows = 400;
    spec.cols = 8;
    spec.axial_um = 10.0;
    spec.layers = {LayerSpec{1000.0, 0.0, 0.5, 1.0},
                   LayerSpec{5000.0, 0.0, 1.0, 2.0}};
    spec.noiseless = true;
    return spec;
}

} // namespace

TEST_CASE("estimate_attenuation rejects an empty image") {
    Image img(10, 4, 0.0);
    CHECK_THROWS_WITH(estimate_attenuation(img), "no signal");
}

TEST_CASE("estimate_attenuation recovers a synthetic decay") {
    const double mu = 1.0, delta_mm = 0.01;
    Image img(400, 1, 0.0, delta_mm * 1000.0);
    for (int i = 0; i < 400; ++i)
        img.at(i, 0) = std::exp(-2.0 * mu * delta_mm * i);

    // independent oracle: log-linear least-squares slope of the same column
    double mu_fit = oracle::log_slope_mu(
        std::vector<double>(img.pixels.begin(), img.pixels.end()), delta_mm);
    CHECK(mu_fit == Catch::Approx(mu).epsilon(1e-6));

    AttenuationMap att = estimate_attenuation(img);
    for (int i = 0; i < 200; ++i)
        CHECK(att.at(i, 0) == Catch::Approx(mu).epsilon(0.05));
}

TEST_CASE("estimate_attenuation is scale-invariant") {
    Image img = oracle::random_image(30, 6, 17, 0.01, 1.0);
    Image scaled = img;
    for (double& v : scaled.pixels) v *= 10.0;
    AttenuationMap a = estimate_attenuation(img);
    AttenuationMap b = estimate_attenuation(scaled);
    for (size_t i = 0; i < a.values.size(); ++i)
        CHECK(b.values[i] == Catch::Approx(a.values[i]).margin(1e-12));
}

TEST_CASE("estimate_attenuation output is clamped and fills invalid tails") {
    Image img(4, 1, 0.0);
    img.at(0, 0) = 1.0;  // rows 1..3 are zero, so row 0 divides by ~0 tail
    AttenuationMap att = estimate_attenuation(img);
    CHECK(att.at(0, 0) == 0.0);  // tail below eps, no valid pixel above
    CHECK(att.at(3, 0) == 0.0);
    for (double v : att.values) {
        CHECK(v >= 0.0);
        CHECK(v <= kAttenuationCapMm);
    }
}

TEST_CASE("logslope estimator agrees on a clean decay") {
    const double mu = 0.8, delta_mm = 0.01;
    Image img(200, 2, 0.0, 10.0);
    for (int i = 0; i < 200; ++i)
        for (int j = 0; j < 2; ++j)
            img.at(i, j) = 2.0 * std::exp(-2.0 * mu * delta_mm * i);
    AttenuationMap att = estimate_attenuation_logslope(img, 15);
    for (int i = 20; i < 180; ++i)
        CHECK(att.at(i, 0) == Catch::Approx(mu).epsilon(1e-6));
}

TEST_CASE("reduced_scattering") {
    CHECK(reduced_scattering(1.0, 0.715) == Catch::Approx(0.285));
    CHECK(reduced_scattering(3.7, 0.0) == 3.7);
    CHECK(reduced_scattering(3.7, 0.999999) == Catch::Approx(0.0).margin(1e-5));
    CHECK_THROWS(reduced_scattering(-1.0, 0.5));
    CHECK_THROWS(reduced_scattering(1.0, 1.0));

    // linear in mu_s, affine-decreasing in g
    CHECK(reduced_scattering(2.0, 0.3) == Catch::Approx(2.0 * reduced_scattering(1.0, 0.3)));
    CHECK(reduced_scattering(1.0, 0.2) > reduced_scattering(1.0, 0.4));
}

TEST_CASE("Table 1 reduced scattering ordering") {
    // mu's: layer3 > layer4 > layer1 > layer2
    const double g = 0.715;
    double l1 = reduced_scattering(1.08 / (1 - g), g);
    double l2 = reduced_scattering(0.55 / (1 - g), g);
    double l3 = reduced_scattering(1.90 / (1 - g), g);
    double l4 = reduced_scattering(1.36 / (1 - g), g);
    CHECK(l3 > l4);
    CHECK(l4 > l1);
    CHECK(l1 > l2);
    CHECK(l3 == Catch::Approx(1.90));
    CHECK(l2 == Catch::Approx(0.55));
}

TEST_CASE("tio2_concentration") {
    MieInputs inp;
    inp.tio2_mass_g = 0.01;
    inp.polyurethane_volume_cm3 = 10.0;
    Tio2Concentration c = tio2_concentration(inp);
    // sphere volume for r = 0.075 um
    CHECK(c.sphere_volume_um3 == Catch::Approx(1.767e-3).epsilon(1e-3));
    CHECK(c.sphere_volume_um3 == Catch::Approx(1.77e-3).epsilon(0.01));
    // stepwise by hand: V_t = 0.01/4.23 cm^3; count = V_t / (1.767e-15 cm^3)
    const double vt = 0.01 / 4.23;
    const double count = vt / (c.sphere_volume_um3 * 1e-12);
    CHECK(c.tio2_volume_cm3 == Catch::Approx(vt));
    CHECK(c.sphere_count == Catch::Approx(count));
    CHECK(c.per_cm3 == Catch::Approx(count / 10.0));

    inp.tio2_mass_g = 4.23;
    CHECK(tio2_concentration(inp).tio2_volume_cm3 == Catch::Approx(1.0));

    inp.tio2_mass_g = -1.0;
    CHECK_THROWS(tio2_concentration(inp));
}

TEST_CASE("synthesize_phantom noiseless equals clean") {
    PhantomSpec spec = two_layer_spec();
    PhantomResult res = synthesize_phantom(spec);
    CHECK(res.noisy.pixels == res.clean.pixels);
    // layer boundary at row 100; exponent continuous there
    CHECK(res.truth.at(99, 0) == 1);
    CHECK(res.truth.at(100, 0) == 2);
    double top2 = res.clean.at(100, 0) / spec.layers[1].backreflection;
    double bot1 = res.clean.at(99, 0) / spec.layers[0].backreflection;
    CHECK(top2 < bot1);
    CHECK(top2 / bot1 == Catch::Approx(std::exp(-2.0 * 1.0 * 0.01)));
}

TEST_CASE("synthesize_phantom is deterministic") {
    PhantomSpec spec = two_layer_spec();
    spec.noiseless = false;
    spec.speckle_shape = 2.0;
    spec.rng_seed = 1234;
    PhantomResult a = synthesize_phantom(spec);
    PhantomResult b = synthesize_phantom(spec);
    CHECK(a.noisy.pixels == b.noisy.pixels);
    spec.rng_seed = 1235;
    PhantomResult c = synthesize_phantom(spec);
    CHECK(a.noisy.pixels != c.noisy.pixels);
}

TEST_CASE("speckle has unit mean and the Gamma(1) variance") {
    PhantomSpec spec;
    spec.rows = 1000;
    spec.cols = 1000;
    spec.axial_um = 10.0;
    spec.layers = {LayerSpec{20000.0, 0.0, 1.0, 0.0}};  // constant clean layer
    spec.speckle_shape = 1.0;
    spec.rng_seed = 7;
    PhantomResult res = synthesize_phantom(spec);
    long double s = 0, s2 = 0;
    for (double v : res.noisy.pixels) {
        s += v;
        s2 += v * v;
    }
    const double n = static_cast<double>(res.noisy.size());
    const double mean = static_cast<double>(s / n);
    const double var = static_cast<double>(s2 / n) - mean * mean;
    CHECK(mean == Catch::Approx(1.0).epsilon(0.01));
    CHECK(var == Catch::Approx(1.0).epsilon(0.05));
}

TEST_CASE("phantom validation") {
    PhantomSpec spec;
    spec.rows = 10;
    spec.cols = 10;
    CHECK_THROWS(synthesize_phantom(spec));  // no layers
    spec.layers = {LayerSpec{100.0, 1.0, 1.5, -1.0}};
    CHECK_THROWS(synthesize_phantom(spec));  // backreflection > 1
}

TEST_CASE("noiseless phantom attenuation medians hit each layer's mu") {
    PhantomSpec spec = two_layer_spec();
    PhantomResult res = synthesize_phantom(spec);
    AttenuationMap att = estimate_attenuation(res.noisy);
    auto layer_median = [&](int r0, int r1) {
        std::vector<double> vals;
        for (int i = r0; i < r1; ++i)
            for (int j = 0; j < att.cols; ++j) vals.push_back(att.at(i, j));
        std::nth_element(vals.begin(), vals.begin() + vals.size() / 2, vals.end());
        return vals[vals.size() / 2];
    };
    CHECK(layer_median(5, 95) == Catch::Approx(1.0).epsilon(0.10));
    CHECK(layer_median(105, 395) == Catch::Approx(2.0).epsilon(0.10));
}

TEST_CASE("average_frames identities") {
    Image f = oracle::random_image(10, 10, 3);
    Image avg = average_frames({f, f, f});
    for (size_t i = 0; i < f.size(); ++i)
        CHECK(avg.pixels[i] == Catch::Approx(f.pixels[i]).margin(1e-15));

    // f and -f+2c average to the constant c
    const double c = 5.0;
    Image g = f;
    for (double& v : g.pixels) v = 2.0 * c - v;
    Image avg2 = average_frames({f, g});
    for (double v : avg2.pixels) CHECK(v == Catch::Approx(c).margin(1e-12));

    Image wrong(3, 3, 0.0);
    CHECK_THROWS(average_frames({f, wrong}));
    CHECK_THROWS(average_frames({}));
}

TEST_CASE("averaging 16 unit-variance frames shrinks noise by 4") {
    const int n_frames = 16, rows = 120, cols = 120;
    std::vector<Image> frames;
    std::mt19937_64 gen(42);
    std::normal_distribution<double> noise(10.0, 1.0);
    for (int f = 0; f < n_frames; ++f) {
        Image img(rows, cols);
        for (double& v : img.pixels) v = std::max(0.0, noise(gen));
        frames.push_back(std::move(img));
    }
    Image avg = average_frames(frames);
    long double s = 0, s2 = 0;
    for (double v : avg.pixels) {
        s += v;
        s2 += v * v;
    }
    const double n = static_cast<double>(avg.size());
    const double m = static_cast<double>(s / n);
    const double sd = std::sqrt(static_cast<double>(s2 / n) - m * m);
    CHECK(sd == Catch::Approx(0.25).epsilon(0.10));
}
