#include <doctest.h>

#include <cmath>
#include <set>

#include "glucolens/dataio.hpp"
#include "glucolens/phantom.hpp"
#include "support.hpp"

using namespace glucolens;

namespace {

OpticalConfig quiet(double wavelength = 1600)
{
    OpticalConfig c;
    c.wavelength_nm = wavelength;
    c.speckle_contrast = 0;
    c.sensor_noise_sigma = 0;
    return c;
}

double water_only(const OpticalConfig& c)
{
    double mu = 0;
    for (const auto& b : c.water_bands) {
        const double z = (c.wavelength_nm - b.center_nm) / b.width_nm;
        mu += b.strength * std::exp(-0.5 * z * z);
    }
    return mu;
}

} // namespace

TEST_CASE("default bands sit on the published absorption peaks")
{
    OpticalConfig c;
    std::vector<double> g, w;
    for (const auto& b : c.glucose_bands)
        g.push_back(b.center_nm);
    for (const auto& b : c.water_bands)
        w.push_back(b.center_nm);
    CHECK(g == std::vector<double>{1408, 1536, 1688, 2261});
    CHECK(w == std::vector<double>{1450, 1787, 1934});
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("config validation")
{
    OpticalConfig c;
    c.wavelength_nm = 300;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = OpticalConfig{};
    c.glucose_bands[0].width_nm = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = OpticalConfig{};
    c.water_bands[1].strength = -1;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = OpticalConfig{};
    c.speckle_contrast = 1.5;
    CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("absorption at zero glucose is the water term")
{
    for (double wl : {650.0, 1450.0, 1600.0, 2000.0}) {
        OpticalConfig c = quiet(wl);
        CHECK(absorption_coefficient(c, 0) == doctest::Approx(water_only(c)).epsilon(1e-15));
    }
}

TEST_CASE("absorption with all strengths zero")
{
    OpticalConfig c = quiet();
    for (auto& b : c.glucose_bands)
        b.strength = 0;
    for (auto& b : c.water_bands)
        b.strength = 0;
    CHECK(absorption_coefficient(c, 150) == 0.0);
}

TEST_CASE("single band at its center adds c * s")
{
    OpticalConfig c = quiet(1600);
    const double s = 0.003;
    c.glucose_bands = {{1600, 100, s}};
    CHECK(absorption_coefficient(c, 100) == doctest::Approx(water_only(c) + 100 * s).epsilon(1e-14));
}

TEST_CASE("absorption strictly increasing in concentration")
{
    OpticalConfig c = quiet(1536);
    double prev = absorption_coefficient(c, 0);
    for (double conc = 10; conc <= 400; conc += 10) {
        const double mu = absorption_coefficient(c, conc);
        CHECK(mu > prev);
        prev = mu;
    }
    CHECK_THROWS_AS(absorption_coefficient(c, -1), ValidationError);
}

TEST_CASE("transmittance")
{
    OpticalConfig c = quiet();
    c.glucose_bands.clear();
    c.water_bands.clear();
    c.scatter_coeff = 0;
    c.glucose_scatter_slope = 0;
    CHECK(transmittance(c, 120) == 1.0);

    c.scatter_coeff = 1.0;
    c.path_length_cm = 1.0;
    CHECK(transmittance(c, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(transmittance(c, 0) == doctest::Approx(0.3679).epsilon(1e-4));

    c.scatter_coeff = -0.5;
    CHECK_THROWS_AS(transmittance(c, 0), ValidationError);
}

TEST_CASE("transmittance nonincreasing in concentration")
{
    for (double wl : {650.0, 808.0, 850.0, 1600.0}) {
        OpticalConfig c;
        c.wavelength_nm = wl;
        double prev = transmittance(c, 0);
        CHECK(prev <= 1.0);
        CHECK(prev > 0.0);
        for (double conc = 2; conc <= 400; conc += 2) {
            const double t = transmittance(c, conc);
            CHECK(t <= prev);
            CHECK(t > 0.0);
            prev = t;
        }
    }
}

TEST_CASE("gen_image determinism and bounds")
{
    OpticalConfig c;
    const Image a = gen_image(c, 120, 32, 24, 9);
    const Image b = gen_image(c, 120, 32, 24, 9);
    CHECK(a.rows() == 24);
    CHECK(a.cols() == 32);
    CHECK((a == b).all());
    CHECK(a.minCoeff() >= 0);
    CHECK(a.maxCoeff() <= c.max_intensity);
    CHECK_FALSE((a == gen_image(c, 120, 32, 24, 10)).all());
    CHECK_THROWS_AS(gen_image(c, 120, 7, 24, 1), ValidationError);
    CHECK_THROWS_AS(gen_image(c, 120, 8, 0, 1), ValidationError);
}

TEST_CASE("noise-free frame is the beam profile times T")
{
    OpticalConfig c = quiet(850);
    const double t = transmittance(c, 100);
    const Image img = gen_image(c, 100, 16, 12, 3);
    const double cx = 7.5, cy = 5.5;
    double worst = 0;
    for (Eigen::Index y = 0; y < img.rows(); ++y)
        for (Eigen::Index x = 0; x < img.cols(); ++x) {
            const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            const double expect =
                c.source_intensity * std::exp(-r2 / (2 * c.beam_sigma_px * c.beam_sigma_px)) * t;
            worst = std::max(worst, std::abs(img(y, x) - expect) / expect);
        }
    CHECK(worst < 1e-12);
}

TEST_CASE("LED frames carry no speckle")
{
    OpticalConfig laser;
    laser.sensor_noise_sigma = 0;
    OpticalConfig led = laser;
    led.source_kind = SourceKind::led;
    OpticalConfig clean = laser;
    clean.speckle_contrast = 0;
    const Image reference = gen_image(clean, 90, 16, 16, 5);
    CHECK((gen_image(led, 90, 16, 16, 5) - reference).abs().maxCoeff() < 1e-9);
    CHECK((gen_image(laser, 90, 16, 16, 5) - reference).abs().maxCoeff() > 1.0);
}

TEST_CASE("mean frame intensity drops with concentration")
{
    for (const auto& src : default_sources()) {
        double lo = 0, hi = 0;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            lo += gen_image(src.optics, 70, 32, 32, seed).mean();
            hi += gen_image(src.optics, 200, 32, 32, seed + 100).mean();
        }
        CHECK_MESSAGE(hi < lo, src.name);
    }
}

TEST_CASE("voltage plug-in case")
{
    VoltageConfig v;
    v.optics = quiet(1600);
    v.optics.glucose_bands.clear();
    v.optics.water_bands.clear();
    v.optics.glucose_scatter_slope = 0;
    v.optics.scatter_coeff = std::log(2.0);
    v.optics.path_length_cm = 1;
    v.dark_level_v = 0.04;
    v.ambient_offset_v = 0.06;
    v.dark_noise_v = v.ambient_noise_v = v.relative_noise = 0;
    v.gain_v = 1;
    const VoltageSample s = gen_voltage_sample(v, 130, 1);
    CHECK(s.v_pre == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(s.v_post == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(s.v_baseline == doctest::Approx(0.04).epsilon(1e-15));
}

TEST_CASE("voltage samples: determinism, ordering, concentration effect")
{
    VoltageConfig v;
    const VoltageSample a = gen_voltage_sample(v, 150, 77);
    const VoltageSample b = gen_voltage_sample(v, 150, 77);
    CHECK(a.v_baseline == b.v_baseline);
    CHECK(a.v_pre == b.v_pre);
    CHECK(a.v_post == b.v_post);

    double post0 = 0, post200 = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const VoltageSample s0 = gen_voltage_sample(v, 0, seed);
        const VoltageSample s2 = gen_voltage_sample(v, 200, seed + 1000);
        for (const auto& s : {s0, s2}) {
            CHECK(s.v_pre >= s.v_baseline);
            CHECK(s.v_baseline >= 0);
            CHECK(s.v_post >= 0);
        }
        post0 += s0.v_post;
        post200 += s2.v_post;
    }
    CHECK(post0 > post200);
}

TEST_CASE("voltage set draws within range")
{
    const auto set = gen_voltage_set(VoltageConfig{}, 200, 70, 200, 42);
    REQUIRE(set.size() == 200);
    for (const auto& s : set) {
        CHECK(s.concentration_mgdl >= 70);
        CHECK(s.concentration_mgdl <= 200);
    }
    const auto again = gen_voltage_set(VoltageConfig{}, 200, 70, 200, 42);
    CHECK(again[17].v_post == set[17].v_post);
}

TEST_CASE("concentration levels")
{
    CHECK(concentration_levels(70, 200, 2).size() == 66);
    CHECK(concentration_levels(70, 200, 2).back() == 200);
    CHECK(concentration_levels(70, 80, 50).size() == 1);
    CHECK_THROWS_AS(concentration_levels(100, 100, 1), ValidationError);
    CHECK_THROWS_AS(concentration_levels(70, 200, 0), ValidationError);
}

TEST_CASE("source naming")
{
    CHECK(make_source(650, SourceKind::laser).name == "650-laser");
    CHECK(make_source(850, SourceKind::led).name == "850-led");
    const auto srcs = default_sources();
    REQUIRE(srcs.size() == 4);
    CHECK(srcs[3].optics.source_kind == SourceKind::led);
    CHECK(parse_source_kind("led") == SourceKind::led);
    CHECK_THROWS_AS(parse_source_kind("lamp"), ValidationError);
}

TEST_CASE("image seeds are distinct per coordinate")
{
    std::set<std::uint64_t> seen;
    for (std::size_t s = 0; s < 4; ++s)
        for (std::size_t l = 0; l < 66; ++l)
            for (std::size_t r = 0; r < 10; ++r)
                seen.insert(image_seed(42, s, l, r));
    CHECK(seen.size() == 2640);
}

TEST_CASE("dataset: 66 levels x 10 frames x 4 sources")
{
    testing::TempDir dir("phantom");
    DatasetSpec spec;
    spec.width = spec.height = 8;
    const auto rows = gen_dataset(spec, dir.path(), 2);
    REQUIRE(rows.size() == 2640);
    std::set<std::string> paths;
    for (const auto& r : rows) {
        paths.insert(r.path);
        CHECK(r.split == Split::none);
        CHECK(r.augmented_from.empty());
    }
    CHECK(paths.size() == 2640);
    const Image first = read_pgm(dir.path() / rows.front().path);
    CHECK(first.rows() == 8);

    // Thread count does not change the frames.
    testing::TempDir other("phantom1");
    spec.sources.resize(1);
    spec.conc_max = 80;
    const auto a = gen_dataset(spec, other.path(), 1);
    for (const auto& r : a)
        CHECK(read_file(other.path() / r.path) == read_file(dir.path() / r.path));
}
