#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "glucolens/features.hpp"
#include "support.hpp"

using namespace glucolens;

namespace {

QuantizedImage codes(int levels, Eigen::Index h, Eigen::Index w, std::initializer_list<int> v)
{
    QuantizedImage q{CodeArray(h, w), levels};
    Eigen::Index i = 0;
    for (int c : v)
        q.codes(i++) = c;
    return q;
}

// Plain double loop over every pixel and every candidate neighbour.
Eigen::MatrixXd oracle_counts(const QuantizedImage& q, int theta)
{
    int dx = 0, dy = 0;
    switch (theta) {
    case 0: dx = 1; dy = 0; break;
    case 45: dx = 1; dy = 1; break;
    case 90: dx = 0; dy = 1; break;
    case 135: dx = -1; dy = 1; break;
    }
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(q.levels, q.levels);
    for (Eigen::Index y = 0; y < q.height(); ++y)
        for (Eigen::Index x = 0; x < q.width(); ++x) {
            const Eigen::Index x2 = x + dx, y2 = y + dy;
            if (x2 < 0 || y2 < 0 || x2 >= q.width() || y2 >= q.height())
                continue;
            c(q.codes(y, x), q.codes(y2, x2)) += 1;
            c(q.codes(y2, x2), q.codes(y, x)) += 1;
        }
    return c;
}

GlcmStats oracle_stats(const Eigen::MatrixXd& p)
{
    const int g = static_cast<int>(p.rows());
    double mi = 0, mj = 0;
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) {
            mi += i * p(i, j);
            mj += j * p(i, j);
        }
    double vi = 0, vj = 0, cov = 0;
    GlcmStats s;
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) {
            s.contrast += (i - j) * (i - j) * p(i, j);
            s.energy += p(i, j) * p(i, j);
            s.homogeneity += p(i, j) / (1.0 + std::abs(i - j));
            vi += (i - mi) * (i - mi) * p(i, j);
            vj += (j - mj) * (j - mj) * p(i, j);
            cov += (i - mi) * (j - mj) * p(i, j);
        }
    s.correlation = (vi < 1e-24 || vj < 1e-24) ? 1.0 : cov / std::sqrt(vi * vj);
    return s;
}

Eigen::ArrayXXd direct_dft_magnitude(const Image& img)
{
    const Eigen::Index h = img.rows(), w = img.cols();
    Eigen::ArrayXXd out(h, w);
    for (Eigen::Index v = 0; v < h; ++v)
        for (Eigen::Index u = 0; u < w; ++u) {
            std::complex<double> acc = 0;
            for (Eigen::Index y = 0; y < h; ++y)
                for (Eigen::Index x = 0; x < w; ++x) {
                    const double phase = -2 * std::numbers::pi *
                                         (static_cast<double>(u * x) / static_cast<double>(w) +
                                          static_cast<double>(v * y) / static_cast<double>(h));
                    acc += img(y, x) * std::polar(1.0, phase);
                }
            out(v, u) = std::abs(acc);
        }
    return out;
}

Image cosine4()
{
    Image img(4, 4);
    for (Eigen::Index y = 0; y < 4; ++y)
        for (Eigen::Index x = 0; x < 4; ++x)
            img(y, x) = std::cos(2 * std::numbers::pi * static_cast<double>(x) / 4.0);
    return img;
}

} // namespace

TEST_CASE("glcm offsets")
{
    CHECK(glcm_offset(1, 0) == std::array<int, 2>{1, 0});
    CHECK(glcm_offset(1, 45) == std::array<int, 2>{1, 1});
    CHECK(glcm_offset(1, 90) == std::array<int, 2>{0, 1});
    CHECK(glcm_offset(1, 135) == std::array<int, 2>{-1, 1});
    CHECK(glcm_offset(2, 45) == std::array<int, 2>{1, 1});
    CHECK(glcm_offset(3, 0) == std::array<int, 2>{3, 0});
}

TEST_CASE("glcm hand cases")
{
    const Glcm a = glcm(codes(2, 2, 2, {0, 0, 1, 1}), 1, 0);
    CHECK(a.p(0, 0) == 0.5);
    CHECK(a.p(0, 1) == 0.0);
    CHECK(a.p(1, 0) == 0.0);
    CHECK(a.p(1, 1) == 0.5);

    const Glcm b = glcm(codes(2, 2, 2, {0, 1, 1, 0}), 1, 0);
    CHECK(b.p(0, 0) == 0.0);
    CHECK(b.p(0, 1) == 0.5);
    CHECK(b.p(1, 0) == 0.5);
    CHECK(b.p(1, 1) == 0.0);

    QuantizedImage flat{CodeArray::Constant(5, 6, 3), 8};
    for (int t : kGlcmAngles) {
        const Glcm c = glcm(flat, 1, t);
        CHECK(c.p(3, 3) == 1.0);
        CHECK(c.p.sum() == 1.0);
    }
}

TEST_CASE("glcm errors")
{
    const auto q = codes(2, 2, 2, {0, 0, 1, 1});
    CHECK_THROWS_AS(glcm(q, 0, 0), ValidationError);
    CHECK_THROWS_AS(glcm(q, 1, 30), ValidationError);
    CHECK_THROWS_AS(glcm(q, 2, 0), ValidationError);
    CHECK_THROWS_AS(glcm(codes(2, 1, 2, {0, 3}), 1, 0), ValidationError);
}

TEST_CASE("glcm stats hand cases")
{
    Glcm g{2, Eigen::MatrixXd(2, 2), 1, 0, {}};
    g.p << 0.5, 0, 0, 0.5;
    GlcmStats s = glcm_stats(g);
    CHECK(s.contrast == 0.0);
    CHECK(s.energy == 0.5);
    CHECK(s.homogeneity == 1.0);
    CHECK(s.correlation == doctest::Approx(1.0).epsilon(1e-15));

    g.p << 0, 0.5, 0.5, 0;
    s = glcm_stats(g);
    CHECK(s.contrast == 1.0);
    CHECK(s.energy == 0.5);
    CHECK(s.homogeneity == 0.5);
    CHECK(s.correlation == doctest::Approx(-1.0).epsilon(1e-15));

    g.p << 1, 0, 0, 0;
    s = glcm_stats(g);
    CHECK(s.contrast == 0.0);
    CHECK(s.energy == 1.0);
    CHECK(s.homogeneity == 1.0);
    CHECK(s.correlation == 1.0);

    g.p << 0.5, 0.5, 0.5, 0.5;
    CHECK_THROWS_AS(glcm_stats(g), ValidationError);
}

TEST_CASE("glcm equals the brute-force oracle on random images")
{
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const auto q = testing::random_codes(rng, 8, 8, 8);
        for (int t : kGlcmAngles) {
            const Eigen::MatrixXd counts = oracle_counts(q, t);
            const Glcm g = glcm(q, 1, t);
            CHECK(g.counts == counts);
            CHECK(g.p == counts / counts.sum());
            CHECK((g.p - g.p.transpose()).cwiseAbs().maxCoeff() == 0.0);
            CHECK(std::abs(g.p.sum() - 1.0) <= 1e-12);

            const GlcmStats a = glcm_stats(g);
            const GlcmStats b = oracle_stats(counts / counts.sum());
            CHECK(std::abs(a.contrast - b.contrast) <= 1e-12);
            CHECK(std::abs(a.energy - b.energy) <= 1e-12);
            CHECK(std::abs(a.homogeneity - b.homogeneity) <= 1e-12);
            CHECK(std::abs(a.correlation - b.correlation) <= 1e-12);
        }
    }
}

TEST_CASE("glcm stat ranges")
{
    Rng rng(55);
    for (int trial = 0; trial < 100; ++trial) {
        const int levels = 2 + static_cast<int>(rng.below(31));
        const auto w = 2 + static_cast<Eigen::Index>(rng.below(15));
        const auto h = 2 + static_cast<Eigen::Index>(rng.below(15));
        const auto q = testing::random_codes(rng, w, h, levels);
        for (int t : kGlcmAngles) {
            const GlcmStats s = glcm_stats(glcm(q, 1, t));
            CHECK(s.contrast >= 0);
            CHECK(s.energy >= 0);
            CHECK(s.energy <= 1);
            CHECK(s.homogeneity > 0);
            CHECK(s.homogeneity <= 1);
            CHECK(s.correlation >= -1);
            CHECK(s.correlation <= 1);
        }
    }
}

TEST_CASE("asymmetric glcm counts one direction")
{
    const Glcm g = glcm(codes(3, 1, 3, {0, 1, 2}), 1, 0, false);
    CHECK(g.p(0, 1) == 0.5);
    CHECK(g.p(1, 2) == 0.5);
    CHECK(g.p(1, 0) == 0.0);
}

TEST_CASE("dft analytic spectra")
{
    const Spectrum c = dft2_magnitude(Image::Constant(4, 4, 2.0));
    CHECK(c.magnitude(0, 0) == 32.0);
    Eigen::ArrayXXd rest = c.magnitude;
    rest(0, 0) = 0;
    CHECK(rest.abs().maxCoeff() == 0.0);

    Image impulse = Image::Zero(4, 4);
    impulse(0, 0) = 1;
    CHECK((dft2_magnitude(impulse).magnitude == 1.0).all());

    const Spectrum s = dft2_magnitude(cosine4());
    CHECK(std::abs(s.magnitude(0, 1) - 8.0) <= 1e-12);
    CHECK(std::abs(s.magnitude(0, 3) - 8.0) <= 1e-12);
    rest = s.magnitude;
    rest(0, 1) = rest(0, 3) = 0;
    CHECK(rest.abs().maxCoeff() <= 1e-12);
}

TEST_CASE("dft matches the direct sum")
{
    Rng rng(31);
    for (auto [w, h] : {std::pair{8, 8}, {6, 10}, {16, 4}, {5, 7}, {1, 9}}) {
        const Image img = testing::random_image(rng, w, h);
        const Eigen::ArrayXXd oracle = direct_dft_magnitude(img);
        const Spectrum s = dft2_magnitude(img);
        CHECK((s.magnitude - oracle).abs().maxCoeff() <= 1e-9 * oracle.maxCoeff());
    }
}

TEST_CASE("centered layout is a cyclic shift")
{
    Rng rng(4);
    const Image img = testing::random_image(rng, 8, 6);
    const Spectrum plain = dft2_magnitude(img);
    const Spectrum centered = dft2_magnitude(img, true);
    CHECK(centered.magnitude(3, 4) == plain.magnitude(0, 0));
    for (Eigen::Index v = 0; v < 6; ++v)
        for (Eigen::Index u = 0; u < 8; ++u)
            CHECK(centered.magnitude((v + 3) % 6, (u + 4) % 8) == plain.magnitude(v, u));
}

TEST_CASE("parseval")
{
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        const Image img = testing::random_image(rng, 32, 32, -1, 1);
        const double lhs = dft2_magnitude(img).magnitude.square().sum();
        const double rhs = 32.0 * 32.0 * img.square().sum();
        CHECK(std::abs(lhs - rhs) <= 1e-9 * rhs);
    }
    const Image odd = testing::random_image(rng, 12, 9);
    const double lhs = dft2_magnitude(odd).magnitude.square().sum();
    CHECK(std::abs(lhs - 108.0 * odd.square().sum()) <= 1e-9 * lhs);
}

TEST_CASE("dft on float images")
{
    ImageT<float> f = ImageT<float>::Constant(4, 4, 1.0f);
    CHECK(dft2_magnitude(f).magnitude(0, 0) == doctest::Approx(16.0));
}

TEST_CASE("normalized radius")
{
    Spectrum s{Eigen::ArrayXXd::Zero(8, 8), false};
    CHECK(normalized_radius(s, 0, 0) == 0.0);
    CHECK(normalized_radius(s, 4, 4) == doctest::Approx(1.0));
    CHECK(normalized_radius(s, 4, 0) == doctest::Approx(std::sqrt(0.5)));
    Spectrum c{Eigen::ArrayXXd::Zero(8, 8), true};
    CHECK(normalized_radius(c, 4, 4) == 0.0);
    CHECK(normalized_radius(c, 0, 0) == doctest::Approx(1.0));
}

TEST_CASE("spectral features")
{
    SpectralFeatures f = spectral_features(dft2_magnitude(Image::Constant(8, 8, 0.5), true));
    CHECK(f.low_freq_energy == 1.0);
    CHECK(f.high_freq_energy == 0.0);
    CHECK(f.spectral_entropy == 0.0);

    Image impulse = Image::Zero(8, 8);
    impulse(0, 0) = 1;
    f = spectral_features(dft2_magnitude(impulse));
    CHECK(f.spectral_entropy == doctest::Approx(1.0).epsilon(1e-12));

    f = spectral_features(dft2_magnitude(cosine4()));
    CHECK(f.spectral_entropy == doctest::Approx(0.25).epsilon(1e-12));

    CHECK_THROWS_AS(spectral_features(dft2_magnitude(Image::Zero(4, 4))), ValidationError);
}

TEST_CASE("band energies partition the spectrum")
{
    Rng rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        const Image img = testing::random_image(rng, 16, 16);
        const Spectrum s = dft2_magnitude(img, true);
        const SpectralFeatures f = spectral_features(s);
        double mid = 0;
        const double total = s.magnitude.square().sum();
        for (Eigen::Index v = 0; v < 16; ++v)
            for (Eigen::Index u = 0; u < 16; ++u) {
                const double r = normalized_radius(s, u, v);
                if (r > kLowBandRadius && r <= kHighBandRadius)
                    mid += s.magnitude(v, u) * s.magnitude(v, u) / total;
            }
        CHECK(std::abs(f.low_freq_energy + mid + f.high_freq_energy - 1.0) <= 1e-12);
        CHECK(f.spectral_entropy >= 0);
        CHECK(f.spectral_entropy <= 1);
    }
}

TEST_CASE("feature names")
{
    const auto& n = feature_names();
    CHECK(n[0] == "contrast_0");
    CHECK(n[3] == "correlation_0");
    CHECK(n[4] == "contrast_45");
    CHECK(n[15] == "correlation_135");
    CHECK(n[16] == "low_freq_energy");
    CHECK(n[17] == "high_freq_energy");
    CHECK(n[18] == "spectral_entropy");
}

TEST_CASE("fused vector of a constant image")
{
    const Image img = Image::Constant(16, 16, 0.4);
    const FeatureVector f = fuse_features(quantize(img, 32), img);
    for (int k = 0; k < 4; ++k) {
        CHECK(f(4 * k + 0) == 0.0);
        CHECK(f(4 * k + 1) == 1.0);
        CHECK(f(4 * k + 2) == 1.0);
        CHECK(f(4 * k + 3) == 1.0);
    }
    CHECK(f(16) == 1.0);
    CHECK(f(17) == 0.0);
    CHECK(f(18) == 0.0);

    const Image zero = Image::Zero(8, 8);
    const FeatureVector z = fuse_features(quantize(zero, 8), zero);
    CHECK(z(16) == 1.0);
    CHECK(z(18) == 0.0);
}

TEST_CASE("fused vector is the concatenation of its parts")
{
    Rng rng(101);
    for (int trial = 0; trial < 10; ++trial) {
        const Image img = testing::random_image(rng, 16, 16);
        const QuantizedImage q = quantize(img, 32);
        const FeatureVector f = fuse_features(q, img);
        CHECK(f.allFinite());
        for (int k = 0; k < 4; ++k) {
            const GlcmStats s = glcm_stats(glcm(q, 1, kGlcmAngles[static_cast<std::size_t>(k)]));
            CHECK(f(4 * k + 0) == s.contrast);
            CHECK(f(4 * k + 1) == s.energy);
            CHECK(f(4 * k + 2) == s.homogeneity);
            CHECK(f(4 * k + 3) == s.correlation);
        }
        const SpectralFeatures sp = spectral_features(dft2_magnitude(img, true));
        CHECK(f(16) == sp.low_freq_energy);
        CHECK(f(17) == sp.high_freq_energy);
        CHECK(f(18) == sp.spectral_entropy);
    }
}

TEST_CASE("sequential mode reads texture off the log spectrum")
{
    Rng rng(5);
    const Image img = testing::random_image(rng, 16, 16);
    const QuantizedImage q = quantize(img, 32);
    const FeatureVector par = fuse_features(q, img, FusionMode::parallel);
    const FeatureVector seq = fuse_features(q, img, FusionMode::sequential);
    CHECK(seq.allFinite());
    CHECK(seq.tail<3>() == par.tail<3>());
    CHECK(seq.head<16>() != par.head<16>());

    const Eigen::ArrayXXd logmag = dft2_magnitude(img, true).magnitude.log1p();
    const Image spec = normalize_unit(Image(logmag));
    const GlcmStats s = glcm_stats(glcm(quantize(spec, 32), 1, 0));
    CHECK(seq(0) == s.contrast);
    CHECK(seq(3) == s.correlation);
}
