#ifndef GLUCOLENS_FEATURES_HPP
#define GLUCOLENS_FEATURES_HPP

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "glucolens/errors.hpp"
#include "glucolens/image.hpp"

namespace glucolens {

/// Normalized gray-level co-occurrence matrix for one offset.
struct Glcm {
    int levels = 0;
    Eigen::MatrixXd p; // levels x levels, sums to 1
    int distance = 1;
    int theta_deg = 0;
    Eigen::MatrixXd counts; // raw pair counts behind p, empty if built by hand
};

struct GlcmStats {
    double contrast = 0;
    double energy = 0;
    double homogeneity = 0;
    double correlation = 0;
};

/// Pixel offset (dx, dy) = (round(d cos t), round(d sin t)); y grows downward.
std::array<int, 2> glcm_offset(int distance, int theta_deg);

/// Counts pairs (I(x,y), I(x+dx, y+dy)) fully inside the image. Symmetric mode
/// adds the transpose before normalizing to unit sum.
Glcm glcm(const QuantizedImage& q, int distance, int theta_deg, bool symmetric = true);

/// Contrast, energy, homogeneity and correlation. Correlation is 1 when either
/// marginal standard deviation vanishes.
GlcmStats glcm_stats(const Glcm& g);

/// |F(u,v)| of the unnormalized forward 2D DFT. Layout is (v, u) matching img(y, x).
struct Spectrum {
    Eigen::ArrayXXd magnitude;
    bool centered = false;

    Eigen::Index width() const { return magnitude.cols(); }
    Eigen::Index height() const { return magnitude.rows(); }
};

namespace detail {

/// exp(-2 pi i k / n) with exact values on the quarter turns.
template <typename Scalar>
std::complex<Scalar> twiddle(std::size_t k, std::size_t n)
{
    k %= n;
    if ((4 * k) % n == 0) {
        switch ((4 * k) / n) {
        case 0:
            return {1, 0};
        case 1:
            return {0, -1};
        case 2:
            return {-1, 0};
        default:
            return {0, 1};
        }
    }
    const Scalar a = -2 * std::numbers::pi_v<Scalar> * static_cast<Scalar>(k) / static_cast<Scalar>(n);
    return {std::cos(a), std::sin(a)};
}

/// In-place forward DFT of a strided sequence: radix-2 for powers of two, direct otherwise.
template <typename Scalar>
void dft_inplace(std::complex<Scalar>* data, std::size_t n, std::size_t stride,
                 std::vector<std::complex<Scalar>>& scratch)
{
    if (n <= 1)
        return;
    scratch.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        scratch[i] = data[i * stride];

    if ((n & (n - 1)) == 0) {
        // Bit-reversal permutation then iterative butterflies.
        for (std::size_t i = 1, j = 0; i < n; ++i) {
            std::size_t bit = n >> 1;
            for (; j & bit; bit >>= 1)
                j ^= bit;
            j ^= bit;
            if (i < j)
                std::swap(scratch[i], scratch[j]);
        }
        for (std::size_t len = 2; len <= n; len <<= 1) {
            const std::size_t half = len / 2;
            const std::size_t step = n / len;
            for (std::size_t start = 0; start < n; start += len)
                for (std::size_t k = 0; k < half; ++k) {
                    const auto w = twiddle<Scalar>(k * step, n);
                    const auto a = scratch[start + k];
                    const auto b = scratch[start + k + half] * w;
                    scratch[start + k] = a + b;
                    scratch[start + k + half] = a - b;
                }
        }
        for (std::size_t i = 0; i < n; ++i)
            data[i * stride] = scratch[i];
        return;
    }

    for (std::size_t k = 0; k < n; ++k) {
        std::complex<Scalar> acc{0, 0};
        for (std::size_t x = 0; x < n; ++x)
            acc += scratch[x] * twiddle<Scalar>(k * x, n);
        data[k * stride] = acc;
    }
}

inline Eigen::Index centered_frequency(Eigen::Index index, Eigen::Index n, bool centered)
{
    if (centered)
        return index - n / 2;
    return index < n - n / 2 ? index : index - n;
}

} // namespace detail

/// Complex 2D DFT F(u,v) = sum_x sum_y I(x,y) exp(-j 2 pi (ux/W + vy/H)), stored (v, u).
template <typename Derived>
Eigen::Array<std::complex<typename Derived::Scalar>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
dft2(const Eigen::ArrayBase<Derived>& img)
{
    using Scalar = typename Derived::Scalar;
    using Complex = std::complex<Scalar>;
    const Eigen::Index h = img.rows();
    const Eigen::Index w = img.cols();
    Eigen::Array<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> f = img.template cast<Complex>();
    std::vector<Complex> scratch;
    for (Eigen::Index y = 0; y < h; ++y)
        detail::dft_inplace(f.data() + y * w, static_cast<std::size_t>(w), 1, scratch);
    for (Eigen::Index x = 0; x < w; ++x)
        detail::dft_inplace(f.data() + x, static_cast<std::size_t>(h), static_cast<std::size_t>(w), scratch);
    return f;
}

/// |F| with the DC term moved to (H/2, W/2) when `centered`.
template <typename Derived>
Spectrum dft2_magnitude(const Eigen::ArrayBase<Derived>& img, bool centered = false)
{
    const auto f = dft2(img);
    const Eigen::Index h = f.rows();
    const Eigen::Index w = f.cols();
    Spectrum s{Eigen::ArrayXXd(h, w), centered};
    for (Eigen::Index v = 0; v < h; ++v)
        for (Eigen::Index u = 0; u < w; ++u) {
            const Eigen::Index dv = centered ? (v + h / 2) % h : v;
            const Eigen::Index du = centered ? (u + w / 2) % w : u;
            s.magnitude(dv, du) = static_cast<double>(std::abs(f(v, u)));
        }
    return s;
}

struct SpectralFeatures {
    double low_freq_energy = 0;
    double high_freq_energy = 0;
    double spectral_entropy = 0;
};

/// Radius cutoffs on the normalized frequency radius (1 at the Nyquist corner).
inline constexpr double kLowBandRadius = 0.25;
inline constexpr double kHighBandRadius = 0.5;

/// Normalized radius of bin (u, v) from DC.
double normalized_radius(const Spectrum& s, Eigen::Index u, Eigen::Index v);

/// Low/high band energy fractions and entropy of the normalized power spectrum
/// divided by log2(W*H). Throws on an all-zero spectrum.
SpectralFeatures spectral_features(const Spectrum& s);

inline constexpr int kFeatureCount = 19;
using FeatureVector = Eigen::Matrix<double, kFeatureCount, 1>;

inline constexpr std::array<int, 4> kGlcmAngles{0, 45, 90, 135};
inline constexpr int kDefaultGrayLevels = 32;

/// Column names in layout order, e.g. "contrast_0", ..., "spectral_entropy".
const std::array<std::string, kFeatureCount>& feature_names();

enum class FusionMode {
    parallel,   ///< GLCM on the spatial image, spectral features on its DFT
    sequential, ///< GLCM on the quantized log-magnitude spectrum
};

/// 4 orientations x {contrast, energy, homogeneity, correlation} then
/// {low_freq_energy, high_freq_energy, spectral_entropy}. `img` must lie in [0, 1];
/// `q` is its quantization. An all-zero image contributes the constant-image
/// spectral triple [1, 0, 0].
FeatureVector fuse_features(const QuantizedImage& q, const Image& img, FusionMode mode = FusionMode::parallel);

} // namespace glucolens

#endif // GLUCOLENS_FEATURES_HPP
