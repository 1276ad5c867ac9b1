#ifndef GLUCOLENS_IMAGE_HPP
#define GLUCOLENS_IMAGE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "glucolens/errors.hpp"
#include "glucolens/random.hpp"

namespace glucolens {

/// Grayscale image, row-major: img(y, x), rows = height, cols = width.
template <typename Scalar>
using ImageT = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Image = ImageT<double>;

using CodeArray = Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Image quantized to `levels` gray levels, codes in [0, levels - 1].
struct QuantizedImage {
    CodeArray codes;
    int levels = 0;

    Eigen::Index width() const { return codes.cols(); }
    Eigen::Index height() const { return codes.rows(); }
};

namespace detail {

template <typename Derived>
typename Derived::Scalar sample_clamped(const Eigen::ArrayBase<Derived>& img, double x, double y)
{
    using Scalar = typename Derived::Scalar;
    const Eigen::Index w = img.cols();
    const Eigen::Index h = img.rows();
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    const auto x0 = static_cast<Eigen::Index>(std::floor(x));
    const auto y0 = static_cast<Eigen::Index>(std::floor(y));
    const Eigen::Index x1 = std::min(x0 + 1, w - 1);
    const Eigen::Index y1 = std::min(y0 + 1, h - 1);
    const auto fx = static_cast<Scalar>(x - static_cast<double>(x0));
    const auto fy = static_cast<Scalar>(y - static_cast<double>(y0));
    const Scalar top = img(y0, x0) + fx * (img(y0, x1) - img(y0, x0));
    const Scalar bottom = img(y1, x0) + fx * (img(y1, x1) - img(y1, x0));
    return top + fy * (bottom - top);
}

} // namespace detail

/// Bilinear resize with pixel-center alignment and edge clamping.
template <typename Derived>
ImageT<typename Derived::Scalar> resize_bilinear(const Eigen::ArrayBase<Derived>& img, Eigen::Index out_w,
                                                 Eigen::Index out_h)
{
    if (out_w < 1 || out_h < 1)
        throw ValidationError("resize: target dimensions must be >= 1, got " + std::to_string(out_w) + "x" +
                              std::to_string(out_h));
    if (img.size() == 0)
        throw ValidationError("resize: empty source image");

    ImageT<typename Derived::Scalar> out(out_h, out_w);
    if (out_w == img.cols() && out_h == img.rows()) {
        out = img;
        return out;
    }
    const double sx = static_cast<double>(img.cols()) / static_cast<double>(out_w);
    const double sy = static_cast<double>(img.rows()) / static_cast<double>(out_h);
    for (Eigen::Index y = 0; y < out_h; ++y) {
        const double src_y = (static_cast<double>(y) + 0.5) * sy - 0.5;
        for (Eigen::Index x = 0; x < out_w; ++x) {
            const double src_x = (static_cast<double>(x) + 0.5) * sx - 0.5;
            out(y, x) = detail::sample_clamped(img, src_x, src_y);
        }
    }
    return out;
}

/// Min-max rescale to [0, 1]. A constant image maps to all zeros.
template <typename Derived>
ImageT<typename Derived::Scalar> normalize_unit(const Eigen::ArrayBase<Derived>& img)
{
    using Scalar = typename Derived::Scalar;
    ImageT<Scalar> out(img.rows(), img.cols());
    if (img.size() == 0)
        return out;
    const Scalar lo = img.minCoeff();
    const Scalar hi = img.maxCoeff();
    if (!(hi > lo)) {
        out.setZero();
        return out;
    }
    out = (img - lo) / (hi - lo);
    return out;
}

/// code = min(floor(p * levels), levels - 1). Input must lie in [0, 1].
template <typename Derived>
QuantizedImage quantize(const Eigen::ArrayBase<Derived>& img, int levels)
{
    if (levels < 2)
        throw ValidationError("quantize: levels must be >= 2, got " + std::to_string(levels));
    if (img.size() == 0)
        throw ValidationError("quantize: empty image");
    if (!(img.minCoeff() >= 0) || !(img.maxCoeff() <= 1))
        throw ValidationError("quantize: input must be normalized to [0, 1]");

    QuantizedImage q{CodeArray(img.rows(), img.cols()), levels};
    const double g = levels;
    for (Eigen::Index y = 0; y < img.rows(); ++y)
        for (Eigen::Index x = 0; x < img.cols(); ++x) {
            const auto code = static_cast<int>(std::floor(static_cast<double>(img(y, x)) * g));
            q.codes(y, x) = std::min(code, levels - 1);
        }
    return q;
}

/// p' = clamp(mean + gain * (p - mean), 0, 1).
template <typename Derived>
ImageT<typename Derived::Scalar> aug_contrast(const Eigen::ArrayBase<Derived>& img, double gain)
{
    using Scalar = typename Derived::Scalar;
    if (!(gain > 0))
        throw ValidationError("aug_contrast: gain must be > 0");
    const Scalar mean = img.mean();
    ImageT<Scalar> out = (mean + static_cast<Scalar>(gain) * (img - mean)).max(Scalar(0)).min(Scalar(1));
    return out;
}

/// Rotation about the image center with bilinear sampling and edge-clamp padding.
template <typename Derived>
ImageT<typename Derived::Scalar> aug_rotate(const Eigen::ArrayBase<Derived>& img, double angle_deg)
{
    ImageT<typename Derived::Scalar> out(img.rows(), img.cols());
    // Snap the trig values so multiples of 90 degrees map grid points onto grid points.
    auto snap = [](double v) {
        const double r = std::round(v);
        return std::abs(v - r) < 1e-12 ? r : v;
    };
    const double a = angle_deg * std::numbers::pi / 180.0;
    const double c = snap(std::cos(a));
    const double s = snap(std::sin(a));
    const double cx = 0.5 * static_cast<double>(img.cols() - 1);
    const double cy = 0.5 * static_cast<double>(img.rows() - 1);
    for (Eigen::Index y = 0; y < img.rows(); ++y) {
        const double dy = static_cast<double>(y) - cy;
        for (Eigen::Index x = 0; x < img.cols(); ++x) {
            const double dx = static_cast<double>(x) - cx;
            // Inverse mapping: output pixel pulls from the source rotated by -angle.
            const double src_x = cx + c * dx + s * dy;
            const double src_y = cy - s * dx + c * dy;
            out(y, x) = detail::sample_clamped(img, src_x, src_y);
        }
    }
    return out;
}

/// p' = clamp(p + N(0, sigma), 0, 1), deterministic per seed.
template <typename Derived>
ImageT<typename Derived::Scalar> aug_noise(const Eigen::ArrayBase<Derived>& img, double sigma, std::uint64_t seed)
{
    using Scalar = typename Derived::Scalar;
    if (!(sigma >= 0))
        throw ValidationError("aug_noise: sigma must be >= 0");
    ImageT<Scalar> out = img;
    if (sigma == 0)
        return out;
    Rng rng(seed);
    for (Eigen::Index y = 0; y < out.rows(); ++y)
        for (Eigen::Index x = 0; x < out.cols(); ++x)
            out(y, x) = std::clamp(static_cast<Scalar>(out(y, x) + sigma * rng.normal()), Scalar(0), Scalar(1));
    return out;
}

/// Parameter ranges for randomized augmentation.
struct AugmentRanges {
    double gain_min = 0.8;
    double gain_max = 1.2;
    double angle_min_deg = -10.0;
    double angle_max_deg = 10.0;
    double sigma_min = 0.002;
    double sigma_max = 0.01;
};

/// Applies contrast, rotation and noise with parameters drawn from `ranges` using `seed`.
Image augment_random(const Image& img, const AugmentRanges& ranges, std::uint64_t seed);

} // namespace glucolens

#endif // GLUCOLENS_IMAGE_HPP
