#include "glucolens/features.hpp"

#include <algorithm>

namespace glucolens {

std::array<int, 2> glcm_offset(int distance, int theta_deg)
{
    const double t = theta_deg * std::numbers::pi / 180.0;
    return {static_cast<int>(std::lround(distance * std::cos(t))),
            static_cast<int>(std::lround(distance * std::sin(t)))};
}

Glcm glcm(const QuantizedImage& q, int distance, int theta_deg, bool symmetric)
{
    if (distance < 1)
        throw ValidationError("glcm: distance must be >= 1");
    if (theta_deg != 0 && theta_deg != 45 && theta_deg != 90 && theta_deg != 135)
        throw ValidationError("glcm: angle must be one of 0, 45, 90, 135, got " + std::to_string(theta_deg));
    if (q.levels < 2)
        throw ValidationError("glcm: need at least 2 gray levels");

    const auto [dx, dy] = glcm_offset(distance, theta_deg);
    const Eigen::Index w = q.width();
    const Eigen::Index h = q.height();
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(q.levels, q.levels);
    for (Eigen::Index y = std::max<Eigen::Index>(0, -dy); y < std::min(h, h - dy); ++y)
        for (Eigen::Index x = std::max<Eigen::Index>(0, -dx); x < std::min(w, w - dx); ++x) {
            const int i = q.codes(y, x);
            const int j = q.codes(y + dy, x + dx);
            if (i < 0 || i >= q.levels || j < 0 || j >= q.levels)
                throw ValidationError("glcm: code out of range for " + std::to_string(q.levels) + " levels");
            counts(i, j) += 1.0;
        }
    if (symmetric)
        counts += counts.transpose().eval();

    const double total = counts.sum();
    if (total <= 0)
        throw ValidationError("glcm: " + std::to_string(w) + "x" + std::to_string(h) +
                              " image has no pixel pairs at offset (" + std::to_string(dx) + ", " +
                              std::to_string(dy) + ")");
    return {q.levels, counts / total, distance, theta_deg, counts};
}

GlcmStats glcm_stats(const Glcm& g)
{
    const Eigen::MatrixXd& p = g.p;
    if (p.rows() != p.cols() || p.rows() < 1)
        throw ValidationError("glcm_stats: matrix must be square and nonempty");
    if (std::abs(p.sum() - 1.0) > 1e-9 || p.minCoeff() < 0)
        throw ValidationError("glcm_stats: matrix is not normalized");

    const Eigen::Index n = p.rows();
    const Eigen::VectorXd levels = Eigen::VectorXd::LinSpaced(n, 0, static_cast<double>(n - 1));
    const Eigen::VectorXd row_marginal = p.rowwise().sum();
    const Eigen::VectorXd col_marginal = p.colwise().sum().transpose();
    const double mu_i = levels.dot(row_marginal);
    const double mu_j = levels.dot(col_marginal);
    const double sigma_i = std::sqrt((levels.array() - mu_i).square().matrix().dot(row_marginal));
    const double sigma_j = std::sqrt((levels.array() - mu_j).square().matrix().dot(col_marginal));

    GlcmStats s;
    double cov = 0;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = p(i, j);
            if (v == 0)
                continue;
            const double diff = static_cast<double>(i - j);
            s.contrast += diff * diff * v;
            s.energy += v * v;
            s.homogeneity += v / (1.0 + std::abs(diff));
            cov += (static_cast<double>(i) - mu_i) * (static_cast<double>(j) - mu_j) * v;
        }
    if (sigma_i < 1e-12 || sigma_j < 1e-12)
        s.correlation = 1.0;
    else
        s.correlation = std::clamp(cov / (sigma_i * sigma_j), -1.0, 1.0);
    return s;
}

double normalized_radius(const Spectrum& s, Eigen::Index u, Eigen::Index v)
{
    const double fu = static_cast<double>(detail::centered_frequency(u, s.width(), s.centered));
    const double fv = static_cast<double>(detail::centered_frequency(v, s.height(), s.centered));
    const double nu = fu / (0.5 * static_cast<double>(s.width()));
    const double nv = fv / (0.5 * static_cast<double>(s.height()));
    return std::sqrt(0.5 * (nu * nu + nv * nv));
}

SpectralFeatures spectral_features(const Spectrum& s)
{
    const Eigen::ArrayXXd power = s.magnitude.square();
    const double total = power.sum();
    if (!(total > 0))
        throw ValidationError("spectral_features: spectrum has zero total energy");

    SpectralFeatures out;
    double entropy = 0;
    for (Eigen::Index v = 0; v < s.height(); ++v)
        for (Eigen::Index u = 0; u < s.width(); ++u) {
            const double p = power(v, u) / total;
            const double rho = normalized_radius(s, u, v);
            if (rho <= kLowBandRadius)
                out.low_freq_energy += p;
            else if (rho > kHighBandRadius)
                out.high_freq_energy += p;
            if (p > 0)
                entropy -= p * std::log2(p);
        }
    const double bins = static_cast<double>(s.magnitude.size());
    out.spectral_entropy = bins > 1 ? entropy / std::log2(bins) : 0.0;
    return out;
}

const std::array<std::string, kFeatureCount>& feature_names()
{
    static const auto names = [] {
        std::array<std::string, kFeatureCount> n;
        std::size_t k = 0;
        for (int angle : kGlcmAngles)
            for (const char* stat : {"contrast", "energy", "homogeneity", "correlation"})
                n[k++] = std::string(stat) + "_" + std::to_string(angle);
        n[k++] = "low_freq_energy";
        n[k++] = "high_freq_energy";
        n[k++] = "spectral_entropy";
        return n;
    }();
    return names;
}

FeatureVector fuse_features(const QuantizedImage& q, const Image& img, FusionMode mode)
{
    if (q.width() != img.cols() || q.height() != img.rows())
        throw ValidationError("fuse_features: quantized and spatial images differ in size");

    const Spectrum spectrum = dft2_magnitude(img, true);
    QuantizedImage texture_source = q;
    if (mode == FusionMode::sequential)
        texture_source = quantize(normalize_unit(Eigen::ArrayXXd(spectrum.magnitude.log1p())), q.levels);

    FeatureVector f;
    Eigen::Index k = 0;
    for (int angle : kGlcmAngles) {
        const GlcmStats st = glcm_stats(glcm(texture_source, 1, angle, true));
        f(k++) = st.contrast;
        f(k++) = st.energy;
        f(k++) = st.homogeneity;
        f(k++) = st.correlation;
    }
    SpectralFeatures sf{1.0, 0.0, 0.0};
    if (spectrum.magnitude.square().sum() > 0)
        sf = spectral_features(spectrum);
    f(k++) = sf.low_freq_energy;
    f(k++) = sf.high_freq_energy;
    f(k++) = sf.spectral_entropy;
    return f;
}

} // namespace glucolens
