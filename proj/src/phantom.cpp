#include "glucolens/phantom.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "glucolens/dataio.hpp"
#include "glucolens/parallel.hpp"

namespace glucolens {

std::string to_string(SourceKind kind)
{
    return kind == SourceKind::laser ? "laser" : "led";
}

SourceKind parse_source_kind(const std::string& text)
{
    if (text == "laser")
        return SourceKind::laser;
    if (text == "led")
        return SourceKind::led;
    throw ValidationError("unknown source kind '" + text + "' (expected laser or led)");
}

std::vector<Band> OpticalConfig::default_glucose_bands()
{
    return {{1408, 40, 0.0010}, {1536, 60, 0.0012}, {1688, 50, 0.0015}, {2261, 60, 0.0010}};
}

std::vector<Band> OpticalConfig::default_water_bands()
{
    return {{1450, 60, 2.0}, {1787, 60, 1.0}, {1934, 60, 4.0}};
}

void OpticalConfig::validate() const
{
    auto fail = [](const std::string& what) { throw ValidationError("optical config: " + what); };
    if (!(wavelength_nm >= 400 && wavelength_nm <= 2500))
        fail("wavelength must lie in [400, 2500] nm");
    if (!(path_length_cm > 0))
        fail("path length must be > 0");
    for (const auto* bands : {&glucose_bands, &water_bands})
        for (const auto& b : *bands) {
            if (!(b.width_nm > 0))
                fail("band width must be > 0");
            if (!(b.strength >= 0))
                fail("band strength must be >= 0");
        }
    if (!(scatter_coeff >= 0))
        fail("scatter coefficient must be >= 0");
    if (!(beam_sigma_px > 0))
        fail("beam sigma must be > 0");
    if (!(speckle_contrast >= 0 && speckle_contrast <= 1))
        fail("speckle contrast must lie in [0, 1]");
    if (!(sensor_noise_sigma >= 0))
        fail("sensor noise sigma must be >= 0");
    if (!(max_intensity > 0) || !(source_intensity >= 0))
        fail("intensities must be positive");
}

namespace {

double band_sum(const std::vector<Band>& bands, double wavelength_nm)
{
    double sum = 0;
    for (const auto& b : bands) {
        const double z = (wavelength_nm - b.center_nm) / b.width_nm;
        sum += b.strength * std::exp(-0.5 * z * z);
    }
    return sum;
}

} // namespace

double absorption_coefficient(const OpticalConfig& config, double concentration_mgdl)
{
    if (!(concentration_mgdl >= 0))
        throw ValidationError("concentration must be >= 0");
    return band_sum(config.water_bands, config.wavelength_nm) +
           concentration_mgdl * band_sum(config.glucose_bands, config.wavelength_nm);
}

double transmittance(const OpticalConfig& config, double concentration_mgdl)
{
    const double attenuation = absorption_coefficient(config, concentration_mgdl) + config.scatter_coeff +
                               config.glucose_scatter_slope * concentration_mgdl;
    if (attenuation < 0)
        throw ValidationError("effective attenuation is negative; transmittance would exceed 1");
    return std::exp(-attenuation * config.path_length_cm);
}

Image gen_image(const OpticalConfig& config, double concentration_mgdl, Eigen::Index width, Eigen::Index height,
                std::uint64_t seed)
{
    if (width < 8 || height < 8)
        throw ValidationError("gen_image: width and height must be >= 8");
    config.validate();

    const double t = transmittance(config, concentration_mgdl);
    const double cx = 0.5 * static_cast<double>(width - 1);
    const double cy = 0.5 * static_cast<double>(height - 1);
    const double inv_two_sigma2 = 1.0 / (2.0 * config.beam_sigma_px * config.beam_sigma_px);
    const bool speckle = config.source_kind == SourceKind::laser && config.speckle_contrast > 0;
    // Unit-mean gamma: shape k = 1/C^2, scale C^2 gives std/mean = C.
    const double gamma_shape = speckle ? 1.0 / (config.speckle_contrast * config.speckle_contrast) : 0.0;
    const double gamma_scale = speckle ? config.speckle_contrast * config.speckle_contrast : 0.0;

    Rng rng(seed);
    Image img(height, width);
    for (Eigen::Index y = 0; y < height; ++y) {
        const double dy = static_cast<double>(y) - cy;
        for (Eigen::Index x = 0; x < width; ++x) {
            const double dx = static_cast<double>(x) - cx;
            double v = config.source_intensity * std::exp(-(dx * dx + dy * dy) * inv_two_sigma2) * t;
            if (speckle)
                v *= rng.gamma(gamma_shape, gamma_scale);
            if (config.sensor_noise_sigma > 0)
                v += config.sensor_noise_sigma * rng.normal();
            img(y, x) = std::clamp(v, 0.0, config.max_intensity);
        }
    }
    return img;
}

OpticalConfig VoltageConfig::voltage_optics()
{
    OpticalConfig c;
    c.wavelength_nm = 1600;
    c.source_kind = SourceKind::led;
    c.speckle_contrast = 0;
    return c;
}

VoltageSample gen_voltage_sample(const VoltageConfig& config, double concentration_mgdl, std::uint64_t seed)
{
    if (!(concentration_mgdl >= 0))
        throw ValidationError("concentration must be >= 0");
    Rng rng(seed);
    VoltageSample s;
    s.concentration_mgdl = concentration_mgdl;
    s.v_baseline = std::max(0.0, config.dark_level_v + config.dark_noise_v * rng.normal());
    s.v_pre = s.v_baseline + std::max(0.0, config.ambient_offset_v + config.ambient_noise_v * rng.normal());
    const double t = transmittance(config.optics, concentration_mgdl);
    s.v_post = std::max(0.0, s.v_pre + config.gain_v * t * (1.0 + config.relative_noise * rng.normal()));
    return s;
}

std::vector<VoltageSample> gen_voltage_set(const VoltageConfig& config, std::size_t count, double conc_min,
                                           double conc_max, std::uint64_t seed)
{
    if (!(conc_min >= 0) || !(conc_max >= conc_min))
        throw ValidationError("voltage set: need 0 <= conc_min <= conc_max");
    std::vector<VoltageSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng pick(hash_seed({seed, 0x766f6c74ULL, i}));
        const double c = pick.uniform(conc_min, conc_max);
        out.push_back(gen_voltage_sample(config, c, hash_seed({seed, 0x6e6f6973ULL, i})));
    }
    return out;
}

Source make_source(double wavelength_nm, SourceKind kind)
{
    OpticalConfig c;
    c.wavelength_nm = wavelength_nm;
    c.source_kind = kind;
    std::ostringstream name;
    name << wavelength_nm << '-' << to_string(kind);
    return {name.str(), c};
}

std::vector<Source> default_sources()
{
    return {make_source(650, SourceKind::laser), make_source(808, SourceKind::laser),
            make_source(850, SourceKind::laser), make_source(850, SourceKind::led)};
}

std::vector<double> concentration_levels(double conc_min, double conc_max, double step)
{
    if (!(conc_min < conc_max))
        throw ValidationError("concentration range: min must be < max");
    if (!(step > 0))
        throw ValidationError("concentration step must be > 0");
    // Small slack so 70..200 step 2 yields 66 levels despite rounding in the division.
    const auto count = static_cast<std::size_t>(std::floor((conc_max - conc_min) / step + 1e-9)) + 1;
    std::vector<double> levels(count);
    for (std::size_t i = 0; i < count; ++i)
        levels[i] = conc_min + static_cast<double>(i) * step;
    return levels;
}

std::uint64_t image_seed(std::uint64_t dataset_seed, std::size_t source_index, std::size_t level_index,
                         std::size_t replicate_index)
{
    return hash_seed({dataset_seed, source_index, level_index, replicate_index});
}

std::vector<ManifestRow> gen_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir, unsigned threads)
{
    if (spec.images_per_level < 1)
        throw ValidationError("images per level must be >= 1");
    const auto levels = concentration_levels(spec.conc_min, spec.conc_max, spec.step);
    for (const auto& s : spec.sources)
        s.optics.validate();

    const std::size_t per_source = levels.size() * static_cast<std::size_t>(spec.images_per_level);
    const std::size_t total = spec.sources.size() * per_source;
    std::vector<ManifestRow> rows(total);

    std::error_code ec;
    for (const auto& s : spec.sources) {
        std::filesystem::create_directories(out_dir / "images" / s.name, ec);
        if (ec)
            throw IoError("cannot create directory " + (out_dir / "images" / s.name).string() + ": " + ec.message());
    }

    parallel_for(total, threads, [&](std::size_t idx) {
        const std::size_t si = idx / per_source;
        const std::size_t li = (idx % per_source) / static_cast<std::size_t>(spec.images_per_level);
        const std::size_t ri = idx % static_cast<std::size_t>(spec.images_per_level);
        const auto& src = spec.sources[si];
        const double conc = levels[li];

        std::ostringstream rel;
        rel << "images/" << src.name << "/c" << std::setw(3) << std::setfill('0') << conc << "_r" << std::setw(2)
            << ri << ".pgm";
        const Image raw = gen_image(src.optics, conc, spec.width, spec.height, image_seed(spec.seed, si, li, ri));
        write_pgm(raw / src.optics.max_intensity, out_dir / rel.str());

        ManifestRow& row = rows[idx];
        row.path = rel.str();
        row.wavelength_nm = src.optics.wavelength_nm;
        row.source_kind = src.optics.source_kind;
        row.concentration_mgdl = conc;
        row.split = Split::none;
    });
    return rows;
}

} // namespace glucolens
