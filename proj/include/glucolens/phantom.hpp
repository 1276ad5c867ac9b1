#ifndef GLUCOLENS_PHANTOM_HPP
#define GLUCOLENS_PHANTOM_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "glucolens/image.hpp"

namespace glucolens {

enum class SourceKind { laser, led };

std::string to_string(SourceKind kind);
SourceKind parse_source_kind(const std::string& text);

/// Gaussian absorption band in wavelength. `strength` is the peak value:
/// 1/cm for water, 1/cm per mg/dL for glucose.
struct Band {
    double center_nm;
    double width_nm;
    double strength;
};

/// Synthetic optical world for one illumination source. The band centers
/// are the published NIR absorption peaks; every strength, width and
/// scatter value is a tunable default, not a measured quantity.
struct OpticalConfig {
    double wavelength_nm = 650.0;
    double path_length_cm = 1.0;
    std::vector<Band> glucose_bands = default_glucose_bands();
    std::vector<Band> water_bands = default_water_bands();
    double scatter_coeff = 0.5;           // 1/cm
    double glucose_scatter_slope = 0.002; // 1/cm per mg/dL
    double beam_sigma_px = 32.0;
    double speckle_contrast = 0.2;
    double sensor_noise_sigma = 400.0; // intensity units
    SourceKind source_kind = SourceKind::laser;
    double source_intensity = 0.9 * 65535.0;
    double max_intensity = 65535.0; // 16-bit sensor

    static std::vector<Band> default_glucose_bands();
    static std::vector<Band> default_water_bands();

    /// Throws ValidationError if any invariant is violated.
    void validate() const;
};

/// Photodiode front end for the voltage mode.
struct VoltageConfig {
    OpticalConfig optics = voltage_optics();
    double dark_level_v = 0.01;
    double dark_noise_v = 0.001;
    double ambient_offset_v = 0.05;
    double ambient_noise_v = 0.002;
    double gain_v = 1.0;
    double relative_noise = 0.005;

    /// 1600 nm LED, no speckle.
    static OpticalConfig voltage_optics();
};

struct VoltageSample {
    double v_baseline = 0;
    double v_pre = 0;
    double v_post = 0;
    double concentration_mgdl = 0;
};

/// Water bands plus concentration-weighted glucose bands at the configured wavelength (1/cm).
double absorption_coefficient(const OpticalConfig& config, double concentration_mgdl);

/// Beer-Lambert transmittance including the glucose-dependent scatter term.
double transmittance(const OpticalConfig& config, double concentration_mgdl);

/// Transillumination frame in sensor units [0, config.max_intensity].
Image gen_image(const OpticalConfig& config, double concentration_mgdl, Eigen::Index width, Eigen::Index height,
                std::uint64_t seed);

VoltageSample gen_voltage_sample(const VoltageConfig& config, double concentration_mgdl, std::uint64_t seed);

/// Draws `count` samples with concentrations uniform on [conc_min, conc_max].
std::vector<VoltageSample> gen_voltage_set(const VoltageConfig& config, std::size_t count, double conc_min,
                                           double conc_max, std::uint64_t seed);

/// Named illumination source of the imaging rig.
struct Source {
    std::string name; // e.g. "650-laser"
    OpticalConfig optics;
};

/// 650/808/850 nm lasers and the 850 nm LED.
std::vector<Source> default_sources();

Source make_source(double wavelength_nm, SourceKind kind);

/// Concentration levels conc_min, conc_min + step, ... up to conc_max.
std::vector<double> concentration_levels(double conc_min, double conc_max, double step);

struct DatasetSpec {
    std::vector<Source> sources = default_sources();
    double conc_min = 70;
    double conc_max = 200;
    double step = 2;
    int images_per_level = 10;
    Eigen::Index width = 128;
    Eigen::Index height = 128;
    std::uint64_t seed = 42;
};

struct ManifestRow;

/// Seed of one raw frame; independent of generation order.
std::uint64_t image_seed(std::uint64_t dataset_seed, std::size_t source_index, std::size_t level_index,
                         std::size_t replicate_index);

/// Renders every (source, level, replicate) frame to `out_dir/images/` as PGM and
/// returns one manifest row per image (paths relative to `out_dir`).
std::vector<ManifestRow> gen_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir,
                                     unsigned threads = 0);

} // namespace glucolens

#endif // GLUCOLENS_PHANTOM_HPP
