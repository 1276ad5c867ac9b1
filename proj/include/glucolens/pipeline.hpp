#ifndef GLUCOLENS_PIPELINE_HPP
#define GLUCOLENS_PIPELINE_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "glucolens/dataio.hpp"
#include "glucolens/eval.hpp"

namespace glucolens {

/// How pixel values reach [0, 1] before featurization and CNN input.
enum class Normalization {
    fullscale, ///< divide by the sensor full scale (PGM maxval); keeps absolute intensity
    minmax,    ///< per-image min-max stretch
};

std::string to_string(Normalization n);
Normalization parse_normalization(const std::string& text);

struct SourceFilter {
    double wavelength_nm = 0;
    SourceKind kind = SourceKind::laser;

    bool matches(const ManifestRow& row) const;
    /// "650", or "850-laser"/"850-led" when the wavelength alone is ambiguous.
    std::string label(const std::vector<ManifestRow>& rows) const;
};

/// Assigns train/test to raw rows that have no split yet, 70:30 per
/// (wavelength, source kind) group with the given seed. Augmented rows
/// inherit their parent's split.
void assign_splits(std::vector<ManifestRow>& rows, double ratio, std::uint64_t seed);

struct AugmentOptions {
    double multiplier = 1.5; // augmented copies per raw frame, on average
    AugmentRanges ranges;
    double split_ratio = 0.7;
    std::uint64_t seed = 42;
    unsigned threads = 0;
};

/// Number of augmented copies for raw frame i: floor((i+1) m) - floor(i m).
std::size_t augment_copies(std::size_t index, double multiplier);

/// Reads raw frames listed in `manifest_path`, writes augmented copies under
/// `<dir of out_manifest>/augmented/` and returns the combined manifest (raw rows
/// first, paths relative to the output manifest's directory). Splits are assigned first.
std::vector<ManifestRow> augment_dataset(const std::filesystem::path& manifest_path,
                                         const std::filesystem::path& out_manifest, const AugmentOptions& options);

struct FeaturizeOptions {
    Eigen::Index size = 128;
    int levels = kDefaultGrayLevels;
    FusionMode mode = FusionMode::parallel;
    Normalization normalization = Normalization::fullscale;
    unsigned threads = 0;
};

/// Resize to size x size, then normalize.
Image prepare_image(const Image& img, Eigen::Index size, Normalization normalization);

FeatureVector featurize_image(const Image& img, const FeaturizeOptions& options);

std::vector<FeatureRow> featurize_manifest(const std::vector<ManifestRow>& rows,
                                           const std::filesystem::path& base_dir, const FeaturizeOptions& options);

/// Rows matching `filter` whose split equals `split` (nullopt: any split).
std::vector<ManifestRow> select_rows(const std::vector<ManifestRow>& rows, const SourceFilter& filter,
                                     std::optional<Split> split);

/// One flattened prepared image per row.
nn::Matrix load_image_matrix(const std::vector<ManifestRow>& rows, const std::filesystem::path& base_dir,
                             Eigen::Index size, Normalization normalization, unsigned threads = 0);

/// Feature rows aligned with `rows` (looked up by path).
nn::Matrix feature_matrix(const std::vector<ManifestRow>& rows, const std::vector<FeatureRow>& features);

Eigen::VectorXd concentrations(const std::vector<ManifestRow>& rows);

/// Photodiode features: the raw triple, or the single ratio v_post / v_pre.
Eigen::MatrixXd voltage_features(const std::vector<VoltageSample>& samples, VoltageFeatures features);

/// One metrics CSV row: mode, model, wavelength, rmse, mae, mape, zone_A..zone_E.
struct MetricsRow {
    std::string mode;
    std::string model;
    std::string wavelength;
    MetricReport metrics;
    std::array<double, 5> zones{};
};

inline const std::vector<std::string> kMetricsColumns{"mode", "model",  "wavelength", "rmse",   "mae",   "mape",
                                                      "zone_A", "zone_B", "zone_C",   "zone_D", "zone_E"};

MetricsRow evaluate_predictions(const std::vector<PredictionRow>& preds, const std::string& mode,
                                const std::string& model, const std::string& wavelength);

CsvTable metrics_table(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> parse_metrics_table(const CsvTable& table);

/// Input rows plus, for every (mode, model) with both 850 nm sources, an
/// "850-avg" row holding the arithmetic mean of the two.
std::vector<MetricsRow> report_rows(const std::vector<MetricsRow>& rows);

} // namespace glucolens

#endif // GLUCOLENS_PIPELINE_HPP
