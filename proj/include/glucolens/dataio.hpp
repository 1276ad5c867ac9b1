#ifndef GLUCOLENS_DATAIO_HPP
#define GLUCOLENS_DATAIO_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "glucolens/features.hpp"
#include "glucolens/forest.hpp"
#include "glucolens/image.hpp"
#include "glucolens/nn.hpp"
#include "glucolens/phantom.hpp"

namespace glucolens {

// ---- PGM -----------------------------------------------------------------

/// Binary P5, 16-bit big-endian, maxval 65535. Pixels must lie in [0, 1].
void write_pgm(const Image& img, const std::filesystem::path& path);
std::string encode_pgm(const Image& img);

/// Accepts P5 with maxval 255 or 65535; samples are divided by maxval.
Image read_pgm(const std::filesystem::path& path);
Image decode_pgm(std::string_view bytes);

// ---- CSV (RFC 4180) ------------------------------------------------------

using CsvRow = std::vector<std::string>;

struct CsvTable {
    CsvRow header;
    std::vector<CsvRow> rows;

    /// Column index by name; throws FormatError listing the missing name.
    std::size_t column(const std::string& name) const;
};

std::string csv_escape(std::string_view field);
std::string encode_csv(const CsvTable& table);
CsvTable decode_csv(std::string_view text);

void write_csv(const CsvTable& table, const std::filesystem::path& path);
CsvTable read_csv(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& text, const std::string& context = "value");

/// Whole file into memory / atomically replace a file's contents.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

// ---- Manifest --------------------------------------------------------------

enum class Split { train, test, none };

std::string to_string(Split s);
Split parse_split(const std::string& text);

struct ManifestRow {
    std::string path; // relative to the manifest's directory
    double wavelength_nm = 0;
    SourceKind source_kind = SourceKind::laser;
    double concentration_mgdl = 0;
    Split split = Split::none;
    std::string augmented_from; // empty for raw frames

    friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

inline const std::vector<std::string> kManifestColumns{"path",  "wavelength_nm", "source_kind", "concentration_mgdl",
                                                       "split", "augmented_from"};

std::string encode_manifest(const std::vector<ManifestRow>& rows);
/// Exact header required; a missing or extra column is a schema error naming it.
std::vector<ManifestRow> decode_manifest(std::string_view text);

void write_manifest(const std::vector<ManifestRow>& rows, const std::filesystem::path& path);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

// ---- Feature cache ---------------------------------------------------------

struct FeatureRow {
    std::string path;
    FeatureVector values;
};

void write_features(const std::vector<FeatureRow>& rows, const std::filesystem::path& path);
std::vector<FeatureRow> read_features(const std::filesystem::path& path);

// ---- Voltage samples -------------------------------------------------------

void write_voltages(const std::vector<VoltageSample>& rows, const std::filesystem::path& path);
std::vector<VoltageSample> read_voltages(const std::filesystem::path& path);

// ---- Predictions -----------------------------------------------------------

struct PredictionRow {
    std::string id;
    double reference_mgdl = 0;
    double predicted_mgdl = 0;
};

void write_predictions(const std::vector<PredictionRow>& rows, const std::filesystem::path& path);
std::vector<PredictionRow> read_predictions(const std::filesystem::path& path);

// ---- Model files -----------------------------------------------------------

/// Feature set of a linear photodiode model.
enum class VoltageFeatures { ratio, triple };

struct LinearRegressor {
    LinearModel model;
    VoltageFeatures features = VoltageFeatures::triple;
};

using AnyModel = std::variant<nn::TrainedModel, LinearRegressor, ForestModel>;

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// "GLM1" magic, u32 version, u32 kind tag, then the kind's spec and
/// length-prefixed little-endian f64 parameter blocks.
std::string encode_model(const AnyModel& model);
AnyModel decode_model(std::string_view bytes);

void save_model(const AnyModel& model, const std::filesystem::path& path);
AnyModel load_model(const std::filesystem::path& path);

} // namespace glucolens

#endif // GLUCOLENS_DATAIO_HPP
