#include "glucolens/dataio.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace glucolens {

// ---- files -----------------------------------------------------------------

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string() + " for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad())
        throw IoError("read failed: " + path.string());
    return std::move(buf).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes)
{
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec)
            throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw IoError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec)
        throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

// ---- PGM -------------------------------------------------------------------

std::string encode_pgm(const Image& img)
{
    if (img.size() == 0)
        throw ValidationError("write_pgm: empty image");
    if (!(img.minCoeff() >= 0) || !(img.maxCoeff() <= 1))
        throw ValidationError("write_pgm: pixels must be normalized to [0, 1]");
    std::string out = "P5\n" + std::to_string(img.cols()) + " " + std::to_string(img.rows()) + "\n65535\n";
    const std::size_t header = out.size();
    out.resize(header + 2 * static_cast<std::size_t>(img.size()));
    std::size_t k = header;
    for (Eigen::Index y = 0; y < img.rows(); ++y)
        for (Eigen::Index x = 0; x < img.cols(); ++x) {
            const auto v = static_cast<std::uint16_t>(std::lround(img(y, x) * 65535.0));
            out[k++] = static_cast<char>(v >> 8);
            out[k++] = static_cast<char>(v & 0xFF);
        }
    return out;
}

void write_pgm(const Image& img, const std::filesystem::path& path)
{
    write_file(path, encode_pgm(img));
}

namespace {

bool is_pgm_space(char c)
{
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

long parse_pgm_int(std::string_view bytes, std::size_t& pos, const char* what)
{
    for (;;) {
        while (pos < bytes.size() && is_pgm_space(bytes[pos]))
            ++pos;
        if (pos < bytes.size() && bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n')
                ++pos;
            continue;
        }
        break;
    }
    const std::size_t start = pos;
    long value = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
        value = value * 10 + (bytes[pos] - '0');
        if (value > 1'000'000'000L)
            throw FormatError(std::string("pgm: ") + what + " too large at byte offset " + std::to_string(start));
        ++pos;
    }
    if (pos == start)
        throw FormatError(std::string("pgm: expected ") + what + " at byte offset " + std::to_string(start));
    return value;
}

} // namespace

Image decode_pgm(std::string_view bytes)
{
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
        throw FormatError("pgm: bad magic at byte offset 0 (expected P5)");
    std::size_t pos = 2;
    const long width = parse_pgm_int(bytes, pos, "width");
    const long height = parse_pgm_int(bytes, pos, "height");
    const long maxval = parse_pgm_int(bytes, pos, "maxval");
    if (width < 1 || height < 1)
        throw FormatError("pgm: dimensions must be positive");
    if (maxval != 255 && maxval != 65535)
        throw FormatError("pgm: unsupported maxval " + std::to_string(maxval) + " (expected 255 or 65535)");
    if (pos >= bytes.size() || !is_pgm_space(bytes[pos]))
        throw FormatError("pgm: missing whitespace after maxval at byte offset " + std::to_string(pos));
    ++pos;

    const std::size_t sample_bytes = maxval == 255 ? 1 : 2;
    const std::size_t needed = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * sample_bytes;
    if (bytes.size() - pos < needed)
        throw FormatError("pgm: truncated payload at byte offset " + std::to_string(bytes.size()) + " (expected " +
                          std::to_string(pos + needed) + " bytes)");

    Image img(height, width);
    const auto scale = static_cast<double>(maxval);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    for (Eigen::Index y = 0; y < img.rows(); ++y)
        for (Eigen::Index x = 0; x < img.cols(); ++x) {
            unsigned v = *p++;
            if (sample_bytes == 2)
                v = (v << 8) | *p++;
            img(y, x) = static_cast<double>(v) / scale;
        }
    return img;
}

Image read_pgm(const std::filesystem::path& path)
{
    try {
        return decode_pgm(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

// ---- CSV -------------------------------------------------------------------

std::size_t CsvTable::column(const std::string& name) const
{
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name)
            return i;
    throw FormatError("csv: missing column '" + name + "'");
}

std::string csv_escape(std::string_view field)
{
    if (field.find_first_of(",\"\r\n") == std::string_view::npos)
        return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string encode_csv(const CsvTable& table)
{
    std::string out;
    auto emit = [&](const CsvRow& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i)
                out += ',';
            out += csv_escape(row[i]);
        }
        out += "\r\n";
    };
    emit(table.header);
    for (const auto& r : table.rows)
        emit(r);
    return out;
}

CsvTable decode_csv(std::string_view text)
{
    if (text.starts_with("\xEF\xBB\xBF"))
        text.remove_prefix(3);
    std::vector<CsvRow> records;
    CsvRow row;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t i = 0;
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        records.push_back(std::move(row));
        row.clear();
    };
    while (i < text.size()) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    i += 2;
                    continue;
                }
                quoted = false;
            } else {
                field += c;
            }
            ++i;
            continue;
        }
        if (c == '"' && !field_started && field.empty()) {
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
            end_row();
            ++i;
        } else if (c == '\n') {
            end_row();
        } else {
            field += c;
            field_started = true;
        }
        ++i;
    }
    if (quoted)
        throw FormatError("csv: unterminated quoted field");
    if (field_started || !field.empty() || !row.empty())
        end_row();

    CsvTable table;
    if (records.empty())
        throw FormatError("csv: missing header row");
    table.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != table.header.size())
            throw FormatError("csv: row " + std::to_string(r + 1) + " has " + std::to_string(records[r].size()) +
                              " fields, header has " + std::to_string(table.header.size()));
        table.rows.push_back(std::move(records[r]));
    }
    return table;
}

void write_csv(const CsvTable& table, const std::filesystem::path& path)
{
    write_file(path, encode_csv(table));
}

CsvTable read_csv(const std::filesystem::path& path)
{
    try {
        return decode_csv(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& context)
{
    double v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw FormatError("cannot parse " + context + " '" + text + "' as a number");
    return v;
}

// ---- manifest --------------------------------------------------------------

std::string to_string(Split s)
{
    switch (s) {
    case Split::train:
        return "train";
    case Split::test:
        return "test";
    case Split::none:
        return "none";
    }
    return "none";
}

Split parse_split(const std::string& text)
{
    for (auto s : {Split::train, Split::test, Split::none})
        if (to_string(s) == text)
            return s;
    throw FormatError("unknown split '" + text + "'");
}

namespace {

void require_header(const CsvTable& t, const std::vector<std::string>& expected, const char* what)
{
    for (const auto& name : expected)
        if (std::find(t.header.begin(), t.header.end(), name) == t.header.end())
            throw FormatError(std::string(what) + ": schema mismatch, missing column '" + name + "'");
    for (const auto& name : t.header)
        if (std::find(expected.begin(), expected.end(), name) == expected.end())
            throw FormatError(std::string(what) + ": schema mismatch, unknown column '" + name + "'");
}

} // namespace

std::string encode_manifest(const std::vector<ManifestRow>& rows)
{
    CsvTable t{kManifestColumns, {}};
    t.rows.reserve(rows.size());
    for (const auto& r : rows)
        t.rows.push_back({r.path, format_double(r.wavelength_nm), to_string(r.source_kind),
                          format_double(r.concentration_mgdl), to_string(r.split), r.augmented_from});
    return encode_csv(t);
}

std::vector<ManifestRow> decode_manifest(std::string_view text)
{
    const CsvTable t = decode_csv(text);
    require_header(t, kManifestColumns, "manifest");
    const auto c_path = t.column("path"), c_wl = t.column("wavelength_nm"), c_kind = t.column("source_kind"),
               c_conc = t.column("concentration_mgdl"), c_split = t.column("split"),
               c_aug = t.column("augmented_from");
    std::vector<ManifestRow> rows;
    rows.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        ManifestRow m;
        m.path = r[c_path];
        m.wavelength_nm = parse_double(r[c_wl], "wavelength_nm");
        try {
            m.source_kind = parse_source_kind(r[c_kind]);
        } catch (const ValidationError& e) {
            throw FormatError(std::string("manifest: ") + e.what());
        }
        m.concentration_mgdl = parse_double(r[c_conc], "concentration_mgdl");
        m.split = parse_split(r[c_split]);
        m.augmented_from = r[c_aug];
        rows.push_back(std::move(m));
    }
    return rows;
}

void write_manifest(const std::vector<ManifestRow>& rows, const std::filesystem::path& path)
{
    write_file(path, encode_manifest(rows));
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path)
{
    try {
        return decode_manifest(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

// ---- feature / voltage / prediction tables ---------------------------------

void write_features(const std::vector<FeatureRow>& rows, const std::filesystem::path& path)
{
    CsvTable t;
    t.header.push_back("path");
    for (const auto& n : feature_names())
        t.header.push_back(n);
    for (const auto& r : rows) {
        CsvRow row{r.path};
        for (Eigen::Index i = 0; i < kFeatureCount; ++i)
            row.push_back(format_double(r.values(i)));
        t.rows.push_back(std::move(row));
    }
    write_csv(t, path);
}

std::vector<FeatureRow> read_features(const std::filesystem::path& path)
{
    const CsvTable t = read_csv(path);
    std::vector<std::string> expected{"path"};
    expected.insert(expected.end(), feature_names().begin(), feature_names().end());
    require_header(t, expected, "feature cache");
    const auto c_path = t.column("path");
    std::array<std::size_t, kFeatureCount> cols{};
    for (std::size_t i = 0; i < cols.size(); ++i)
        cols[i] = t.column(feature_names()[i]);
    std::vector<FeatureRow> rows;
    for (const auto& r : t.rows) {
        FeatureRow f{r[c_path], {}};
        for (std::size_t i = 0; i < cols.size(); ++i)
            f.values(static_cast<Eigen::Index>(i)) = parse_double(r[cols[i]], feature_names()[i]);
        rows.push_back(std::move(f));
    }
    return rows;
}

void write_voltages(const std::vector<VoltageSample>& rows, const std::filesystem::path& path)
{
    CsvTable t{{"v_baseline", "v_pre", "v_post", "concentration_mgdl"}, {}};
    for (const auto& s : rows)
        t.rows.push_back({format_double(s.v_baseline), format_double(s.v_pre), format_double(s.v_post),
                          format_double(s.concentration_mgdl)});
    write_csv(t, path);
}

std::vector<VoltageSample> read_voltages(const std::filesystem::path& path)
{
    const CsvTable t = read_csv(path);
    require_header(t, {"v_baseline", "v_pre", "v_post", "concentration_mgdl"}, "voltage table");
    const auto a = t.column("v_baseline"), b = t.column("v_pre"), c = t.column("v_post"),
               d = t.column("concentration_mgdl");
    std::vector<VoltageSample> out;
    for (const auto& r : t.rows)
        out.push_back({parse_double(r[a], "v_baseline"), parse_double(r[b], "v_pre"), parse_double(r[c], "v_post"),
                       parse_double(r[d], "concentration_mgdl")});
    return out;
}

void write_predictions(const std::vector<PredictionRow>& rows, const std::filesystem::path& path)
{
    CsvTable t{{"id", "reference_mgdl", "predicted_mgdl"}, {}};
    for (const auto& r : rows)
        t.rows.push_back({r.id, format_double(r.reference_mgdl), format_double(r.predicted_mgdl)});
    write_csv(t, path);
}

std::vector<PredictionRow> read_predictions(const std::filesystem::path& path)
{
    const CsvTable t = read_csv(path);
    require_header(t, {"id", "reference_mgdl", "predicted_mgdl"}, "predictions");
    const auto a = t.column("id"), b = t.column("reference_mgdl"), c = t.column("predicted_mgdl");
    std::vector<PredictionRow> out;
    for (const auto& r : t.rows)
        out.push_back({r[a], parse_double(r[b], "reference_mgdl"), parse_double(r[c], "predicted_mgdl")});
    return out;
}

// ---- model files -----------------------------------------------------------

namespace {

enum class ModelKind : std::uint32_t { network = 1, linear = 2, forest = 3 };

enum class LayerTag : std::uint32_t {
    dense = 1,
    conv2d = 2,
    maxpool2d = 3,
    dropout = 4,
    batchnorm = 5,
    flatten = 6,
    activation = 7
};

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i)
            u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i)
            u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(std::string_view s) { out_.append(s); }
    void str(std::string_view s)
    {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s);
    }
    template <typename Derived>
    void block(const Eigen::DenseBase<Derived>& m)
    {
        u64(static_cast<std::uint64_t>(m.rows()));
        u64(static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                f64(m(i, j));
    }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    std::uint8_t u8()
    {
        need(1);
        return static_cast<std::uint8_t>(bytes_[pos_++]);
    }
    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * i);
        return v;
    }
    std::uint64_t u64()
    {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * i);
        return v;
    }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string_view raw(std::size_t n)
    {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::string str() { return std::string(raw(u32())); }
    nn::Matrix block()
    {
        const auto rows = u64();
        const auto cols = u64();
        if (rows > (1ULL << 32) || cols > (1ULL << 32) || (rows * cols) > (bytes_.size() - pos_) / 8)
            throw FormatError("model: truncated parameter block at byte offset " + std::to_string(pos_));
        nn::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                m(i, j) = f64();
        return m;
    }
    Eigen::RowVectorXd row_vector()
    {
        const nn::Matrix m = block();
        if (m.rows() > 1)
            throw FormatError("model: expected a row vector at byte offset " + std::to_string(pos_));
        return m.rows() == 0 ? Eigen::RowVectorXd() : Eigen::RowVectorXd(m.row(0));
    }
    std::size_t position() const { return pos_; }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const
    {
        if (bytes_.size() - pos_ < n)
            throw FormatError("model: truncated at byte offset " + std::to_string(pos_));
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

void write_scaler(Writer& w, const ScalerParams& s)
{
    w.block(s.min);
    w.block(s.max);
}

ScalerParams read_scaler(Reader& r)
{
    ScalerParams s;
    s.min = r.row_vector();
    s.max = r.row_vector();
    return s;
}

void write_network(Writer& w, const nn::TrainedModel& m)
{
    const auto& spec = m.spec;
    w.str(spec.id);
    w.i64(spec.input_shape.channels);
    w.i64(spec.input_shape.height);
    w.i64(spec.input_shape.width);
    w.u8(spec.standardize_inputs ? 1 : 0);
    w.u8(spec.standardize_targets ? 1 : 0);
    w.f64(spec.training.adam.lr);
    w.f64(spec.training.adam.beta1);
    w.f64(spec.training.adam.beta2);
    w.f64(spec.training.adam.epsilon);
    w.i64(spec.training.epochs);
    w.i64(spec.training.batch_size);
    w.u64(spec.training.seed);

    w.u32(static_cast<std::uint32_t>(spec.layers.size()));
    for (const auto& layer : spec.layers)
        std::visit(
            [&](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, nn::DenseSpec>) {
                    w.u32(static_cast<std::uint32_t>(LayerTag::dense));
                    w.i64(s.units);
                    w.f64(s.l2);
                } else if constexpr (std::is_same_v<T, nn::Conv2dSpec>) {
                    w.u32(static_cast<std::uint32_t>(LayerTag::conv2d));
                    w.i64(s.filters);
                    w.i64(s.kernel);
                    w.f64(s.l2);
                } else if constexpr (std::is_same_v<T, nn::MaxPool2dSpec>) {
                    w.u32(static_cast<std::uint32_t>(LayerTag::maxpool2d));
                    w.i64(s.pool);
                } else if constexpr (std::is_same_v<T, nn::DropoutSpec>) {
                    w.u32(static_cast<std::uint32_t>(LayerTag::dropout));
                    w.f64(s.rate);
                } else if constexpr (std::is_same_v<T, nn::BatchNormSpec>) {
                    w.u32(static_cast<std::uint32_t>(LayerTag::batchnorm));
                    w.f64(s.momentum);
                    w.f64(s.epsilon);
                } else if constexpr (std::is_same_v<T, nn::FlattenSpec>) {
                    w.u32(static_cast<std::uint32_t>(LayerTag::flatten));
                } else {
                    w.u32(static_cast<std::uint32_t>(LayerTag::activation));
                    w.str(nn::to_string(s.fn));
                }
            },
            layer);

    // Parameters plus batchnorm running statistics, in layer order.
    for (const auto& layer : m.net.layers())
        std::visit(
            [&](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, nn::DenseLayer> || std::is_same_v<T, nn::Conv2dLayer>) {
                    w.block(l.weight);
                    w.block(l.bias);
                } else if constexpr (std::is_same_v<T, nn::BatchNormLayer>) {
                    w.block(l.gamma);
                    w.block(l.beta);
                    w.block(l.running_mean);
                    w.block(l.running_var);
                }
            },
            layer);

    w.block(m.input_scaler.offset);
    w.block(m.input_scaler.scale);
    w.f64(m.target_offset);
    w.f64(m.target_scale);
    w.u64(m.history.size());
    for (const auto& h : m.history) {
        w.i64(h.epoch);
        w.f64(h.mse);
        w.f64(h.mae);
        w.f64(h.mape);
    }
}

nn::TrainedModel read_network(Reader& r)
{
    nn::TrainedModel m;
    auto& spec = m.spec;
    spec.id = r.str();
    spec.input_shape.channels = r.i64();
    spec.input_shape.height = r.i64();
    spec.input_shape.width = r.i64();
    spec.standardize_inputs = r.u8() != 0;
    spec.standardize_targets = r.u8() != 0;
    spec.training.adam.lr = r.f64();
    spec.training.adam.beta1 = r.f64();
    spec.training.adam.beta2 = r.f64();
    spec.training.adam.epsilon = r.f64();
    spec.training.epochs = static_cast<int>(r.i64());
    spec.training.batch_size = r.i64();
    spec.training.seed = r.u64();
    if (spec.input_shape.size() < 1 || spec.input_shape.size() > (1 << 26))
        throw FormatError("model: implausible input shape");

    const auto count = r.u32();
    if (count > 4096)
        throw FormatError("model: implausible layer count " + std::to_string(count));
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto tag = static_cast<LayerTag>(r.u32());
        switch (tag) {
        case LayerTag::dense: {
            nn::DenseSpec s;
            s.units = r.i64();
            s.l2 = r.f64();
            spec.layers.push_back(s);
            break;
        }
        case LayerTag::conv2d: {
            nn::Conv2dSpec s;
            s.filters = r.i64();
            s.kernel = r.i64();
            s.l2 = r.f64();
            spec.layers.push_back(s);
            break;
        }
        case LayerTag::maxpool2d:
            spec.layers.push_back(nn::MaxPool2dSpec{r.i64()});
            break;
        case LayerTag::dropout:
            spec.layers.push_back(nn::DropoutSpec{r.f64()});
            break;
        case LayerTag::batchnorm: {
            nn::BatchNormSpec s;
            s.momentum = r.f64();
            s.epsilon = r.f64();
            spec.layers.push_back(s);
            break;
        }
        case LayerTag::flatten:
            spec.layers.push_back(nn::FlattenSpec{});
            break;
        case LayerTag::activation:
            try {
                spec.layers.push_back(nn::ActivationSpec{nn::parse_activation(r.str())});
            } catch (const ValidationError& e) {
                throw FormatError(std::string("model: ") + e.what());
            }
            break;
        default:
            throw FormatError("model: unknown layer tag at byte offset " + std::to_string(r.position() - 4));
        }
    }

    try {
        m.net = nn::Network(spec.layers, spec.input_shape, 0);
    } catch (const ValidationError& e) {
        throw FormatError(std::string("model: inconsistent architecture: ") + e.what());
    }
    auto assign = [&](nn::Matrix& dst) {
        nn::Matrix src = r.block();
        if (src.rows() != dst.rows() || src.cols() != dst.cols())
            throw FormatError("model: parameter block shape mismatch at byte offset " + std::to_string(r.position()));
        dst = std::move(src);
    };
    for (auto& layer : m.net.layers())
        std::visit(
            [&](auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, nn::DenseLayer> || std::is_same_v<T, nn::Conv2dLayer>) {
                    assign(l.weight);
                    assign(l.bias);
                } else if constexpr (std::is_same_v<T, nn::BatchNormLayer>) {
                    assign(l.gamma);
                    assign(l.beta);
                    assign(l.running_mean);
                    assign(l.running_var);
                }
            },
            layer);

    m.input_scaler.offset = r.row_vector();
    m.input_scaler.scale = r.row_vector();
    m.target_offset = r.f64();
    m.target_scale = r.f64();
    const auto epochs = r.u64();
    if (epochs > 1'000'000)
        throw FormatError("model: implausible history length");
    for (std::uint64_t i = 0; i < epochs; ++i) {
        nn::EpochRecord h;
        h.epoch = static_cast<int>(r.i64());
        h.mse = r.f64();
        h.mae = r.f64();
        h.mape = r.f64();
        m.history.push_back(h);
    }
    return m;
}

} // namespace

std::string encode_model(const AnyModel& model)
{
    Writer w;
    w.raw("GLM1");
    w.u32(kModelFormatVersion);
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, nn::TrainedModel>) {
                w.u32(static_cast<std::uint32_t>(ModelKind::network));
                write_network(w, m);
            } else if constexpr (std::is_same_v<T, LinearRegressor>) {
                w.u32(static_cast<std::uint32_t>(ModelKind::linear));
                w.u32(m.features == VoltageFeatures::ratio ? 0 : 1);
                w.block(m.model.coefficients.transpose());
                w.f64(m.model.intercept);
                write_scaler(w, m.model.scaler);
            } else {
                w.u32(static_cast<std::uint32_t>(ModelKind::forest));
                w.u64(m.seed);
                write_scaler(w, m.scaler);
                w.u64(m.trees.size());
                for (const auto& t : m.trees) {
                    w.u64(t.nodes.size());
                    for (const auto& n : t.nodes) {
                        w.i32(n.feature);
                        w.f64(n.threshold);
                        w.i32(n.left);
                        w.i32(n.right);
                        w.f64(n.value);
                        w.i32(n.samples);
                    }
                }
            }
        },
        model);
    return w.take();
}

AnyModel decode_model(std::string_view bytes)
{
    Reader r(bytes);
    if (bytes.size() < 4 || bytes.substr(0, 4) != "GLM1")
        throw FormatError("model: bad magic (expected GLM1)");
    r.raw(4);
    const auto version = r.u32();
    if (version != kModelFormatVersion)
        throw FormatError("model: format version mismatch (file " + std::to_string(version) + ", supported " +
                          std::to_string(kModelFormatVersion) + ")");
    const auto kind = static_cast<ModelKind>(r.u32());
    AnyModel out;
    switch (kind) {
    case ModelKind::network:
        out = read_network(r);
        break;
    case ModelKind::linear: {
        LinearRegressor m;
        m.features = r.u32() == 0 ? VoltageFeatures::ratio : VoltageFeatures::triple;
        m.model.coefficients = r.row_vector().transpose();
        m.model.intercept = r.f64();
        m.model.scaler = read_scaler(r);
        out = std::move(m);
        break;
    }
    case ModelKind::forest: {
        ForestModel m;
        m.seed = r.u64();
        m.scaler = read_scaler(r);
        const auto trees = r.u64();
        if (trees > 1'000'000)
            throw FormatError("model: implausible tree count");
        for (std::uint64_t t = 0; t < trees; ++t) {
            Tree tree;
            const auto nodes = r.u64();
            if (nodes == 0 || nodes > (bytes.size() - r.position()) / 32)
                throw FormatError("model: truncated tree at byte offset " + std::to_string(r.position()));
            tree.nodes.resize(nodes);
            for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
                auto& n = tree.nodes[k];
                n.feature = r.i32();
                n.threshold = r.f64();
                n.left = r.i32();
                n.right = r.i32();
                n.value = r.f64();
                n.samples = r.i32();
                const auto limit = static_cast<std::int64_t>(nodes);
                const auto self = static_cast<std::int64_t>(k);
                if (n.feature >= 0 && (n.left <= self || n.right <= self || n.left >= limit || n.right >= limit))
                    throw FormatError("model: tree node child index out of range");
            }
            m.trees.push_back(std::move(tree));
        }
        out = std::move(m);
        break;
    }
    default:
        throw FormatError("model: unknown model kind " + std::to_string(static_cast<std::uint32_t>(kind)));
    }
    if (!r.done())
        throw FormatError("model: trailing bytes after offset " + std::to_string(r.position()));
    return out;
}

void save_model(const AnyModel& model, const std::filesystem::path& path)
{
    write_file(path, encode_model(model));
}

AnyModel load_model(const std::filesystem::path& path)
{
    try {
        return decode_model(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

} // namespace glucolens
