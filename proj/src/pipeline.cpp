#include "glucolens/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "glucolens/parallel.hpp"

namespace glucolens {

std::string to_string(Normalization n)
{
    return n == Normalization::fullscale ? "fullscale" : "minmax";
}

Normalization parse_normalization(const std::string& text)
{
    if (text == "fullscale")
        return Normalization::fullscale;
    if (text == "minmax")
        return Normalization::minmax;
    throw ValidationError("unknown normalization '" + text + "' (expected fullscale or minmax)");
}

bool SourceFilter::matches(const ManifestRow& row) const
{
    return row.wavelength_nm == wavelength_nm && row.source_kind == kind;
}

std::string SourceFilter::label(const std::vector<ManifestRow>& rows) const
{
    const bool shared = std::any_of(rows.begin(), rows.end(), [&](const ManifestRow& r) {
        return r.wavelength_nm == wavelength_nm && r.source_kind != kind;
    });
    const std::string nm = format_double(wavelength_nm);
    return shared ? nm + "-" + to_string(kind) : nm;
}

void assign_splits(std::vector<ManifestRow>& rows, double ratio, std::uint64_t seed)
{
    // Group raw, unsplit rows by source in first-appearance order.
    std::vector<std::pair<double, SourceKind>> groups;
    std::vector<std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (!r.augmented_from.empty() || r.split != Split::none)
            continue;
        const std::pair key{r.wavelength_nm, r.source_kind};
        auto it = std::find(groups.begin(), groups.end(), key);
        if (it == groups.end()) {
            groups.push_back(key);
            members.emplace_back();
            it = groups.end() - 1;
        }
        members[static_cast<std::size_t>(it - groups.begin())].push_back(i);
    }
    for (const auto& group : members) {
        if (group.size() < 2)
            throw ValidationError("split: a source group has fewer than 2 raw frames");
        const auto idx = split_train_test(group.size(), ratio, seed);
        for (auto i : idx.train)
            rows[group[i]].split = Split::train;
        for (auto i : idx.test)
            rows[group[i]].split = Split::test;
    }
    std::unordered_map<std::string, Split> parent;
    for (const auto& r : rows)
        if (r.augmented_from.empty())
            parent[r.path] = r.split;
    for (auto& r : rows)
        if (!r.augmented_from.empty() && r.split == Split::none) {
            const auto it = parent.find(r.augmented_from);
            if (it != parent.end())
                r.split = it->second;
        }
}

std::size_t augment_copies(std::size_t index, double multiplier)
{
    const auto i = static_cast<double>(index);
    return static_cast<std::size_t>(std::floor((i + 1) * multiplier + 1e-9) - std::floor(i * multiplier + 1e-9));
}

namespace {

std::filesystem::path base_of(const std::filesystem::path& manifest)
{
    return manifest.has_parent_path() ? manifest.parent_path() : std::filesystem::path(".");
}

std::string rebase(const std::string& rel, const std::filesystem::path& from_dir, const std::filesystem::path& to_dir)
{
    const auto abs = std::filesystem::weakly_canonical(std::filesystem::absolute(from_dir / rel));
    const auto target = std::filesystem::weakly_canonical(std::filesystem::absolute(to_dir));
    return abs.lexically_relative(target).generic_string();
}

} // namespace

std::vector<ManifestRow> augment_dataset(const std::filesystem::path& manifest_path,
                                         const std::filesystem::path& out_manifest, const AugmentOptions& options)
{
    if (!(options.multiplier >= 0))
        throw ValidationError("augment: multiplier must be >= 0");
    const auto in_dir = base_of(manifest_path);
    const auto out_dir = base_of(out_manifest);
    std::vector<ManifestRow> raw = read_manifest(manifest_path);
    std::erase_if(raw, [](const ManifestRow& r) { return !r.augmented_from.empty(); });
    assign_splits(raw, options.split_ratio, options.seed);

    std::vector<std::size_t> first_copy(raw.size() + 1, 0);
    for (std::size_t i = 0; i < raw.size(); ++i)
        first_copy[i + 1] = first_copy[i] + augment_copies(i, options.multiplier);

    std::vector<ManifestRow> augmented(first_copy.back());
    parallel_for(raw.size(), options.threads, [&](std::size_t i) {
        const auto copies = first_copy[i + 1] - first_copy[i];
        if (copies == 0)
            return;
        const Image img = read_pgm(in_dir / raw[i].path);
        const auto stem = std::filesystem::path(raw[i].path).stem().string();
        const auto sub = std::filesystem::path(raw[i].path).parent_path().filename().string();
        for (std::size_t k = 0; k < copies; ++k) {
            const Image aug = augment_random(img, options.ranges, hash_seed({options.seed, 0x61756721ULL, i, k}));
            const std::string rel = "augmented/" + sub + "/" + stem + "_a" + std::to_string(k) + ".pgm";
            write_pgm(aug, out_dir / rel);
            ManifestRow& row = augmented[first_copy[i] + k];
            row = raw[i];
            row.path = rel;
            row.augmented_from = raw[i].path; // rebased below
        }
    });

    std::vector<ManifestRow> out;
    out.reserve(raw.size() + augmented.size());
    for (auto r : raw) {
        r.path = rebase(r.path, in_dir, out_dir);
        out.push_back(std::move(r));
    }
    for (auto& r : augmented) {
        r.augmented_from = rebase(r.augmented_from, in_dir, out_dir);
        out.push_back(std::move(r));
    }
    write_manifest(out, out_manifest);
    return out;
}

Image prepare_image(const Image& img, Eigen::Index size, Normalization normalization)
{
    Image resized = resize_bilinear(img, size, size);
    if (normalization == Normalization::minmax)
        return normalize_unit(resized);
    return resized.max(0.0).min(1.0);
}

FeatureVector featurize_image(const Image& img, const FeaturizeOptions& options)
{
    const Image prepared = prepare_image(img, options.size, options.normalization);
    return fuse_features(quantize(prepared, options.levels), prepared, options.mode);
}

std::vector<FeatureRow> featurize_manifest(const std::vector<ManifestRow>& rows,
                                           const std::filesystem::path& base_dir, const FeaturizeOptions& options)
{
    std::vector<FeatureRow> out(rows.size());
    parallel_for(rows.size(), options.threads, [&](std::size_t i) {
        out[i] = {rows[i].path, featurize_image(read_pgm(base_dir / rows[i].path), options)};
    });
    return out;
}

std::vector<ManifestRow> select_rows(const std::vector<ManifestRow>& rows, const SourceFilter& filter,
                                     std::optional<Split> split)
{
    std::vector<ManifestRow> out;
    for (const auto& r : rows)
        if (filter.matches(r) && (!split || r.split == *split))
            out.push_back(r);
    return out;
}

nn::Matrix load_image_matrix(const std::vector<ManifestRow>& rows, const std::filesystem::path& base_dir,
                             Eigen::Index size, Normalization normalization, unsigned threads)
{
    nn::Matrix x(static_cast<Eigen::Index>(rows.size()), size * size);
    parallel_for(rows.size(), threads, [&](std::size_t i) {
        const Image img = prepare_image(read_pgm(base_dir / rows[i].path), size, normalization);
        x.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(img.data(), img.size());
    });
    return x;
}

nn::Matrix feature_matrix(const std::vector<ManifestRow>& rows, const std::vector<FeatureRow>& features)
{
    std::unordered_map<std::string, const FeatureVector*> by_path;
    for (const auto& f : features)
        by_path[f.path] = &f.values;
    nn::Matrix x(static_cast<Eigen::Index>(rows.size()), kFeatureCount);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto it = by_path.find(rows[i].path);
        if (it == by_path.end())
            throw ValidationError("no cached features for " + rows[i].path);
        x.row(static_cast<Eigen::Index>(i)) = it->second->transpose();
    }
    return x;
}

Eigen::VectorXd concentrations(const std::vector<ManifestRow>& rows)
{
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        y(static_cast<Eigen::Index>(i)) = rows[i].concentration_mgdl;
    return y;
}

Eigen::MatrixXd voltage_features(const std::vector<VoltageSample>& samples, VoltageFeatures features)
{
    const auto n = static_cast<Eigen::Index>(samples.size());
    if (features == VoltageFeatures::ratio) {
        Eigen::MatrixXd x(n, 1);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& s = samples[static_cast<std::size_t>(i)];
            if (!(s.v_pre > 0))
                throw ValidationError("voltage ratio undefined: v_pre must be > 0");
            x(i, 0) = s.v_post / s.v_pre;
        }
        return x;
    }
    Eigen::MatrixXd x(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = samples[static_cast<std::size_t>(i)];
        x.row(i) << s.v_baseline, s.v_pre, s.v_post;
    }
    return x;
}

MetricsRow evaluate_predictions(const std::vector<PredictionRow>& preds, const std::string& mode,
                                const std::string& model, const std::string& wavelength)
{
    std::vector<double> refs, values;
    std::vector<GlucosePair> pairs;
    for (const auto& p : preds) {
        refs.push_back(p.reference_mgdl);
        values.push_back(p.predicted_mgdl);
        // The grid spans 0-400 mg/dL; out-of-range predictions are placed on its edge.
        pairs.push_back({std::clamp(p.reference_mgdl, 0.0, 400.0), std::clamp(p.predicted_mgdl, 0.0, 400.0)});
    }
    MetricsRow row{mode, model, wavelength, compute_metrics(refs, values), {}};
    row.zones = ceg_report(pairs).percent;
    return row;
}

CsvTable metrics_table(const std::vector<MetricsRow>& rows)
{
    CsvTable t{kMetricsColumns, {}};
    for (const auto& r : rows) {
        CsvRow row{r.mode, r.model, r.wavelength, format_double(r.metrics.rmse), format_double(r.metrics.mae),
                   format_double(r.metrics.mape)};
        for (double z : r.zones)
            row.push_back(format_double(z));
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::vector<MetricsRow> parse_metrics_table(const CsvTable& table)
{
    std::vector<std::size_t> cols;
    for (const auto& name : kMetricsColumns)
        cols.push_back(table.column(name));
    std::vector<MetricsRow> out;
    for (const auto& r : table.rows) {
        MetricsRow m{r[cols[0]], r[cols[1]], r[cols[2]], {}, {}};
        m.metrics.rmse = parse_double(r[cols[3]], "rmse");
        m.metrics.mae = parse_double(r[cols[4]], "mae");
        m.metrics.mape = parse_double(r[cols[5]], "mape");
        for (std::size_t z = 0; z < 5; ++z)
            m.zones[z] = parse_double(r[cols[6 + z]], kMetricsColumns[6 + z]);
        out.push_back(std::move(m));
    }
    return out;
}

std::vector<MetricsRow> report_rows(const std::vector<MetricsRow>& rows)
{
    std::vector<MetricsRow> out = rows;
    for (const auto& laser : rows) {
        if (laser.wavelength != "850-laser")
            continue;
        for (const auto& led : rows) {
            if (led.wavelength != "850-led" || led.mode != laser.mode || led.model != laser.model)
                continue;
            MetricsRow avg{laser.mode, laser.model, "850-avg", {}, {}};
            avg.metrics.rmse = 0.5 * (laser.metrics.rmse + led.metrics.rmse);
            avg.metrics.mae = 0.5 * (laser.metrics.mae + led.metrics.mae);
            avg.metrics.mape = 0.5 * (laser.metrics.mape + led.metrics.mape);
            avg.metrics.n = laser.metrics.n + led.metrics.n;
            for (std::size_t z = 0; z < 5; ++z)
                avg.zones[z] = 0.5 * (laser.zones[z] + led.zones[z]);
            out.push_back(avg);
            break;
        }
    }
    return out;
}

} // namespace glucolens
