#include "glucolens/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "glucolens/dataio.hpp"
#include "glucolens/eval.hpp"
#include "glucolens/pipeline.hpp"

namespace glucolens::cli {

namespace {

namespace fs = std::filesystem;

fs::path base_of(const fs::path& file)
{
    return file.has_parent_path() ? file.parent_path() : fs::path(".");
}

std::vector<std::string> split_list(const std::string& text)
{
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(item);
    return out;
}

/// "650-laser" -> source with default optics at 650 nm.
Source parse_source(const std::string& name)
{
    const auto dash = name.find('-');
    if (dash == std::string::npos)
        throw ValidationError("source '" + name + "' must look like <nm>-<laser|led>");
    return make_source(parse_double(name.substr(0, dash), "source wavelength"),
                       parse_source_kind(name.substr(dash + 1)));
}

void add_phantom_flags(CLI::App* app, OpticalConfig& c)
{
    app->add_option("--path-length", c.path_length_cm, "Optical path length (cm)")->capture_default_str();
    app->add_option("--scatter", c.scatter_coeff, "Baseline scatter coefficient (1/cm)")->capture_default_str();
    app->add_option("--glucose-scatter-slope", c.glucose_scatter_slope, "Scatter per mg/dL (1/cm)")
        ->capture_default_str();
    app->add_option("--beam-sigma", c.beam_sigma_px, "Gaussian beam sigma (px)")->capture_default_str();
    app->add_option("--speckle-contrast", c.speckle_contrast, "Laser speckle contrast")->capture_default_str();
    app->add_option("--sensor-noise", c.sensor_noise_sigma, "Additive sensor noise sigma (counts)")
        ->capture_default_str();
    app->add_option("--source-intensity", c.source_intensity, "Peak source intensity (counts)")
        ->capture_default_str();
}

void apply_phantom(const OpticalConfig& flags, OpticalConfig& target)
{
    target.path_length_cm = flags.path_length_cm;
    target.scatter_coeff = flags.scatter_coeff;
    target.glucose_scatter_slope = flags.glucose_scatter_slope;
    target.beam_sigma_px = flags.beam_sigma_px;
    target.speckle_contrast = flags.speckle_contrast;
    target.sensor_noise_sigma = flags.sensor_noise_sigma;
    target.source_intensity = flags.source_intensity;
}

struct Options {
    std::uint64_t seed = 42;
    std::string config;
    unsigned threads = 0;

    // gen-images
    std::string out;
    double conc_min = 70, conc_max = 200, step = 2;
    int per_level = 10;
    Eigen::Index width = 128, height = 128;
    std::string sources = "650-laser,808-laser,850-laser,850-led";
    OpticalConfig phantom;

    // gen-voltages
    std::size_t count = 500;
    VoltageConfig voltage;
    double voltage_wavelength = 1600;

    // augment
    std::string manifest;
    AugmentOptions augment;
    double split_ratio = 0.7;

    // featurize
    Eigen::Index size = 128;
    int levels = kDefaultGrayLevels;
    bool glcm_on_spectrum = false;
    std::string normalization = "fullscale";

    // train / predict
    std::string mode = "image";
    std::string model_id;
    std::string features;
    std::string data;
    double wavelength = 0;
    std::string source_kind = "laser";
    int epochs = 50;
    Eigen::Index batch = 32;
    nn::AdamConfig adam;
    int n_estimators = 100;
    int max_depth = 15;
    std::string log;
    std::string model_path;
    std::string split = "test";

    // evaluate / ceg / report
    std::string preds;
    std::string model_name;
    std::string wavelength_label;
    std::string svg;
    std::string label;
    std::string metrics;
    bool append = false;
};

std::optional<Split> parse_split_selector(const std::string& text)
{
    if (text == "all")
        return std::nullopt;
    if (text == "train")
        return Split::train;
    if (text == "test")
        return Split::test;
    throw ValidationError("split selector must be train, test or all");
}

void print_kv(std::ostream& out, const std::string& key, const std::string& value)
{
    out << key << '=' << value << '\n';
}

// ---- subcommands ------------------------------------------------------------

int cmd_gen_images(const Options& o, std::ostream& out)
{
    DatasetSpec spec;
    spec.sources.clear();
    for (const auto& name : split_list(o.sources)) {
        Source s = parse_source(name);
        apply_phantom(o.phantom, s.optics);
        spec.sources.push_back(std::move(s));
    }
    if (spec.sources.empty())
        throw ValidationError("no sources selected");
    spec.conc_min = o.conc_min;
    spec.conc_max = o.conc_max;
    spec.step = o.step;
    spec.images_per_level = o.per_level;
    spec.width = o.width;
    spec.height = o.height;
    spec.seed = o.seed;
    const fs::path dir = o.out;
    const auto rows = gen_dataset(spec, dir, o.threads);
    write_manifest(rows, dir / "manifest.csv");
    print_kv(out, "manifest", (dir / "manifest.csv").string());
    print_kv(out, "images", std::to_string(rows.size()));
    return kOk;
}

int cmd_gen_voltages(const Options& o, std::ostream& out)
{
    VoltageConfig vc = o.voltage;
    apply_phantom(o.phantom, vc.optics);
    vc.optics.wavelength_nm = o.voltage_wavelength;
    vc.optics.source_kind = SourceKind::led;
    vc.optics.speckle_contrast = 0;
    vc.optics.validate();
    const auto samples = gen_voltage_set(vc, o.count, o.conc_min, o.conc_max, o.seed);
    write_voltages(samples, o.out);
    print_kv(out, "voltages", o.out);
    print_kv(out, "samples", std::to_string(samples.size()));
    return kOk;
}

int cmd_augment(const Options& o, std::ostream& out)
{
    AugmentOptions a = o.augment;
    a.seed = o.seed;
    a.threads = o.threads;
    a.split_ratio = o.split_ratio;
    const auto rows = augment_dataset(o.manifest, o.out, a);
    std::size_t raw = 0;
    for (const auto& r : rows)
        raw += r.augmented_from.empty() ? 1 : 0;
    print_kv(out, "manifest", o.out);
    print_kv(out, "raw", std::to_string(raw));
    print_kv(out, "augmented", std::to_string(rows.size() - raw));
    return kOk;
}

FeaturizeOptions featurize_options(const Options& o)
{
    FeaturizeOptions f;
    f.size = o.size;
    f.levels = o.levels;
    f.mode = o.glcm_on_spectrum ? FusionMode::sequential : FusionMode::parallel;
    f.normalization = parse_normalization(o.normalization);
    f.threads = o.threads;
    return f;
}

int cmd_featurize(const Options& o, std::ostream& out)
{
    const auto rows = read_manifest(o.manifest);
    const auto features = featurize_manifest(rows, base_of(o.manifest), featurize_options(o));
    write_features(features, o.out);
    print_kv(out, "features", o.out);
    print_kv(out, "rows", std::to_string(features.size()));
    return kOk;
}

/// Training rows for one source; if the manifest carries no splits the 70:30
/// split is computed here.
std::vector<ManifestRow> image_rows(const Options& o, std::optional<Split> split, SourceFilter& filter)
{
    if (!(o.wavelength > 0))
        throw ValidationError("--wavelength is required in image mode");
    filter = {o.wavelength, parse_source_kind(o.source_kind)};
    auto rows = read_manifest(o.manifest);
    assign_splits(rows, o.split_ratio, o.seed);
    auto selected = select_rows(rows, filter, split);
    if (selected.empty())
        throw ValidationError("no manifest rows for " + format_double(o.wavelength) + " nm " + o.source_kind +
                              (split ? " in split " + to_string(*split) : ""));
    return selected;
}

nn::Matrix image_inputs(const Options& o, const nn::ModelSpec& spec, const std::vector<ManifestRow>& rows)
{
    if (spec.id == "M4") {
        if (spec.input_shape.height != spec.input_shape.width)
            throw ValidationError("M4 input must be square");
        return load_image_matrix(rows, base_of(o.manifest), spec.input_shape.width,
                                 parse_normalization(o.normalization), o.threads);
    }
    if (o.features.empty())
        throw ValidationError("--features is required for " + spec.id);
    return feature_matrix(rows, read_features(o.features));
}

void write_history(const nn::TrainedModel& m, const std::string& path)
{
    CsvTable t{{"epoch", "mse", "mae"}, {}};
    for (const auto& h : m.history)
        t.rows.push_back({std::to_string(h.epoch), format_double(h.mse), format_double(h.mae)});
    write_csv(t, path);
}

std::pair<std::vector<VoltageSample>, std::vector<VoltageSample>> voltage_split(const Options& o)
{
    const auto samples = read_voltages(o.data);
    return split_train_test(samples, o.split_ratio, o.seed);
}

int cmd_train(const Options& o, std::ostream& out)
{
    if (o.mode == "voltage") {
        if (o.data.empty())
            throw ValidationError("--data is required in voltage mode");
        const auto [train, test] = voltage_split(o);
        Eigen::VectorXd y(static_cast<Eigen::Index>(train.size()));
        for (std::size_t i = 0; i < train.size(); ++i)
            y(static_cast<Eigen::Index>(i)) = train[i].concentration_mgdl;
        AnyModel model;
        if (o.model_id == "LR" || o.model_id == "MLR") {
            LinearRegressor lr;
            lr.features = o.model_id == "LR" ? VoltageFeatures::ratio : VoltageFeatures::triple;
            const Eigen::MatrixXd x = voltage_features(train, lr.features);
            lr.model = fit_ols(scaler_fit_apply(x, x), y);
            lr.model.scaler = scaler_fit(x);
            model = lr;
        } else if (o.model_id == "RFR") {
            ForestOptions f;
            f.n_estimators = o.n_estimators;
            f.tree.max_depth = o.max_depth;
            f.seed = o.seed;
            f.threads = o.threads;
            model = fit_forest(voltage_features(train, VoltageFeatures::triple), y, f);
        } else {
            throw ValidationError("voltage mode models are LR, MLR and RFR, got '" + o.model_id + "'");
        }
        save_model(model, o.out);
        print_kv(out, "model", o.out);
        print_kv(out, "train_samples", std::to_string(train.size()));
        return kOk;
    }
    if (o.mode != "image")
        throw ValidationError("--mode must be image or voltage");

    const nn::ModelId id = nn::parse_model_id(o.model_id);
    SourceFilter filter;
    const auto rows = image_rows(o, Split::train, filter);
    const nn::Shape shape = id == nn::ModelId::M4 ? nn::Shape{1, o.size, o.size} : nn::Shape{kFeatureCount, 1, 1};
    nn::ModelSpec spec = nn::build_model(id, shape);
    spec.training.epochs = o.epochs;
    spec.training.batch_size = o.batch;
    spec.training.seed = o.seed;
    spec.training.adam = o.adam;
    const nn::Matrix x = image_inputs(o, spec, rows);
    const nn::TrainedModel model = nn::fit(spec, x, concentrations(rows));
    save_model(model, o.out);
    if (!o.log.empty())
        write_history(model, o.log);
    print_kv(out, "model", o.out);
    print_kv(out, "train_samples", std::to_string(rows.size()));
    if (!model.history.empty()) {
        print_kv(out, "final_mse", format_double(model.history.back().mse));
        print_kv(out, "final_mae", format_double(model.history.back().mae));
    }
    return kOk;
}

int cmd_predict(const Options& o, std::ostream& out)
{
    const AnyModel model = load_model(o.model_path);
    std::vector<PredictionRow> preds;
    if (const auto* net = std::get_if<nn::TrainedModel>(&model)) {
        SourceFilter filter;
        const auto rows = image_rows(o, parse_split_selector(o.split), filter);
        const Eigen::VectorXd p = nn::predict(*net, image_inputs(o, net->spec, rows));
        for (std::size_t i = 0; i < rows.size(); ++i)
            preds.push_back({rows[i].path, rows[i].concentration_mgdl, p(static_cast<Eigen::Index>(i))});
    } else {
        if (o.data.empty())
            throw ValidationError("--data is required for voltage models");
        auto [train, test] = voltage_split(o);
        const auto selector = parse_split_selector(o.split);
        std::vector<VoltageSample> samples;
        std::vector<std::string> ids;
        auto take = [&](const std::vector<VoltageSample>& part, const char* tag) {
            for (std::size_t i = 0; i < part.size(); ++i) {
                samples.push_back(part[i]);
                ids.push_back(std::string(tag) + "-" + std::to_string(i));
            }
        };
        if (!selector || *selector == Split::train)
            take(train, "train");
        if (!selector || *selector == Split::test)
            take(test, "test");
        Eigen::VectorXd p;
        if (const auto* lr = std::get_if<LinearRegressor>(&model))
            p = predict(lr->model, voltage_features(samples, lr->features));
        else
            p = predict(std::get<ForestModel>(model), voltage_features(samples, VoltageFeatures::triple));
        for (std::size_t i = 0; i < samples.size(); ++i)
            preds.push_back({ids[i], samples[i].concentration_mgdl, p(static_cast<Eigen::Index>(i))});
    }
    write_predictions(preds, o.out);
    print_kv(out, "predictions", o.out);
    print_kv(out, "rows", std::to_string(preds.size()));
    return kOk;
}

int cmd_evaluate(const Options& o, std::ostream& out)
{
    const auto preds = read_predictions(o.preds);
    const MetricsRow row = evaluate_predictions(preds, o.mode, o.model_name, o.wavelength_label);
    std::vector<MetricsRow> rows;
    if (o.append && fs::exists(o.out))
        rows = parse_metrics_table(read_csv(o.out));
    rows.push_back(row);
    write_csv(metrics_table(rows), o.out);
    print_kv(out, "rmse", format_double(row.metrics.rmse));
    print_kv(out, "mae", format_double(row.metrics.mae));
    print_kv(out, "mape", format_double(row.metrics.mape));
    for (Zone z : kZones)
        print_kv(out, std::string("zone_") + zone_letter(z), format_double(row.zones[static_cast<int>(z)]));
    return kOk;
}

int cmd_ceg(const Options& o, std::ostream& out)
{
    const auto preds = read_predictions(o.preds);
    std::vector<GlucosePair> pairs;
    for (const auto& p : preds)
        pairs.push_back({std::clamp(p.reference_mgdl, 0.0, 400.0), std::clamp(p.predicted_mgdl, 0.0, 400.0)});
    const CegOutcome outcome = ceg_report(pairs);
    const std::string label = o.label.empty() ? "Predictions" : o.label;
    if (!o.svg.empty())
        write_file(o.svg, render_ceg_svg(pairs, outcome, "Clarke Error Grid: " + label));
    out << ceg_summary(label, outcome) << '\n';
    return kOk;
}

int cmd_report(const Options& o, std::ostream& out)
{
    const auto rows = report_rows(parse_metrics_table(read_csv(o.metrics)));
    if (!o.out.empty())
        write_csv(metrics_table(rows), o.out);
    out << std::left << std::setw(9) << "mode" << std::setw(8) << "model" << std::setw(12) << "wavelength"
        << std::right << std::setw(9) << "RMSE" << std::setw(9) << "MAE" << std::setw(9) << "MAPE%" << std::setw(9)
        << "ZoneA%" << '\n';
    out << std::fixed << std::setprecision(2);
    for (const auto& r : rows)
        out << std::left << std::setw(9) << r.mode << std::setw(8) << r.model << std::setw(12) << r.wavelength
            << std::right << std::setw(9) << r.metrics.rmse << std::setw(9) << r.metrics.mae << std::setw(9)
            << r.metrics.mape << std::setw(9) << r.zones[0] << '\n';
    out.unsetf(std::ios::fixed);
    return kOk;
}

// ---- argument plumbing ------------------------------------------------------

bool has_flag(const std::vector<std::string>& args, const std::string& flag)
{
    for (const auto& a : args)
        if (a == flag || a.rfind(flag + "=", 0) == 0)
            return true;
    return false;
}

std::optional<std::string> flag_value(const std::vector<std::string>& args, const std::string& flag)
{
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == flag && i + 1 < args.size())
            return args[i + 1];
        if (args[i].rfind(flag + "=", 0) == 0)
            return args[i].substr(flag.size() + 1);
    }
    return std::nullopt;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// `key = value` lines; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> read_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config file " + path);
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config " + path + ":" + std::to_string(lineno) + ": expected key = value");
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

void build_app(CLI::App& app, Options& o)
{
    app.require_subcommand(1, 1);
    app.fallthrough(false);

    auto common = [&](CLI::App* sub) {
        sub->add_option("--seed", o.seed, "Seed for all randomness (env GLUCOLENS_SEED)")->capture_default_str();
        sub->add_option("--config", o.config, "key = value file; explicit flags take precedence");
        sub->add_option("--threads", o.threads, "Worker threads (0 = all cores)")->capture_default_str();
    };
    auto concentration_range = [&](CLI::App* sub) {
        sub->add_option("--min", o.conc_min, "Lowest concentration (mg/dL)")->capture_default_str();
        sub->add_option("--max", o.conc_max, "Highest concentration (mg/dL)")->capture_default_str();
    };

    auto* gen = app.add_subcommand("gen-images", "Render synthetic SWIR frames and a manifest");
    common(gen);
    concentration_range(gen);
    gen->add_option("--out", o.out, "Output directory")->required();
    gen->add_option("--step", o.step, "Concentration increment (mg/dL)")->capture_default_str();
    gen->add_option("--per-level", o.per_level, "Frames per (source, level)")->capture_default_str();
    gen->add_option("--width", o.width, "Frame width (px)")->capture_default_str();
    gen->add_option("--height", o.height, "Frame height (px)")->capture_default_str();
    gen->add_option("--sources", o.sources, "Comma-separated <nm>-<laser|led> list")->capture_default_str();
    add_phantom_flags(gen, o.phantom);

    auto* volt = app.add_subcommand("gen-voltages", "Simulate photodiode voltage triples");
    common(volt);
    concentration_range(volt);
    volt->add_option("--out", o.out, "Output CSV")->required();
    volt->add_option("--count", o.count, "Number of samples")->capture_default_str();
    volt->add_option("--wavelength", o.voltage_wavelength, "LED wavelength (nm)")->capture_default_str();
    volt->add_option("--gain", o.voltage.gain_v, "Photodiode gain (V at T = 1)")->capture_default_str();
    volt->add_option("--dark-level", o.voltage.dark_level_v, "Dark level (V)")->capture_default_str();
    volt->add_option("--dark-noise", o.voltage.dark_noise_v, "Dark noise sigma (V)")->capture_default_str();
    volt->add_option("--ambient", o.voltage.ambient_offset_v, "Ambient offset (V)")->capture_default_str();
    volt->add_option("--ambient-noise", o.voltage.ambient_noise_v, "Ambient noise sigma (V)")->capture_default_str();
    volt->add_option("--relative-noise", o.voltage.relative_noise, "Multiplicative noise sigma")
        ->capture_default_str();
    add_phantom_flags(volt, o.phantom);

    auto* aug = app.add_subcommand("augment", "Assign 70:30 splits and add augmented frames");
    common(aug);
    aug->add_option("--manifest", o.manifest, "Input manifest")->required();
    aug->add_option("--out", o.out, "Output manifest")->required();
    aug->add_option("--multiplier", o.augment.multiplier, "Augmented copies per raw frame")->capture_default_str();
    aug->add_option("--split-ratio", o.split_ratio, "Training fraction")->capture_default_str();
    aug->add_option("--gain-min", o.augment.ranges.gain_min)->capture_default_str();
    aug->add_option("--gain-max", o.augment.ranges.gain_max)->capture_default_str();
    aug->add_option("--angle-min", o.augment.ranges.angle_min_deg)->capture_default_str();
    aug->add_option("--angle-max", o.augment.ranges.angle_max_deg)->capture_default_str();
    aug->add_option("--sigma-min", o.augment.ranges.sigma_min)->capture_default_str();
    aug->add_option("--sigma-max", o.augment.ranges.sigma_max)->capture_default_str();

    auto image_prep = [&](CLI::App* sub) {
        sub->add_option("--size", o.size, "Square working size (px)")->capture_default_str();
        sub->add_option("--normalize", o.normalization, "fullscale or minmax")->capture_default_str();
    };

    auto* feat = app.add_subcommand("featurize", "Compute the 19-value GLCM + Fourier feature cache");
    common(feat);
    image_prep(feat);
    feat->add_option("--manifest", o.manifest, "Manifest")->required();
    feat->add_option("--out", o.out, "Feature CSV")->required();
    feat->add_option("--levels", o.levels, "GLCM gray levels")->capture_default_str();
    feat->add_flag("--glcm-on-spectrum", o.glcm_on_spectrum, "Texture statistics on the log spectrum");

    auto selection = [&](CLI::App* sub) {
        sub->add_option("--mode", o.mode, "image or voltage")->capture_default_str();
        sub->add_option("--manifest", o.manifest, "Manifest (image mode)");
        sub->add_option("--features", o.features, "Feature cache (M1-M3)");
        sub->add_option("--data", o.data, "Voltage CSV (voltage mode)");
        sub->add_option("--wavelength", o.wavelength, "Source wavelength (nm)");
        sub->add_option("--source-kind", o.source_kind, "laser or led")->capture_default_str();
        sub->add_option("--split-ratio", o.split_ratio, "Training fraction")->capture_default_str();
        image_prep(sub);
    };

    auto* train = app.add_subcommand("train", "Fit one model for one wavelength");
    common(train);
    selection(train);
    train->add_option("--model", o.model_id, "M1, M2, M3, M4 (image) or LR, MLR, RFR (voltage)")->required();
    train->add_option("--out", o.out, "Model file")->required();
    train->add_option("--epochs", o.epochs)->capture_default_str();
    train->add_option("--batch", o.batch)->capture_default_str();
    train->add_option("--lr", o.adam.lr)->capture_default_str();
    train->add_option("--beta1", o.adam.beta1)->capture_default_str();
    train->add_option("--beta2", o.adam.beta2)->capture_default_str();
    train->add_option("--adam-eps", o.adam.epsilon)->capture_default_str();
    train->add_option("--n-estimators", o.n_estimators)->capture_default_str();
    train->add_option("--max-depth", o.max_depth)->capture_default_str();
    train->add_option("--log", o.log, "Per-epoch CSV log (epoch, mse, mae)");

    auto* pred = app.add_subcommand("predict", "Predict concentrations with a saved model");
    common(pred);
    selection(pred);
    pred->add_option("--model", o.model_path, "Model file")->required();
    pred->add_option("--out", o.out, "Predictions CSV")->required();
    pred->add_option("--split", o.split, "train, test or all")->capture_default_str();

    auto* eval = app.add_subcommand("evaluate", "RMSE/MAE/MAPE and zone percentages into a metrics CSV");
    common(eval);
    eval->add_option("--preds", o.preds, "Predictions CSV")->required();
    eval->add_option("--out", o.out, "Metrics CSV")->required();
    eval->add_option("--mode", o.mode)->capture_default_str();
    eval->add_option("--model-name", o.model_name)->required();
    eval->add_option("--wavelength", o.wavelength_label, "Label such as 650 or 850-led")->required();
    eval->add_flag("--append", o.append, "Append to an existing metrics CSV");

    auto* ceg = app.add_subcommand("ceg", "Clarke Error Grid plot and zone summary");
    common(ceg);
    ceg->add_option("--preds", o.preds, "Predictions CSV")->required();
    ceg->add_option("--svg", o.svg, "SVG output");
    ceg->add_option("--label", o.label, "Plot label, e.g. '650 nm Laser'");

    auto* rep = app.add_subcommand("report", "Metrics table including 850 nm averages");
    common(rep);
    rep->add_option("--metrics", o.metrics, "Metrics CSV")->required();
    rep->add_option("--out", o.out, "Aggregated CSV");
}

} // namespace

int run(const std::vector<std::string>& input, std::ostream& out, std::ostream& err)
{
    auto fail = [&](const char* kind, const std::string& msg, int code) {
        std::string line = msg;
        std::replace(line.begin(), line.end(), '\n', ' ');
        err << "glucolens: error[" << kind << "]: " << line << '\n';
        return code;
    };

    Options o;
    CLI::App app{"Noninvasive glucose estimation pipeline on synthetic SWIR data", "glucolens"};
    build_app(app, o);

    std::vector<std::string> args = input;
    try {
        if (!args.empty() && args[0].rfind("-", 0) != 0) {
            if (app.get_subcommand_no_throw(args[0]) == nullptr)
                return fail("usage", "unknown subcommand '" + args[0] + "'", kUsage);
            CLI::App* sub = app.get_subcommand_ptr(args[0]).get();
            auto inject = [&](const std::string& key, const std::string& value) {
                const std::string flag = "--" + key;
                if (!has_flag(args, flag) && sub->get_option_no_throw(flag) != nullptr)
                    args.push_back(flag + "=" + value);
            };
            if (const auto cfg = flag_value(args, "--config"))
                for (const auto& [k, v] : read_config(*cfg))
                    inject(k, v);
            if (const char* env = std::getenv("GLUCOLENS_SEED"); env && *env)
                inject("seed", env);
        }
    } catch (const CLI::Error&) {
        // Unknown subcommand; reported by parse() below.
    } catch (const IoError& e) {
        return fail("io", e.what(), kIo);
    } catch (const ValidationError& e) {
        return fail("validation", e.what(), kValidation);
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), kUsage);
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        if (name == "gen-images")
            return cmd_gen_images(o, out);
        if (name == "gen-voltages")
            return cmd_gen_voltages(o, out);
        if (name == "augment")
            return cmd_augment(o, out);
        if (name == "featurize")
            return cmd_featurize(o, out);
        if (name == "train")
            return cmd_train(o, out);
        if (name == "predict")
            return cmd_predict(o, out);
        if (name == "evaluate")
            return cmd_evaluate(o, out);
        if (name == "ceg")
            return cmd_ceg(o, out);
        if (name == "report")
            return cmd_report(o, out);
    } catch (const IoError& e) {
        return fail("io", e.what(), kIo);
    } catch (const ValidationError& e) {
        return fail("validation", e.what(), kValidation);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), kFailure);
    }
    return fail("usage", "unknown subcommand " + name, kUsage);
}

} // namespace glucolens::cli
