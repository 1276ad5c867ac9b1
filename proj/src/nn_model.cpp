#include <cmath>
#include <numeric>

#include "glucolens/nn.hpp"

namespace glucolens::nn {

std::string to_string(ModelId id)
{
    switch (id) {
    case ModelId::M1:
        return "M1";
    case ModelId::M2:
        return "M2";
    case ModelId::M3:
        return "M3";
    case ModelId::M4:
        return "M4";
    }
    return "M1";
}

ModelId parse_model_id(const std::string& text)
{
    for (auto id : {ModelId::M1, ModelId::M2, ModelId::M3, ModelId::M4})
        if (to_string(id) == text)
            return id;
    throw ValidationError("unknown model id '" + text + "' (expected M1, M2, M3 or M4)");
}

void validate(const ModelSpec& spec)
{
    if (spec.layers.empty())
        throw ValidationError("model spec has no layers");
    for (const auto& layer : spec.layers) {
        if (const auto* d = std::get_if<DropoutSpec>(&layer); d && !(d->rate >= 0 && d->rate < 1))
            throw ValidationError("dropout rate must lie in [0, 1)");
        if (const auto* c = std::get_if<Conv2dSpec>(&layer); c && (c->kernel < 1 || c->kernel % 2 == 0))
            throw ValidationError("conv2d kernel must be odd");
        if (const auto* d = std::get_if<DenseSpec>(&layer); d && !(d->l2 >= 0))
            throw ValidationError("l2 lambda must be >= 0");
        if (const auto* c = std::get_if<Conv2dSpec>(&layer); c && !(c->l2 >= 0))
            throw ValidationError("l2 lambda must be >= 0");
    }
    auto last = spec.layers.rbegin();
    if (const auto* a = std::get_if<ActivationSpec>(&*last); a && a->fn == Activation::linear)
        ++last;
    const auto* out = last != spec.layers.rend() ? std::get_if<DenseSpec>(&*last) : nullptr;
    if (!out || out->units != 1)
        throw ValidationError("model output layer must be dense(1, linear)");
    if (spec.training.epochs < 0 || spec.training.batch_size < 1)
        throw ValidationError("epochs must be >= 0 and batch size >= 1");
}

ModelSpec build_model(ModelId id, const Shape& input_shape)
{
    ModelSpec spec;
    spec.id = to_string(id);
    spec.input_shape = input_shape;
    auto& L = spec.layers;

    if (id != ModelId::M4) {
        if (input_shape != Shape{19, 1, 1})
            throw ValidationError(spec.id + " expects the 19-value feature vector, got " + to_string(input_shape));
    }
    spec.standardize_inputs = true;

    switch (id) {
    case ModelId::M1:
        for (Index units : {64, 32, 16}) {
            L.push_back(DenseSpec{units});
            L.push_back(ActivationSpec{Activation::tanh});
            L.push_back(DropoutSpec{0.3});
        }
        break;
    case ModelId::M2:
        for (Index units : {128, 64, 32, 16}) {
            L.push_back(DenseSpec{units});
            L.push_back(BatchNormSpec{});
            L.push_back(ActivationSpec{Activation::swish});
        }
        break;
    case ModelId::M3: {
        double l2 = 1e-5;
        for (Index units : {256, 128, 64, 32}) {
            L.push_back(DenseSpec{units, l2});
            L.push_back(ActivationSpec{Activation::swish});
            L.push_back(DropoutSpec{0.2});
            l2 *= 2;
        }
        break;
    }
    case ModelId::M4:
        if (input_shape.channels != 1 || input_shape.height < 10 || input_shape.width < 10)
            throw ValidationError("M4 expects a single-channel image of at least 10x10, got " +
                                  to_string(input_shape));
        L = {Conv2dSpec{16, 3},
             ActivationSpec{Activation::relu},
             MaxPool2dSpec{2},
             DropoutSpec{0.25},
             Conv2dSpec{32, 3},
             ActivationSpec{Activation::relu},
             MaxPool2dSpec{2},
             DropoutSpec{0.25},
             FlattenSpec{},
             DenseSpec{64},
             ActivationSpec{Activation::relu}};
        break;
    }
    L.push_back(DenseSpec{1});
    return spec;
}

void adam_update(Matrix& param, const Matrix& grad, AdamMoments& state, long t, const AdamConfig& c)
{
    if (t < 1)
        throw ValidationError("adam_update: timestep must be >= 1");
    if (state.m.size() == 0) {
        state.m = Matrix::Zero(param.rows(), param.cols());
        state.v = Matrix::Zero(param.rows(), param.cols());
    }
    state.m = c.beta1 * state.m + (1.0 - c.beta1) * grad;
    state.v = c.beta2 * state.v + (1.0 - c.beta2) * grad.cwiseAbs2();
    const double m_corr = 1.0 - std::pow(c.beta1, static_cast<double>(t));
    const double v_corr = 1.0 - std::pow(c.beta2, static_cast<double>(t));
    param.array() -= c.lr * (state.m.array() / m_corr) / ((state.v.array() / v_corr).sqrt() + c.epsilon);
}

double mse_loss(const Matrix& predictions, const Eigen::VectorXd& targets)
{
    return (predictions.col(0) - targets).squaredNorm() / static_cast<double>(targets.size());
}

namespace {

double step_impl(Network& net, const Tensor& x, const Eigen::VectorXd& y, AdamState& adam, const AdamConfig& config,
                 std::uint64_t dropout_seed, Eigen::VectorXd* predictions)
{
    if (x.batch() != y.size() || y.size() == 0)
        throw ValidationError("train_step: batch has " + std::to_string(x.batch()) + " inputs and " +
                              std::to_string(y.size()) + " targets");
    std::vector<LayerCache> caches;
    const Tensor out = net.forward(x, Mode::train, dropout_seed, &caches);
    const double loss = mse_loss(out.data, y) + net.l2_penalty();
    if (!std::isfinite(loss))
        throw NumericError("train_step: non-finite loss (" + std::to_string(loss) + ") at Adam step " +
                           std::to_string(adam.t + 1));
    if (predictions)
        *predictions = out.data.col(0);

    Tensor dout{out.shape, 2.0 * (out.data.col(0) - y) / static_cast<double>(y.size())};
    std::vector<Matrix> grads;
    net.backward(dout, caches, grads);
    net.add_l2_gradient(grads);
    net.update_running_stats(caches);

    auto params = net.params();
    if (adam.moments.size() != params.size())
        adam.moments.assign(params.size(), AdamMoments{});
    ++adam.t;
    for (std::size_t i = 0; i < params.size(); ++i)
        adam_update(*params[i], grads[i], adam.moments[i], adam.t, config);
    return loss;
}

AffineScaler fit_standardizer(const Matrix& x)
{
    AffineScaler s;
    s.offset = x.colwise().mean();
    s.scale = ((x.rowwise() - s.offset).array().square().colwise().sum() / static_cast<double>(x.rows())).sqrt();
    for (Index j = 0; j < s.scale.size(); ++j)
        if (!(s.scale(j) > 1e-12))
            s.scale(j) = 1.0;
    return s;
}

Matrix apply_scaler(const AffineScaler& s, const Matrix& x)
{
    if (s.empty())
        return x;
    if (s.offset.size() != x.cols())
        throw ValidationError("input has " + std::to_string(x.cols()) + " columns, model expects " +
                              std::to_string(s.offset.size()));
    return (x.rowwise() - s.offset).array().rowwise() / s.scale.array();
}

} // namespace

double train_step(Network& net, const Tensor& batch_x, const Eigen::VectorXd& batch_y, AdamState& adam,
                  const AdamConfig& config, std::uint64_t dropout_seed)
{
    return step_impl(net, batch_x, batch_y, adam, config, dropout_seed, nullptr);
}

TrainedModel init_model(const ModelSpec& spec)
{
    validate(spec);
    TrainedModel m;
    m.spec = spec;
    m.net = Network(spec.layers, spec.input_shape, hash_seed({spec.training.seed, 0x77656967ULL}));
    return m;
}

TrainedModel fit(const ModelSpec& spec, const Matrix& x, const Eigen::VectorXd& y)
{
    if (x.rows() == 0)
        throw ValidationError("fit: empty training set");
    if (x.rows() != y.size())
        throw ValidationError("fit: " + std::to_string(x.rows()) + " samples but " + std::to_string(y.size()) +
                              " targets");
    if (x.cols() != spec.input_shape.size())
        throw ValidationError("fit: samples have " + std::to_string(x.cols()) + " values, model expects " +
                              std::to_string(spec.input_shape.size()));

    TrainedModel model = init_model(spec);
    if (spec.standardize_inputs)
        model.input_scaler = fit_standardizer(x);
    if (spec.standardize_targets) {
        model.target_offset = y.mean();
        const double sd = std::sqrt((y.array() - model.target_offset).square().mean());
        model.target_scale = sd > 1e-12 ? sd : 1.0;
    }
    const Matrix xs = apply_scaler(model.input_scaler, x);
    const Eigen::VectorXd ys = (y.array() - model.target_offset) / model.target_scale;

    const auto& tc = spec.training;
    const Index n = x.rows();
    std::vector<Index> order(static_cast<std::size_t>(n));
    AdamState adam;
    Eigen::VectorXd pred;
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), Index{0});
        Rng shuffle_rng(hash_seed({tc.seed, 0x73687566ULL, static_cast<std::uint64_t>(epoch)}));
        shuffle_rng.shuffle(order.begin(), order.end());

        double se = 0, ae = 0, ape = 0;
        std::uint64_t batch_index = 0;
        for (Index start = 0; start < n; start += tc.batch_size, ++batch_index) {
            const Index count = std::min(tc.batch_size, n - start);
            Tensor bx{spec.input_shape, Matrix(count, xs.cols())};
            Eigen::VectorXd by(count);
            for (Index i = 0; i < count; ++i) {
                const Index src = order[static_cast<std::size_t>(start + i)];
                bx.data.row(i) = xs.row(src);
                by(i) = ys(src);
            }
            const std::uint64_t seed = hash_seed({tc.seed, static_cast<std::uint64_t>(epoch), batch_index});
            step_impl(model.net, bx, by, adam, tc.adam, seed, &pred);
            const Eigen::ArrayXd err = (pred - by).array() * model.target_scale;
            se += err.square().sum();
            ae += err.abs().sum();
            for (Index i = 0; i < count; ++i) {
                const double ref = by(i) * model.target_scale + model.target_offset;
                ape += ref != 0 ? std::abs(err(i) / ref) : 0.0;
            }
        }
        const double dn = static_cast<double>(n);
        model.history.push_back({epoch + 1, se / dn, ae / dn, 100.0 * ape / dn});
    }
    return model;
}

Eigen::VectorXd predict(const TrainedModel& model, const Matrix& x, Index chunk)
{
    const Shape& shape = model.net.input_shape();
    if (x.cols() != shape.size())
        throw ValidationError("predict: samples have " + std::to_string(x.cols()) + " values, model expects " +
                              std::to_string(shape.size()));
    const Matrix xs = apply_scaler(model.input_scaler, x);
    Eigen::VectorXd out(x.rows());
    chunk = std::max<Index>(chunk, 1);
    for (Index start = 0; start < x.rows(); start += chunk) {
        const Index count = std::min(chunk, x.rows() - start);
        const Tensor t = model.net.forward({shape, xs.middleRows(start, count)}, Mode::infer);
        out.segment(start, count) = t.data.col(0).array() * model.target_scale + model.target_offset;
    }
    return out;
}

double gradient_check(const ModelSpec& spec, const Matrix& x, const Eigen::VectorXd& y, std::uint64_t seed,
                      double h)
{
    validate(spec);
    Network net(spec.layers, spec.input_shape, seed);
    if (net.parameter_count() > 10000)
        throw ValidationError("gradient_check: network too large (" + std::to_string(net.parameter_count()) +
                              " parameters)");
    const Tensor input{spec.input_shape, x};
    const std::uint64_t mask_seed = hash_seed({seed, 0x6d61736bULL});

    auto loss = [&](const Network& n) {
        const Tensor out = n.forward(input, Mode::train, mask_seed);
        return mse_loss(out.data, y) + n.l2_penalty();
    };

    std::vector<LayerCache> caches;
    const Tensor out = net.forward(input, Mode::train, mask_seed, &caches);
    Tensor dout{out.shape, 2.0 * (out.data.col(0) - y) / static_cast<double>(y.size())};
    std::vector<Matrix> grads;
    net.backward(dout, caches, grads);
    net.add_l2_gradient(grads);

    double worst = 0;
    auto params = net.params();
    for (std::size_t p = 0; p < params.size(); ++p) {
        Matrix& w = *params[p];
        for (Index i = 0; i < w.rows(); ++i)
            for (Index j = 0; j < w.cols(); ++j) {
                const double saved = w(i, j);
                w(i, j) = saved + h;
                const double up = loss(net);
                w(i, j) = saved - h;
                const double down = loss(net);
                w(i, j) = saved;
                const double numeric = (up - down) / (2.0 * h);
                const double analytic = grads[p](i, j);
                const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
                worst = std::max(worst, std::abs(analytic - numeric) / denom);
            }
    }
    return worst;
}

} // namespace glucolens::nn
