#include <cmath>
#include <limits>

#include "glucolens/nn.hpp"

namespace glucolens::nn {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string to_string(const Shape& s)
{
    return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width);
}

std::string to_string(Activation a)
{
    switch (a) {
    case Activation::linear:
        return "linear";
    case Activation::tanh:
        return "tanh";
    case Activation::swish:
        return "swish";
    case Activation::relu:
        return "relu";
    }
    return "linear";
}

Activation parse_activation(const std::string& text)
{
    for (auto a : {Activation::linear, Activation::tanh, Activation::swish, Activation::relu})
        if (to_string(a) == text)
            return a;
    throw ValidationError("unknown activation '" + text + "'");
}

namespace {

double sigmoid(double x)
{
    if (x >= 0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

double activate(Activation fn, double x)
{
    switch (fn) {
    case Activation::linear:
        return x;
    case Activation::tanh:
        return std::tanh(x);
    case Activation::swish:
        return x * sigmoid(x);
    case Activation::relu:
        return x > 0 ? x : 0.0;
    }
    return x;
}

double activate_derivative(Activation fn, double x)
{
    switch (fn) {
    case Activation::linear:
        return 1.0;
    case Activation::tanh: {
        const double t = std::tanh(x);
        return 1.0 - t * t;
    }
    case Activation::swish: {
        const double s = sigmoid(x);
        return s * (1.0 + x * (1.0 - s));
    }
    case Activation::relu:
        return x > 0 ? 1.0 : 0.0;
    }
    return 1.0;
}

std::string layer_kind(const LayerSpec& spec)
{
    return std::visit(overloaded{[](const DenseSpec&) { return std::string("dense"); },
                                 [](const Conv2dSpec&) { return std::string("conv2d"); },
                                 [](const MaxPool2dSpec&) { return std::string("maxpool2d"); },
                                 [](const DropoutSpec&) { return std::string("dropout"); },
                                 [](const BatchNormSpec&) { return std::string("batchnorm"); },
                                 [](const FlattenSpec&) { return std::string("flatten"); },
                                 [](const ActivationSpec&) { return std::string("activation"); }},
                      spec);
}

namespace {

Matrix he_uniform(Index rows, Index cols, Index fan_in, Rng& rng)
{
    const double limit = std::sqrt(6.0 / static_cast<double>(std::max<Index>(fan_in, 1)));
    Matrix w(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            w(i, j) = rng.uniform(-limit, limit);
    return w;
}

void require_flat(const Shape& s, const char* what)
{
    if (!s.flat())
        throw ValidationError(std::string(what) + " expects a flat input, got " + to_string(s));
}

// ---- shape propagation ---------------------------------------------------

Shape output_shape(const DenseLayer& l, const Shape&)
{
    return {l.weight.cols(), 1, 1};
}
Shape output_shape(const Conv2dLayer& l, const Shape& in)
{
    return {l.weight.rows(), in.height - l.kernel + 1, in.width - l.kernel + 1};
}
Shape output_shape(const MaxPool2dLayer& l, const Shape& in)
{
    return {in.channels, in.height / l.pool, in.width / l.pool};
}
Shape output_shape(const DropoutLayer&, const Shape& in)
{
    return in;
}
Shape output_shape(const BatchNormLayer&, const Shape& in)
{
    return in;
}
Shape output_shape(const FlattenLayer&, const Shape& in)
{
    return {in.size(), 1, 1};
}
Shape output_shape(const ActivationLayer&, const Shape& in)
{
    return in;
}

// ---- convolution helpers -------------------------------------------------

// col(c*k*k + ky*k + kx, oy*ow + ox) = x(c, oy + ky, ox + kx)
void im2col(const double* x, const Shape& in, Index k, Matrix& col)
{
    const Index oh = in.height - k + 1;
    const Index ow = in.width - k + 1;
    col.resize(in.channels * k * k, oh * ow);
    for (Index c = 0; c < in.channels; ++c)
        for (Index ky = 0; ky < k; ++ky)
            for (Index kx = 0; kx < k; ++kx) {
                double* dst = col.row((c * k + ky) * k + kx).data();
                for (Index oy = 0; oy < oh; ++oy) {
                    const double* src = x + (c * in.height + oy + ky) * in.width + kx;
                    for (Index ox = 0; ox < ow; ++ox)
                        dst[oy * ow + ox] = src[ox];
                }
            }
}

void col2im_add(const Matrix& col, const Shape& in, Index k, double* dx)
{
    const Index oh = in.height - k + 1;
    const Index ow = in.width - k + 1;
    for (Index c = 0; c < in.channels; ++c)
        for (Index ky = 0; ky < k; ++ky)
            for (Index kx = 0; kx < k; ++kx) {
                const double* src = col.row((c * k + ky) * k + kx).data();
                for (Index oy = 0; oy < oh; ++oy) {
                    double* dst = dx + (c * in.height + oy + ky) * in.width + kx;
                    for (Index ox = 0; ox < ow; ++ox)
                        dst[ox] += src[oy * ow + ox];
                }
            }
}

using RowMap = Eigen::Map<Matrix>;
using ConstRowMap = Eigen::Map<const Matrix>;

// ---- forward -------------------------------------------------------------

Tensor forward_layer(const DenseLayer& l, const Tensor& x, Mode, Rng&, LayerCache*)
{
    Tensor y{output_shape(l, x.shape), Matrix(x.batch(), l.weight.cols())};
    y.data.noalias() = x.data * l.weight;
    y.data.rowwise() += l.bias.row(0);
    return y;
}

Tensor forward_layer(const Conv2dLayer& l, const Tensor& x, Mode, Rng&, LayerCache*)
{
    const Shape out = output_shape(l, x.shape);
    const Index positions = out.height * out.width;
    Tensor y{out, Matrix(x.batch(), out.size())};
    Matrix col;
    for (Index n = 0; n < x.batch(); ++n) {
        im2col(x.data.row(n).data(), x.shape, l.kernel, col);
        RowMap dst(y.data.row(n).data(), out.channels, positions);
        dst.noalias() = l.weight * col;
        dst.colwise() += l.bias.row(0).transpose();
    }
    return y;
}

Tensor forward_layer(const MaxPool2dLayer& l, const Tensor& x, Mode, Rng&, LayerCache* cache)
{
    const Shape in = x.shape;
    const Shape out = output_shape(l, in);
    Tensor y{out, Matrix(x.batch(), out.size())};
    if (cache)
        cache->argmax.assign(static_cast<std::size_t>(x.batch() * out.size()), 0);
    for (Index n = 0; n < x.batch(); ++n) {
        const double* src = x.data.row(n).data();
        double* dst = y.data.row(n).data();
        for (Index c = 0; c < out.channels; ++c)
            for (Index oy = 0; oy < out.height; ++oy)
                for (Index ox = 0; ox < out.width; ++ox) {
                    Index best = (c * in.height + oy * l.pool) * in.width + ox * l.pool;
                    for (Index py = 0; py < l.pool; ++py)
                        for (Index px = 0; px < l.pool; ++px) {
                            const Index idx = (c * in.height + oy * l.pool + py) * in.width + ox * l.pool + px;
                            if (src[idx] > src[best])
                                best = idx;
                        }
                    const Index o = (c * out.height + oy) * out.width + ox;
                    dst[o] = src[best];
                    if (cache)
                        cache->argmax[static_cast<std::size_t>(n * out.size() + o)] = best;
                }
    }
    return y;
}

Tensor forward_layer(const DropoutLayer& l, const Tensor& x, Mode mode, Rng& rng, LayerCache* cache)
{
    if (mode == Mode::infer || l.rate == 0)
        return x;
    const double keep = 1.0 - l.rate;
    Matrix mask(x.data.rows(), x.data.cols());
    for (Index i = 0; i < mask.rows(); ++i)
        for (Index j = 0; j < mask.cols(); ++j)
            mask(i, j) = rng.uniform() < keep ? 1.0 / keep : 0.0;
    Tensor y{x.shape, x.data.cwiseProduct(mask)};
    if (cache)
        cache->aux = std::move(mask);
    return y;
}

Tensor forward_layer(const BatchNormLayer& l, const Tensor& x, Mode mode, Rng&, LayerCache* cache)
{
    const Index channels = x.shape.channels;
    const Index spatial = x.shape.height * x.shape.width;
    Tensor y{x.shape, Matrix(x.data.rows(), x.data.cols())};
    Eigen::RowVectorXd mean(channels), var(channels);

    if (mode == Mode::infer) {
        mean = l.running_mean.row(0);
        var = l.running_var.row(0);
    } else {
        const double count = static_cast<double>(x.batch() * spatial);
        for (Index c = 0; c < channels; ++c) {
            const auto block = x.data.middleCols(c * spatial, spatial);
            const double mu = block.sum() / count;
            mean(c) = mu;
            var(c) = (block.array() - mu).square().sum() / count;
        }
    }
    Matrix xhat(x.data.rows(), x.data.cols());
    for (Index c = 0; c < channels; ++c) {
        const double inv_std = 1.0 / std::sqrt(var(c) + l.epsilon);
        xhat.middleCols(c * spatial, spatial) = (x.data.middleCols(c * spatial, spatial).array() - mean(c)) * inv_std;
        y.data.middleCols(c * spatial, spatial) =
            (xhat.middleCols(c * spatial, spatial).array() * l.gamma(0, c) + l.beta(0, c)).matrix();
    }
    if (cache) {
        cache->aux = std::move(xhat);
        cache->mean = mean;
        cache->var = var;
    }
    return y;
}

Tensor forward_layer(const FlattenLayer& l, const Tensor& x, Mode, Rng&, LayerCache*)
{
    return {output_shape(l, x.shape), x.data};
}

Tensor forward_layer(const ActivationLayer& l, const Tensor& x, Mode, Rng&, LayerCache*)
{
    Tensor y{x.shape, x.data.unaryExpr([fn = l.fn](double v) { return activate(fn, v); })};
    return y;
}

// ---- backward ------------------------------------------------------------
// `grads` points at this layer's slice of the gradient list.

Tensor backward_layer(const DenseLayer& l, const Tensor& dy, const LayerCache& cache, Matrix* grads)
{
    grads[0].noalias() = cache.input.data.transpose() * dy.data;
    grads[1] = dy.data.colwise().sum();
    Tensor dx{cache.input.shape, Matrix(dy.batch(), l.weight.rows())};
    dx.data.noalias() = dy.data * l.weight.transpose();
    return dx;
}

Tensor backward_layer(const Conv2dLayer& l, const Tensor& dy, const LayerCache& cache, Matrix* grads)
{
    const Shape& in = cache.input.shape;
    const Index positions = dy.shape.height * dy.shape.width;
    grads[0].setZero(l.weight.rows(), l.weight.cols());
    grads[1].setZero(1, l.weight.rows());
    Tensor dx{in, Matrix::Zero(dy.batch(), in.size())};
    Matrix col, dcol;
    for (Index n = 0; n < dy.batch(); ++n) {
        im2col(cache.input.data.row(n).data(), in, l.kernel, col);
        ConstRowMap g(dy.data.row(n).data(), dy.shape.channels, positions);
        grads[0].noalias() += g * col.transpose();
        grads[1].row(0) += g.rowwise().sum().transpose();
        dcol.noalias() = l.weight.transpose() * g;
        col2im_add(dcol, in, l.kernel, dx.data.row(n).data());
    }
    return dx;
}

Tensor backward_layer(const MaxPool2dLayer&, const Tensor& dy, const LayerCache& cache, Matrix*)
{
    Tensor dx{cache.input.shape, Matrix::Zero(dy.batch(), cache.input.shape.size())};
    const Index out_size = dy.shape.size();
    for (Index n = 0; n < dy.batch(); ++n)
        for (Index o = 0; o < out_size; ++o)
            dx.data(n, cache.argmax[static_cast<std::size_t>(n * out_size + o)]) += dy.data(n, o);
    return dx;
}

Tensor backward_layer(const DropoutLayer& l, const Tensor& dy, const LayerCache& cache, Matrix*)
{
    if (l.rate == 0 || cache.aux.size() == 0)
        return dy;
    return {dy.shape, dy.data.cwiseProduct(cache.aux)};
}

Tensor backward_layer(const BatchNormLayer& l, const Tensor& dy, const LayerCache& cache, Matrix* grads)
{
    const Index channels = dy.shape.channels;
    const Index spatial = dy.shape.height * dy.shape.width;
    const double count = static_cast<double>(dy.batch() * spatial);
    grads[0].resize(1, channels);
    grads[1].resize(1, channels);
    Tensor dx{dy.shape, Matrix(dy.data.rows(), dy.data.cols())};
    for (Index c = 0; c < channels; ++c) {
        const auto g = dy.data.middleCols(c * spatial, spatial).array();
        const auto xhat = cache.aux.middleCols(c * spatial, spatial).array();
        const double sum_g = g.sum();
        const double sum_gx = (g * xhat).sum();
        grads[0](0, c) = sum_gx;
        grads[1](0, c) = sum_g;
        const double inv_std = 1.0 / std::sqrt(cache.var(c) + l.epsilon);
        const double scale = l.gamma(0, c) * inv_std / count;
        dx.data.middleCols(c * spatial, spatial) = (scale * (count * g - sum_g - xhat * sum_gx)).matrix();
    }
    return dx;
}

Tensor backward_layer(const FlattenLayer&, const Tensor& dy, const LayerCache& cache, Matrix*)
{
    return {cache.input.shape, dy.data};
}

Tensor backward_layer(const ActivationLayer& l, const Tensor& dy, const LayerCache& cache, Matrix*)
{
    const auto deriv = cache.input.data.unaryExpr([fn = l.fn](double v) { return activate_derivative(fn, v); });
    return {dy.shape, dy.data.cwiseProduct(deriv)};
}

// ---- parameters ----------------------------------------------------------

template <typename L, typename Out>
void collect_params(L& layer, Out& out)
{
    using T = std::remove_const_t<L>;
    if constexpr (std::is_same_v<T, DenseLayer> || std::is_same_v<T, Conv2dLayer>) {
        out.push_back(&layer.weight);
        out.push_back(&layer.bias);
    } else if constexpr (std::is_same_v<T, BatchNormLayer>) {
        out.push_back(&layer.gamma);
        out.push_back(&layer.beta);
    }
}

std::size_t param_tensor_count(const Layer& layer)
{
    return std::visit(
        [](const auto& l) -> std::size_t {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, DenseLayer> || std::is_same_v<T, Conv2dLayer> ||
                          std::is_same_v<T, BatchNormLayer>)
                return 2;
            else
                return 0;
        },
        layer);
}

Shape layer_output_shape(const Layer& layer, const Shape& in)
{
    return std::visit([&](const auto& l) { return output_shape(l, in); }, layer);
}

} // namespace

Network::Network(const std::vector<LayerSpec>& specs, const Shape& input, std::uint64_t init_seed)
{
    Rng rng(hash_seed({init_seed, 0x696e6974ULL}));
    Shape shape = input;
    std::vector<Layer> layers;
    layers.reserve(specs.size());
    for (const auto& spec : specs) {
        Layer layer = std::visit(
            overloaded{
                [&](const DenseSpec& s) -> Layer {
                    require_flat(shape, "dense");
                    if (s.units < 1)
                        throw ValidationError("dense: units must be >= 1");
                    return DenseLayer{he_uniform(shape.size(), s.units, shape.size(), rng), Matrix::Zero(1, s.units),
                                      s.l2};
                },
                [&](const Conv2dSpec& s) -> Layer {
                    if (s.kernel < 1 || s.kernel % 2 == 0)
                        throw ValidationError("conv2d: kernel must be odd");
                    if (shape.height < s.kernel || shape.width < s.kernel)
                        throw ValidationError("conv2d: input " + to_string(shape) + " smaller than kernel");
                    const Index fan_in = shape.channels * s.kernel * s.kernel;
                    return Conv2dLayer{shape, s.kernel, he_uniform(s.filters, fan_in, fan_in, rng),
                                       Matrix::Zero(1, s.filters), s.l2};
                },
                [&](const MaxPool2dSpec& s) -> Layer {
                    if (s.pool < 1 || shape.height < s.pool || shape.width < s.pool)
                        throw ValidationError("maxpool2d: input " + to_string(shape) + " smaller than pool");
                    return MaxPool2dLayer{shape, s.pool};
                },
                [&](const DropoutSpec& s) -> Layer {
                    if (!(s.rate >= 0 && s.rate < 1))
                        throw ValidationError("dropout: rate must lie in [0, 1)");
                    return DropoutLayer{s.rate};
                },
                [&](const BatchNormSpec& s) -> Layer {
                    const Index c = shape.channels;
                    return BatchNormLayer{shape,           s.momentum,       s.epsilon,     Matrix::Ones(1, c),
                                          Matrix::Zero(1, c), Matrix::Zero(1, c), Matrix::Ones(1, c)};
                },
                [&](const FlattenSpec&) -> Layer { return FlattenLayer{shape}; },
                [&](const ActivationSpec& s) -> Layer { return ActivationLayer{s.fn}; },
            },
            spec);
        shape = layer_output_shape(layer, shape);
        if (shape.size() < 1)
            throw ValidationError("layer '" + layer_kind(spec) + "' produces an empty output");
        layers.push_back(std::move(layer));
    }
    set_layers(std::move(layers), input);
}

void Network::set_layers(std::vector<Layer> layers, const Shape& input)
{
    input_ = input;
    Shape shape = input;
    for (auto& layer : layers) {
        std::visit(
            [&](auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, Conv2dLayer> || std::is_same_v<T, MaxPool2dLayer> ||
                              std::is_same_v<T, BatchNormLayer> || std::is_same_v<T, FlattenLayer>)
                    l.input = shape;
            },
            layer);
        shape = layer_output_shape(layer, shape);
    }
    output_ = shape;
    layers_ = std::move(layers);
}

Tensor Network::forward(const Tensor& x, Mode mode, std::uint64_t seed, std::vector<LayerCache>* caches) const
{
    if (x.shape != input_ || x.data.cols() != input_.size())
        throw ValidationError("forward: input shape " + to_string(x.shape) + " does not match network input " +
                              to_string(input_));
    Rng rng(hash_seed({seed, 0x64726f70ULL}));
    if (caches)
        caches->assign(layers_.size(), LayerCache{});
    Tensor cur = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        LayerCache* cache = caches ? &(*caches)[i] : nullptr;
        if (cache)
            cache->input = cur;
        cur = std::visit([&](const auto& l) { return forward_layer(l, cur, mode, rng, cache); }, layers_[i]);
    }
    return cur;
}

Tensor Network::backward(const Tensor& grad_output, const std::vector<LayerCache>& caches,
                         std::vector<Matrix>& grads) const
{
    if (caches.size() != layers_.size())
        throw ValidationError("backward: cache count does not match layer count");
    std::size_t total = 0;
    std::vector<std::size_t> offsets(layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        offsets[i] = total;
        total += param_tensor_count(layers_[i]);
    }
    grads.resize(total);
    Tensor g = grad_output;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        Matrix* slot = grads.data() + offsets[i];
        g = std::visit([&](const auto& l) { return backward_layer(l, g, caches[i], slot); }, layers_[i]);
    }
    return g;
}

std::vector<Matrix*> Network::params()
{
    std::vector<Matrix*> out;
    for (auto& layer : layers_)
        std::visit([&](auto& l) { collect_params(l, out); }, layer);
    return out;
}

std::vector<const Matrix*> Network::params() const
{
    std::vector<const Matrix*> out;
    for (const auto& layer : layers_)
        std::visit([&](const auto& l) { collect_params(l, out); }, layer);
    return out;
}

Index Network::parameter_count() const
{
    Index n = 0;
    for (const Matrix* p : params())
        n += p->size();
    return n;
}

double Network::l2_penalty() const
{
    double total = 0;
    for (const auto& layer : layers_)
        std::visit(
            [&](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, DenseLayer> || std::is_same_v<T, Conv2dLayer>)
                    if (l.l2 > 0)
                        total += l.l2 * l.weight.squaredNorm();
            },
            layer);
    return total;
}

void Network::add_l2_gradient(std::vector<Matrix>& grads) const
{
    std::size_t slot = 0;
    for (const auto& layer : layers_)
        std::visit(
            [&](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, DenseLayer> || std::is_same_v<T, Conv2dLayer>) {
                    if (l.l2 > 0)
                        grads[slot] += 2.0 * l.l2 * l.weight;
                    slot += 2;
                } else if constexpr (std::is_same_v<T, BatchNormLayer>) {
                    slot += 2;
                }
            },
            layer);
}

void Network::update_running_stats(const std::vector<LayerCache>& caches)
{
    for (std::size_t i = 0; i < layers_.size(); ++i)
        if (auto* bn = std::get_if<BatchNormLayer>(&layers_[i])) {
            const auto& c = caches[i];
            if (c.mean.size() == 0)
                continue;
            bn->running_mean.row(0) = bn->momentum * bn->running_mean.row(0) + (1.0 - bn->momentum) * c.mean;
            bn->running_var.row(0) = bn->momentum * bn->running_var.row(0) + (1.0 - bn->momentum) * c.var;
        }
}

} // namespace glucolens::nn
