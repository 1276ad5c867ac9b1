#ifndef GLUCOLENS_NN_HPP
#define GLUCOLENS_NN_HPP

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "glucolens/errors.hpp"
#include "glucolens/random.hpp"

namespace glucolens::nn {

using Eigen::Index;
/// Batch-major storage: one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Channel-major sample shape. Flat feature vectors use {n, 1, 1}.
struct Shape {
    Index channels = 1;
    Index height = 1;
    Index width = 1;

    Index size() const { return channels * height * width; }
    bool flat() const { return height == 1 && width == 1; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

struct Tensor {
    Shape shape;
    Matrix data; // rows = batch, cols = shape.size()

    Index batch() const { return data.rows(); }
};

enum class Activation { linear, tanh, swish, relu };
enum class Mode { train, infer };

std::string to_string(Activation a);
Activation parse_activation(const std::string& text);

double activate(Activation fn, double x);
/// d activation / dx evaluated at pre-activation x.
double activate_derivative(Activation fn, double x);

// Layer specifications (architecture only, no parameters).
struct DenseSpec {
    Index units = 1;
    double l2 = 0;
};
struct Conv2dSpec {
    Index filters = 1;
    Index kernel = 3;
    double l2 = 0;
};
struct MaxPool2dSpec {
    Index pool = 2;
};
struct DropoutSpec {
    double rate = 0;
};
struct BatchNormSpec {
    double momentum = 0.99;
    double epsilon = 1e-3;
};
struct FlattenSpec {};
struct ActivationSpec {
    Activation fn = Activation::linear;
};

using LayerSpec =
    std::variant<DenseSpec, Conv2dSpec, MaxPool2dSpec, DropoutSpec, BatchNormSpec, FlattenSpec, ActivationSpec>;

std::string layer_kind(const LayerSpec& spec);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainingConfig {
    AdamConfig adam;
    int epochs = 50;
    Index batch_size = 32;
    std::uint64_t seed = 42;
};

enum class ModelId { M1, M2, M3, M4 };

std::string to_string(ModelId id);
ModelId parse_model_id(const std::string& text);

struct ModelSpec {
    std::string id;
    Shape input_shape;
    std::vector<LayerSpec> layers;
    TrainingConfig training;
    /// Z-score inputs with training-set statistics (feature-vector models).
    bool standardize_inputs = false;
    /// Fit in z-scored target space and map predictions back to mg/dL.
    bool standardize_targets = true;
};

/// Throws ValidationError if rates, kernels or the output layer are inconsistent.
void validate(const ModelSpec& spec);

/// Architectures M1-M4. M1-M3 take the 19-value fused feature vector,
/// M4 a single-channel image (128x128 normative, smaller sizes for desk runs).
ModelSpec build_model(ModelId id, const Shape& input_shape);

// Layers with parameters. Every trainable tensor is a Matrix; biases are 1 x n.
struct DenseLayer {
    Matrix weight; // in x units
    Matrix bias;   // 1 x units
    double l2 = 0;
};
struct Conv2dLayer {
    Shape input;
    Index kernel = 3;
    Matrix weight; // filters x (channels * kernel * kernel)
    Matrix bias;   // 1 x filters
    double l2 = 0;
};
struct MaxPool2dLayer {
    Shape input;
    Index pool = 2;
};
struct DropoutLayer {
    double rate = 0;
};
struct BatchNormLayer {
    Shape input;
    double momentum = 0.99;
    double epsilon = 1e-3;
    Matrix gamma; // 1 x channels
    Matrix beta;
    Matrix running_mean;
    Matrix running_var;
};
struct FlattenLayer {
    Shape input;
};
struct ActivationLayer {
    Activation fn = Activation::linear;
};

using Layer = std::variant<DenseLayer, Conv2dLayer, MaxPool2dLayer, DropoutLayer, BatchNormLayer, FlattenLayer,
                           ActivationLayer>;

/// Per-layer intermediate values kept by a training-mode forward pass.
struct LayerCache {
    Tensor input;
    Matrix aux;                   // dropout mask, batchnorm x-hat
    std::vector<Index> argmax;    // maxpool winners
    Eigen::RowVectorXd mean, var; // batchnorm batch statistics
};

class Network {
public:
    Network() = default;
    /// He-uniform weights drawn from `init_seed`, zero biases.
    Network(const std::vector<LayerSpec>& specs, const Shape& input, std::uint64_t init_seed);

    const Shape& input_shape() const { return input_; }
    const Shape& output_shape() const { return output_; }
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }

    /// Train mode applies inverted dropout (masks drawn from `seed`) and batch
    /// statistics; infer mode is deterministic and ignores `seed`. Pass `caches`
    /// to keep the intermediates needed by backward().
    Tensor forward(const Tensor& x, Mode mode, std::uint64_t seed = 0,
                   std::vector<LayerCache>* caches = nullptr) const;

    /// Backpropagates dL/d(output). `grads` receives one tensor per parameter in
    /// params() order, overwritten. Returns dL/d(input).
    Tensor backward(const Tensor& grad_output, const std::vector<LayerCache>& caches,
                    std::vector<Matrix>& grads) const;

    std::vector<Matrix*> params();
    std::vector<const Matrix*> params() const;
    Index parameter_count() const;

    /// Sum over layers of l2 * ||W||^2 (weights only).
    double l2_penalty() const;
    void add_l2_gradient(std::vector<Matrix>& grads) const;

    /// Exponential moving update of batchnorm running statistics from a train pass.
    void update_running_stats(const std::vector<LayerCache>& caches);

    /// Rebuilds input/output shapes after layers were replaced (deserialization).
    void set_layers(std::vector<Layer> layers, const Shape& input);

private:
    Shape input_;
    Shape output_;
    std::vector<Layer> layers_;
};

/// Adam first/second moments for one parameter tensor.
struct AdamMoments {
    Matrix m;
    Matrix v;
};

/// Bias-corrected Adam step at timestep t >= 1; updates `param` and `state` in place.
void adam_update(Matrix& param, const Matrix& grad, AdamMoments& state, long t, const AdamConfig& config = {});

struct AdamState {
    std::vector<AdamMoments> moments;
    long t = 0;
};

double mse_loss(const Matrix& predictions, const Eigen::VectorXd& targets);

/// One optimizer step on a batch (targets in the network's output space).
/// Computes MSE + L2, backpropagates, applies Adam, and returns the pre-update loss.
double train_step(Network& net, const Tensor& batch_x, const Eigen::VectorXd& batch_y, AdamState& adam,
                  const AdamConfig& config, std::uint64_t dropout_seed);

struct EpochRecord {
    int epoch = 0;
    double mse = 0; // mg/dL^2, training batches before each update
    double mae = 0;
    double mape = 0;
};

/// Affine map x' = (x - offset) / scale, per column.
struct AffineScaler {
    Eigen::RowVectorXd offset;
    Eigen::RowVectorXd scale;

    bool empty() const { return offset.size() == 0; }
};

struct TrainedModel {
    ModelSpec spec;
    Network net;
    AffineScaler input_scaler;   // empty when inputs are used as-is
    double target_offset = 0;
    double target_scale = 1;
    std::vector<EpochRecord> history;
};

/// Initialized, untrained model for `spec`.
TrainedModel init_model(const ModelSpec& spec);

/// Runs exactly spec.training.epochs epochs of shuffled minibatch Adam.
/// `x` holds one sample per row, `y` the targets in mg/dL.
TrainedModel fit(const ModelSpec& spec, const Matrix& x, const Eigen::VectorXd& y);

/// Inference-mode predictions in mg/dL, one per row of `x`.
Eigen::VectorXd predict(const TrainedModel& model, const Matrix& x, Index chunk = 256);

/// Max relative error between analytic gradients and central differences
/// (step h) over every parameter, for the loss MSE + L2 on (x, y) in train
/// mode with a fixed dropout mask. Relative error uses max(|a|, |n|, 1e-6)
/// as the denominator.
double gradient_check(const ModelSpec& spec, const Matrix& x, const Eigen::VectorXd& y, std::uint64_t seed = 7,
                      double h = 1e-5);

} // namespace glucolens::nn

#endif // GLUCOLENS_NN_HPP
