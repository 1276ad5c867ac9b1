#ifndef GLUCOLENS_FOREST_HPP
#define GLUCOLENS_FOREST_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "glucolens/errors.hpp"
#include "glucolens/random.hpp"

namespace glucolens {

using Eigen::Index;

/// Per-feature min/max from a training matrix.
struct ScalerParams {
    Eigen::RowVectorXd min;
    Eigen::RowVectorXd max;

    bool empty() const { return min.size() == 0; }
};

ScalerParams scaler_fit(const Eigen::MatrixXd& train_x);

/// x' = (x - min) / (max - min); constant features map to 0.
Eigen::MatrixXd scaler_apply(const ScalerParams& params, const Eigen::MatrixXd& x);

/// Fits on `train_x` and transforms `x`.
Eigen::MatrixXd scaler_fit_apply(const Eigen::MatrixXd& train_x, const Eigen::MatrixXd& x);

/// Ordinary least squares y ~ X beta + intercept.
struct LinearModel {
    Eigen::VectorXd coefficients;
    double intercept = 0;
    ScalerParams scaler; // empty: raw features
};

/// Solves via column-pivoted Householder QR; throws SingularMatrixError when
/// [X, 1] lacks full column rank.
LinearModel fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// Regression tree stored as a flat node array; node 0 is the root.
struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0;
    int left = -1;  // x[feature] <= threshold
    int right = -1; // x[feature] > threshold
    double value = 0; // leaf mean
    int samples = 0;
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict(const double* row, Index stride) const;
    int depth() const;
};

struct TreeOptions {
    int max_depth = 15; // <= 0: unlimited
    int min_samples_split = 2;
};

/// Greedy variance-reduction tree. Thresholds are midpoints between sorted unique
/// values; ties go to the lowest feature index, then the lowest threshold.
Tree fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TreeOptions& options = {});

/// Same, restricted to the listed rows (duplicates allowed, as in a bootstrap sample).
Tree fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<Index>& rows,
              const TreeOptions& options);

struct ForestOptions {
    int n_estimators = 100;
    TreeOptions tree;
    std::uint64_t seed = 42;
    bool bootstrap = true;
    bool scale_features = true;
    unsigned threads = 1; // 0: hardware concurrency
};

struct ForestModel {
    std::vector<Tree> trees;
    std::uint64_t seed = 0;
    ScalerParams scaler;
};

/// Tree t is fit on a bootstrap sample drawn from hash_seed(seed, t), so the
/// result does not depend on the thread count.
ForestModel fit_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ForestOptions& options = {});

Eigen::VectorXd predict(const LinearModel& model, const Eigen::MatrixXd& x);
Eigen::VectorXd predict(const ForestModel& model, const Eigen::MatrixXd& x);
Eigen::VectorXd predict(const Tree& tree, const Eigen::MatrixXd& x);

} // namespace glucolens

#endif // GLUCOLENS_FOREST_HPP
