#include "glucolens/forest.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "glucolens/parallel.hpp"

namespace glucolens {

ScalerParams scaler_fit(const Eigen::MatrixXd& train_x)
{
    if (train_x.rows() == 0 || train_x.cols() == 0)
        throw ValidationError("scaler: empty training matrix");
    return {train_x.colwise().minCoeff(), train_x.colwise().maxCoeff()};
}

Eigen::MatrixXd scaler_apply(const ScalerParams& params, const Eigen::MatrixXd& x)
{
    if (params.empty())
        return x;
    if (x.cols() != params.min.size())
        throw ValidationError("scaler: matrix has " + std::to_string(x.cols()) + " features, scaler was fit on " +
                              std::to_string(params.min.size()));
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
        const double range = params.max(j) - params.min(j);
        if (range > 0)
            out.col(j) = (x.col(j).array() - params.min(j)) / range;
        else
            out.col(j).setZero();
    }
    return out;
}

Eigen::MatrixXd scaler_fit_apply(const Eigen::MatrixXd& train_x, const Eigen::MatrixXd& x)
{
    return scaler_apply(scaler_fit(train_x), x);
}

LinearModel fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y)
{
    const Index n = x.rows();
    const Index p = x.cols();
    if (n != y.size())
        throw ValidationError("ols: " + std::to_string(n) + " rows but " + std::to_string(y.size()) + " targets");
    if (n <= p)
        throw ValidationError("ols: need more samples than features (" + std::to_string(n) + " <= " +
                              std::to_string(p) + ")");

    Eigen::MatrixXd design(n, p + 1);
    design.leftCols(p) = x;
    design.col(p).setOnes();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < p + 1)
        throw SingularMatrixError("ols: design matrix is rank deficient (rank " + std::to_string(qr.rank()) +
                                  " of " + std::to_string(p + 1) + ")");
    const Eigen::VectorXd beta = qr.solve(y);
    return {beta.head(p), beta(p), {}};
}

double Tree::predict(const double* row, Index stride) const
{
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
        const auto& n = nodes[static_cast<std::size_t>(i)];
        i = row[n.feature * stride] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
}

int Tree::depth() const
{
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        best = std::max(best, d[i]);
        if (nodes[i].feature >= 0) {
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        }
    }
    return best;
}

namespace {

struct TreeBuilder {
    const Eigen::MatrixXd& x;
    const Eigen::VectorXd& y;
    TreeOptions options;
    Tree tree;

    struct Split {
        int feature = -1;
        double threshold = 0;
        double score = -1; // sum of squared deviations removed
    };

    Split best_split(const std::vector<Index>& rows) const
    {
        const auto n = static_cast<Index>(rows.size());
        double total = 0;
        for (Index r : rows)
            total += y(r);
        Split best;
        std::vector<std::pair<double, double>> col(rows.size());
        for (Index f = 0; f < x.cols(); ++f) {
            for (std::size_t i = 0; i < rows.size(); ++i)
                col[i] = {x(rows[i], f), y(rows[i])};
            std::sort(col.begin(), col.end());
            // SSE(left) + SSE(right) = const - (S_l^2/n_l + S_r^2/n_r); maximize the bracket.
            double left_sum = 0;
            for (Index i = 0; i + 1 < n; ++i) {
                left_sum += col[static_cast<std::size_t>(i)].second;
                const double a = col[static_cast<std::size_t>(i)].first;
                const double b = col[static_cast<std::size_t>(i + 1)].first;
                if (!(b > a))
                    continue;
                const double nl = static_cast<double>(i + 1);
                const double nr = static_cast<double>(n - i - 1);
                const double right_sum = total - left_sum;
                const double score = left_sum * left_sum / nl + right_sum * right_sum / nr;
                if (score > best.score) {
                    best.score = score;
                    best.feature = static_cast<int>(f);
                    best.threshold = a + 0.5 * (b - a);
                }
            }
        }
        return best;
    }

    int build(std::vector<Index> rows, int depth)
    {
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        double mean = 0;
        for (Index r : rows)
            mean += y(r);
        mean /= static_cast<double>(rows.size());
        bool constant = true;
        for (Index r : rows)
            if (y(r) != y(rows.front())) {
                constant = false;
                break;
            }
        {
            auto& node = tree.nodes.back();
            node.value = mean;
            node.samples = static_cast<int>(rows.size());
        }
        const bool depth_reached = options.max_depth > 0 && depth >= options.max_depth;
        if (depth_reached || constant || static_cast<int>(rows.size()) < options.min_samples_split)
            return id;

        const Split split = best_split(rows);
        if (split.feature < 0)
            return id;

        std::vector<Index> left, right;
        for (Index r : rows)
            (x(r, split.feature) <= split.threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();
        const int l = build(std::move(left), depth + 1);
        const int r = build(std::move(right), depth + 1);
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = l;
        node.right = r;
        return id;
    }
};

} // namespace

Tree fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<Index>& rows,
              const TreeOptions& options)
{
    if (rows.empty())
        throw ValidationError("fit_tree: empty data");
    if (x.rows() != y.size())
        throw ValidationError("fit_tree: row count mismatch");
    TreeBuilder b{x, y, options, {}};
    b.build(rows, 0);
    return std::move(b.tree);
}

Tree fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TreeOptions& options)
{
    std::vector<Index> rows(static_cast<std::size_t>(x.rows()));
    std::iota(rows.begin(), rows.end(), Index{0});
    return fit_tree(x, y, rows, options);
}

ForestModel fit_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ForestOptions& options)
{
    if (x.rows() == 0)
        throw ValidationError("fit_forest: empty data");
    if (x.rows() != y.size())
        throw ValidationError("fit_forest: row count mismatch");
    if (options.n_estimators < 1)
        throw ValidationError("fit_forest: n_estimators must be >= 1");

    ForestModel model;
    model.seed = options.seed;
    if (options.scale_features)
        model.scaler = scaler_fit(x);
    const Eigen::MatrixXd xs = scaler_apply(model.scaler, x);
    model.trees.resize(static_cast<std::size_t>(options.n_estimators));

    const auto n = static_cast<std::uint64_t>(x.rows());
    parallel_for(model.trees.size(), options.threads, [&](std::size_t t) {
        std::vector<Index> rows(static_cast<std::size_t>(n));
        if (options.bootstrap) {
            Rng rng(hash_seed({options.seed, 0x74726565ULL, t}));
            for (auto& r : rows)
                r = static_cast<Index>(rng.below(n));
        } else {
            std::iota(rows.begin(), rows.end(), Index{0});
        }
        model.trees[t] = fit_tree(xs, y, rows, options.tree);
    });
    return model;
}

Eigen::VectorXd predict(const LinearModel& model, const Eigen::MatrixXd& x)
{
    if (x.cols() != model.coefficients.size())
        throw ValidationError("predict: " + std::to_string(x.cols()) + " features, model expects " +
                              std::to_string(model.coefficients.size()));
    const Eigen::MatrixXd xs = scaler_apply(model.scaler, x);
    return (xs * model.coefficients).array() + model.intercept;
}

Eigen::VectorXd predict(const Tree& tree, const Eigen::MatrixXd& x)
{
    Eigen::VectorXd out(x.rows());
    for (Index i = 0; i < x.rows(); ++i)
        out(i) = tree.predict(&x(i, 0), x.outerStride());
    return out;
}

Eigen::VectorXd predict(const ForestModel& model, const Eigen::MatrixXd& x)
{
    if (model.trees.empty())
        throw ValidationError("predict: forest has no trees");
    if (!model.scaler.empty() && x.cols() != model.scaler.min.size())
        throw ValidationError("predict: " + std::to_string(x.cols()) + " features, forest expects " +
                              std::to_string(model.scaler.min.size()));
    const Eigen::MatrixXd xs = scaler_apply(model.scaler, x);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(x.rows());
    for (const auto& t : model.trees)
        sum += predict(t, xs);
    return sum / static_cast<double>(model.trees.size());
}

} // namespace glucolens
