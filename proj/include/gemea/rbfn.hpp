#pragma once

// Gaussian radial basis function network
//
//     f(x) = sum_i w_i * exp(-||x - c_i||^2 / (2 s_i^2)) + w_0
//
// The centers c_i are the structural parameters; widths s_i, weights w_i and
// the output bias w_0 are recomputed analytically (k-NN heuristic and ridge
// regression on [Phi | 1]) whenever the centers move.

#include "gemea/common.hpp"

#include <iosfwd>

namespace gemea {

inline constexpr double kWidthFloor = 1e-8;

struct TrainConfig {
    double ridge_lambda = 0.01;
    int k_width = 2;
    int kmeans_iters = 20;
    int center_count = 0;  // 0 selects floor(sqrt(N))
};

/// Immutable network value. Rows of `centers` are the basis centers.
class RbfNet {
public:
    RbfNet() = default;
    RbfNet(Matrix centers, Vector widths, Vector weights, double bias = 0.0);

    int dim() const { return static_cast<int>(centers_.cols()); }
    int center_count() const { return static_cast<int>(centers_.rows()); }

    const Matrix& centers() const { return centers_; }
    const Vector& widths() const { return widths_; }
    const Vector& weights() const { return weights_; }
    double bias() const { return bias_; }

    double predict(const Eigen::Ref<const Vector>& x) const;
    Vector predict_batch(const Eigen::Ref<const Matrix>& X) const;

    bool operator==(const RbfNet& other) const;

private:
    Matrix centers_;
    Vector widths_;
    Vector weights_;
    double bias_ = 0.0;
};

int default_center_count(int n);

/// k-means on the rows of X. Initialized from a random distinct subset;
/// kmeans_iters = 0 returns that subset.
Matrix init_centers(const Eigen::Ref<const Matrix>& X, int center_count, int kmeans_iters, Rng& rng);

/// Mean distance to the k nearest other centers, floored at kWidthFloor.
/// A single center gets `single_center_width`.
Vector widths_knn(const Eigen::Ref<const Matrix>& centers, int k_width, double single_center_width);

Matrix activation_matrix(const Eigen::Ref<const Matrix>& centers, const Eigen::Ref<const Vector>& widths,
                         const Eigen::Ref<const Matrix>& X);

/// w = (Phi^T Phi + lambda I)^-1 Phi^T y through a Cholesky factorization.
/// Throws SingularityError when lambda = 0 and the normal matrix is singular.
Vector ridge_solve(const Eigen::Ref<const Matrix>& phi, const Eigen::Ref<const Vector>& y, double lambda);

double mse_loss(const RbfNet& net, const DataBatch& batch);

/// d(mse_loss)/d(centers), widths and weights held fixed. Same shape as centers.
Matrix grad_theta(const RbfNet& net, const DataBatch& batch);

/// Widths from centers, then ridge weights and bias on the batch.
RbfNet solve_for_centers(Matrix centers, const DataBatch& batch, const TrainConfig& cfg, double single_center_width);

/// Full scratch training: k-means centers, k-NN widths, ridge weights.
RbfNet train_rbfn(const DataBatch& batch, const Bounds& bounds, const TrainConfig& cfg, Rng& rng);

inline constexpr char kRbfMagic[8] = {'G', 'E', 'M', 'R', 'B', 'F', '0', '1'};

void write_rbfn(std::ostream& out, const RbfNet& net);
RbfNet read_rbfn(std::istream& in);

}  // namespace gemea
