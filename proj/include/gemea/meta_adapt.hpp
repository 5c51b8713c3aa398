#pragma once

// Three-stage surrogate adaptation run at each environment change:
//   1. rank archived surrogates against the new batch (MAPE + divergence from
//      a scratch-trained temporary model) and keep the top P;
//   2. warm-started gradient steps on the centers, then k-NN widths and ridge
//      weights; a first-order meta step refines the shared centers over the
//      retained batches of the selected environments;
//   3. a global linear residual fitted by pseudo-inverse.

#include "gemea/common.hpp"
#include "gemea/rbfn.hpp"
#include "gemea/replay_archive.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace gemea {

struct MetaConfig {
    double gamma_mape = 0.5;
    double gamma_divergence = 0.5;
    double inner_lr = 0.1;
    double meta_lr = 1e-4;
    int inner_steps = 5;
    int meta_epochs = 3;
    int prior_count = 4;
    double mape_eps = 1e-8;
    bool normalize_discrepancy = true;  // min-max over the candidates before weighting

    void validate() const;
};

struct MetaState {
    Matrix theta_meta;  // empty until the first environment
    std::vector<int> provenance;

    bool initialized() const { return theta_meta.size() > 0; }
};

/// F(x) = net(x) + a^T x + b.
class ResidualSurrogate {
public:
    ResidualSurrogate() = default;
    ResidualSurrogate(RbfNet net, Vector a, double b);

    double predict(const Eigen::Ref<const Vector>& x) const { return net_.predict(x) + a_.dot(x) + b_; }
    Vector predict_batch(const Eigen::Ref<const Matrix>& X) const;

    const RbfNet& net() const { return net_; }
    const Vector& slope() const { return a_; }
    double offset() const { return b_; }

private:
    RbfNet net_;
    Vector a_;
    double b_ = 0.0;
};

double mape(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& predicted, double eps);
double mape(const DataBatch& batch, const RbfNet& model, double eps);

struct DiscrepancyTerms {
    double mape = 0.0;
    double divergence = 0.0;  // mean squared difference to the temporary model over the batch
};

DiscrepancyTerms discrepancy_terms(const DataBatch& batch, const RbfNet& candidate, const RbfNet& temp, double eps);

/// Unnormalized gamma_mape * MAPE + gamma_divergence * divergence.
double discrepancy(const DataBatch& batch, const RbfNet& candidate, const RbfNet& temp, const MetaConfig& cfg);

RbfNet train_temp(const DataBatch& batch, const Bounds& bounds, const TrainConfig& cfg, Rng& rng);

struct MetaSelection {
    std::vector<std::size_t> indices;  // into Archive::entries(), best first
    std::vector<double> scores;
};

/// Top-P archive entries by ascending discrepancy; ties go to the most recent env_id.
MetaSelection select_meta_set(const Archive& archive, const DataBatch& batch, const RbfNet& temp,
                              const MetaConfig& cfg);

/// Inner adaptation from `theta_start`: gradient steps on the centers with
/// widths and weights frozen at their theta_start solution, then fresh k-NN
/// widths and ridge weights for the final centers.
RbfNet inner_then_solve(const Matrix& theta_start, const DataBatch& batch, const Bounds& bounds,
                        const TrainConfig& train, const MetaConfig& meta);

/// First-order meta step over the retained batches of the selected environments.
MetaState meta_update(MetaState state, const std::vector<const ArchiveEntry*>& meta_set, const Bounds& bounds,
                      const TrainConfig& train, const MetaConfig& meta);

struct LinearResidual {
    Vector a;
    double b = 0.0;
};

/// Least-squares fit of y - net(X) on [X, 1] through an SVD pseudo-inverse
/// (singular values below 1e-10 * max are dropped).
LinearResidual fit_residual(const RbfNet& net, const DataBatch& batch);

enum class WarmStart { cold, archive, meta_state };
std::string to_string(WarmStart w);

struct AdaptOptions {
    bool select_priors = true;  // stage 1 ranking (also feeds replay)
    bool meta_learning = true;  // stage 2
    bool residual = true;       // stage 3
};

struct AdaptResult {
    ResidualSurrogate surrogate;
    MetaSelection meta_set;
    MetaState state;
    WarmStart warm_start = WarmStart::cold;
};

AdaptResult adapt_environment(const Archive& archive, const DataBatch& batch, const Bounds& bounds, MetaState state,
                              const TrainConfig& train, const MetaConfig& meta, const AdaptOptions& options,
                              Rng& rng);

}  // namespace gemea
