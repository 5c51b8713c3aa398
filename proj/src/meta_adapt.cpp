#include "gemea/meta_adapt.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gemea {

namespace {

constexpr int kMaxBacktracks = 20;
constexpr double kPinvTolerance = 1e-10;

bool same_shape(const Matrix& a, const Matrix& b)
{
    return a.rows() == b.rows() && a.cols() == b.cols();
}

}  // namespace

void MetaConfig::validate() const
{
    if (gamma_mape < 0.0 || gamma_divergence < 0.0 || !(gamma_mape + gamma_divergence > 0.0))
        throw ConfigError("gamma_mape/gamma_divergence: must be >= 0 with a positive sum");
    if (!(inner_lr >= 0.0))
        throw ConfigError("inner_lr: must be >= 0");
    if (!(meta_lr >= 0.0))
        throw ConfigError("meta_lr: must be >= 0");
    if (inner_steps < 1)
        throw ConfigError("inner_steps: must be >= 1");
    if (meta_epochs < 1)
        throw ConfigError("meta_epochs: must be >= 1");
    if (prior_count < 0)
        throw ConfigError("prior_count: must be >= 0");
    if (!(mape_eps > 0.0))
        throw ConfigError("mape_eps: must be > 0");
}

ResidualSurrogate::ResidualSurrogate(RbfNet net, Vector a, double b) : net_(std::move(net)), a_(std::move(a)), b_(b)
{
    if (a_.size() != net_.dim())
        throw UsageError("ResidualSurrogate: slope dimension does not match the network");
}

Vector ResidualSurrogate::predict_batch(const Eigen::Ref<const Matrix>& X) const
{
    return (net_.predict_batch(X) + X * a_).array() + b_;
}

double mape(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& predicted, double eps)
{
    if (y.size() == 0 || y.size() != predicted.size())
        throw UsageError("mape: empty or mismatched inputs");
    const auto denom = y.array().abs().max(eps);
    return ((y - predicted).array().abs() / denom).mean();
}

double mape(const DataBatch& batch, const RbfNet& model, double eps)
{
    return mape(batch.y, model.predict_batch(batch.X), eps);
}

DiscrepancyTerms discrepancy_terms(const DataBatch& batch, const RbfNet& candidate, const RbfNet& temp, double eps)
{
    if (candidate.dim() != batch.dim() || temp.dim() != batch.dim())
        throw UsageError("discrepancy: model and batch dimensions differ");
    if (batch.size() == 0)
        throw UsageError("discrepancy: empty batch");
    const Vector pc = candidate.predict_batch(batch.X);
    const Vector pt = temp.predict_batch(batch.X);
    return {mape(batch.y, pc, eps), (pt - pc).squaredNorm() / batch.size()};
}

double discrepancy(const DataBatch& batch, const RbfNet& candidate, const RbfNet& temp, const MetaConfig& cfg)
{
    const auto t = discrepancy_terms(batch, candidate, temp, cfg.mape_eps);
    return cfg.gamma_mape * t.mape + cfg.gamma_divergence * t.divergence;
}

RbfNet train_temp(const DataBatch& batch, const Bounds& bounds, const TrainConfig& cfg, Rng& rng)
{
    return train_rbfn(batch, bounds, cfg, rng);
}

MetaSelection select_meta_set(const Archive& archive, const DataBatch& batch, const RbfNet& temp,
                              const MetaConfig& cfg)
{
    const std::size_t n = archive.size();
    std::vector<DiscrepancyTerms> terms(n);
    for (std::size_t i = 0; i < n; ++i)
        terms[i] = discrepancy_terms(batch, archive[i].surrogate, temp, cfg.mape_eps);

    auto normalizer = [&](auto field) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& t : terms) {
            lo = std::min(lo, t.*field);
            hi = std::max(hi, t.*field);
        }
        return [lo, hi, field](const DiscrepancyTerms& t) { return hi > lo ? (t.*field - lo) / (hi - lo) : 0.0; };
    };
    const auto norm_mape = normalizer(&DiscrepancyTerms::mape);
    const auto norm_div = normalizer(&DiscrepancyTerms::divergence);

    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i) {
        score[i] = cfg.normalize_discrepancy
                       ? cfg.gamma_mape * norm_mape(terms[i]) + cfg.gamma_divergence * norm_div(terms[i])
                       : cfg.gamma_mape * terms[i].mape + cfg.gamma_divergence * terms[i].divergence;
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (score[a] != score[b])
            return score[a] < score[b];
        return archive[a].env_id > archive[b].env_id;
    });
    order.resize(std::min(n, static_cast<std::size_t>(cfg.prior_count)));

    MetaSelection sel;
    sel.indices = order;
    for (auto i : order)
        sel.scores.push_back(score[i]);
    return sel;
}

RbfNet inner_then_solve(const Matrix& theta_start, const DataBatch& batch, const Bounds& bounds,
                        const TrainConfig& train, const MetaConfig& meta)
{
    if (batch.size() < 2)
        throw UsageError("inner_then_solve: batch needs at least 2 samples");
    if (theta_start.cols() != batch.dim())
        throw UsageError("inner_then_solve: center dimension does not match the batch");
    const double single_width = 0.5 * bounds.diagonal();

    const RbfNet start = solve_for_centers(theta_start, batch, train, single_width);
    const Vector& widths = start.widths();
    const Vector& weights = start.weights();
    const double bias = start.bias();

    Matrix theta = theta_start;
    double loss = mse_loss(start, batch);
    for (int step = 0; step < meta.inner_steps && meta.inner_lr > 0.0; ++step) {
        const Matrix grad = grad_theta(RbfNet(theta, widths, weights, bias), batch);
        if (grad.squaredNorm() == 0.0)
            break;
        // shrink the step until the frozen-basis loss does not increase
        double lr = meta.inner_lr;
        bool accepted = false;
        for (int k = 0; k <= kMaxBacktracks && !accepted; ++k, lr *= 0.5) {
            Matrix candidate = theta - lr * grad;
            const double cand_loss = mse_loss(RbfNet(candidate, widths, weights, bias), batch);
            if (cand_loss <= loss) {
                theta = std::move(candidate);
                loss = cand_loss;
                accepted = true;
            }
        }
        if (!accepted)
            break;
    }
    return solve_for_centers(std::move(theta), batch, train, single_width);
}

MetaState meta_update(MetaState state, const std::vector<const ArchiveEntry*>& meta_set, const Bounds& bounds,
                      const TrainConfig& train, const MetaConfig& meta)
{
    if (meta_set.empty() || !state.initialized())
        return state;
    for (int epoch = 0; epoch < meta.meta_epochs; ++epoch) {
        Matrix total = Matrix::Zero(state.theta_meta.rows(), state.theta_meta.cols());
        for (const ArchiveEntry* e : meta_set) {
            const RbfNet adapted = inner_then_solve(state.theta_meta, e->batch, bounds, train, meta);
            total += grad_theta(adapted, e->batch);
        }
        state.theta_meta -= meta.meta_lr * total;
    }
    state.provenance.clear();
    for (const ArchiveEntry* e : meta_set)
        state.provenance.push_back(e->env_id);
    return state;
}

LinearResidual fit_residual(const RbfNet& net, const DataBatch& batch)
{
    if (batch.size() < 1)
        throw UsageError("fit_residual: empty batch");
    const Vector e = batch.y - net.predict_batch(batch.X);
    Matrix design(batch.size(), batch.dim() + 1);
    design.leftCols(batch.dim()) = batch.X;
    design.col(batch.dim()).setOnes();

    Eigen::JacobiSVD<Matrix> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(kPinvTolerance);
    const Vector coef = svd.solve(e);
    return {coef.head(batch.dim()), coef[batch.dim()]};
}

std::string to_string(WarmStart w)
{
    switch (w) {
    case WarmStart::cold: return "cold";
    case WarmStart::archive: return "archive";
    case WarmStart::meta_state: return "meta_state";
    }
    return "unknown";
}

AdaptResult adapt_environment(const Archive& archive, const DataBatch& batch, const Bounds& bounds, MetaState state,
                              const TrainConfig& train, const MetaConfig& meta, const AdaptOptions& options,
                              Rng& rng)
{
    AdaptResult out;
    RbfNet temp = train_temp(batch, bounds, train, rng);
    RbfNet net = temp;

    if (options.select_priors || options.meta_learning)
        out.meta_set = select_meta_set(archive, batch, temp, meta);

    if (options.meta_learning) {
        Matrix theta_start;
        if (!out.meta_set.indices.empty() &&
            same_shape(archive[out.meta_set.indices.front()].surrogate.centers(), temp.centers())) {
            theta_start = archive[out.meta_set.indices.front()].surrogate.centers();
            out.warm_start = WarmStart::archive;
        } else if (state.initialized() && same_shape(state.theta_meta, temp.centers())) {
            theta_start = state.theta_meta;
            out.warm_start = WarmStart::meta_state;
        }

        if (out.warm_start != WarmStart::cold)
            net = inner_then_solve(theta_start, batch, bounds, train, meta);

        if (!state.initialized() || !same_shape(state.theta_meta, temp.centers()))
            state.theta_meta = out.warm_start == WarmStart::cold ? temp.centers() : theta_start;

        std::vector<const ArchiveEntry*> chosen;
        for (auto i : out.meta_set.indices)
            chosen.push_back(&archive[i]);
        state = meta_update(std::move(state), chosen, bounds, train, meta);
    }

    LinearResidual lin{Vector::Zero(batch.dim()), 0.0};
    if (options.residual)
        lin = fit_residual(net, batch);
    out.surrogate = ResidualSurrogate(std::move(net), std::move(lin.a), lin.b);
    out.state = std::move(state);
    return out;
}

}  // namespace gemea
