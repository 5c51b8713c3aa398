#include "gemea/rbfn.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <vector>

namespace gemea {

RbfNet::RbfNet(Matrix centers, Vector widths, Vector weights, double bias)
    : centers_(std::move(centers)), widths_(std::move(widths)), weights_(std::move(weights)), bias_(bias)
{
    if (centers_.rows() < 1 || centers_.cols() < 1)
        throw UsageError("RbfNet: need at least one center of dimension >= 1");
    if (widths_.size() != centers_.rows() || weights_.size() != centers_.rows())
        throw UsageError("RbfNet: widths/weights length must equal the center count");
    if ((widths_.array() <= 0.0).any())
        throw UsageError("RbfNet: widths must be positive");
    if (!centers_.allFinite() || !widths_.allFinite() || !weights_.allFinite() || !std::isfinite(bias_))
        throw UsageError("RbfNet: non-finite parameters");
}

double RbfNet::predict(const Eigen::Ref<const Vector>& x) const
{
    double out = bias_;
    for (Eigen::Index i = 0; i < centers_.rows(); ++i) {
        const double r2 = (centers_.row(i).transpose() - x).squaredNorm();
        out += weights_[i] * std::exp(-r2 / (2.0 * widths_[i] * widths_[i]));
    }
    return out;
}

Vector RbfNet::predict_batch(const Eigen::Ref<const Matrix>& X) const
{
    return (activation_matrix(centers_, widths_, X) * weights_).array() + bias_;
}

bool RbfNet::operator==(const RbfNet& other) const
{
    return centers_.rows() == other.centers_.rows() && centers_.cols() == other.centers_.cols() &&
           centers_ == other.centers_ && widths_ == other.widths_ && weights_ == other.weights_ &&
           bias_ == other.bias_;
}

int default_center_count(int n)
{
    return std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(n)))));
}

Matrix init_centers(const Eigen::Ref<const Matrix>& X, int center_count, int kmeans_iters, Rng& rng)
{
    const auto n = static_cast<int>(X.rows());
    if (center_count < 1)
        throw ConfigError("centers: center count must be >= 1");
    if (center_count > n)
        throw ConfigError("centers: center count " + std::to_string(center_count) + " exceeds sample count " +
                          std::to_string(n));

    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);

    Matrix centers(center_count, X.cols());
    for (int k = 0; k < center_count; ++k)
        centers.row(k) = X.row(idx[static_cast<std::size_t>(k)]);

    std::vector<int> assign(static_cast<std::size_t>(n), -1);
    std::vector<double> dist(static_cast<std::size_t>(n));
    for (int iter = 0; iter < kmeans_iters; ++iter) {
        bool changed = false;
        for (int j = 0; j < n; ++j) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int k = 0; k < center_count; ++k) {
                const double dk = (X.row(j) - centers.row(k)).squaredNorm();
                if (dk < best_d) {
                    best_d = dk;
                    best = k;
                }
            }
            changed = changed || assign[static_cast<std::size_t>(j)] != best;
            assign[static_cast<std::size_t>(j)] = best;
            dist[static_cast<std::size_t>(j)] = best_d;
        }
        if (!changed && iter > 0)
            break;

        Matrix sums = Matrix::Zero(center_count, X.cols());
        std::vector<int> counts(static_cast<std::size_t>(center_count), 0);
        for (int j = 0; j < n; ++j) {
            sums.row(assign[static_cast<std::size_t>(j)]) += X.row(j);
            ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(j)])];
        }
        for (int k = 0; k < center_count; ++k) {
            if (counts[static_cast<std::size_t>(k)] > 0) {
                centers.row(k) = sums.row(k) / counts[static_cast<std::size_t>(k)];
                continue;
            }
            // empty cluster: take the point farthest from its center
            const auto far = static_cast<int>(std::distance(dist.begin(), std::max_element(dist.begin(), dist.end())));
            centers.row(k) = X.row(far);
            dist[static_cast<std::size_t>(far)] = 0.0;
        }
    }
    return centers;
}

Vector widths_knn(const Eigen::Ref<const Matrix>& centers, int k_width, double single_center_width)
{
    const auto kc = static_cast<int>(centers.rows());
    Vector widths(kc);
    if (kc == 1) {
        widths[0] = std::max(single_center_width, kWidthFloor);
        return widths;
    }
    const int k = std::clamp(k_width, 1, kc - 1);
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(kc - 1));
    for (int i = 0; i < kc; ++i) {
        d.clear();
        for (int j = 0; j < kc; ++j) {
            if (j != i)
                d.push_back((centers.row(i) - centers.row(j)).norm());
        }
        std::partial_sort(d.begin(), d.begin() + k, d.end());
        const double mean = std::accumulate(d.begin(), d.begin() + k, 0.0) / k;
        widths[i] = std::max(mean, kWidthFloor);
    }
    return widths;
}

Matrix activation_matrix(const Eigen::Ref<const Matrix>& centers, const Eigen::Ref<const Vector>& widths,
                         const Eigen::Ref<const Matrix>& X)
{
    if (centers.cols() != X.cols() || widths.size() != centers.rows())
        throw UsageError("activation_matrix: dimension mismatch");
    Matrix phi(X.rows(), centers.rows());
    for (Eigen::Index i = 0; i < centers.rows(); ++i) {
        const double inv = -1.0 / (2.0 * widths[i] * widths[i]);
        phi.col(i) = ((X.rowwise() - centers.row(i)).rowwise().squaredNorm() * inv).array().exp().matrix();
    }
    return phi;
}

Vector ridge_solve(const Eigen::Ref<const Matrix>& phi, const Eigen::Ref<const Vector>& y, double lambda)
{
    if (phi.rows() != y.size())
        throw UsageError("ridge_solve: Phi rows and y length differ");
    if (lambda < 0.0)
        throw ConfigError("ridge_lambda: must be >= 0");
    Matrix normal = phi.transpose() * phi;
    normal.diagonal().array() += lambda;
    Eigen::LLT<Matrix> llt(normal);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-15)
        throw SingularityError("ridge_solve: normal matrix is singular");
    return llt.solve(phi.transpose() * y);
}

double mse_loss(const RbfNet& net, const DataBatch& batch)
{
    if (batch.size() == 0)
        throw UsageError("mse_loss: empty batch");
    return (net.predict_batch(batch.X) - batch.y).squaredNorm() / batch.size();
}

Matrix grad_theta(const RbfNet& net, const DataBatch& batch)
{
    if (batch.size() == 0)
        throw UsageError("grad_theta: empty batch");
    const Matrix phi = activation_matrix(net.centers(), net.widths(), batch.X);
    const Vector residual = (phi * net.weights()).array() + net.bias() - batch.y.array();
    // coef(j, i) = r_j * Phi(j, i)
    const Matrix coef = phi.array().colwise() * residual.array();
    Matrix grad = coef.transpose() * batch.X;
    const Vector colsum = coef.colwise().sum().transpose();
    const double n = batch.size();
    for (int i = 0; i < net.center_count(); ++i) {
        const double s = net.widths()[i];
        const double scale = 2.0 * net.weights()[i] / (n * s * s);
        grad.row(i) = scale * (grad.row(i) - colsum[i] * net.centers().row(i));
    }
    return grad;
}

RbfNet solve_for_centers(Matrix centers, const DataBatch& batch, const TrainConfig& cfg, double single_center_width)
{
    Vector widths = widths_knn(centers, cfg.k_width, single_center_width);
    const auto kc = centers.rows();
    Matrix design(batch.size(), kc + 1);
    design.leftCols(kc) = activation_matrix(centers, widths, batch.X);
    design.col(kc).setOnes();
    const Vector coef = ridge_solve(design, batch.y, cfg.ridge_lambda);
    return RbfNet(std::move(centers), std::move(widths), coef.head(kc), coef[kc]);
}

RbfNet train_rbfn(const DataBatch& batch, const Bounds& bounds, const TrainConfig& cfg, Rng& rng)
{
    const int kc = cfg.center_count > 0 ? cfg.center_count : default_center_count(batch.size());
    Matrix centers = init_centers(batch.X, kc, cfg.kmeans_iters, rng);
    return solve_for_centers(std::move(centers), batch, cfg, 0.5 * bounds.diagonal());
}

namespace {

template <typename T>
void put(std::ostream& out, const T& v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in)
{
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
        throw IoError("rbfn snapshot: truncated record");
    return v;
}

void put_doubles(std::ostream& out, const double* p, std::size_t n)
{
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void get_doubles(std::istream& in, double* p, std::size_t n)
{
    if (!in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double))))
        throw IoError("rbfn snapshot: truncated record");
}

}  // namespace

void write_rbfn(std::ostream& out, const RbfNet& net)
{
    out.write(kRbfMagic, sizeof(kRbfMagic));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(net.dim()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(net.center_count()));
    // row-major centers
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> c = net.centers();
    put_doubles(out, c.data(), static_cast<std::size_t>(c.size()));
    put_doubles(out, net.widths().data(), static_cast<std::size_t>(net.widths().size()));
    put_doubles(out, net.weights().data(), static_cast<std::size_t>(net.weights().size()));
    put<double>(out, net.bias());
}

RbfNet read_rbfn(std::istream& in)
{
    char magic[sizeof(kRbfMagic)];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kRbfMagic, sizeof(magic)) != 0)
        throw IoError("rbfn snapshot: bad magic header");
    const auto d = get<std::uint32_t>(in);
    const auto kc = get<std::uint32_t>(in);
    if (d == 0 || kc == 0 || d > 1'000'000 || kc > 1'000'000)
        throw IoError("rbfn snapshot: implausible shape");
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> c(kc, d);
    Vector widths(kc);
    Vector weights(kc);
    get_doubles(in, c.data(), static_cast<std::size_t>(c.size()));
    get_doubles(in, widths.data(), kc);
    get_doubles(in, weights.data(), kc);
    const auto bias = get<double>(in);
    return RbfNet(Matrix(c), std::move(widths), std::move(weights), bias);
}

}  // namespace gemea
