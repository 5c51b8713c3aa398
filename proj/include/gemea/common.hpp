#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>

namespace gemea {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Invalid parameters or unsupported options. The message names the offending field.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operation called with arguments that violate its preconditions (empty input, shape mismatch).
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SingularityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Axis-aligned box [lo, hi] in R^d.
struct Bounds {
    Vector lo;
    Vector hi;

    Bounds() = default;
    Bounds(Vector lower, Vector upper);

    static Bounds uniform(int dim, double lo, double hi);

    int dim() const { return static_cast<int>(lo.size()); }
    bool contains(const Eigen::Ref<const Vector>& x) const;
    Vector clamp(const Eigen::Ref<const Vector>& x) const;
    double diagonal() const { return (hi - lo).norm(); }
};

/// One offline sample set D_t = {(x_j, y_j)}. Rows of X are decision vectors.
struct DataBatch {
    int env_id = 0;
    Matrix X;
    Vector y;

    int size() const { return static_cast<int>(X.rows()); }
    int dim() const { return static_cast<int>(X.cols()); }
    bool operator==(const DataBatch& other) const = default;
};

/// Deterministic child generator for (seed, tags...). Independent purposes get
/// independent streams, so adding a consumer never perturbs another one.
Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

}  // namespace gemea
