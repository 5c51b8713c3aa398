#pragma once

#include "gemea/common.hpp"
#include "gemea/rbfn.hpp"

#include <random>

namespace gemea::testing {

inline Matrix random_matrix(int rows, int cols, Rng& rng, double lo = -1.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            m(i, j) = u(rng);
    return m;
}

inline Vector random_vector(int n, Rng& rng, double lo = -1.0, double hi = 1.0)
{
    return random_matrix(n, 1, rng, lo, hi).col(0);
}

inline RbfNet random_net(int kc, int d, Rng& rng)
{
    std::uniform_real_distribution<double> width(0.5, 1.5);
    Vector widths(kc);
    for (int i = 0; i < kc; ++i)
        widths[i] = width(rng);
    Matrix centers = random_matrix(kc, d, rng);
    Vector weights = random_vector(kc, rng, -2.0, 2.0);
    return RbfNet(std::move(centers), std::move(widths), std::move(weights));
}

inline DataBatch random_batch(int n, int d, Rng& rng, int env_id = 0)
{
    DataBatch b;
    b.env_id = env_id;
    b.X = random_matrix(n, d, rng);
    b.y = random_vector(n, rng, -1.0, 1.0);
    return b;
}

/// Scalar reference for a Gaussian basis.
inline double gauss(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& c, double s)
{
    double r2 = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k)
        r2 += (x[k] - c[k]) * (x[k] - c[k]);
    return std::exp(-r2 / (2.0 * s * s));
}

}  // namespace gemea::testing
