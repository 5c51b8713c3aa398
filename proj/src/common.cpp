#include "gemea/common.hpp"

#include <vector>

namespace gemea {

Bounds::Bounds(Vector lower, Vector upper) : lo(std::move(lower)), hi(std::move(upper))
{
    if (lo.size() != hi.size())
        throw ConfigError("bounds: lo and hi have different dimensions");
    if (lo.size() < 1)
        throw ConfigError("bounds: dimension must be >= 1");
    for (Eigen::Index j = 0; j < lo.size(); ++j) {
        if (!(lo[j] < hi[j]))
            throw ConfigError("bounds: lo < hi violated in dimension " + std::to_string(j));
    }
}

Bounds Bounds::uniform(int dim, double lo, double hi)
{
    if (dim < 1)
        throw ConfigError("bounds: dimension must be >= 1");
    return Bounds(Vector::Constant(dim, lo), Vector::Constant(dim, hi));
}

bool Bounds::contains(const Eigen::Ref<const Vector>& x) const
{
    return x.size() == lo.size() && (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
}

Vector Bounds::clamp(const Eigen::Ref<const Vector>& x) const
{
    return x.cwiseMax(lo).cwiseMin(hi);
}

Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags)
{
    std::vector<std::uint32_t> words;
    words.reserve(2 * (tags.size() + 1));
    auto push = [&](std::uint64_t v) {
        words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
        words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(seed);
    for (auto t : tags)
        push(t);
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

}  // namespace gemea
