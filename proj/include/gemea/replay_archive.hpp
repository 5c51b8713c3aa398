#pragma once

#include "gemea/common.hpp"
#include "gemea/rbfn.hpp"

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace gemea {

/// Distilled knowledge of one past environment.
struct ArchiveEntry {
    int env_id = 0;
    RbfNet surrogate;
    Vector elite_mean;
    Vector elite_var;  // diagonal covariance
    Matrix elite_cov;  // full covariance, empty unless requested
    Vector best_solution;
    double best_value = 0.0;  // surrogate estimate
    DataBatch batch;

    bool has_full_covariance() const { return elite_cov.size() > 0; }
    bool operator==(const ArchiveEntry& other) const;
};

inline constexpr double kVarianceFloor = 1e-12;

/// Bounded archive. Over capacity, the two entries with the nearest elite
/// means are found and the older one is evicted.
class Archive {
public:
    explicit Archive(std::size_t capacity = 50);

    void update(ArchiveEntry entry);

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<ArchiveEntry>& entries() const { return entries_; }
    const ArchiveEntry& operator[](std::size_t i) const { return entries_[i]; }

    bool operator==(const Archive& other) const = default;

private:
    std::size_t capacity_;
    std::vector<ArchiveEntry> entries_;
};

/// Elites are the top ceil(elite_fraction * pop) rows of `population` by `fitness`
/// (ties by lower row index).
ArchiveEntry summarize_environment(const Eigen::Ref<const Matrix>& population, const Eigen::Ref<const Vector>& fitness,
                                   const RbfNet& surrogate, const DataBatch& batch, double elite_fraction = 0.1,
                                   bool full_covariance = false);

/// Gaussian replay around the entry's elite summary, clamped to bounds.
/// Row 0 is the entry's best solution.
Matrix generate_anchor_population(const ArchiveEntry& entry, int pop_size, const Bounds& bounds, Rng& rng);

inline double snapshot_eval(const ArchiveEntry& entry, const Eigen::Ref<const Vector>& x)
{
    return entry.surrogate.predict(x);
}

inline constexpr char kArchiveMagic[8] = {'G', 'E', 'M', 'A', 'R', 'C', '0', '1'};

void write_archive(std::ostream& out, const Archive& archive);
Archive read_archive(std::istream& in);
void save_archive(const std::string& path, const Archive& archive);
Archive load_archive(const std::string& path);

}  // namespace gemea
