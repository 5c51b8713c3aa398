#include "gemea/replay_archive.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

namespace gemea {

namespace {

bool same_matrix(const Matrix& a, const Matrix& b)
{
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

bool same_vector(const Vector& a, const Vector& b)
{
    return a.size() == b.size() && a == b;
}

}  // namespace

bool ArchiveEntry::operator==(const ArchiveEntry& other) const
{
    return env_id == other.env_id && surrogate == other.surrogate && same_vector(elite_mean, other.elite_mean) &&
           same_vector(elite_var, other.elite_var) && same_matrix(elite_cov, other.elite_cov) &&
           same_vector(best_solution, other.best_solution) && best_value == other.best_value &&
           batch.env_id == other.batch.env_id && same_matrix(batch.X, other.batch.X) &&
           same_vector(batch.y, other.batch.y);
}

Archive::Archive(std::size_t capacity) : capacity_(capacity)
{
    if (capacity_ < 1)
        throw ConfigError("archive_capacity: must be >= 1");
}

void Archive::update(ArchiveEntry entry)
{
    entries_.push_back(std::move(entry));
    while (entries_.size() > capacity_) {
        std::size_t bi = 0;
        std::size_t bj = 1;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            for (std::size_t j = i + 1; j < entries_.size(); ++j) {
                const double d = (entries_[i].elite_mean - entries_[j].elite_mean).norm();
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        // older member of the pair; insertion order breaks env_id ties
        const std::size_t victim = entries_[bj].env_id < entries_[bi].env_id ? bj : bi;
        entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(victim));
    }
}

ArchiveEntry summarize_environment(const Eigen::Ref<const Matrix>& population, const Eigen::Ref<const Vector>& fitness,
                                   const RbfNet& surrogate, const DataBatch& batch, double elite_fraction,
                                   bool full_covariance)
{
    const auto pop = static_cast<int>(population.rows());
    if (pop < 1 || fitness.size() != pop)
        throw UsageError("summarize_environment: empty population or fitness size mismatch");
    if (!(elite_fraction > 0.0 && elite_fraction <= 1.0))
        throw ConfigError("elite_fraction: must be in (0, 1]");

    std::vector<int> order(static_cast<std::size_t>(pop));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fitness[a] < fitness[b]; });
    const int n_elite = std::clamp(static_cast<int>(std::ceil(elite_fraction * pop)), 1, pop);

    Matrix elites(n_elite, population.cols());
    for (int k = 0; k < n_elite; ++k)
        elites.row(k) = population.row(order[static_cast<std::size_t>(k)]);

    ArchiveEntry e;
    e.env_id = batch.env_id;
    e.surrogate = surrogate;
    e.elite_mean = elites.colwise().mean().transpose();
    const Matrix centered = elites.rowwise() - e.elite_mean.transpose();
    e.elite_var = (centered.array().square().colwise().sum() / n_elite).transpose().max(kVarianceFloor).matrix();
    if (full_covariance) {
        e.elite_cov = centered.transpose() * centered / n_elite;
        e.elite_cov.diagonal() = e.elite_var;
    }
    e.best_solution = population.row(order.front()).transpose();
    e.best_value = fitness[order.front()];
    e.batch = batch;
    return e;
}

Matrix generate_anchor_population(const ArchiveEntry& entry, int pop_size, const Bounds& bounds, Rng& rng)
{
    if (pop_size < 4)
        throw ConfigError("anchor_pop_size: must be >= 4");
    const int d = bounds.dim();
    if (entry.elite_mean.size() != d)
        throw UsageError("generate_anchor_population: entry dimension does not match bounds");

    Matrix factor;
    if (entry.has_full_covariance()) {
        Matrix cov = entry.elite_cov;
        cov.diagonal().array() += kVarianceFloor;
        Eigen::LLT<Matrix> llt(cov);
        if (llt.info() == Eigen::Success)
            factor = llt.matrixL();
    }
    const Vector sd = entry.elite_var.cwiseMax(0.0).cwiseSqrt();

    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix pop(pop_size, d);
    Vector z(d);
    for (int i = 0; i < pop_size; ++i) {
        for (int j = 0; j < d; ++j)
            z[j] = normal(rng);
        const Vector x = factor.size() > 0 ? Vector(entry.elite_mean + factor * z)
                                           : Vector(entry.elite_mean + sd.cwiseProduct(z));
        pop.row(i) = bounds.clamp(x).transpose();
    }
    pop.row(0) = bounds.clamp(entry.best_solution).transpose();
    return pop;
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
        throw IoError("archive: truncated record");
    return v;
}

// Column-major dense block with its shape.
void put_matrix(std::ostream& out, const Matrix& m)
{
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Matrix get_matrix(std::istream& in)
{
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    if (rows > (1u << 24) || cols > (1u << 24))
        throw IoError("archive: implausible matrix shape");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double))))
        throw IoError("archive: truncated record");
    return m;
}

void put_vector(std::ostream& out, const Vector& v)
{
    put_matrix(out, Matrix(v));
}

Vector get_vector(std::istream& in)
{
    Matrix m = get_matrix(in);
    if (m.cols() != 1 && m.size() != 0)
        throw IoError("archive: expected a column vector");
    return m.size() == 0 ? Vector() : Vector(m.col(0));
}

}  // namespace

void write_archive(std::ostream& out, const Archive& archive)
{
    out.write(kArchiveMagic, sizeof(kArchiveMagic));
    put<std::uint64_t>(out, archive.capacity());
    put<std::uint64_t>(out, archive.size());
    for (const auto& e : archive.entries()) {
        put<std::int64_t>(out, e.env_id);
        write_rbfn(out, e.surrogate);
        put_vector(out, e.elite_mean);
        put_vector(out, e.elite_var);
        put_matrix(out, e.elite_cov);
        put_vector(out, e.best_solution);
        put<double>(out, e.best_value);
        put<std::int64_t>(out, e.batch.env_id);
        put_matrix(out, e.batch.X);
        put_vector(out, e.batch.y);
    }
}

Archive read_archive(std::istream& in)
{
    char magic[sizeof(kArchiveMagic)];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kArchiveMagic, sizeof(magic)) != 0)
        throw IoError("archive: bad magic header");
    const auto capacity = get<std::uint64_t>(in);
    const auto count = get<std::uint64_t>(in);
    if (count > capacity)
        throw IoError("archive: entry count exceeds capacity");
    Archive archive(static_cast<std::size_t>(capacity));
    for (std::uint64_t k = 0; k < count; ++k) {
        ArchiveEntry e;
        e.env_id = static_cast<int>(get<std::int64_t>(in));
        e.surrogate = read_rbfn(in);
        e.elite_mean = get_vector(in);
        e.elite_var = get_vector(in);
        e.elite_cov = get_matrix(in);
        e.best_solution = get_vector(in);
        e.best_value = get<double>(in);
        e.batch.env_id = static_cast<int>(get<std::int64_t>(in));
        e.batch.X = get_matrix(in);
        e.batch.y = get_vector(in);
        archive.update(std::move(e));
    }
    return archive;
}

void save_archive(const std::string& path, const Archive& archive)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open '" + path + "' for writing");
    write_archive(out, archive);
    if (!out)
        throw IoError("write failed for '" + path + "'");
}

Archive load_archive(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path + "'");
    return read_archive(in);
}

}  // namespace gemea
