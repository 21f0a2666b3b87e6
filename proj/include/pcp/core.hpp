#pragma once

#include <pcp/error.hpp>
#include <pcp/random.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pcp {

using vector_t = std::vector<double>;

inline bool all_finite(std::span<const double> values)
{
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// norms

enum class norm_kind
{
    l2,
    linf,
    l1,
};

inline std::string_view to_string(norm_kind norm)
{
    switch (norm)
    {
    case norm_kind::l2:     return "l2";
    case norm_kind::linf:   return "linf";
    case norm_kind::l1:     return "l1";
    }
    return "l2";
}

inline norm_kind parse_norm(std::string_view name)
{
    if (name == "l2" || name == "L2")
    {
        return norm_kind::l2;
    }
    if (name == "linf" || name == "Linf" || name == "inf")
    {
        return norm_kind::linf;
    }
    if (name == "l1" || name == "L1")
    {
        return norm_kind::l1;
    }
    raise(error_kind::config, "unknown norm '" + std::string{name} + "'");
}

inline double distance(std::span<const double> a, std::span<const double> b, norm_kind norm)
{
    require(a.size() == b.size(), error_kind::dimension,
            "distance between vectors of length " + std::to_string(a.size()) + " and " + std::to_string(b.size()));

    double acc = 0.0;
    switch (norm)
    {
    case norm_kind::l2:
        for (std::size_t i = 0; i < a.size(); ++ i)
        {
            const auto delta = a[i] - b[i];
            acc += delta * delta;
        }
        return std::sqrt(acc);
    case norm_kind::linf:
        for (std::size_t i = 0; i < a.size(); ++ i)
        {
            acc = std::max(acc, std::fabs(a[i] - b[i]));
        }
        return acc;
    case norm_kind::l1:
        for (std::size_t i = 0; i < a.size(); ++ i)
        {
            acc += std::fabs(a[i] - b[i]);
        }
        return acc;
    }
    return acc;
}

// ---------------------------------------------------------------------------
// radius: a nonnegative real or the "entire space" sentinel

class radius_t
{
public:
    radius_t() = default;

    static radius_t finite(double value)
    {
        require(std::isfinite(value) && value >= 0.0, error_kind::precondition,
                "radius must be finite and nonnegative");
        radius_t r;
        r.m_value = value;
        return r;
    }

    static radius_t infinite()
    {
        radius_t r;
        r.m_infinite = true;
        return r;
    }

    bool is_infinite() const noexcept { return m_infinite; }

    /// Finite value; +infinity for the sentinel (for comparisons only, never serialized).
    double value() const noexcept { return m_infinite ? std::numeric_limits<double>::infinity() : m_value; }

    friend bool operator==(const radius_t&, const radius_t&) = default;

private:
    double m_value{0.0};
    bool m_infinite{false};
};

// ---------------------------------------------------------------------------
// data

class labeled_point
{
public:
    labeled_point(vector_t x, vector_t y)
        : m_x(std::move(x))
        , m_y(std::move(y))
    {
        require(!m_x.empty() && !m_y.empty(), error_kind::data, "point needs p >= 1 covariates and d >= 1 targets");
        require(all_finite(m_x) && all_finite(m_y), error_kind::data, "point has non-finite entries");
    }

    const vector_t& x() const noexcept { return m_x; }
    const vector_t& y() const noexcept { return m_y; }

private:
    vector_t m_x;
    vector_t m_y;
};

using index_list = std::vector<std::size_t>;

struct split_indices
{
    index_list train;
    index_list val;
    index_list cal;
    index_list test;
};

struct split_fractions
{
    double train{0.5};
    double val{0.1};
    double cal{0.2};
    double test{0.2};
};

struct split_counts
{
    std::size_t train{0};
    std::size_t val{0};
    std::size_t cal{0};
    std::size_t test{0};

    std::size_t total() const { return train + val + cal + test; }
};

inline split_counts to_counts(std::size_t n, const split_fractions& f)
{
    const auto ok = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
    require(ok(f.train) && ok(f.val) && ok(f.cal) && ok(f.test), error_kind::config, "split fractions must lie in [0,1]");
    require(f.train + f.val + f.cal + f.test <= 1.0 + 1e-12, error_kind::config, "split fractions sum above 1");

    const auto count = [n](double frac) { return static_cast<std::size_t>(std::floor(frac * static_cast<double>(n) + 1e-9)); };
    return {count(f.train), count(f.val), count(f.cal), count(f.test)};
}

/// Pure function of (n, seed, counts): a seeded permutation cut into four folds.
inline split_indices make_split(std::size_t n, std::uint64_t seed, const split_counts& counts)
{
    require(counts.total() <= n, error_kind::config,
            "split needs " + std::to_string(counts.total()) + " points, dataset has " + std::to_string(n));

    index_list order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = make_rng(seed, stream::split);
    // Fisher-Yates with an explicit draw so the permutation does not depend on std::shuffle internals.
    for (std::size_t i = n; i > 1; -- i)
    {
        const auto j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }

    split_indices split;
    auto it = order.begin();
    const auto take = [&it](std::size_t count)
    {
        index_list out(it, it + static_cast<std::ptrdiff_t>(count));
        it += static_cast<std::ptrdiff_t>(count);
        return out;
    };
    split.train = take(counts.train);
    split.val = take(counts.val);
    split.cal = take(counts.cal);
    split.test = take(counts.test);
    return split;
}

inline split_indices make_split(std::size_t n, std::uint64_t seed, const split_fractions& fractions)
{
    return make_split(n, seed, to_counts(n, fractions));
}

class labeled_dataset
{
public:
    labeled_dataset() = default;

    explicit labeled_dataset(std::vector<labeled_point> points, split_indices splits = {}, std::uint64_t seed = 0)
        : m_points(std::move(points))
        , m_splits(std::move(splits))
        , m_seed(seed)
    {
        require(!m_points.empty(), error_kind::data, "empty dataset");
        m_p = m_points.front().x().size();
        m_d = m_points.front().y().size();
        for (const auto& point : m_points)
        {
            require(point.x().size() == m_p && point.y().size() == m_d, error_kind::dimension,
                    "all points of a dataset must share (p, d)");
        }

        std::vector<bool> used(m_points.size(), false);
        for (const auto* fold : {&m_splits.train, &m_splits.val, &m_splits.cal, &m_splits.test})
        {
            for (const auto index : *fold)
            {
                require(index < m_points.size(), error_kind::precondition, "split index out of range");
                require(!used[index], error_kind::precondition, "split folds overlap");
                used[index] = true;
            }
        }
    }

    labeled_dataset with_split(split_indices splits, std::uint64_t seed) const
    {
        return labeled_dataset{m_points, std::move(splits), seed};
    }

    std::size_t size() const noexcept { return m_points.size(); }
    std::size_t covariate_dim() const noexcept { return m_p; }
    std::size_t target_dim() const noexcept { return m_d; }
    std::uint64_t seed() const noexcept { return m_seed; }

    const std::vector<labeled_point>& points() const noexcept { return m_points; }
    const labeled_point& operator[](std::size_t i) const { return m_points.at(i); }
    const split_indices& splits() const noexcept { return m_splits; }

    /// Points of one fold as a standalone list.
    std::vector<labeled_point> slice(const index_list& indices) const
    {
        std::vector<labeled_point> out;
        out.reserve(indices.size());
        for (const auto index : indices)
        {
            out.push_back(m_points.at(index));
        }
        return out;
    }

private:
    std::vector<labeled_point> m_points;
    split_indices m_splits;
    std::uint64_t m_seed{0};
    std::size_t m_p{0};
    std::size_t m_d{0};
};

// ---------------------------------------------------------------------------
// samples and predictive sets

class sample_batch
{
public:
    sample_batch(std::vector<vector_t> samples, std::optional<std::vector<double>> densities = std::nullopt)
        : m_samples(std::move(samples))
        , m_densities(std::move(densities))
    {
        require(!m_samples.empty(), error_kind::precondition, "sample batch needs K >= 1 samples");
        const auto d = m_samples.front().size();
        for (const auto& s : m_samples)
        {
            require(s.size() == d, error_kind::dimension, "samples of one batch must share a dimension");
        }
        if (m_densities)
        {
            require(m_densities->size() == m_samples.size(), error_kind::precondition, "one density per sample");
            require(std::all_of(m_densities->begin(), m_densities->end(), [](double q) { return q >= 0.0; }),
                    error_kind::precondition, "densities must be nonnegative");
        }
    }

    std::size_t size() const noexcept { return m_samples.size(); }
    std::size_t dim() const noexcept { return m_samples.front().size(); }
    const std::vector<vector_t>& samples() const noexcept { return m_samples; }
    const vector_t& operator[](std::size_t k) const { return m_samples.at(k); }
    bool has_densities() const noexcept { return m_densities.has_value(); }
    const std::vector<double>& densities() const
    {
        require(m_densities.has_value(), error_kind::capability, "batch carries no densities");
        return *m_densities;
    }

private:
    std::vector<vector_t> m_samples;
    std::optional<std::vector<double>> m_densities;
};

/// Union of closed balls {y : ||y - c_k|| <= r}.
class ball_union
{
public:
    ball_union(std::vector<vector_t> centers, radius_t radius, norm_kind norm)
        : m_centers(std::move(centers))
        , m_radius(radius)
        , m_norm(norm)
    {
        require(!m_centers.empty(), error_kind::precondition, "ball union needs at least one center");
        const auto d = m_centers.front().size();
        require(d >= 1, error_kind::dimension, "centers must have d >= 1");
        for (const auto& c : m_centers)
        {
            require(c.size() == d, error_kind::dimension, "centers must share a dimension");
        }
    }

    const std::vector<vector_t>& centers() const noexcept { return m_centers; }
    radius_t radius() const noexcept { return m_radius; }
    norm_kind norm() const noexcept { return m_norm; }
    std::size_t dim() const noexcept { return m_centers.front().size(); }

private:
    std::vector<vector_t> m_centers;
    radius_t m_radius;
    norm_kind m_norm;
};

// ---------------------------------------------------------------------------
// configuration

enum class quantile_mode
{
    inflated,   ///< Q_{1-a}(E_{1:n} u {inf})
    plain,      ///< Q_{1-a}(E_{1:n})
    corrected,  ///< Q_{(1-a)(1+1/n)}(E_{1:n}), needs a >= 1/(n+1)
};

inline std::string_view to_string(quantile_mode mode)
{
    switch (mode)
    {
    case quantile_mode::inflated:   return "inflated";
    case quantile_mode::plain:      return "plain";
    case quantile_mode::corrected:  return "corrected";
    }
    return "inflated";
}

inline quantile_mode parse_quantile_mode(std::string_view name)
{
    if (name == "inflated")
    {
        return quantile_mode::inflated;
    }
    if (name == "plain")
    {
        return quantile_mode::plain;
    }
    if (name == "corrected")
    {
        return quantile_mode::corrected;
    }
    raise(error_kind::config, "unknown quantile mode '" + std::string{name} + "'");
}

struct pcp_config
{
    double alpha{0.1};
    std::size_t k_samples{40};
    /// HD-PCP filter fractions; {0} is plain PCP.
    std::vector<double> beta_grid{0.0};
    norm_kind norm{norm_kind::l2};
    /// nullopt selects corrected when alpha >= 1/(n+1), inflated otherwise.
    std::optional<quantile_mode> mode{};
    std::uint64_t seed{0};

    void validate() const
    {
        require(alpha > 0.0 && alpha < 1.0, error_kind::config, "alpha must lie in (0,1)");
        require(k_samples >= 1, error_kind::config, "K must be positive");
        require(!beta_grid.empty(), error_kind::config, "beta grid must be nonempty");
        for (std::size_t i = 0; i < beta_grid.size(); ++ i)
        {
            require(beta_grid[i] >= 0.0 && beta_grid[i] < 1.0, error_kind::config, "beta must lie in [0,1)");
            require(i == 0 || beta_grid[i] > beta_grid[i - 1], error_kind::config, "beta grid must be strictly increasing");
        }
    }
};

struct coverage_report
{
    double marginal_coverage{0.0};
    double conditional_coverage{0.0};
    double mean_set_size{0.0};
    double set_size_stderr{0.0};
    std::size_t n_test{0};
    std::size_t n_infinite{0};
};

} // namespace pcp
