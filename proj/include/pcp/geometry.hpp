#pragma once

#include <pcp/core.hpp>

#include <utility>

namespace pcp {

struct interval
{
    double lower{0.0};
    double upper{0.0};

    double length() const { return upper - lower; }
};

/// Axis-aligned box used as the integration domain for grid and Monte-Carlo measures.
struct box
{
    vector_t lower;
    vector_t upper;

    std::size_t dim() const { return lower.size(); }

    double volume() const
    {
        double v = 1.0;
        for (std::size_t i = 0; i < lower.size(); ++ i)
        {
            v *= upper[i] - lower[i];
        }
        return v;
    }
};

/// Centers sorted along the first coordinate. Every supported norm dominates
/// |a_0 - b_0|, so only centers within r along that axis can contain a point.
class ball_index
{
public:
    explicit ball_index(const ball_union& set)
        : m_centers(set.centers())
        , m_radius(set.radius().value())
        , m_infinite(set.radius().is_infinite())
        , m_norm(set.norm())
    {
        std::sort(m_centers.begin(), m_centers.end(), [](const vector_t& a, const vector_t& b) { return a[0] < b[0]; });
    }

    bool contains(std::span<const double> y) const
    {
        if (m_infinite)
        {
            return true;
        }
        auto it = std::lower_bound(m_centers.begin(), m_centers.end(), y[0] - m_radius,
                                   [](const vector_t& c, double value) { return c[0] < value; });
        for (; it != m_centers.end() && (*it)[0] <= y[0] + m_radius; ++ it)
        {
            if (within(*it, y))
            {
                return true;
            }
        }
        return false;
    }

private:
    bool within(const vector_t& c, std::span<const double> y) const
    {
        if (m_norm == norm_kind::l2)
        {
            double acc = 0.0;
            const auto bound = m_radius * m_radius;
            for (std::size_t i = 0; i < c.size(); ++ i)
            {
                const auto delta = c[i] - y[i];
                acc += delta * delta;
                if (acc > bound)
                {
                    return false;
                }
            }
            return true;
        }
        return distance(c, y, m_norm) <= m_radius;
    }

    std::vector<vector_t> m_centers;
    double m_radius;
    bool m_infinite;
    norm_kind m_norm;
};

inline bool contains(const ball_union& set, std::span<const double> y)
{
    require(y.size() == set.dim(), error_kind::dimension, "point and set differ in dimension");
    if (set.radius().is_infinite())
    {
        return true;
    }
    const auto r = set.radius().value();
    return std::any_of(set.centers().begin(), set.centers().end(),
                       [&](const vector_t& c) { return distance(y, c, set.norm()) <= r; });
}

/// Scalar set as disjoint sorted intervals [c_k - r, c_k + r] after merging overlaps.
inline std::vector<interval> merged_intervals(const ball_union& set)
{
    require(set.dim() == 1, error_kind::dimension, "interval form needs d = 1");
    require(!set.radius().is_infinite(), error_kind::precondition, "infinite radius has no interval form");

    const auto r = set.radius().value();
    std::vector<double> centers;
    centers.reserve(set.centers().size());
    for (const auto& c : set.centers())
    {
        centers.push_back(c[0]);
    }
    std::sort(centers.begin(), centers.end());

    std::vector<interval> out;
    for (const auto c : centers)
    {
        if (!out.empty() && c - r <= out.back().upper)
        {
            out.back().upper = std::max(out.back().upper, c + r);
        }
        else
        {
            out.push_back({c - r, c + r});
        }
    }
    return out;
}

inline std::size_t component_count(const ball_union& set)
{
    return merged_intervals(set).size();
}

/// Exact length of a scalar set; +infinity for the infinite-radius sentinel.
inline double measure_1d(const ball_union& set)
{
    require(set.dim() == 1, error_kind::dimension, "measure_1d needs d = 1");
    if (set.radius().is_infinite())
    {
        return std::numeric_limits<double>::infinity();
    }
    double total = 0.0;
    for (const auto& piece : merged_intervals(set))
    {
        total += piece.length();
    }
    return total;
}

/// Box of the centers inflated by the radius plus a 1e-9 margin.
inline box default_bounds(const ball_union& set)
{
    require(!set.radius().is_infinite(), error_kind::precondition, "infinite set has no bounding box");
    const auto d = set.dim();
    const auto r = set.radius().value() + 1e-9;
    box b{vector_t(d, std::numeric_limits<double>::infinity()), vector_t(d, -std::numeric_limits<double>::infinity())};
    for (const auto& c : set.centers())
    {
        for (std::size_t i = 0; i < d; ++ i)
        {
            b.lower[i] = std::min(b.lower[i], c[i] - r);
            b.upper[i] = std::max(b.upper[i], c[i] + r);
        }
    }
    return b;
}

/// Smallest box enclosing every set's default bounds.
inline box enclosing_bounds(std::span<const ball_union> sets)
{
    require(!sets.empty(), error_kind::precondition, "no sets to enclose");
    auto b = default_bounds(sets.front());
    for (const auto& set : sets.subspan(1))
    {
        const auto other = default_bounds(set);
        require(other.dim() == b.dim(), error_kind::dimension, "sets differ in dimension");
        for (std::size_t i = 0; i < b.dim(); ++ i)
        {
            b.lower[i] = std::min(b.lower[i], other.lower[i]);
            b.upper[i] = std::max(b.upper[i], other.upper[i]);
        }
    }
    return b;
}

namespace detail {

inline void check_bounds(const ball_union& set, const box& bounds)
{
    require(bounds.dim() == set.dim(), error_kind::dimension, "bounds and set differ in dimension");
    require(!set.radius().is_infinite(), error_kind::precondition, "infinite set cannot be measured inside a box");
    const auto r = set.radius().value();
    for (const auto& c : set.centers())
    {
        for (std::size_t i = 0; i < set.dim(); ++ i)
        {
            require(bounds.lower[i] <= c[i] - r && bounds.upper[i] >= c[i] + r, error_kind::precondition,
                    "bounds do not enclose every ball");
        }
    }
}

} // namespace detail

inline constexpr double max_grid_cells = 1e8;

/// Cell-center grid estimate: (#cells whose center lies in the set) x cell volume.
/// Each ball is rasterized over the cells of its own bounding range.
inline double measure_grid(const ball_union& set, const box& bounds, std::size_t cells_per_dim)
{
    detail::check_bounds(set, bounds);
    require(cells_per_dim >= 1, error_kind::precondition, "grid needs at least one cell per dimension");
    const auto d = set.dim();
    const auto total = std::pow(static_cast<double>(cells_per_dim), static_cast<double>(d));
    require(total <= max_grid_cells, error_kind::precondition, "grid refused above 1e8 cells; use Monte Carlo");

    const auto cells = static_cast<std::ptrdiff_t>(cells_per_dim);
    vector_t width(d);
    double cell_volume = 1.0;
    for (std::size_t i = 0; i < d; ++ i)
    {
        width[i] = (bounds.upper[i] - bounds.lower[i]) / static_cast<double>(cells_per_dim);
        cell_volume *= width[i];
    }
    if (cell_volume <= 0.0)
    {
        return 0.0;
    }

    std::vector<std::uint8_t> marked(static_cast<std::size_t>(total), 0);
    const auto r = set.radius().value();
    std::vector<std::ptrdiff_t> lo(d), hi(d), idx(d);
    vector_t point(d);
    std::size_t hits = 0;

    for (const auto& c : set.centers())
    {
        bool empty = false;
        for (std::size_t i = 0; i < d; ++ i)
        {
            // cell j has center lower + (j + 0.5) w; keep j with |center - c| <= r
            lo[i] = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil((c[i] - r - bounds.lower[i]) / width[i] - 0.5)));
            hi[i] = std::min<std::ptrdiff_t>(cells - 1, static_cast<std::ptrdiff_t>(std::floor((c[i] + r - bounds.lower[i]) / width[i] - 0.5)));
            empty = empty || lo[i] > hi[i];
        }
        if (empty)
        {
            continue;
        }

        idx = lo;
        for (;;)
        {
            std::size_t flat = 0;
            for (std::size_t i = 0; i < d; ++ i)
            {
                point[i] = bounds.lower[i] + (static_cast<double>(idx[i]) + 0.5) * width[i];
                flat = flat * cells_per_dim + static_cast<std::size_t>(idx[i]);
            }
            if (!marked[flat] && distance(point, c, set.norm()) <= r)
            {
                marked[flat] = 1;
                ++ hits;
            }

            bool done = true;
            for (std::size_t axis = d; axis-- > 0;)
            {
                if (++ idx[axis] <= hi[axis])
                {
                    done = false;
                    break;
                }
                idx[axis] = lo[axis];
            }
            if (done)
            {
                break;
            }
        }
    }
    return static_cast<double>(hits) * cell_volume;
}

struct mc_estimate
{
    double estimate{0.0};
    double standard_error{0.0};
};

/// Uniform Monte Carlo over the box: hit fraction x volume, binomial standard error.
inline mc_estimate measure_mc(const ball_union& set, const box& bounds, std::size_t n_points, rng_t& rng)
{
    detail::check_bounds(set, bounds);
    require(n_points >= 100, error_kind::precondition, "Monte Carlo measure needs at least 100 points");

    const ball_index index{set};
    const auto d = set.dim();
    vector_t point(d);
    std::size_t hits = 0;
    for (std::size_t n = 0; n < n_points; ++ n)
    {
        for (std::size_t i = 0; i < d; ++ i)
        {
            point[i] = bounds.lower[i] + uniform01(rng) * (bounds.upper[i] - bounds.lower[i]);
        }
        hits += index.contains(point) ? 1U : 0U;
    }

    const auto volume = bounds.volume();
    const auto fraction = static_cast<double>(hits) / static_cast<double>(n_points);
    return {fraction * volume, volume * std::sqrt(fraction * (1.0 - fraction) / static_cast<double>(n_points))};
}

enum class measure_method
{
    automatic,
    exact,
    grid,
    monte_carlo,
};

inline std::string_view to_string(measure_method method)
{
    switch (method)
    {
    case measure_method::automatic:     return "auto";
    case measure_method::exact:         return "exact";
    case measure_method::grid:          return "grid";
    case measure_method::monte_carlo:   return "mc";
    }
    return "auto";
}

inline measure_method parse_measure_method(std::string_view name)
{
    if (name == "auto")
    {
        return measure_method::automatic;
    }
    if (name == "exact")
    {
        return measure_method::exact;
    }
    if (name == "grid")
    {
        return measure_method::grid;
    }
    if (name == "mc")
    {
        return measure_method::monte_carlo;
    }
    raise(error_kind::config, "unknown measure estimator '" + std::string{name} + "'");
}

struct measure_options
{
    measure_method method{measure_method::automatic};
    std::size_t grid_cells{100};
    std::size_t mc_points{100000};
};

/// Lebesgue measure with the configured estimator: exact for d = 1,
/// a grid for d in {2, 3} and Monte Carlo above under the automatic choice.
inline double set_measure(const ball_union& set, const measure_options& options, rng_t& rng)
{
    if (set.radius().is_infinite())
    {
        return std::numeric_limits<double>::infinity();
    }

    auto method = options.method;
    if (method == measure_method::automatic)
    {
        method = set.dim() == 1 ? measure_method::exact : (set.dim() <= 3 ? measure_method::grid : measure_method::monte_carlo);
    }

    switch (method)
    {
    case measure_method::exact:
        return measure_1d(set);
    case measure_method::grid:
        return measure_grid(set, default_bounds(set), options.grid_cells);
    case measure_method::monte_carlo:
    case measure_method::automatic:
        return measure_mc(set, default_bounds(set), options.mc_points, rng).estimate;
    }
    return 0.0;
}

} // namespace pcp
