#pragma once

#include <pcp/core.hpp>

#include <json.hpp>

#include <sstream>

namespace pcp {

inline double marginal_coverage(const std::vector<bool>& covered)
{
    require(!covered.empty(), error_kind::precondition, "coverage of an empty test set");
    const auto hits = std::count(covered.begin(), covered.end(), true);
    return static_cast<double>(hits) / static_cast<double>(covered.size());
}

struct wsc_config
{
    double delta{0.1};
    std::size_t n_directions{100};
    double split_fraction{0.5};
    std::uint64_t seed{0};

    void validate() const
    {
        require(delta > 0.0 && delta < 1.0, error_kind::config, "delta must lie in (0,1)");
        require(n_directions >= 1, error_kind::config, "need at least one direction");
        require(split_fraction > 0.0 && split_fraction < 1.0, error_kind::config, "split fraction must lie in (0,1)");
    }
};

/// Worst-slab conditional coverage with held-out evaluation.
///
/// The selection part scans, for random unit directions v, every window of
/// sorted projections v.x holding at least delta of its points and keeps the
/// slab {x : lo <= v.x <= hi} of lowest coverage. That one slab is then scored
/// on the held-out part; if no held-out point falls inside, its selection coverage is returned.
inline double worst_slab_coverage(std::span<const vector_t> x, const std::vector<bool>& covered, const wsc_config& config)
{
    config.validate();
    require(x.size() == covered.size(), error_kind::dimension, "one coverage flag per test covariate");
    require(x.size() >= 20, error_kind::precondition, "worst-slab coverage needs at least 20 test points");
    const auto p = x.front().size();

    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = make_rng(config.seed, stream::slab);
    for (std::size_t i = order.size(); i > 1; -- i)
    {
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
    }
    const auto n_sel = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::round(config.split_fraction * static_cast<double>(x.size()))), 1, x.size() - 1);
    const std::span<const std::size_t> selection{order.data(), n_sel};
    const std::span<const std::size_t> held_out{order.data() + n_sel, order.size() - n_sel};
    const auto min_count = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(config.delta * static_cast<double>(n_sel))));

    struct slab
    {
        vector_t direction;
        double lower{0.0};
        double upper{0.0};
        double coverage{2.0};
    } worst;

    std::vector<std::pair<double, bool>> projected(n_sel);
    std::vector<std::size_t> prefix(n_sel + 1);
    for (std::size_t dir = 0; dir < config.n_directions; ++ dir)
    {
        vector_t v(p);
        double norm = 0.0;
        do
        {
            norm = 0.0;
            for (auto& c : v)
            {
                c = standard_normal(rng);
                norm += c * c;
            }
        } while (norm == 0.0);
        norm = std::sqrt(norm);
        for (auto& c : v)
        {
            c /= norm;
        }

        for (std::size_t i = 0; i < n_sel; ++ i)
        {
            const auto& xi = x[selection[i]];
            double proj = 0.0;
            for (std::size_t j = 0; j < p; ++ j)
            {
                proj += v[j] * xi[j];
            }
            projected[i] = {proj, covered[selection[i]]};
        }
        std::sort(projected.begin(), projected.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t i = 0; i < n_sel; ++ i)
        {
            prefix[i + 1] = prefix[i] + (projected[i].second ? 1U : 0U);
        }

        for (std::size_t lo = 0; lo + min_count <= n_sel; ++ lo)
        {
            for (std::size_t hi = lo + min_count; hi <= n_sel; ++ hi)
            {
                const auto cov = static_cast<double>(prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
                if (cov < worst.coverage)
                {
                    worst = {v, projected[lo].first, projected[hi - 1].first, cov};
                }
            }
        }
    }

    std::size_t inside = 0;
    std::size_t hits = 0;
    for (const auto index : held_out)
    {
        double proj = 0.0;
        for (std::size_t j = 0; j < p; ++ j)
        {
            proj += worst.direction[j] * x[index][j];
        }
        if (proj >= worst.lower && proj <= worst.upper)
        {
            ++ inside;
            hits += covered[index] ? 1U : 0U;
        }
    }
    return inside == 0 ? worst.coverage : static_cast<double>(hits) / static_cast<double>(inside);
}

struct size_stats
{
    double mean{0.0};
    double standard_error{0.0};
};

/// Mean and sample-std / sqrt(n) standard error; n = 1 gives zero error.
inline size_stats set_size_stats(std::span<const double> measures)
{
    require(!measures.empty(), error_kind::precondition, "set size statistics of an empty list");
    require(all_finite(measures), error_kind::precondition, "infinite set sizes must be counted separately");
    const auto n = static_cast<double>(measures.size());
    const auto mean = std::accumulate(measures.begin(), measures.end(), 0.0) / n;
    if (measures.size() == 1)
    {
        return {mean, 0.0};
    }
    double ss = 0.0;
    for (const auto m : measures)
    {
        ss += (m - mean) * (m - mean);
    }
    return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

/// Per-dimension miscoverage for a union bound over d coordinates.
inline double bonferroni_level(double alpha, std::size_t d)
{
    require(d >= 1, error_kind::precondition, "d must be positive");
    return alpha / static_cast<double>(d);
}

/// Builds a report from per-point coverage flags and set measures (+inf allowed).
inline coverage_report make_report(std::span<const vector_t> x, const std::vector<bool>& covered, std::span<const double> measures,
                                   const wsc_config& wsc)
{
    require(covered.size() == measures.size(), error_kind::dimension, "one measure per test point");
    coverage_report report;
    report.n_test = covered.size();
    report.marginal_coverage = marginal_coverage(covered);
    report.conditional_coverage = covered.size() >= 20 ? worst_slab_coverage(x, covered, wsc) : report.marginal_coverage;

    std::vector<double> finite;
    for (const auto m : measures)
    {
        if (std::isfinite(m))
        {
            finite.push_back(m);
        }
        else
        {
            ++ report.n_infinite;
        }
    }
    if (!finite.empty())
    {
        const auto stats = set_size_stats(finite);
        report.mean_set_size = stats.mean;
        report.set_size_stderr = stats.standard_error;
    }
    return report;
}

inline nlohmann::json to_json(const coverage_report& report)
{
    return nlohmann::json{
        {"marginal_coverage", report.marginal_coverage},
        {"conditional_coverage", report.conditional_coverage},
        {"mean_set_size", report.mean_set_size},
        {"set_size_stderr", report.set_size_stderr},
        {"n_test", report.n_test},
        {"n_infinite", report.n_infinite},
    };
}

inline std::string format_real(double value)
{
    if (!std::isfinite(value))
    {
        return "inf";
    }
    std::ostringstream out;
    out.precision(10);
    out << value;
    return out.str();
}

inline constexpr const char* report_csv_header = "marginal_coverage,conditional_coverage,mean_set_size,set_size_stderr,n_test,n_infinite";

inline std::string to_csv_row(const coverage_report& report)
{
    return format_real(report.marginal_coverage) + "," + format_real(report.conditional_coverage) + ","
        + format_real(report.mean_set_size) + "," + format_real(report.set_size_stderr) + ","
        + std::to_string(report.n_test) + "," + std::to_string(report.n_infinite);
}

} // namespace pcp
