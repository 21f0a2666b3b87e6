#pragma once

#include <pcp/filter.hpp>

namespace pcp {

/// Nonconformity score: distance from y to the nearest generated sample.
inline double score(std::span<const double> y, const sample_batch& batch, norm_kind norm)
{
    require(batch.size() >= 1, error_kind::precondition, "empty sample batch");
    require(batch.dim() == y.size(), error_kind::dimension, "target and samples differ in dimension");

    auto best = std::numeric_limits<double>::infinity();
    for (const auto& s : batch.samples())
    {
        best = std::min(best, distance(y, s, norm));
    }
    return best;
}

class score_vector
{
public:
    explicit score_vector(std::vector<double> scores)
        : m_scores(std::move(scores))
    {
        require(!m_scores.empty(), error_kind::precondition, "score vector must be nonempty");
        for (const auto s : m_scores)
        {
            require(std::isfinite(s) && s >= 0.0, error_kind::precondition, "scores must be finite and nonnegative");
        }
    }

    std::size_t size() const noexcept { return m_scores.size(); }
    const std::vector<double>& values() const noexcept { return m_scores; }

private:
    std::vector<double> m_scores;
};

/// 1-indexed order statistic selected by Q_level over n values: max(1, ceil(n * level)).
inline std::size_t quantile_rank(std::size_t n, double level)
{
    require(n >= 1, error_kind::precondition, "quantile of an empty list");
    require(level >= 0.0 && level <= 1.0, error_kind::precondition, "quantile level must lie in [0,1]");
    const auto exact = static_cast<double>(n) * level;
    // (1 - a)(1 + 1/n) * n lands a few ulps above an integer; those must not round up
    const auto rank = static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
    return std::clamp<std::size_t>(rank, 1, n);
}

/// rank-th smallest value, 1-indexed.
inline double order_statistic(std::span<const double> z, std::size_t rank)
{
    require(rank >= 1 && rank <= z.size(), error_kind::precondition, "order statistic rank out of range");
    std::vector<double> sorted(z.begin(), z.end());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1), sorted.end());
    return sorted[rank - 1];
}

/// Q_level(z) = inf{x : #{z_i <= x} / n >= level}, the ceil(n * level)-th smallest value.
/// +infinity entries act as the sentinel that exceeds every finite value.
inline double empirical_quantile(std::span<const double> z, double level)
{
    require(!z.empty(), error_kind::precondition, "quantile of an empty list");
    return order_statistic(z, quantile_rank(z.size(), level));
}

inline quantile_mode default_quantile_mode(std::size_t n, double alpha)
{
    return alpha >= 1.0 / static_cast<double>(n + 1) ? quantile_mode::corrected : quantile_mode::inflated;
}

/// Conformal threshold of arbitrary real scores; +infinity when the inflated rank hits the sentinel.
inline double conformal_quantile(std::span<const double> scores, double alpha, quantile_mode mode)
{
    require(alpha > 0.0 && alpha < 1.0, error_kind::config, "alpha must lie in (0,1)");
    require(!scores.empty(), error_kind::precondition, "no calibration scores");
    const auto n = scores.size();

    switch (mode)
    {
    case quantile_mode::inflated:
    {
        const auto rank = quantile_rank(n + 1, 1.0 - alpha);
        return rank == n + 1 ? std::numeric_limits<double>::infinity() : order_statistic(scores, rank);
    }
    case quantile_mode::plain:
        return empirical_quantile(scores, 1.0 - alpha);
    case quantile_mode::corrected:
    {
        require(alpha >= 1.0 / static_cast<double>(n + 1) - 1e-15, error_kind::config,
                "corrected quantile needs alpha >= 1/(n+1) = " + std::to_string(1.0 / static_cast<double>(n + 1)));
        const auto level = std::min(1.0, (1.0 - alpha) * (1.0 + 1.0 / static_cast<double>(n)));
        return empirical_quantile(scores, level);
    }
    }
    return std::numeric_limits<double>::infinity();
}

inline double conformal_quantile(std::span<const double> scores, double alpha, std::optional<quantile_mode> mode)
{
    return conformal_quantile(scores, alpha, mode.value_or(default_quantile_mode(scores.size(), alpha)));
}

inline radius_t calibrated_radius(const score_vector& scores, double alpha, quantile_mode mode)
{
    const auto r = conformal_quantile(scores.values(), alpha, mode);
    return std::isinf(r) ? radius_t::infinite() : radius_t::finite(r);
}

inline radius_t calibrated_radius(const score_vector& scores, double alpha, std::optional<quantile_mode> mode)
{
    return calibrated_radius(scores, alpha, mode.value_or(default_quantile_mode(scores.size(), alpha)));
}

/// One score per calibration point; point i uses the stream (seed, calibration, dataset index).
inline score_vector compute_scores(const backbone& model, const labeled_dataset& data, const index_list& cal,
                                   const pcp_config& config, double beta = 0.0)
{
    require(!cal.empty(), error_kind::precondition, "calibration fold is empty");
    require(data.covariate_dim() == model.covariate_dim() && data.target_dim() == model.target_dim(),
            error_kind::dimension, "backbone and dataset disagree on (p, d)");

    std::vector<double> scores(cal.size());
    parallel_for(cal.size(), [&](std::size_t i)
    {
        const auto& point = data[cal[i]];
        auto rng = make_rng(config.seed, stream::calibration, cal[i]);
        const auto batch = draw_centers(model, point.x(), config.k_samples, beta, rng);
        scores[i] = score(point.y(), batch, config.norm);
    });
    return score_vector{std::move(scores)};
}

} // namespace pcp
