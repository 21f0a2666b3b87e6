#pragma once

#include <pcp/backbone.hpp>

namespace pcp {

/// Number of draws needed so that keeping the top (1 - beta) fraction leaves k samples.
inline std::size_t oversampled_count(std::size_t k, double beta)
{
    require(beta >= 0.0 && beta < 1.0, error_kind::precondition, "beta must lie in [0,1)");
    const auto exact = static_cast<double>(k) / (1.0 - beta);
    // absorb rounding in k / (1 - beta) for exactly representable ratios such as 40 / 0.8
    return static_cast<std::size_t>(std::ceil(exact - 1e-9 * exact));
}

/// Keeps the k highest-density samples of a batch drawn with size oversampled_count(k, beta).
/// Ties keep the lower sample index. Output preserves the original sample order.
inline sample_batch hdpcp_filter(const sample_batch& batch, std::size_t k, double beta)
{
    require(batch.has_densities(), error_kind::capability, "HD-PCP filtering needs sample densities");
    require(batch.size() == oversampled_count(k, beta), error_kind::precondition,
            "batch has " + std::to_string(batch.size()) + " samples, expected ceil(K/(1-beta)) = "
            + std::to_string(oversampled_count(k, beta)));

    const auto& q = batch.densities();
    std::vector<std::size_t> order(batch.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&q](std::size_t a, std::size_t b) { return q[a] > q[b]; });
    order.resize(k);
    std::sort(order.begin(), order.end());

    std::vector<vector_t> kept;
    std::vector<double> kept_q;
    kept.reserve(k);
    kept_q.reserve(k);
    for (const auto index : order)
    {
        kept.push_back(batch[index]);
        kept_q.push_back(q[index]);
    }
    return sample_batch{std::move(kept), std::move(kept_q)};
}

/// Draws the K centers for one covariate: plain sampling at beta = 0, oversample-and-filter otherwise.
inline sample_batch draw_centers(const backbone& model, std::span<const double> x, std::size_t k, double beta, rng_t& rng)
{
    if (beta == 0.0)
    {
        return model.sample(x, k, rng);
    }
    require(model.has_density(), error_kind::capability, "HD-PCP needs a backbone with densities");
    return hdpcp_filter(model.sample(x, oversampled_count(k, beta), rng), k, beta);
}

} // namespace pcp
