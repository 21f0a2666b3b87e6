#pragma once

#include <pcp/backbone.hpp>

namespace pcp {

/// Implicit backbone: draws the target of a random one of the k_nn nearest
/// training covariates (Euclidean), plus Gaussian jitter of bandwidth h per target dimension.
class knn_resampler final : public backbone
{
public:
    knn_resampler(std::vector<labeled_point> train, std::size_t k_nn, vector_t bandwidth)
        : m_train(std::move(train))
        , m_k(k_nn)
        , m_h(std::move(bandwidth))
    {
        require(!m_train.empty(), error_kind::precondition, "k-NN resampler needs training points");
        require(m_k >= 1 && m_k <= m_train.size(), error_kind::config, "k_nn must lie in [1, training size]");
        require(m_h.size() == m_train.front().y().size(), error_kind::dimension, "one bandwidth per target dimension");
        for (const auto h : m_h)
        {
            require(std::isfinite(h) && h >= 0.0, error_kind::config, "bandwidth must be finite and nonnegative");
        }
    }

    std::size_t covariate_dim() const override { return m_train.front().x().size(); }
    std::size_t target_dim() const override { return m_train.front().y().size(); }
    bool has_density() const override { return false; }

    sample_batch sample(std::span<const double> x, std::size_t k, rng_t& rng) const override
    {
        check_covariates(x);
        require(k >= 1, error_kind::precondition, "K must be positive");

        std::vector<std::pair<double, std::size_t>> order(m_train.size());
        for (std::size_t i = 0; i < m_train.size(); ++ i)
        {
            order[i] = {distance(x, m_train[i].x(), norm_kind::l2), i};
        }
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m_k), order.end());

        std::vector<vector_t> samples;
        samples.reserve(k);
        for (std::size_t s = 0; s < k; ++ s)
        {
            auto y = m_train[order[static_cast<std::size_t>(rng() % m_k)].second].y();
            for (std::size_t j = 0; j < y.size(); ++ j)
            {
                y[j] += m_h[j] * standard_normal(rng);
            }
            samples.push_back(std::move(y));
        }
        return sample_batch{std::move(samples)};
    }

private:
    std::vector<labeled_point> m_train;
    std::size_t m_k;
    vector_t m_h;
};

} // namespace pcp
