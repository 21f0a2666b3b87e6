#pragma once

#include <pcp/core.hpp>

#include <memory>

namespace pcp {

/// A conditional generative sampler q(Y|X).
///
/// Implementations are immutable once fitted, so one instance may be shared
/// across workers; all randomness comes from the caller's stream.
class backbone
{
public:
    virtual ~backbone() = default;

    virtual std::size_t covariate_dim() const = 0;
    virtual std::size_t target_dim() const = 0;
    virtual bool has_density() const = 0;

    /// Exactly k samples; densities attached iff has_density().
    /// Sample j depends only on the stream prefix consumed by samples 0..j,
    /// so a batch of k is a prefix of a batch of k' > k drawn from the same stream.
    virtual sample_batch sample(std::span<const double> x, std::size_t k, rng_t& rng) const = 0;

    virtual double density(std::span<const double> x, std::span<const double> y) const
    {
        (void)x;
        (void)y;
        raise(error_kind::capability, "backbone has no density");
    }

protected:
    void check_covariates(std::span<const double> x) const
    {
        require(x.size() == covariate_dim(), error_kind::dimension,
                "covariate vector has length " + std::to_string(x.size()) + ", expected " + std::to_string(covariate_dim()));
    }
};

using backbone_ptr = std::shared_ptr<const backbone>;

/// Deterministic backbone: every sample equals f(x). Useful as a perfect or shifted model.
template <typename function_t>
class point_mass_backbone final : public backbone
{
public:
    point_mass_backbone(std::size_t p, std::size_t d, function_t f)
        : m_p(p)
        , m_d(d)
        , m_f(std::move(f))
    {
    }

    std::size_t covariate_dim() const override { return m_p; }
    std::size_t target_dim() const override { return m_d; }
    bool has_density() const override { return false; }

    sample_batch sample(std::span<const double> x, std::size_t k, rng_t&) const override
    {
        check_covariates(x);
        require(k >= 1, error_kind::precondition, "K must be positive");
        vector_t y = m_f(x);
        require(y.size() == m_d, error_kind::dimension, "point mass function returned the wrong dimension");
        return sample_batch{std::vector<vector_t>(k, y)};
    }

private:
    std::size_t m_p;
    std::size_t m_d;
    function_t m_f;
};

template <typename function_t>
backbone_ptr make_point_mass(std::size_t p, std::size_t d, function_t f)
{
    return std::make_shared<point_mass_backbone<function_t>>(p, d, std::move(f));
}

} // namespace pcp
