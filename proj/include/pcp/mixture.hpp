#pragma once

#include <pcp/backbone.hpp>

#include <Eigen/Dense>

#include <functional>
#include <numbers>

namespace pcp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double conditional_variance_floor = 1e-12;

inline VectorXd to_eigen(std::span<const double> v)
{
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline vector_t to_std(const VectorXd& v)
{
    return vector_t(v.data(), v.data() + v.size());
}

/// Lower Cholesky factor of a symmetric matrix whose eigenvalues are clamped at floor.
inline MatrixXd floored_cholesky(const MatrixXd& cov, double floor)
{
    const MatrixXd sym = 0.5 * (cov + cov.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
    const VectorXd clamped = eig.eigenvalues().cwiseMax(floor);
    const MatrixXd fixed = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
    Eigen::LLT<MatrixXd> llt(0.5 * (fixed + fixed.transpose()));
    return llt.matrixL();
}

/// log N(v; 0, L L^T) given the lower factor L.
inline double gaussian_log_density(const VectorXd& centered, const MatrixXd& lower)
{
    const auto dim = static_cast<double>(centered.size());
    const VectorXd z = lower.triangularView<Eigen::Lower>().solve(centered);
    const double log_det = 2.0 * lower.diagonal().array().log().sum();
    return -0.5 * (dim * std::log(2.0 * std::numbers::pi) + log_det + z.squaredNorm());
}

inline double log_sum_exp(std::span<const double> values)
{
    const auto top = *std::max_element(values.begin(), values.end());
    if (!std::isfinite(top))
    {
        return top;
    }
    double acc = 0.0;
    for (const auto v : values)
    {
        acc += std::exp(v - top);
    }
    return top + std::log(acc);
}

/// A Gaussian mixture over targets, e.g. q(Y | X = x) for one covariate.
struct gaussian_mixture
{
    std::vector<double> weights;
    std::vector<VectorXd> means;
    std::vector<MatrixXd> covariances;
    std::vector<MatrixXd> factors;  ///< lower Cholesky factors of the covariances

    static gaussian_mixture make(std::vector<double> weights, std::vector<VectorXd> means, std::vector<MatrixXd> covariances)
    {
        require(!weights.empty() && weights.size() == means.size() && weights.size() == covariances.size(),
                error_kind::precondition, "mixture needs matching weights, means and covariances");
        gaussian_mixture out;
        out.weights = std::move(weights);
        out.means = std::move(means);
        out.covariances = std::move(covariances);
        for (const auto& cov : out.covariances)
        {
            out.factors.push_back(floored_cholesky(cov, conditional_variance_floor));
        }
        return out;
    }

    std::size_t dim() const { return static_cast<std::size_t>(means.front().size()); }

    double log_density(std::span<const double> y) const
    {
        require(y.size() == dim(), error_kind::dimension, "mixture density evaluated at the wrong dimension");
        const auto point = to_eigen(y);
        std::vector<double> terms(weights.size());
        for (std::size_t m = 0; m < weights.size(); ++ m)
        {
            terms[m] = weights[m] > 0.0
                ? std::log(weights[m]) + gaussian_log_density(point - means[m], factors[m])
                : -std::numeric_limits<double>::infinity();
        }
        return log_sum_exp(terms);
    }

    double density(std::span<const double> y) const { return std::exp(log_density(y)); }

    /// One draw: a uniform picks the component, then dim() standard normals.
    vector_t draw(rng_t& rng) const
    {
        const auto u = uniform01(rng);
        std::size_t m = 0;
        double cumulative = weights[0];
        while (u >= cumulative && m + 1 < weights.size())
        {
            cumulative += weights[++ m];
        }
        VectorXd z(static_cast<Eigen::Index>(dim()));
        for (Eigen::Index i = 0; i < z.size(); ++ i)
        {
            z[i] = standard_normal(rng);
        }
        return to_std(means[m] + factors[m] * z);
    }

    VectorXd mean() const
    {
        VectorXd out = VectorXd::Zero(means.front().size());
        for (std::size_t m = 0; m < weights.size(); ++ m)
        {
            out += weights[m] * means[m];
        }
        return out;
    }
};

/// Explicit backbone whose conditional law is a Gaussian mixture computed from x.
class mixture_backbone final : public backbone
{
public:
    using law_t = std::function<gaussian_mixture(std::span<const double>)>;

    mixture_backbone(std::size_t p, std::size_t d, law_t law)
        : m_p(p)
        , m_d(d)
        , m_law(std::move(law))
    {
    }

    std::size_t covariate_dim() const override { return m_p; }
    std::size_t target_dim() const override { return m_d; }
    bool has_density() const override { return true; }

    sample_batch sample(std::span<const double> x, std::size_t k, rng_t& rng) const override
    {
        check_covariates(x);
        require(k >= 1, error_kind::precondition, "K must be positive");
        const auto law = m_law(x);
        std::vector<vector_t> samples;
        std::vector<double> densities;
        samples.reserve(k);
        densities.reserve(k);
        for (std::size_t i = 0; i < k; ++ i)
        {
            samples.push_back(law.draw(rng));
            densities.push_back(law.density(samples.back()));
        }
        return sample_batch{std::move(samples), std::move(densities)};
    }

    double density(std::span<const double> x, std::span<const double> y) const override
    {
        check_covariates(x);
        return m_law(x).density(y);
    }

private:
    std::size_t m_p;
    std::size_t m_d;
    law_t m_law;
};

} // namespace pcp
