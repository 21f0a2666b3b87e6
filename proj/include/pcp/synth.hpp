#pragma once

#include <pcp/mixture.hpp>

#include <array>
#include <numbers>

namespace pcp {

/// Synthetic families. For the 2-D toys the first coordinate is the covariate x and
/// the second the target y; bimodal_multitarget has x in R^5 and y in R^d (d in {1, 2});
/// two_mode has x in R and y = x +- separation/2 + sigma * noise.
struct synth_spec
{
    std::string name{"two_mode"};
    std::size_t n{1000};
    std::uint64_t seed{0};

    double noise{0.1};                  ///< 2-D toys
    double rho{0.0};                    ///< bimodal_multitarget off-diagonal covariance
    std::size_t target_dim{2};          ///< bimodal_multitarget keeps the first target_dim targets
    std::uint64_t coefficient_seed{0};  ///< bimodal_multitarget regression coefficients
    double separation{10.0};            ///< two_mode
    double sigma{0.5};                  ///< two_mode

    void validate() const
    {
        static constexpr std::array names{"s_curve", "half_moons", "gaussians_25", "gaussians_8", "circle",
                                          "swiss_roll", "bimodal_multitarget", "two_mode"};
        require(std::find(names.begin(), names.end(), name) != names.end(), error_kind::config,
                "unknown synthetic family '" + name + "'");
        require(n >= 1, error_kind::config, "synthetic sample count must be positive");
        require(noise >= 0.0 && sigma > 0.0, error_kind::config, "noise levels must be nonnegative");
        if (name == "bimodal_multitarget")
        {
            require(std::fabs(rho) < 10.0, error_kind::config, "|rho| must be below 10 for a positive-definite covariance");
            require(target_dim == 1 || target_dim == 2, error_kind::config, "bimodal_multitarget has 1 or 2 targets");
        }
    }
};

inline constexpr std::size_t bimodal_covariates = 5;
inline constexpr double bimodal_variance = 10.0;

namespace detail {

/// beta_i in R^{6 x 2}: rows for x_1..x_5 and the intercept, drawn from N(0, 1).
inline std::array<MatrixXd, 2> bimodal_coefficients(std::uint64_t coefficient_seed)
{
    auto rng = make_rng(coefficient_seed, stream::coefficients);
    std::array<MatrixXd, 2> out{MatrixXd(bimodal_covariates + 1, 2), MatrixXd(bimodal_covariates + 1, 2)};
    for (auto& beta : out)
    {
        for (Eigen::Index r = 0; r < beta.rows(); ++ r)
        {
            for (Eigen::Index c = 0; c < beta.cols(); ++ c)
            {
                beta(r, c) = standard_normal(rng);
            }
        }
    }
    return out;
}

inline VectorXd bimodal_mean(const MatrixXd& beta, std::span<const double> x)
{
    VectorXd augmented(bimodal_covariates + 1);
    for (std::size_t j = 0; j < bimodal_covariates; ++ j)
    {
        augmented[static_cast<Eigen::Index>(j)] = x[j];
    }
    augmented[bimodal_covariates] = 1.0;
    return beta.transpose() * augmented;
}

inline MatrixXd bimodal_cov(double rho)
{
    MatrixXd cov(2, 2);
    cov << bimodal_variance, rho, rho, bimodal_variance;
    return cov;
}

inline std::vector<std::array<double, 2>> gaussian_centers(const std::string& name)
{
    std::vector<std::array<double, 2>> centers;
    if (name == "gaussians_8")
    {
        for (int k = 0; k < 8; ++ k)
        {
            const auto angle = 2.0 * std::numbers::pi * k / 8.0;
            centers.push_back({2.0 * std::cos(angle), 2.0 * std::sin(angle)});
        }
    }
    else
    {
        for (int i = -2; i <= 2; ++ i)
        {
            for (int j = -2; j <= 2; ++ j)
            {
                centers.push_back({static_cast<double>(i), static_cast<double>(j)});
            }
        }
    }
    return centers;
}

} // namespace detail

struct synth_sample
{
    labeled_dataset data;
    std::vector<int> component;  ///< latent mixture label per point, -1 for non-mixture families
};

/// Dataset plus the latent mixture component of every point.
inline synth_sample generate_labeled(const synth_spec& spec)
{
    spec.validate();
    auto rng = make_rng(spec.seed, stream::data);
    std::vector<labeled_point> points;
    std::vector<int> component;
    points.reserve(spec.n);
    component.reserve(spec.n);

    const auto toy = [&](double a, double b, int label)
    {
        a += spec.noise * standard_normal(rng);
        b += spec.noise * standard_normal(rng);
        points.emplace_back(vector_t{a}, vector_t{b});
        component.push_back(label);
    };

    if (spec.name == "bimodal_multitarget")
    {
        const auto beta = detail::bimodal_coefficients(spec.coefficient_seed);
        const MatrixXd factor = Eigen::LLT<MatrixXd>(detail::bimodal_cov(spec.rho)).matrixL();
        for (std::size_t i = 0; i < spec.n; ++ i)
        {
            vector_t x(bimodal_covariates);
            for (auto& v : x)
            {
                v = standard_normal(rng);
            }
            const int label = uniform01(rng) < 0.5 ? 0 : 1;
            VectorXd z(2);
            z << standard_normal(rng), standard_normal(rng);
            const VectorXd y = detail::bimodal_mean(beta[static_cast<std::size_t>(label)], x) + factor * z;
            points.emplace_back(std::move(x), vector_t(y.data(), y.data() + spec.target_dim));
            component.push_back(label);
        }
    }
    else if (spec.name == "two_mode")
    {
        for (std::size_t i = 0; i < spec.n; ++ i)
        {
            const auto x = standard_normal(rng);
            const int label = uniform01(rng) < 0.5 ? 0 : 1;
            const auto shift = (label == 0 ? -0.5 : 0.5) * spec.separation;
            points.emplace_back(vector_t{x}, vector_t{x + shift + spec.sigma * standard_normal(rng)});
            component.push_back(label);
        }
    }
    else if (spec.name == "gaussians_8" || spec.name == "gaussians_25")
    {
        const auto centers = detail::gaussian_centers(spec.name);
        for (std::size_t i = 0; i < spec.n; ++ i)
        {
            const auto label = static_cast<std::size_t>(rng() % centers.size());
            toy(centers[label][0], centers[label][1], static_cast<int>(label));
        }
    }
    else if (spec.name == "s_curve")
    {
        for (std::size_t i = 0; i < spec.n; ++ i)
        {
            const auto t = 3.0 * std::numbers::pi * (uniform01(rng) - 0.5);
            toy(std::sin(t), (t < 0.0 ? -1.0 : 1.0) * (std::cos(t) - 1.0), -1);
        }
    }
    else if (spec.name == "half_moons")
    {
        for (std::size_t i = 0; i < spec.n; ++ i)
        {
            const auto outer = uniform01(rng) < 0.5;
            const auto t = std::numbers::pi * uniform01(rng);
            if (outer)
            {
                toy(std::cos(t), std::sin(t), 0);
            }
            else
            {
                toy(1.0 - std::cos(t), 0.5 - std::sin(t), 1);
            }
        }
    }
    else if (spec.name == "circle")
    {
        for (std::size_t i = 0; i < spec.n; ++ i)
        {
            const auto angle = 2.0 * std::numbers::pi * uniform01(rng);
            toy(std::cos(angle), std::sin(angle), -1);
        }
    }
    else if (spec.name == "swiss_roll")
    {
        for (std::size_t i = 0; i < spec.n; ++ i)
        {
            const auto t = 1.5 * std::numbers::pi * (1.0 + 2.0 * uniform01(rng));
            toy(t * std::cos(t), t * std::sin(t), -1);
        }
    }
    return {labeled_dataset{std::move(points), {}, spec.seed}, std::move(component)};
}

inline labeled_dataset generate(const synth_spec& spec)
{
    return generate_labeled(spec).data;
}

/// Exact p(Y | X = x) as a Gaussian mixture, for families where it is closed-form.
inline gaussian_mixture conditional_truth(const synth_spec& spec, std::span<const double> x)
{
    spec.validate();
    if (spec.name == "bimodal_multitarget")
    {
        require(x.size() == bimodal_covariates, error_kind::dimension, "bimodal_multitarget has 5 covariates");
        const auto beta = detail::bimodal_coefficients(spec.coefficient_seed);
        const auto d = static_cast<Eigen::Index>(spec.target_dim);
        const MatrixXd cov = detail::bimodal_cov(spec.rho).topLeftCorner(d, d);
        return gaussian_mixture::make({0.5, 0.5},
                                      {detail::bimodal_mean(beta[0], x).head(d), detail::bimodal_mean(beta[1], x).head(d)},
                                      {cov, cov});
    }
    require(x.size() == 1, error_kind::dimension, "this family has one covariate");
    if (spec.name == "two_mode")
    {
        const MatrixXd var = MatrixXd::Constant(1, 1, spec.sigma * spec.sigma);
        return gaussian_mixture::make({0.5, 0.5},
                                      {VectorXd::Constant(1, x[0] - 0.5 * spec.separation),
                                       VectorXd::Constant(1, x[0] + 0.5 * spec.separation)},
                                      {var, var});
    }
    if (spec.name == "gaussians_8" || spec.name == "gaussians_25")
    {
        require(spec.noise > 0.0, error_kind::capability, "noise-free clusters have no density");
        const auto centers = detail::gaussian_centers(spec.name);
        const auto s2 = spec.noise * spec.noise;
        std::vector<double> log_w;
        for (const auto& c : centers)
        {
            log_w.push_back(-0.5 * (x[0] - c[0]) * (x[0] - c[0]) / s2);
        }
        const auto norm = log_sum_exp(log_w);
        std::vector<double> weights;
        std::vector<VectorXd> means;
        std::vector<MatrixXd> covs;
        for (std::size_t k = 0; k < centers.size(); ++ k)
        {
            weights.push_back(std::exp(log_w[k] - norm));
            means.push_back(VectorXd::Constant(1, centers[k][1]));
            covs.push_back(MatrixXd::Constant(1, 1, s2));
        }
        return gaussian_mixture::make(std::move(weights), std::move(means), std::move(covs));
    }
    raise(error_kind::capability, "no closed-form conditional law for '" + spec.name + "'");
}

/// Oracle backbone sampling the exact conditional law of a family.
inline backbone_ptr make_truth_backbone(const synth_spec& spec)
{
    const auto p = spec.name == "bimodal_multitarget" ? bimodal_covariates : std::size_t{1};
    const auto d = spec.name == "bimodal_multitarget" ? spec.target_dim : std::size_t{1};
    const vector_t probe(p, 0.0);
    (void)conditional_truth(spec, probe);
    return std::make_shared<mixture_backbone>(p, d, [spec](std::span<const double> x) { return conditional_truth(spec, x); });
}

} // namespace pcp
