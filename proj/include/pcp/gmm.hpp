#pragma once

#include <pcp/mixture.hpp>

namespace pcp {

struct joint_component
{
    double weight{1.0};
    VectorXd mean;      ///< length p + d, covariates first
    MatrixXd cov;       ///< (p + d) x (p + d)
};

/// Gaussian mixture on the joint (x, y) space, with every block of the
/// conditioning formula precomputed at construction.
class joint_gmm_model
{
public:
    joint_gmm_model(std::size_t p, std::size_t d, std::vector<joint_component> components,
                    std::vector<double> log_likelihood_trace = {})
        : m_p(p)
        , m_d(d)
        , m_components(std::move(components))
        , m_trace(std::move(log_likelihood_trace))
    {
        require(p >= 1 && d >= 1, error_kind::dimension, "joint model needs p >= 1 and d >= 1");
        require(!m_components.empty(), error_kind::precondition, "joint model needs at least one component");

        double total = 0.0;
        for (const auto& c : m_components)
        {
            require(c.weight >= 0.0, error_kind::precondition, "mixture weights must be nonnegative");
            require(c.mean.size() == static_cast<Eigen::Index>(p + d) && c.cov.rows() == c.mean.size()
                    && c.cov.cols() == c.mean.size(), error_kind::dimension, "component has the wrong shape");
            total += c.weight;
        }
        require(std::fabs(total - 1.0) <= 1e-9, error_kind::precondition, "mixture weights must sum to 1");

        const auto pi = static_cast<Eigen::Index>(p);
        const auto di = static_cast<Eigen::Index>(d);
        for (const auto& c : m_components)
        {
            Eigen::LLT<MatrixXd> joint(c.cov);
            require(joint.info() == Eigen::Success, error_kind::degenerate, "component covariance is not positive-definite");

            const MatrixXd sxx = c.cov.topLeftCorner(pi, pi);
            const MatrixXd syx = c.cov.bottomLeftCorner(di, pi);
            const MatrixXd syy = c.cov.bottomRightCorner(di, di);
            Eigen::LLT<MatrixXd> llt(sxx);

            blocks b;
            b.x_factor = llt.matrixL();
            b.gain = llt.solve(syx.transpose()).transpose();
            b.y_cov = syy - b.gain * syx.transpose();
            b.y_cov = 0.5 * (b.y_cov + b.y_cov.transpose());
            b.log_weight = c.weight > 0.0 ? std::log(c.weight) : -std::numeric_limits<double>::infinity();
            b.joint_factor = joint.matrixL();
            m_blocks.push_back(std::move(b));
        }
    }

    std::size_t covariate_dim() const noexcept { return m_p; }
    std::size_t target_dim() const noexcept { return m_d; }
    std::size_t size() const noexcept { return m_components.size(); }
    const std::vector<joint_component>& components() const noexcept { return m_components; }

    /// Mean log-likelihood per point after each EM iteration (empty for hand-built models).
    const std::vector<double>& log_likelihood_trace() const noexcept { return m_trace; }

    /// q(Y | X = x): weights prop. to pi_m N(x; mu_x, S_xx), means mu_y + S_yx S_xx^-1 (x - mu_x),
    /// covariances S_yy - S_yx S_xx^-1 S_xy (floored at 1e-12 eigenvalues).
    gaussian_mixture conditional(std::span<const double> x) const
    {
        require(x.size() == m_p, error_kind::dimension, "covariate vector has the wrong length");
        const auto pi = static_cast<Eigen::Index>(m_p);
        const auto di = static_cast<Eigen::Index>(m_d);
        const auto point = to_eigen(x);

        std::vector<double> log_w(m_components.size());
        std::vector<VectorXd> means;
        std::vector<MatrixXd> covs;
        for (std::size_t m = 0; m < m_components.size(); ++ m)
        {
            const auto& c = m_components[m];
            const auto& b = m_blocks[m];
            const VectorXd dx = point - c.mean.head(pi);
            log_w[m] = b.log_weight + gaussian_log_density(dx, b.x_factor);
            means.push_back(c.mean.tail(di) + b.gain * dx);
            covs.push_back(b.y_cov);
        }

        std::vector<double> weights(log_w.size());
        const auto norm = log_sum_exp(log_w);
        if (!std::isfinite(norm))
        {
            std::fill(weights.begin(), weights.end(), 1.0 / static_cast<double>(weights.size()));
        }
        else
        {
            for (std::size_t m = 0; m < weights.size(); ++ m)
            {
                weights[m] = std::exp(log_w[m] - norm);
            }
        }
        return gaussian_mixture::make(std::move(weights), std::move(means), std::move(covs));
    }

    double log_density(const VectorXd& joint) const
    {
        std::vector<double> terms(m_components.size());
        for (std::size_t m = 0; m < m_components.size(); ++ m)
        {
            terms[m] = m_blocks[m].log_weight + gaussian_log_density(joint - m_components[m].mean, m_blocks[m].joint_factor);
        }
        return log_sum_exp(terms);
    }

    /// Mean joint log-likelihood of the rows of data.
    double mean_log_likelihood(const MatrixXd& data) const
    {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < data.rows(); ++ i)
        {
            acc += log_density(data.row(i).transpose());
        }
        return acc / static_cast<double>(data.rows());
    }

private:
    struct blocks
    {
        MatrixXd x_factor;
        MatrixXd gain;
        MatrixXd y_cov;
        MatrixXd joint_factor;
        double log_weight{0.0};
    };

    std::size_t m_p;
    std::size_t m_d;
    std::vector<joint_component> m_components;
    std::vector<blocks> m_blocks;
    std::vector<double> m_trace;
};

inline gaussian_mixture gmm_conditional(const joint_gmm_model& model, std::span<const double> x)
{
    return model.conditional(x);
}

struct em_options
{
    std::size_t components{1};
    std::uint64_t seed{0};
    std::size_t max_iter{200};
    double tol{1e-6};
};

namespace detail {

/// Covariance of weighted rows; jitter 1e-6 trace / dim on the diagonal when Cholesky fails.
inline std::optional<MatrixXd> stabilized_cov(MatrixXd cov)
{
    cov = 0.5 * (cov + cov.transpose());
    if (Eigen::LLT<MatrixXd>(cov).info() == Eigen::Success && cov.diagonal().minCoeff() > 0.0)
    {
        return cov;
    }
    const auto jitter = 1e-6 * cov.trace() / static_cast<double>(cov.rows());
    if (!(jitter > 0.0))
    {
        return std::nullopt;
    }
    cov.diagonal().array() += jitter;
    if (Eigen::LLT<MatrixXd>(cov).info() != Eigen::Success)
    {
        return std::nullopt;
    }
    return cov;
}

/// k-means++ seeding followed by a hard assignment; returns initial responsibilities.
inline MatrixXd kmeanspp_responsibilities(const MatrixXd& data, std::size_t k, rng_t& rng)
{
    const auto n = static_cast<std::size_t>(data.rows());
    std::vector<std::size_t> centers;
    centers.push_back(static_cast<std::size_t>(rng() % n));

    VectorXd nearest = VectorXd::Constant(data.rows(), std::numeric_limits<double>::infinity());
    while (centers.size() < k)
    {
        const auto& last = data.row(static_cast<Eigen::Index>(centers.back()));
        for (Eigen::Index i = 0; i < data.rows(); ++ i)
        {
            nearest[i] = std::min(nearest[i], (data.row(i) - last).squaredNorm());
        }
        const auto total = nearest.sum();
        std::size_t pick = static_cast<std::size_t>(rng() % n);
        if (total > 0.0)
        {
            auto u = uniform01(rng) * total;
            for (std::size_t i = 0; i < n; ++ i)
            {
                u -= nearest[static_cast<Eigen::Index>(i)];
                if (u <= 0.0)
                {
                    pick = i;
                    break;
                }
            }
        }
        centers.push_back(pick);
    }

    MatrixXd resp = MatrixXd::Zero(data.rows(), static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < data.rows(); ++ i)
    {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < k; ++ m)
        {
            const auto dist = (data.row(i) - data.row(static_cast<Eigen::Index>(centers[m]))).squaredNorm();
            if (dist < best_d)
            {
                best_d = dist;
                best = m;
            }
        }
        resp(i, static_cast<Eigen::Index>(best)) = 1.0;
    }
    return resp;
}

/// M-step; nullopt when a component is empty or its covariance stays degenerate.
inline std::optional<std::vector<joint_component>> maximize(const MatrixXd& data, const MatrixXd& resp)
{
    const auto n = static_cast<double>(data.rows());
    std::vector<joint_component> out;
    for (Eigen::Index m = 0; m < resp.cols(); ++ m)
    {
        const auto mass = resp.col(m).sum();
        if (!(mass > 1e-10 * n))
        {
            return std::nullopt;
        }
        joint_component c;
        c.weight = mass / n;
        c.mean = (data.transpose() * resp.col(m)) / mass;
        const MatrixXd centered = data.rowwise() - c.mean.transpose();
        auto cov = stabilized_cov((centered.transpose() * resp.col(m).asDiagonal() * centered) / mass);
        if (!cov)
        {
            return std::nullopt;
        }
        c.cov = std::move(*cov);
        out.push_back(std::move(c));
    }

    double total = 0.0;
    for (const auto& c : out)
    {
        total += c.weight;
    }
    for (auto& c : out)
    {
        c.weight /= total;
    }
    return out;
}

/// E-step: responsibilities and the mean log-likelihood under the given components.
inline double expect(const MatrixXd& data, const std::vector<joint_component>& components, MatrixXd& resp)
{
    const auto k = components.size();
    std::vector<MatrixXd> factors;
    std::vector<double> log_weights;
    for (const auto& c : components)
    {
        factors.push_back(Eigen::LLT<MatrixXd>(c.cov).matrixL());
        log_weights.push_back(std::log(c.weight));
    }

    double total = 0.0;
    std::vector<double> terms(k);
    for (Eigen::Index i = 0; i < data.rows(); ++ i)
    {
        const VectorXd row = data.row(i).transpose();
        for (std::size_t m = 0; m < k; ++ m)
        {
            terms[m] = log_weights[m] + gaussian_log_density(row - components[m].mean, factors[m]);
        }
        const auto norm = log_sum_exp(terms);
        total += norm;
        for (std::size_t m = 0; m < k; ++ m)
        {
            resp(i, static_cast<Eigen::Index>(m)) = std::exp(terms[m] - norm);
        }
    }
    return total / static_cast<double>(data.rows());
}

inline std::optional<joint_gmm_model> fit_exact(const MatrixXd& data, std::size_t p, std::size_t d, const em_options& options)
{
    auto rng = make_rng(options.seed, stream::fit, options.components);
    MatrixXd resp = kmeanspp_responsibilities(data, options.components, rng);
    auto components = maximize(data, resp);
    if (!components)
    {
        return std::nullopt;
    }

    std::vector<double> trace;
    for (std::size_t iter = 0; iter < options.max_iter; ++ iter)
    {
        const auto ll = expect(data, *components, resp);
        trace.push_back(ll);
        if (trace.size() >= 2 && ll - trace[trace.size() - 2] < options.tol)
        {
            break;
        }
        auto next = maximize(data, resp);
        if (!next)
        {
            return std::nullopt;
        }
        components = std::move(next);
    }
    return joint_gmm_model{p, d, std::move(*components), std::move(trace)};
}

} // namespace detail

/// EM on the joint (x, y) rows of data (covariates in the first p columns).
/// A degenerate fit is retried with one component fewer; failure at one component throws.
inline joint_gmm_model fit_gmm(const MatrixXd& data, std::size_t p, std::size_t d, const em_options& options)
{
    require(static_cast<std::size_t>(data.cols()) == p + d, error_kind::dimension, "data must have p + d columns");
    require(options.components >= 1, error_kind::config, "need at least one component");
    require(static_cast<std::size_t>(data.rows()) >= options.components, error_kind::precondition,
            "training size must be at least the component count");
    require(data.allFinite(), error_kind::data, "training data has non-finite entries");

    for (auto k = options.components; k >= 1; -- k)
    {
        auto attempt = options;
        attempt.components = k;
        if (auto model = detail::fit_exact(data, p, d, attempt))
        {
            return std::move(*model);
        }
    }
    raise(error_kind::degenerate, "degenerate covariance: no positive-definite fit even with one component");
}

/// Rows (x, y) of the selected points.
inline MatrixXd joint_matrix(const labeled_dataset& data, const index_list& indices)
{
    const auto p = data.covariate_dim();
    const auto d = data.target_dim();
    MatrixXd out(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(p + d));
    for (std::size_t i = 0; i < indices.size(); ++ i)
    {
        const auto& point = data[indices[i]];
        for (std::size_t j = 0; j < p; ++ j)
        {
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = point.x()[j];
        }
        for (std::size_t j = 0; j < d; ++ j)
        {
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p + j)) = point.y()[j];
        }
    }
    return out;
}

/// Per-column affine map to zero mean and unit variance; constant columns keep scale 1.
struct standardizer
{
    VectorXd mean;
    VectorXd scale;

    static standardizer fit(const MatrixXd& rows)
    {
        standardizer s;
        s.mean = rows.colwise().mean().transpose();
        const MatrixXd centered = rows.rowwise() - s.mean.transpose();
        s.scale = (centered.array().square().colwise().sum() / static_cast<double>(rows.rows())).sqrt().transpose();
        for (Eigen::Index j = 0; j < s.scale.size(); ++ j)
        {
            if (!(s.scale[j] > 0.0))
            {
                s.scale[j] = 1.0;
            }
        }
        return s;
    }

    MatrixXd apply(const MatrixXd& rows) const
    {
        return (rows.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
    }
};

/// Explicit backbone: a joint GMM fitted on standardized training rows.
class gmm_backbone final : public backbone
{
public:
    gmm_backbone(joint_gmm_model model, standardizer transform)
        : m_model(std::move(model))
        , m_transform(std::move(transform))
    {
        const auto di = static_cast<Eigen::Index>(m_model.target_dim());
        m_log_jacobian = m_transform.scale.tail(di).array().log().sum();
    }

    std::size_t covariate_dim() const override { return m_model.covariate_dim(); }
    std::size_t target_dim() const override { return m_model.target_dim(); }
    bool has_density() const override { return true; }
    const joint_gmm_model& model() const noexcept { return m_model; }

    sample_batch sample(std::span<const double> x, std::size_t k, rng_t& rng) const override
    {
        check_covariates(x);
        require(k >= 1, error_kind::precondition, "K must be positive");
        const auto law = m_model.conditional(scaled_x(x));
        const auto p = static_cast<Eigen::Index>(covariate_dim());
        const auto d = target_dim();

        std::vector<vector_t> samples;
        std::vector<double> densities;
        samples.reserve(k);
        densities.reserve(k);
        for (std::size_t i = 0; i < k; ++ i)
        {
            auto z = law.draw(rng);
            densities.push_back(std::exp(law.log_density(z) - m_log_jacobian));
            for (std::size_t j = 0; j < d; ++ j)
            {
                const auto col = p + static_cast<Eigen::Index>(j);
                z[j] = m_transform.mean[col] + m_transform.scale[col] * z[j];
            }
            samples.push_back(std::move(z));
        }
        return sample_batch{std::move(samples), std::move(densities)};
    }

    double density(std::span<const double> x, std::span<const double> y) const override
    {
        check_covariates(x);
        require(y.size() == target_dim(), error_kind::dimension, "target vector has the wrong length");
        const auto p = static_cast<Eigen::Index>(covariate_dim());
        vector_t z(y.size());
        for (std::size_t j = 0; j < y.size(); ++ j)
        {
            const auto col = p + static_cast<Eigen::Index>(j);
            z[j] = (y[j] - m_transform.mean[col]) / m_transform.scale[col];
        }
        return std::exp(m_model.conditional(scaled_x(x)).log_density(z) - m_log_jacobian);
    }

private:
    vector_t scaled_x(std::span<const double> x) const
    {
        vector_t out(x.size());
        for (std::size_t j = 0; j < x.size(); ++ j)
        {
            const auto col = static_cast<Eigen::Index>(j);
            out[j] = (x[j] - m_transform.mean[col]) / m_transform.scale[col];
        }
        return out;
    }

    joint_gmm_model m_model;
    standardizer m_transform;
    double m_log_jacobian{0.0};
};

struct gmm_fit_options
{
    /// Candidate component counts; the validation fold picks one when it has several entries.
    std::vector<std::size_t> component_grid{1, 2, 4, 8};
    std::uint64_t seed{0};
    std::size_t max_iter{200};
    double tol{1e-6};
};

struct gmm_fit_result
{
    std::shared_ptr<const gmm_backbone> backbone;
    std::size_t components{0};
    double validation_log_likelihood{0.0};
};

/// Standardizes on the training fold, fits each grid entry, keeps the best validation likelihood
/// (training likelihood when the validation fold is empty).
inline gmm_fit_result fit_gmm_backbone(const labeled_dataset& data, const index_list& train, const index_list& val,
                                       const gmm_fit_options& options)
{
    require(!train.empty(), error_kind::precondition, "training fold is empty");
    require(!options.component_grid.empty(), error_kind::config, "component grid is empty");

    const auto p = data.covariate_dim();
    const auto d = data.target_dim();
    const MatrixXd train_rows = joint_matrix(data, train);
    const auto transform = standardizer::fit(train_rows);
    const MatrixXd train_std = transform.apply(train_rows);
    const MatrixXd val_std = val.empty() ? train_std : transform.apply(joint_matrix(data, val));

    std::optional<gmm_fit_result> best;
    for (const auto k : options.component_grid)
    {
        if (k > train.size() || (best && options.component_grid.size() == 1))
        {
            continue;
        }
        auto model = fit_gmm(train_std, p, d, {k, options.seed, options.max_iter, options.tol});
        const auto score = model.mean_log_likelihood(val_std);
        if (!best || score > best->validation_log_likelihood)
        {
            const auto fitted = model.size();
            best = gmm_fit_result{std::make_shared<const gmm_backbone>(std::move(model), transform), fitted, score};
        }
    }
    require(best.has_value(), error_kind::precondition, "no component count fits the training size");
    return std::move(*best);
}

} // namespace pcp
