#pragma once

#include <pcp/calibrate.hpp>
#include <pcp/geometry.hpp>

#include <json.hpp>

namespace pcp {

/// Strictly increasing filter fractions in [0, 1).
class beta_grid
{
public:
    beta_grid(std::vector<double> values)
        : m_values(std::move(values))
    {
        require(!m_values.empty(), error_kind::config, "beta grid must be nonempty");
        for (std::size_t i = 0; i < m_values.size(); ++ i)
        {
            require(m_values[i] >= 0.0 && m_values[i] < 1.0, error_kind::config, "beta must lie in [0,1)");
            require(i == 0 || m_values[i] > m_values[i - 1], error_kind::config, "beta grid must be strictly increasing");
        }
    }

    /// 0.1, 0.2, ..., 0.7
    static beta_grid standard()
    {
        std::vector<double> values;
        for (int i = 1; i <= 7; ++ i)
        {
            values.push_back(static_cast<double>(i) / 10.0);
        }
        return beta_grid{std::move(values)};
    }

    const std::vector<double>& values() const noexcept { return m_values; }

private:
    std::vector<double> m_values;
};

class calibrated_predictor
{
public:
    calibrated_predictor(backbone_ptr model, pcp_config config, score_vector scores, std::optional<double> selected_beta)
        : m_model(std::move(model))
        , m_config(std::move(config))
        , m_scores(std::move(scores))
        , m_radius(calibrated_radius(m_scores, m_config.alpha, m_config.mode))
        , m_beta(selected_beta)
    {
        require(m_model != nullptr, error_kind::precondition, "predictor needs a backbone");
    }

    const backbone& model() const noexcept { return *m_model; }
    const backbone_ptr& model_ptr() const noexcept { return m_model; }
    const pcp_config& config() const noexcept { return m_config; }
    const score_vector& scores() const noexcept { return m_scores; }
    radius_t radius() const noexcept { return m_radius; }
    std::size_t n_cal() const noexcept { return m_scores.size(); }
    std::optional<double> selected_beta() const noexcept { return m_beta; }

    /// Filter fraction used when drawing centers (0 for plain PCP).
    double beta() const noexcept { return m_beta.value_or(0.0); }

private:
    backbone_ptr m_model;
    pcp_config m_config;
    score_vector m_scores;
    radius_t m_radius;
    std::optional<double> m_beta;
};

/// Split-conformal calibration of the ball-union set on the calibration fold.
inline calibrated_predictor pcp_calibrate(backbone_ptr model, const labeled_dataset& data, const pcp_config& config)
{
    config.validate();
    require(model != nullptr, error_kind::precondition, "null backbone");
    auto scores = compute_scores(*model, data, data.splits().cal, config);
    return calibrated_predictor{std::move(model), config, std::move(scores), std::nullopt};
}

/// K fresh centers for x (oversampled and filtered under HD-PCP) with the calibrated radius.
inline ball_union pcp_predict(const calibrated_predictor& predictor, std::span<const double> x, rng_t& rng)
{
    auto centers = draw_centers(predictor.model(), x, predictor.config().k_samples, predictor.beta(), rng);
    return ball_union{centers.samples(), predictor.radius(), predictor.config().norm};
}

/// Prediction for dataset point `index`, on its own test stream.
inline ball_union pcp_predict_point(const calibrated_predictor& predictor, std::span<const double> x, std::size_t index)
{
    auto rng = make_rng(predictor.config().seed, stream::test, index);
    return pcp_predict(predictor, x, rng);
}

enum class selection_fold
{
    calibration,
    validation,
};

struct beta_selection
{
    double beta{0.0};
    std::vector<double> total_measure;  ///< one per grid entry, +inf when the radius is the sentinel
};

/// Chooses the beta whose predictive sets at the fold's covariates have the smallest total measure.
/// For each beta the fold is rescored with filtered batches and a radius is calibrated on it.
/// Sets share per-point random streams across beta; d >= 2 measures use shared Monte-Carlo points.
inline beta_selection hdpcp_select_beta(const backbone& model, const labeled_dataset& data, const index_list& fold,
                                        const beta_grid& grid, const pcp_config& config,
                                        const measure_options& measure = {})
{
    require(!fold.empty(), error_kind::precondition, "selection fold is empty");
    const auto& betas = grid.values();
    const auto filtering = std::any_of(betas.begin(), betas.end(), [](double b) { return b > 0.0; });
    require(!filtering || model.has_density(), error_kind::capability, "HD-PCP needs a backbone with densities");

    std::vector<radius_t> radii;
    for (const auto beta : betas)
    {
        const auto scores = compute_scores(model, data, fold, config, beta);
        radii.push_back(calibrated_radius(scores, config.alpha, config.mode));
    }

    const auto d = data.target_dim();
    std::vector<std::vector<double>> per_point(fold.size(), std::vector<double>(betas.size(), 0.0));
    parallel_for(fold.size(), [&](std::size_t i)
    {
        const auto& x = data[fold[i]].x();
        std::vector<ball_union> sets;
        for (std::size_t b = 0; b < betas.size(); ++ b)
        {
            auto rng = make_rng(config.seed, stream::selection, fold[i]);
            auto centers = draw_centers(model, x, config.k_samples, betas[b], rng);
            sets.emplace_back(centers.samples(), radii[b], config.norm);
        }

        if (d == 1)
        {
            for (std::size_t b = 0; b < sets.size(); ++ b)
            {
                per_point[i][b] = measure_1d(sets[b]);
            }
            return;
        }

        std::vector<ball_union> finite;
        for (const auto& set : sets)
        {
            if (!set.radius().is_infinite())
            {
                finite.push_back(set);
            }
        }
        if (finite.empty())
        {
            std::fill(per_point[i].begin(), per_point[i].end(), std::numeric_limits<double>::infinity());
            return;
        }
        const auto bounds = enclosing_bounds(finite);
        for (std::size_t b = 0; b < sets.size(); ++ b)
        {
            if (sets[b].radius().is_infinite())
            {
                per_point[i][b] = std::numeric_limits<double>::infinity();
                continue;
            }
            auto quadrature = make_rng(config.seed, stream::quadrature, fold[i]);
            per_point[i][b] = measure_mc(sets[b], bounds, measure.mc_points, quadrature).estimate;
        }
    });

    beta_selection out;
    out.total_measure.assign(betas.size(), 0.0);
    for (const auto& row : per_point)
    {
        for (std::size_t b = 0; b < betas.size(); ++ b)
        {
            out.total_measure[b] += row[b];
        }
    }
    std::size_t best = 0;
    for (std::size_t b = 1; b < betas.size(); ++ b)
    {
        if (out.total_measure[b] < out.total_measure[best])
        {
            best = b;
        }
    }
    out.beta = betas[best];
    return out;
}

struct hdpcp_options
{
    selection_fold fold{selection_fold::calibration};
    measure_options measure{measure_method::automatic, 100, 20000};
};

/// HD-PCP: select beta on the chosen fold, then calibrate the radius with filtered batches.
inline calibrated_predictor hdpcp_calibrate(backbone_ptr model, const labeled_dataset& data, const pcp_config& config,
                                            const hdpcp_options& options = {})
{
    config.validate();
    require(model != nullptr, error_kind::precondition, "null backbone");
    const beta_grid grid{config.beta_grid};
    const auto& fold = options.fold == selection_fold::calibration ? data.splits().cal : data.splits().val;

    const auto beta = grid.values().size() == 1
        ? grid.values().front()
        : hdpcp_select_beta(*model, data, fold, grid, config, options.measure).beta;
    require(beta == 0.0 || model->has_density(), error_kind::capability, "HD-PCP needs a backbone with densities");

    auto scores = compute_scores(*model, data, data.splits().cal, config, beta);
    return calibrated_predictor{std::move(model), config, std::move(scores), beta};
}

// ---------------------------------------------------------------------------
// serialization: {"centers":[[...]],"radius":<real|"inf">,"norm":"l2"} (+ "intervals" when d = 1)

inline nlohmann::json to_json(const ball_union& set)
{
    nlohmann::json out;
    out["centers"] = set.centers();
    if (set.radius().is_infinite())
    {
        out["radius"] = "inf";
    }
    else
    {
        out["radius"] = set.radius().value();
    }
    out["norm"] = std::string{to_string(set.norm())};
    if (set.dim() == 1 && !set.radius().is_infinite())
    {
        auto intervals = nlohmann::json::array();
        for (const auto& piece : merged_intervals(set))
        {
            intervals.push_back({piece.lower, piece.upper});
        }
        out["intervals"] = std::move(intervals);
    }
    return out;
}

inline ball_union ball_union_from_json(const nlohmann::json& in)
{
    try
    {
        const auto& r = in.at("radius");
        const auto radius = r.is_string() && r.get<std::string>() == "inf"
            ? radius_t::infinite()
            : radius_t::finite(r.get<double>());
        return ball_union{in.at("centers").get<std::vector<vector_t>>(), radius, parse_norm(in.at("norm").get<std::string>())};
    }
    catch (const nlohmann::json::exception& e)
    {
        raise(error_kind::data, std::string{"malformed predictive set: "} + e.what());
    }
}

} // namespace pcp
