#pragma once

#include <pcp/bridge.hpp>
#include <pcp/config.hpp>
#include <pcp/eval.hpp>
#include <pcp/gmm.hpp>
#include <pcp/io.hpp>
#include <pcp/knn.hpp>
#include <pcp/predict.hpp>
#include <pcp/synth.hpp>

namespace pcp {

enum class method_kind
{
    pcp,
    hdpcp,
    naive_interval,
    bonferroni_naive,
};

inline std::string_view to_string(method_kind method)
{
    switch (method)
    {
    case method_kind::pcp:              return "pcp";
    case method_kind::hdpcp:            return "hdpcp";
    case method_kind::naive_interval:   return "naive_interval";
    case method_kind::bonferroni_naive: return "bonferroni_naive";
    }
    return "pcp";
}

inline method_kind parse_method(std::string_view name)
{
    for (const auto method : {method_kind::pcp, method_kind::hdpcp, method_kind::naive_interval, method_kind::bonferroni_naive})
    {
        if (to_string(method) == name)
        {
            return method;
        }
    }
    raise(error_kind::config, "unknown method '" + std::string{name} + "'");
}

struct backbone_config
{
    std::string kind{"gmm"};    ///< gmm | knn | bridge | truth | echo
    std::vector<std::size_t> components{1, 2, 4, 8};
    std::size_t max_iter{200};
    double tol{1e-6};
    std::size_t k_nn{10};
    double bandwidth{0.0};
    std::string command;
};

struct experiment_config
{
    std::optional<synth_spec> synth;
    std::string csv_path;
    split_fractions fractions{};
    std::optional<split_counts> counts;
    backbone_config backbone;
    pcp_config pcp;
    bool k_explicit{false};
    selection_fold beta_fold{selection_fold::calibration};
    method_kind method{method_kind::pcp};
    std::size_t repetitions{5};
    std::uint64_t seed{0};
    wsc_config wsc;
    measure_options measure;
    std::string output_dir{"run"};
    std::size_t save_sets{100};
};

namespace detail {

template <typename value_t>
void read_key(const nlohmann::json& node, const char* key, value_t& target)
{
    if (!node.is_object() || !node.contains(key))
    {
        return;
    }
    try
    {
        target = node.at(key).get<value_t>();
    }
    catch (const nlohmann::json::exception& e)
    {
        raise(error_kind::config, std::string{"key '"} + key + "': " + e.what());
    }
}

inline const nlohmann::json& section(const nlohmann::json& root, const char* key)
{
    static const nlohmann::json empty = nlohmann::json::object();
    if (root.is_object() && root.contains(key))
    {
        require(root.at(key).is_object(), error_kind::config, std::string{"'"} + key + "' must be a section");
        return root.at(key);
    }
    return empty;
}

} // namespace detail

inline synth_spec parse_synth_spec(const nlohmann::json& node)
{
    synth_spec spec;
    detail::read_key(node, "name", spec.name);
    detail::read_key(node, "n", spec.n);
    detail::read_key(node, "seed", spec.seed);
    detail::read_key(node, "noise", spec.noise);
    detail::read_key(node, "rho", spec.rho);
    detail::read_key(node, "target_dim", spec.target_dim);
    detail::read_key(node, "coefficient_seed", spec.coefficient_seed);
    detail::read_key(node, "separation", spec.separation);
    detail::read_key(node, "sigma", spec.sigma);
    spec.validate();
    return spec;
}

inline nlohmann::json to_json(const synth_spec& spec)
{
    return nlohmann::json{
        {"name", spec.name}, {"n", spec.n}, {"seed", spec.seed}, {"noise", spec.noise}, {"rho", spec.rho},
        {"target_dim", spec.target_dim}, {"coefficient_seed", spec.coefficient_seed},
        {"separation", spec.separation}, {"sigma", spec.sigma},
    };
}

inline experiment_config parse_experiment(const nlohmann::json& root)
{
    require(root.is_object(), error_kind::config, "config must be an object");
    experiment_config cfg;

    const auto& data = detail::section(root, "data");
    if (data.contains("synth"))
    {
        cfg.synth = parse_synth_spec(data.at("synth"));
    }
    detail::read_key(data, "csv", cfg.csv_path);
    require(cfg.synth.has_value() != !cfg.csv_path.empty(), error_kind::config, "data needs exactly one of 'synth' or 'csv'");

    const auto& split = detail::section(root, "split");
    detail::read_key(split, "train", cfg.fractions.train);
    detail::read_key(split, "val", cfg.fractions.val);
    detail::read_key(split, "cal", cfg.fractions.cal);
    detail::read_key(split, "test", cfg.fractions.test);
    (void)to_counts(1, cfg.fractions);
    if (root.contains("split_counts"))
    {
        const auto& counts = detail::section(root, "split_counts");
        split_counts c;
        detail::read_key(counts, "train", c.train);
        detail::read_key(counts, "val", c.val);
        detail::read_key(counts, "cal", c.cal);
        detail::read_key(counts, "test", c.test);
        cfg.counts = c;
    }

    const auto& bb = detail::section(root, "backbone");
    detail::read_key(bb, "kind", cfg.backbone.kind);
    if (bb.contains("components") && bb.at("components").is_number_integer())
    {
        const auto count = bb.at("components").get<std::int64_t>();
        require(count >= 1, error_kind::config, "components must be positive");
        cfg.backbone.components = {static_cast<std::size_t>(count)};
    }
    else
    {
        detail::read_key(bb, "components", cfg.backbone.components);
    }
    detail::read_key(bb, "max_iter", cfg.backbone.max_iter);
    detail::read_key(bb, "tol", cfg.backbone.tol);
    detail::read_key(bb, "k_nn", cfg.backbone.k_nn);
    detail::read_key(bb, "bandwidth", cfg.backbone.bandwidth);
    detail::read_key(bb, "command", cfg.backbone.command);
    static constexpr std::array kinds{"gmm", "knn", "bridge", "truth", "echo"};
    require(std::find(kinds.begin(), kinds.end(), cfg.backbone.kind) != kinds.end(), error_kind::config,
            "unknown backbone kind '" + cfg.backbone.kind + "'");
    require(cfg.backbone.kind != "bridge" || !cfg.backbone.command.empty(), error_kind::config, "bridge backbone needs a command");
    require(cfg.backbone.kind != "truth" || cfg.synth.has_value(), error_kind::config, "truth backbone needs synthetic data");

    detail::read_key(root, "seed", cfg.seed);
    detail::read_key(root, "repetitions", cfg.repetitions);
    require(cfg.repetitions >= 1, error_kind::config, "repetitions must be at least 1");
    detail::read_key(root, "output", cfg.output_dir);
    detail::read_key(root, "save_sets", cfg.save_sets);
    std::string method{"pcp"};
    detail::read_key(root, "method", method);
    cfg.method = parse_method(method);

    const auto& pcp = detail::section(root, "pcp");
    detail::read_key(pcp, "alpha", cfg.pcp.alpha);
    if (pcp.contains("k"))
    {
        detail::read_key(pcp, "k", cfg.pcp.k_samples);
        cfg.k_explicit = true;
    }
    std::string norm{"l2"};
    detail::read_key(pcp, "norm", norm);
    cfg.pcp.norm = parse_norm(norm);
    std::string mode{"auto"};
    detail::read_key(pcp, "quantile_mode", mode);
    cfg.pcp.mode = mode == "auto" ? std::nullopt : std::optional{parse_quantile_mode(mode)};
    cfg.pcp.beta_grid = cfg.method == method_kind::hdpcp ? beta_grid::standard().values() : std::vector<double>{0.0};
    detail::read_key(pcp, "beta_grid", cfg.pcp.beta_grid);
    if (pcp.contains("beta") && pcp.at("beta").is_number())
    {
        cfg.pcp.beta_grid = {pcp.at("beta").get<double>()};
    }
    std::string fold{"cal"};
    detail::read_key(pcp, "beta_fold", fold);
    require(fold == "cal" || fold == "val", error_kind::config, "beta_fold must be 'cal' or 'val'");
    cfg.beta_fold = fold == "cal" ? selection_fold::calibration : selection_fold::validation;
    cfg.pcp.validate();

    const auto& wsc = detail::section(root, "wsc");
    detail::read_key(wsc, "delta", cfg.wsc.delta);
    detail::read_key(wsc, "n_directions", cfg.wsc.n_directions);
    detail::read_key(wsc, "split_fraction", cfg.wsc.split_fraction);
    cfg.wsc.validate();

    const auto& measure = detail::section(root, "measure");
    std::string estimator{"auto"};
    detail::read_key(measure, "method", estimator);
    cfg.measure.method = parse_measure_method(estimator);
    detail::read_key(measure, "grid_cells", cfg.measure.grid_cells);
    detail::read_key(measure, "mc_points", cfg.measure.mc_points);
    return cfg;
}

/// Resolved configuration, echoed next to the results.
inline nlohmann::json to_json(const experiment_config& cfg)
{
    nlohmann::json out;
    if (cfg.synth)
    {
        out["data"]["synth"] = to_json(*cfg.synth);
    }
    else
    {
        out["data"]["csv"] = cfg.csv_path;
    }
    out["split"] = {{"train", cfg.fractions.train}, {"val", cfg.fractions.val}, {"cal", cfg.fractions.cal}, {"test", cfg.fractions.test}};
    if (cfg.counts)
    {
        out["split_counts"] = {{"train", cfg.counts->train}, {"val", cfg.counts->val}, {"cal", cfg.counts->cal}, {"test", cfg.counts->test}};
    }
    out["backbone"] = {
        {"kind", cfg.backbone.kind}, {"components", cfg.backbone.components}, {"max_iter", cfg.backbone.max_iter},
        {"tol", cfg.backbone.tol}, {"k_nn", cfg.backbone.k_nn}, {"bandwidth", cfg.backbone.bandwidth},
        {"command", cfg.backbone.command},
    };
    out["pcp"] = {
        {"alpha", cfg.pcp.alpha}, {"k", cfg.pcp.k_samples}, {"norm", std::string{to_string(cfg.pcp.norm)}},
        {"quantile_mode", cfg.pcp.mode ? std::string{to_string(*cfg.pcp.mode)} : std::string{"auto"}},
        {"beta_grid", cfg.pcp.beta_grid},
        {"beta_fold", cfg.beta_fold == selection_fold::calibration ? "cal" : "val"},
    };
    out["method"] = std::string{to_string(cfg.method)};
    out["repetitions"] = cfg.repetitions;
    out["seed"] = cfg.seed;
    out["wsc"] = {{"delta", cfg.wsc.delta}, {"n_directions", cfg.wsc.n_directions}, {"split_fraction", cfg.wsc.split_fraction}};
    out["measure"] = {{"method", std::string{to_string(cfg.measure.method)}}, {"grid_cells", cfg.measure.grid_cells},
                      {"mc_points", cfg.measure.mc_points}};
    out["output"] = cfg.output_dir;
    out["save_sets"] = cfg.save_sets;
    return out;
}

/// Per-dimension box [lower, upper]; used by the naive baselines.
struct box_set
{
    vector_t lower;
    vector_t upper;

    bool contains(std::span<const double> y) const
    {
        for (std::size_t j = 0; j < y.size(); ++ j)
        {
            if (!(y[j] >= lower[j] && y[j] <= upper[j]))
            {
                return false;
            }
        }
        return true;
    }

    double measure() const
    {
        double v = 1.0;
        for (std::size_t j = 0; j < lower.size(); ++ j)
        {
            v *= std::max(0.0, upper[j] - lower[j]);
        }
        return v;
    }

    nlohmann::json to_json() const
    {
        auto to_value = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(v > 0 ? "inf" : "-inf"); };
        nlohmann::json lo = nlohmann::json::array();
        nlohmann::json hi = nlohmann::json::array();
        for (std::size_t j = 0; j < lower.size(); ++ j)
        {
            lo.push_back(to_value(lower[j]));
            hi.push_back(to_value(upper[j]));
        }
        nlohmann::json out{{"box", {{"lower", lo}, {"upper", hi}}}};
        if (lower.size() == 1 && std::isfinite(lower[0]) && std::isfinite(upper[0]) && lower[0] <= upper[0])
        {
            out["intervals"] = nlohmann::json::array({nlohmann::json::array({lower[0], upper[0]})});
        }
        return out;
    }
};

struct experiment_result
{
    std::size_t target_dim{0};
    std::vector<coverage_report> reports;
    std::vector<nlohmann::json> sets;                   ///< per repetition
    std::vector<std::optional<score_vector>> scores;    ///< per repetition (ball-union methods)
};

namespace detail {

inline backbone_ptr make_backbone(const experiment_config& cfg, const labeled_dataset& data, std::uint64_t seed,
                                  const backbone_ptr& shared_bridge)
{
    const auto& b = cfg.backbone;
    if (b.kind == "gmm")
    {
        return fit_gmm_backbone(data, data.splits().train, data.splits().val, {b.components, seed, b.max_iter, b.tol}).backbone;
    }
    if (b.kind == "knn")
    {
        return std::make_shared<knn_resampler>(data.slice(data.splits().train), b.k_nn, vector_t(data.target_dim(), b.bandwidth));
    }
    if (b.kind == "truth")
    {
        return make_truth_backbone(*cfg.synth);
    }
    if (b.kind == "echo")
    {
        const auto d = data.target_dim();
        return make_point_mass(data.covariate_dim(), d, [d](std::span<const double> x) { return vector_t(d, x[0]); });
    }
    return shared_bridge;
}

/// (lower, upper) empirical sample quantiles of one target coordinate.
inline std::pair<double, double> sample_band(const sample_batch& batch, std::size_t j, double miscoverage)
{
    vector_t column;
    column.reserve(batch.size());
    for (const auto& s : batch.samples())
    {
        column.push_back(s[j]);
    }
    return {empirical_quantile(column, 0.5 * miscoverage), empirical_quantile(column, 1.0 - 0.5 * miscoverage)};
}

struct box_calibration
{
    vector_t threshold;     ///< one per coordinate (bonferroni) or a single shared value
};

/// Split-conformal box baselines: sample-quantile bands widened by a calibrated margin.
/// naive_interval conformalizes max_j of the band violations jointly at alpha;
/// bonferroni_naive conformalizes each coordinate at alpha / d.
inline box_calibration calibrate_box(const backbone& model, const labeled_dataset& data, const pcp_config& pcfg, bool per_dimension)
{
    const auto& cal = data.splits().cal;
    require(!cal.empty(), error_kind::precondition, "calibration fold is empty");
    const auto d = data.target_dim();
    const auto level = per_dimension ? bonferroni_level(pcfg.alpha, d) : pcfg.alpha;

    std::vector<vector_t> violations(cal.size(), vector_t(d));
    parallel_for(cal.size(), [&](std::size_t i)
    {
        const auto& point = data[cal[i]];
        auto rng = make_rng(pcfg.seed, stream::calibration, cal[i]);
        const auto batch = model.sample(point.x(), pcfg.k_samples, rng);
        for (std::size_t j = 0; j < d; ++ j)
        {
            const auto [lo, hi] = sample_band(batch, j, level);
            violations[i][j] = std::max(lo - point.y()[j], point.y()[j] - hi);
        }
    });

    box_calibration out;
    if (per_dimension)
    {
        for (std::size_t j = 0; j < d; ++ j)
        {
            vector_t column;
            for (const auto& v : violations)
            {
                column.push_back(v[j]);
            }
            out.threshold.push_back(conformal_quantile(column, level, pcfg.mode));
        }
    }
    else
    {
        vector_t joint;
        for (const auto& v : violations)
        {
            joint.push_back(*std::max_element(v.begin(), v.end()));
        }
        out.threshold.assign(d, conformal_quantile(joint, level, pcfg.mode));
    }
    return out;
}

inline box_set predict_box(const backbone& model, const box_calibration& calib, std::span<const double> x, std::size_t index,
                           const pcp_config& pcfg, bool per_dimension)
{
    const auto d = model.target_dim();
    const auto level = per_dimension ? bonferroni_level(pcfg.alpha, d) : pcfg.alpha;
    auto rng = make_rng(pcfg.seed, stream::test, index);
    const auto batch = model.sample(x, pcfg.k_samples, rng);
    box_set out{vector_t(d), vector_t(d)};
    for (std::size_t j = 0; j < d; ++ j)
    {
        const auto [lo, hi] = sample_band(batch, j, level);
        out.lower[j] = lo - calib.threshold[j];
        out.upper[j] = hi + calib.threshold[j];
    }
    return out;
}

inline nlohmann::json measure_json(double m)
{
    return std::isfinite(m) ? nlohmann::json(m) : nlohmann::json("inf");
}

} // namespace detail

inline labeled_dataset load_experiment_data(const experiment_config& cfg)
{
    return cfg.synth ? generate(*cfg.synth) : read_dataset_csv(std::filesystem::path{cfg.csv_path});
}

/// One report per repetition; repetition r uses its own split, fit and sampling streams
/// derived from (seed, r), so results do not depend on scheduling.
inline experiment_result run_experiment(const experiment_config& input)
{
    auto cfg = input;
    const auto data = load_experiment_data(cfg);
    const auto d = data.target_dim();
    if (!cfg.k_explicit)
    {
        cfg.pcp.k_samples = d == 1 ? 40 : 1000;
    }
    const auto counts = cfg.counts.value_or(to_counts(data.size(), cfg.fractions));
    require(counts.cal >= 1 && counts.test >= 1, error_kind::config, "calibration and test folds must be nonempty");

    backbone_ptr bridge;
    if (cfg.backbone.kind == "bridge")
    {
        bridge = std::make_shared<bridge_backbone>(cfg.backbone.command);
        require(bridge->covariate_dim() == data.covariate_dim() && bridge->target_dim() == d, error_kind::protocol,
                "bridge dimensions disagree with the dataset");
    }

    experiment_result result;
    result.target_dim = d;
    result.reports.resize(cfg.repetitions);
    result.sets.resize(cfg.repetitions);
    result.scores.resize(cfg.repetitions);

    parallel_for(cfg.repetitions, [&](std::size_t rep)
    {
        const auto rep_seed = derive_seed(cfg.seed, stream::repetition, rep);
        const auto split = data.with_split(make_split(data.size(), rep_seed, counts), rep_seed);
        const auto model = detail::make_backbone(cfg, split, rep_seed, bridge);
        auto pcfg = cfg.pcp;
        pcfg.seed = rep_seed;

        const auto& test = split.splits().test;
        std::vector<vector_t> xs;
        std::vector<bool> covered_v;
        std::vector<double> measures;
        nlohmann::json points = nlohmann::json::array();

        const auto record = [&](std::size_t index, bool covered, double measure, nlohmann::json set)
        {
            xs.push_back(split[index].x());
            covered_v.push_back(covered);
            measures.push_back(measure);
            if (points.size() < cfg.save_sets)
            {
                points.push_back({{"index", index}, {"x", split[index].x()}, {"y", split[index].y()}, {"covered", covered},
                                  {"measure", detail::measure_json(measure)}, {"set", std::move(set)}});
            }
        };

        if (cfg.method == method_kind::pcp || cfg.method == method_kind::hdpcp)
        {
            if (cfg.method == method_kind::pcp)
            {
                pcfg.beta_grid = {0.0};
            }
            const auto predictor = cfg.method == method_kind::pcp
                ? pcp_calibrate(model, split, pcfg)
                : hdpcp_calibrate(model, split, pcfg, {cfg.beta_fold, {measure_method::automatic, cfg.measure.grid_cells, 20000}});
            result.scores[rep] = predictor.scores();

            std::vector<std::pair<bool, double>> outcome(test.size());
            std::vector<nlohmann::json> sets(test.size());
            parallel_for(test.size(), [&](std::size_t t)
            {
                const auto& point = split[test[t]];
                const auto set = pcp_predict_point(predictor, point.x(), test[t]);
                auto quadrature = make_rng(rep_seed, stream::quadrature, test[t]);
                outcome[t] = {contains(set, point.y()), set_measure(set, cfg.measure, quadrature)};
                if (t < cfg.save_sets)
                {
                    sets[t] = to_json(set);
                }
            });
            for (std::size_t t = 0; t < test.size(); ++ t)
            {
                record(test[t], outcome[t].first, outcome[t].second, std::move(sets[t]));
            }
        }
        else
        {
            const auto per_dimension = cfg.method == method_kind::bonferroni_naive;
            const auto calib = detail::calibrate_box(*model, split, pcfg, per_dimension);
            for (const auto index : test)
            {
                const auto set = detail::predict_box(*model, calib, split[index].x(), index, pcfg, per_dimension);
                record(index, set.contains(split[index].y()), set.measure(), set.to_json());
            }
        }

        auto wsc = cfg.wsc;
        wsc.seed = rep_seed;
        result.reports[rep] = make_report(xs, covered_v, measures, wsc);
        result.sets[rep] = {{"method", std::string{to_string(cfg.method)}}, {"repetition", rep}, {"p", data.covariate_dim()},
                            {"d", d}, {"points", std::move(points)}};
    });
    return result;
}

struct aggregate_row
{
    std::size_t repetitions{0};
    size_stats marginal;
    size_stats conditional;
    size_stats set_size;
    std::size_t n_infinite{0};
};

/// Mean and standard error of each metric across repetitions.
inline aggregate_row aggregate_reports(std::span<const coverage_report> reports)
{
    require(!reports.empty(), error_kind::precondition, "no reports to aggregate");
    vector_t marginal;
    vector_t conditional;
    vector_t sizes;
    aggregate_row row;
    row.repetitions = reports.size();
    for (const auto& r : reports)
    {
        marginal.push_back(r.marginal_coverage);
        conditional.push_back(r.conditional_coverage);
        sizes.push_back(r.mean_set_size);
        row.n_infinite += r.n_infinite;
    }
    row.marginal = set_size_stats(marginal);
    row.conditional = set_size_stats(conditional);
    row.set_size = set_size_stats(sizes);
    return row;
}

inline constexpr const char* aggregate_csv_header =
    "method,repetitions,marginal_coverage,marginal_coverage_se,conditional_coverage,conditional_coverage_se,"
    "mean_set_size,mean_set_size_se,n_infinite";

/// Writes config_echo.json, reports.csv, aggregate.csv, sets/rep_NNN.json and scores/rep_NNN.csv.
inline void write_experiment_outputs(const experiment_config& cfg, const experiment_result& result,
                                     const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    auto echo = to_json(cfg);
    if (!cfg.k_explicit)
    {
        echo["pcp"]["k"] = result.target_dim == 1 ? 40 : 1000;
    }
    write_file_atomic(dir / "config_echo.json", echo.dump(2) + "\n");

    const auto method = std::string{to_string(cfg.method)};
    std::string reports = std::string{"repetition,method,"} + report_csv_header + "\n";
    for (std::size_t rep = 0; rep < result.reports.size(); ++ rep)
    {
        reports += std::to_string(rep) + "," + method + "," + to_csv_row(result.reports[rep]) + "\n";
    }
    write_file_atomic(dir / "reports.csv", reports);

    const auto agg = aggregate_reports(result.reports);
    std::string aggregate = std::string{aggregate_csv_header} + "\n" + method + "," + std::to_string(agg.repetitions) + ","
        + format_real(agg.marginal.mean) + "," + format_real(agg.marginal.standard_error) + ","
        + format_real(agg.conditional.mean) + "," + format_real(agg.conditional.standard_error) + ","
        + format_real(agg.set_size.mean) + "," + format_real(agg.set_size.standard_error) + ","
        + std::to_string(agg.n_infinite) + "\n";
    write_file_atomic(dir / "aggregate.csv", aggregate);

    for (std::size_t rep = 0; rep < result.sets.size(); ++ rep)
    {
        char name[32];
        std::snprintf(name, sizeof(name), "rep_%03zu", rep);
        write_file_atomic(dir / "sets" / (std::string{name} + ".json"), result.sets[rep].dump() + "\n");
        if (result.scores[rep])
        {
            std::ostringstream scores;
            write_scores_csv(scores, *result.scores[rep]);
            write_file_atomic(dir / "scores" / (std::string{name} + ".csv"), scores.str());
        }
    }
}

} // namespace pcp
