#include <pcp/experiment.hpp>
#include <pcp/plot.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

int exit_code(pcp::error_kind kind)
{
    switch (kind)
    {
    case pcp::error_kind::config:
    case pcp::error_kind::capability:
        return 2;
    case pcp::error_kind::protocol:
        return 4;
    default:
        return 3;
    }
}

/// "name=two_mode,n=500,seed=3" or a path to a JSON / key-value file.
nlohmann::json synth_spec_json(const std::string& text)
{
    if (std::filesystem::exists(text))
    {
        auto doc = pcp::load_config_file(text);
        if (doc.contains("data") && doc["data"].contains("synth"))
        {
            return doc["data"]["synth"];
        }
        return doc.contains("synth") ? doc["synth"] : doc;
    }
    nlohmann::json spec = nlohmann::json::object();
    std::istringstream parts{text};
    std::string part;
    while (std::getline(parts, part, ','))
    {
        pcp::apply_override(spec, part);
    }
    return spec;
}

int run_verb(const std::string& config_path, const std::vector<std::string>& overrides, const std::string& out)
{
    auto doc = pcp::load_config_file(config_path);
    for (const auto& o : overrides)
    {
        pcp::apply_override(doc, o);
    }
    if (!out.empty())
    {
        doc["output"] = out;
    }
    const auto cfg = pcp::parse_experiment(doc);
    const auto result = pcp::run_experiment(cfg);
    pcp::write_experiment_outputs(cfg, result, cfg.output_dir);

    const auto agg = pcp::aggregate_reports(result.reports);
    std::cout << pcp::to_string(cfg.method) << ": " << agg.repetitions << " repetitions, marginal coverage "
              << pcp::format_real(agg.marginal.mean) << " (se " << pcp::format_real(agg.marginal.standard_error)
              << "), conditional " << pcp::format_real(agg.conditional.mean) << ", mean set size "
              << pcp::format_real(agg.set_size.mean) << " (se " << pcp::format_real(agg.set_size.standard_error) << ")\n"
              << "results in " << cfg.output_dir << "\n";
    return 0;
}

int plot_verb(const std::string& run_dir, bool pairwise, std::size_t max_sets)
{
    const auto written = pcp::plot_sets(run_dir, {pairwise, max_sets});
    for (const auto& path : written)
    {
        std::cout << path.string() << "\n";
    }

    const auto echo = pcp::load_config_file(std::filesystem::path{run_dir} / "sets" / "rep_000.json");
    if (echo.value("d", 0) == 1)
    {
        std::string table = "components,count\n";
        for (const auto& [components, count] : pcp::interval_histogram(run_dir))
        {
            table += std::to_string(components) + "," + std::to_string(count) + "\n";
        }
        const auto path = std::filesystem::path{run_dir} / "plots" / "interval_histogram.csv";
        pcp::write_file_atomic(path, table);
        std::cout << path.string() << "\n";
    }
    return 0;
}

int gen_verb(const std::string& spec_text, const std::string& out)
{
    const auto spec = pcp::parse_synth_spec(synth_spec_json(spec_text));
    const auto data = pcp::generate(spec);
    std::ostringstream csv;
    pcp::write_dataset_csv(csv, data);
    if (out.empty())
    {
        std::cout << csv.str();
    }
    else
    {
        pcp::write_file_atomic(out, csv.str());
    }
    return 0;
}

int bridge_test_verb(const std::string& command)
{
    const pcp::bridge_backbone bridge{command};
    std::cout << "handshake ok: p=" << bridge.covariate_dim() << " d=" << bridge.target_dim()
              << " has_density=" << (bridge.has_density() ? "true" : "false") << "\n";

    const pcp::vector_t x(bridge.covariate_dim(), 0.0);
    auto first_rng = pcp::make_rng(1, pcp::stream::test);
    auto second_rng = pcp::make_rng(1, pcp::stream::test);
    const auto first = bridge.sample(x, 3, first_rng);
    const auto second = bridge.sample(x, 3, second_rng);
    if (first.samples() != second.samples())
    {
        std::cerr << "bridge-test: identical seeds produced different samples\n";
        return 4;
    }
    std::cout << "sample ok: k=3, deterministic under a fixed seed\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Probabilistic conformal prediction with sample-based ball-union sets"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out;
    auto* run = app.add_subcommand("run", "run an experiment config (JSON or key-value); --key.path=value overrides");
    run->add_option("config", config_path, "config file")->required();
    run->add_option("--out", out, "output directory (overrides 'output')");
    run->allow_extras();

    std::string run_dir;
    bool pairwise = false;
    std::size_t max_sets = 3;
    auto* plot = app.add_subcommand("plot", "render SVG plots of a run's predictive sets");
    plot->add_option("run-dir", run_dir, "directory written by 'run'")->required();
    plot->add_flag("--pairwise", pairwise, "draw every target pair when d > 2");
    plot->add_option("--max-sets", max_sets, "test points whose balls are drawn in 2-D panels");

    std::string spec;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset as CSV");
    gen->add_option("spec", spec, "spec file or inline name=...,n=...,seed=...")->required();
    gen->add_option("--out", gen_out, "output CSV path (stdout when absent)");

    std::string command;
    auto* bridge = app.add_subcommand("bridge-test", "check an external backbone speaks the bridge protocol");
    bridge->add_option("command", command, "shell command starting the backbone process")->required();

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const auto code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try
    {
        if (*run)
        {
            return run_verb(config_path, run->remaining(), out);
        }
        if (*plot)
        {
            return plot_verb(run_dir, pairwise, max_sets);
        }
        if (*gen)
        {
            return gen_verb(spec, gen_out);
        }
        return bridge_test_verb(command);
    }
    catch (const pcp::error& e)
    {
        std::cerr << "pcp: " << e.what() << "\n";
        return exit_code(e.kind());
    }
    catch (const std::exception& e)
    {
        std::cerr << "pcp: " << e.what() << "\n";
        return 3;
    }
}
