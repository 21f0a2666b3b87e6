#pragma once

#include <pcp/io.hpp>
#include <pcp/predict.hpp>

#include <json.hpp>

#include <cstdio>
#include <map>

namespace pcp {

struct plot_options
{
    bool pairwise{false};
    std::size_t max_ball_sets{3};   ///< test points whose balls are outlined in 2-D panels
};

namespace detail {

struct plot_point
{
    vector_t x;
    vector_t y;
    bool covered{false};
    nlohmann::json set;
};

struct run_sets
{
    std::string name;
    std::size_t d{0};
    std::vector<plot_point> points;
};

inline std::vector<run_sets> read_run_sets(const std::filesystem::path& run_dir)
{
    const auto dir = run_dir / "sets";
    require(std::filesystem::is_directory(dir), error_kind::data, "'" + dir.string() + "' does not exist");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator{dir})
    {
        if (entry.path().extension() == ".json")
        {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    require(!files.empty(), error_kind::data, "no predictive sets under '" + dir.string() + "'");

    std::vector<run_sets> out;
    for (const auto& file : files)
    {
        std::ifstream in{file};
        nlohmann::json doc;
        try
        {
            doc = nlohmann::json::parse(in);
            run_sets sets;
            sets.name = file.stem().string();
            sets.d = doc.at("d").get<std::size_t>();
            for (const auto& p : doc.at("points"))
            {
                sets.points.push_back({p.at("x").get<vector_t>(), p.at("y").get<vector_t>(), p.at("covered").get<bool>(), p.at("set")});
            }
            out.push_back(std::move(sets));
        }
        catch (const nlohmann::json::exception& e)
        {
            raise(error_kind::data, "malformed sets file '" + file.string() + "': " + e.what());
        }
    }
    return out;
}

inline std::string fmt(double v)
{
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.3f", v);
    return buffer;
}

/// Linear map from data coordinates to a fixed 480 x 360 plotting area.
class canvas
{
public:
    canvas(double x_lo, double x_hi, double y_lo, double y_hi)
    {
        const auto pad = [](double& lo, double& hi)
        {
            if (!(hi > lo))
            {
                lo -= 1.0;
                hi += 1.0;
            }
            const auto margin = 0.05 * (hi - lo);
            lo -= margin;
            hi += margin;
        };
        pad(x_lo, x_hi);
        pad(y_lo, y_hi);
        m_x_lo = x_lo;
        m_x_hi = x_hi;
        m_y_lo = y_lo;
        m_y_hi = y_hi;
    }

    double px(double x) const { return left + (x - m_x_lo) / (m_x_hi - m_x_lo) * width; }
    double py(double y) const { return top + (m_y_hi - y) / (m_y_hi - m_y_lo) * height; }
    double sx(double dx) const { return dx / (m_x_hi - m_x_lo) * width; }
    double sy(double dy) const { return dy / (m_y_hi - m_y_lo) * height; }
    double y_lo() const { return m_y_lo; }
    double y_hi() const { return m_y_hi; }

    std::string open(const std::string& x_label, const std::string& y_label, const std::string& title) const
    {
        std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"560\" height=\"440\" viewBox=\"0 0 560 440\">\n";
        s += "<rect x=\"0\" y=\"0\" width=\"560\" height=\"440\" fill=\"white\"/>\n";
        s += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(width) + "\" height=\"" + fmt(height)
            + "\" fill=\"none\" stroke=\"black\"/>\n";
        s += "<text x=\"280\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" + title + "</text>\n";
        s += "<text x=\"" + fmt(left + width / 2) + "\" y=\"425\" text-anchor=\"middle\" font-size=\"12\">" + x_label + "</text>\n";
        s += "<text x=\"16\" y=\"" + fmt(top + height / 2) + "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
            + fmt(top + height / 2) + ")\">" + y_label + "</text>\n";
        s += "<text x=\"" + fmt(left) + "\" y=\"" + fmt(top + height + 16) + "\" font-size=\"10\">" + fmt(m_x_lo) + "</text>\n";
        s += "<text x=\"" + fmt(left + width) + "\" y=\"" + fmt(top + height + 16) + "\" text-anchor=\"end\" font-size=\"10\">" + fmt(m_x_hi) + "</text>\n";
        s += "<text x=\"" + fmt(left - 4) + "\" y=\"" + fmt(top + height) + "\" text-anchor=\"end\" font-size=\"10\">" + fmt(m_y_lo) + "</text>\n";
        s += "<text x=\"" + fmt(left - 4) + "\" y=\"" + fmt(top + 10) + "\" text-anchor=\"end\" font-size=\"10\">" + fmt(m_y_hi) + "</text>\n";
        return s;
    }

    static constexpr double left = 60.0;
    static constexpr double top = 40.0;
    static constexpr double width = 480.0;
    static constexpr double height = 360.0;

private:
    double m_x_lo{0.0};
    double m_x_hi{1.0};
    double m_y_lo{0.0};
    double m_y_hi{1.0};
};

inline std::string marker(const canvas& c, double x, double y, bool covered)
{
    // red: covered, blue: missed
    return "<circle class=\"test\" cx=\"" + fmt(c.px(x)) + "\" cy=\"" + fmt(c.py(y)) + "\" r=\"2.5\" fill=\""
        + (covered ? "#d62728" : "#1f77b4") + "\"/>\n";
}

inline double parse_bound(const nlohmann::json& v)
{
    if (v.is_string())
    {
        return v.get<std::string>() == "-inf" ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    }
    return v.get<double>();
}

inline std::vector<interval> set_intervals(const nlohmann::json& set)
{
    std::vector<interval> out;
    if (set.contains("intervals"))
    {
        for (const auto& piece : set.at("intervals"))
        {
            out.push_back({piece.at(0).get<double>(), piece.at(1).get<double>()});
        }
    }
    return out;
}

inline bool unbounded(const nlohmann::json& set)
{
    if (set.contains("radius"))
    {
        return set.at("radius").is_string();
    }
    for (const auto& v : set.at("box").at("lower"))
    {
        if (v.is_string())
        {
            return true;
        }
    }
    return false;
}

inline double mean_components(const run_sets& sets)
{
    double total = 0.0;
    for (const auto& p : sets.points)
    {
        total += static_cast<double>(set_intervals(p.set).size());
    }
    return total / static_cast<double>(sets.points.size());
}

inline std::string title_for(const run_sets& sets)
{
    std::size_t covered = 0;
    for (const auto& p : sets.points)
    {
        covered += p.covered ? 1U : 0U;
    }
    return sets.name + ": coverage " + fmt(static_cast<double>(covered) / static_cast<double>(sets.points.size()))
        + " on " + std::to_string(sets.points.size()) + " test points";
}

inline std::string plot_scalar(const run_sets& sets)
{
    double x_lo = std::numeric_limits<double>::infinity();
    double x_hi = -x_lo;
    double y_lo = x_lo;
    double y_hi = -x_lo;
    for (const auto& p : sets.points)
    {
        x_lo = std::min(x_lo, p.x[0]);
        x_hi = std::max(x_hi, p.x[0]);
        y_lo = std::min(y_lo, p.y[0]);
        y_hi = std::max(y_hi, p.y[0]);
        for (const auto& piece : set_intervals(p.set))
        {
            y_lo = std::min(y_lo, piece.lower);
            y_hi = std::max(y_hi, piece.upper);
        }
    }
    const canvas c{x_lo, x_hi, y_lo, y_hi};
    auto svg = c.open("x0", "y0", title_for(sets) + ", mean intervals " + fmt(mean_components(sets)));
    for (const auto& p : sets.points)
    {
        const auto x = fmt(c.px(p.x[0]));
        std::vector<interval> pieces = unbounded(p.set) ? std::vector<interval>{{c.y_lo(), c.y_hi()}} : set_intervals(p.set);
        for (const auto& piece : pieces)
        {
            svg += "<line class=\"set\" x1=\"" + x + "\" y1=\"" + fmt(c.py(std::max(piece.lower, c.y_lo()))) + "\" x2=\"" + x
                + "\" y2=\"" + fmt(c.py(std::min(piece.upper, c.y_hi()))) + "\" stroke=\"#1f77b4\" stroke-opacity=\"0.6\" stroke-width=\"1.5\"/>\n";
        }
    }
    for (const auto& p : sets.points)
    {
        svg += marker(c, p.x[0], p.y[0], p.covered);
    }
    return svg + "</svg>\n";
}

/// One 2-D panel over target coordinates (a, b): element regions of the first few sets and the test scatter.
inline std::string plot_pair(const run_sets& sets, std::size_t a, std::size_t b, const plot_options& options)
{
    double lo[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    double hi[2] = {-lo[0], -lo[1]};
    const auto extend = [&](double u, double v)
    {
        lo[0] = std::min(lo[0], u);
        hi[0] = std::max(hi[0], u);
        lo[1] = std::min(lo[1], v);
        hi[1] = std::max(hi[1], v);
    };
    for (const auto& p : sets.points)
    {
        extend(p.y[a], p.y[b]);
    }
    const auto shown = std::min(options.max_ball_sets, sets.points.size());
    for (std::size_t i = 0; i < shown; ++ i)
    {
        const auto& set = sets.points[i].set;
        if (unbounded(set))
        {
            continue;
        }
        if (set.contains("centers"))
        {
            const auto r = set.at("radius").get<double>();
            for (const auto& center : set.at("centers"))
            {
                extend(center.at(a).get<double>() - r, center.at(b).get<double>() - r);
                extend(center.at(a).get<double>() + r, center.at(b).get<double>() + r);
            }
        }
        else
        {
            extend(parse_bound(set.at("box").at("lower").at(a)), parse_bound(set.at("box").at("lower").at(b)));
            extend(parse_bound(set.at("box").at("upper").at(a)), parse_bound(set.at("box").at("upper").at(b)));
        }
    }

    const canvas c{lo[0], hi[0], lo[1], hi[1]};
    auto svg = c.open("y" + std::to_string(a), "y" + std::to_string(b), title_for(sets));
    for (std::size_t i = 0; i < shown; ++ i)
    {
        const auto& set = sets.points[i].set;
        if (unbounded(set))
        {
            continue;
        }
        if (set.contains("centers"))
        {
            const auto r = set.at("radius").get<double>();
            const auto norm = parse_norm(set.at("norm").get<std::string>());
            for (const auto& center : set.at("centers"))
            {
                const auto u = center.at(a).get<double>();
                const auto v = center.at(b).get<double>();
                if (norm == norm_kind::linf)
                {
                    svg += "<rect class=\"ball\" x=\"" + fmt(c.px(u - r)) + "\" y=\"" + fmt(c.py(v + r)) + "\" width=\"" + fmt(c.sx(2 * r))
                        + "\" height=\"" + fmt(c.sy(2 * r)) + "\" fill=\"none\" stroke=\"#1f77b4\" stroke-opacity=\"0.4\"/>\n";
                }
                else if (norm == norm_kind::l1)
                {
                    svg += "<polygon class=\"ball\" points=\"" + fmt(c.px(u - r)) + "," + fmt(c.py(v)) + " " + fmt(c.px(u)) + "," + fmt(c.py(v + r))
                        + " " + fmt(c.px(u + r)) + "," + fmt(c.py(v)) + " " + fmt(c.px(u)) + "," + fmt(c.py(v - r))
                        + "\" fill=\"none\" stroke=\"#1f77b4\" stroke-opacity=\"0.4\"/>\n";
                }
                else
                {
                    svg += "<ellipse class=\"ball\" cx=\"" + fmt(c.px(u)) + "\" cy=\"" + fmt(c.py(v)) + "\" rx=\"" + fmt(c.sx(r)) + "\" ry=\""
                        + fmt(c.sy(r)) + "\" fill=\"none\" stroke=\"#1f77b4\" stroke-opacity=\"0.4\"/>\n";
                }
            }
        }
        else
        {
            const auto x0 = parse_bound(set.at("box").at("lower").at(a));
            const auto y0 = parse_bound(set.at("box").at("lower").at(b));
            const auto x1 = parse_bound(set.at("box").at("upper").at(a));
            const auto y1 = parse_bound(set.at("box").at("upper").at(b));
            svg += "<rect class=\"box\" x=\"" + fmt(c.px(x0)) + "\" y=\"" + fmt(c.py(y1)) + "\" width=\"" + fmt(c.sx(x1 - x0))
                + "\" height=\"" + fmt(c.sy(y1 - y0)) + "\" fill=\"none\" stroke=\"#1f77b4\"/>\n";
        }
    }
    for (const auto& p : sets.points)
    {
        svg += marker(c, p.y[a], p.y[b], p.covered);
    }
    return svg + "</svg>\n";
}

} // namespace detail

/// Renders every saved repetition to <run_dir>/plots/*.svg and returns the written paths.
/// d = 1: one interval panel per repetition; d = 2: one ball panel; d > 2 needs pairwise mode,
/// which writes one panel per target pair.
inline std::vector<std::filesystem::path> plot_sets(const std::filesystem::path& run_dir, const plot_options& options = {})
{
    const auto runs = detail::read_run_sets(run_dir);
    for (const auto& sets : runs)
    {
        require(!sets.points.empty(), error_kind::data, "repetition '" + sets.name + "' has no test points to plot");
        require(sets.d <= 2 || options.pairwise, error_kind::config,
                "d = " + std::to_string(sets.d) + " cannot be drawn directly; rerun with --pairwise for 2-D projections");
    }

    std::vector<std::pair<std::filesystem::path, std::string>> pending;
    for (const auto& sets : runs)
    {
        if (sets.d == 1)
        {
            pending.emplace_back(run_dir / "plots" / (sets.name + ".svg"), detail::plot_scalar(sets));
        }
        else if (sets.d == 2 && !options.pairwise)
        {
            pending.emplace_back(run_dir / "plots" / (sets.name + ".svg"), detail::plot_pair(sets, 0, 1, options));
        }
        else
        {
            for (std::size_t a = 0; a < sets.d; ++ a)
            {
                for (std::size_t b = a + 1; b < sets.d; ++ b)
                {
                    const auto name = sets.name + "_y" + std::to_string(a) + "_y" + std::to_string(b) + ".svg";
                    pending.emplace_back(run_dir / "plots" / name, detail::plot_pair(sets, a, b, options));
                }
            }
        }
    }

    std::vector<std::filesystem::path> written;
    for (const auto& [path, svg] : pending)
    {
        write_file_atomic(path, svg);
        written.push_back(path);
    }
    return written;
}

/// Number of disjoint intervals per saved prediction, aggregated as {components -> count}.
inline std::map<std::size_t, std::size_t> interval_histogram(const std::filesystem::path& run_dir)
{
    const auto runs = detail::read_run_sets(run_dir);
    std::map<std::size_t, std::size_t> counts;
    for (const auto& sets : runs)
    {
        require(sets.d == 1, error_kind::config, "interval histogram needs d = 1");
        for (const auto& p : sets.points)
        {
            ++ counts[detail::unbounded(p.set) ? 1 : detail::set_intervals(p.set).size()];
        }
    }
    return counts;
}

/// Component count of a single 1-D set.
inline std::size_t interval_components(const ball_union& set)
{
    require(set.dim() == 1, error_kind::config, "interval components need d = 1");
    return set.radius().is_infinite() ? 1 : component_count(set);
}

} // namespace pcp
