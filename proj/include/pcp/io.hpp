#pragma once

#include <pcp/calibrate.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace pcp {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in{line};
    while (std::getline(in, cell, ','))
    {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' '))
        {
            cell.pop_back();
        }
        while (!cell.empty() && cell.front() == ' ')
        {
            cell.erase(cell.begin());
        }
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',')
    {
        out.emplace_back();
    }
    return out;
}

inline double parse_real(const std::string& cell, std::size_t line_no)
{
    char* end = nullptr;
    const auto value = std::strtod(cell.c_str(), &end);
    require(!cell.empty() && end == cell.c_str() + cell.size(), error_kind::data,
            "line " + std::to_string(line_no) + ": '" + cell + "' is not a real number");
    require(std::isfinite(value), error_kind::data, "line " + std::to_string(line_no) + ": non-finite entry");
    return value;
}

} // namespace detail

/// Reads the `x0..x{p-1}, y0..y{d-1}` CSV format. Splits are not part of the file.
inline labeled_dataset read_dataset_csv(std::istream& in)
{
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), error_kind::data, "dataset CSV is empty");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF)
    {
        line.erase(0, 3);
    }
    const auto header = detail::split_csv_line(line);

    std::size_t p = 0;
    std::size_t d = 0;
    for (std::size_t i = 0; i < header.size(); ++ i)
    {
        const auto expected_x = "x" + std::to_string(i);
        const auto expected_y = "y" + std::to_string(i - p);
        if (d == 0 && header[i] == expected_x)
        {
            ++ p;
        }
        else if (p > 0 && header[i] == expected_y)
        {
            ++ d;
        }
        else
        {
            raise(error_kind::data, "header column '" + header[i] + "' breaks the x0..x{p-1},y0..y{d-1} layout");
        }
    }
    require(p >= 1 && d >= 1, error_kind::data, "header needs at least one x and one y column");

    std::vector<labeled_point> points;
    std::size_t line_no = 1;
    while (std::getline(in, line))
    {
        ++ line_no;
        if (line.empty() || line == "\r")
        {
            continue;
        }
        const auto cells = detail::split_csv_line(line);
        require(cells.size() == p + d, error_kind::data,
                "line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) + " columns, expected " + std::to_string(p + d));
        vector_t x(p);
        vector_t y(d);
        for (std::size_t j = 0; j < p; ++ j)
        {
            x[j] = detail::parse_real(cells[j], line_no);
        }
        for (std::size_t j = 0; j < d; ++ j)
        {
            y[j] = detail::parse_real(cells[p + j], line_no);
        }
        points.emplace_back(std::move(x), std::move(y));
    }
    return labeled_dataset{std::move(points)};
}

inline labeled_dataset read_dataset_csv(const std::filesystem::path& path)
{
    std::ifstream in{path};
    require(in.good(), error_kind::data, "cannot open dataset '" + path.string() + "'");
    return read_dataset_csv(in);
}

inline void write_dataset_csv(std::ostream& out, const labeled_dataset& data)
{
    for (std::size_t j = 0; j < data.covariate_dim(); ++ j)
    {
        out << (j == 0 ? "" : ",") << "x" << j;
    }
    for (std::size_t j = 0; j < data.target_dim(); ++ j)
    {
        out << ",y" << j;
    }
    out << "\n";
    out.precision(17);
    for (const auto& point : data.points())
    {
        for (std::size_t j = 0; j < point.x().size(); ++ j)
        {
            out << (j == 0 ? "" : ",") << point.x()[j];
        }
        for (const auto v : point.y())
        {
            out << "," << v;
        }
        out << "\n";
    }
}

/// Single-column score CSV for auditing calibration runs.
inline void write_scores_csv(std::ostream& out, const score_vector& scores)
{
    out << "score\n";
    out.precision(17);
    for (const auto s : scores.values())
    {
        out << s << "\n";
    }
}

/// Writes through a temporary sibling and renames, so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content)
{
    if (path.has_parent_path())
    {
        std::filesystem::create_directories(path.parent_path());
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out{tmp, std::ios::binary | std::ios::trunc};
        require(out.good(), error_kind::data, "cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        require(out.good(), error_kind::data, "write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

} // namespace pcp
