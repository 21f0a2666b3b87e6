#pragma once

#include <pcp/error.hpp>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace pcp {

namespace detail {

inline std::string trim(const std::string& text)
{
    const auto first = text.find_first_not_of(" \t\r");
    if (first == std::string::npos)
    {
        return {};
    }
    const auto last = text.find_last_not_of(" \t\r");
    return text.substr(first, last - first + 1);
}

/// Strips a trailing '#' comment that is not inside a quoted string.
inline std::string strip_comment(const std::string& line)
{
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++ i)
    {
        if (line[i] == '"')
        {
            quoted = !quoted;
        }
        else if (line[i] == '#' && !quoted)
        {
            return line.substr(0, i);
        }
    }
    return line;
}

/// A value literal: JSON syntax when it parses (numbers, "strings", true, [arrays]), else a bare string.
inline nlohmann::json parse_literal(const std::string& text)
{
    try
    {
        return nlohmann::json::parse(text);
    }
    catch (const nlohmann::json::parse_error&)
    {
        return text;
    }
}

inline nlohmann::json& at_path(nlohmann::json& root, const std::string& dotted)
{
    nlohmann::json* node = &root;
    std::istringstream parts{dotted};
    std::string part;
    while (std::getline(parts, part, '.'))
    {
        require(!part.empty(), error_kind::config, "empty key segment in '" + dotted + "'");
        if (!node->is_object())
        {
            *node = nlohmann::json::object();
        }
        node = &(*node)[part];
    }
    return *node;
}

} // namespace detail

/// Key/value sections:
///
///     seed = 7
///     [pcp]
///     alpha = 0.1
///     beta_grid = [0.1, 0.2]
///     [data.synth]
///     name = "two_mode"
///
/// Each `[a.b]` header opens a nested object; values use JSON literal syntax.
inline nlohmann::json parse_toml_like(std::istream& in)
{
    nlohmann::json root = nlohmann::json::object();
    std::string section;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line))
    {
        ++ line_no;
        line = detail::trim(detail::strip_comment(line));
        if (line.empty())
        {
            continue;
        }
        if (line.front() == '[')
        {
            require(line.back() == ']' && line.size() > 2, error_kind::config, "line " + std::to_string(line_no) + ": bad section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            detail::at_path(root, section) = nlohmann::json::object();
            continue;
        }
        const auto eq = line.find('=');
        require(eq != std::string::npos, error_kind::config, "line " + std::to_string(line_no) + ": expected key = value");
        const auto key = detail::trim(line.substr(0, eq));
        const auto value = detail::trim(line.substr(eq + 1));
        require(!key.empty(), error_kind::config, "line " + std::to_string(line_no) + ": empty key");
        detail::at_path(root, section.empty() ? key : section + "." + key) = detail::parse_literal(value);
    }
    return root;
}

/// Reads a config file: JSON when the content starts with '{', the key/value format otherwise.
inline nlohmann::json load_config_file(const std::filesystem::path& path)
{
    std::ifstream in{path};
    require(in.good(), error_kind::config, "cannot open config '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const auto text = buffer.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{')
    {
        try
        {
            return nlohmann::json::parse(text);
        }
        catch (const nlohmann::json::parse_error& e)
        {
            raise(error_kind::config, std::string{"invalid JSON config: "} + e.what());
        }
    }
    std::istringstream stream{text};
    return parse_toml_like(stream);
}

/// Applies `--key.path=value` overrides.
inline void apply_override(nlohmann::json& root, const std::string& assignment)
{
    auto text = assignment;
    if (text.rfind("--", 0) == 0)
    {
        text.erase(0, 2);
    }
    const auto eq = text.find('=');
    require(eq != std::string::npos && eq > 0, error_kind::config, "override '" + assignment + "' must look like --key=value");
    detail::at_path(root, text.substr(0, eq)) = detail::parse_literal(text.substr(eq + 1));
}

} // namespace pcp
