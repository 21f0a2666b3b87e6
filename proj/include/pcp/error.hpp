#pragma once

#include <stdexcept>
#include <string>

namespace pcp {

enum class error_kind
{
    dimension,
    precondition,
    config,
    capability,
    data,
    protocol,
    degenerate,
};

inline const char* to_string(error_kind kind)
{
    switch (kind)
    {
    case error_kind::dimension:     return "dimension error";
    case error_kind::precondition:  return "precondition error";
    case error_kind::config:        return "configuration error";
    case error_kind::capability:    return "capability error";
    case error_kind::data:          return "data error";
    case error_kind::protocol:      return "protocol error";
    case error_kind::degenerate:    return "degenerate model";
    }
    return "error";
}

/// Single exception type for the library; callers dispatch on kind().
class error : public std::runtime_error
{
public:
    error(error_kind kind, const std::string& what)
        : std::runtime_error(std::string{to_string(kind)} + ": " + what)
        , m_kind(kind)
    {
    }

    error_kind kind() const noexcept { return m_kind; }

private:
    error_kind m_kind;
};

[[noreturn]] inline void raise(error_kind kind, const std::string& what)
{
    throw error{kind, what};
}

inline void require(bool condition, error_kind kind, const std::string& what)
{
    if (!condition)
    {
        raise(kind, what);
    }
}

} // namespace pcp
