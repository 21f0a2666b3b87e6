#pragma once

#include <pcp/backbone.hpp>

#include <json.hpp>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

namespace pcp {

inline constexpr int bridge_protocol_version = 1;

/// Backbone served by a child process over line-delimited JSON on its stdin/stdout.
///
///   -> {"op":"hello","version":1}        <- {"ok":true,"has_density":b,"p":n,"d":n}
///   -> {"op":"sample","x":[..],"k":n,"seed":n}
///                                        <- {"samples":[[..],..],"densities":[..]}
///   -> {"op":"bye"}                      child exits 0
///
/// Requests are serialized through one channel. Any malformed reply or closed
/// pipe raises a protocol error carrying the child's stderr.
class bridge_backbone final : public backbone
{
public:
    explicit bridge_backbone(std::string command)
        : m_command(std::move(command))
    {
        spawn();
        try
        {
            handshake();
        }
        catch (...)
        {
            shutdown();
            throw;
        }
    }

    bridge_backbone(const bridge_backbone&) = delete;
    bridge_backbone& operator=(const bridge_backbone&) = delete;

    ~bridge_backbone() override
    {
        shutdown();
    }

    std::size_t covariate_dim() const override { return m_p; }
    std::size_t target_dim() const override { return m_d; }
    bool has_density() const override { return m_has_density; }
    const std::string& command() const noexcept { return m_command; }

    sample_batch sample(std::span<const double> x, std::size_t k, rng_t& rng) const override
    {
        check_covariates(x);
        require(k >= 1, error_kind::precondition, "K must be positive");
        const std::uint64_t seed = rng() >> 11U;   // 53 bits survive any JSON reader exactly

        const auto reply = exchange(nlohmann::json{
            {"op", "sample"}, {"x", vector_t(x.begin(), x.end())}, {"k", k}, {"seed", seed}});

        if (!reply.is_object() || !reply.contains("samples") || !reply["samples"].is_array()
            || reply["samples"].size() != k)
        {
            fail("sample reply must carry exactly " + std::to_string(k) + " samples: " + truncate(reply.dump()));
        }

        std::vector<vector_t> samples;
        samples.reserve(k);
        for (const auto& s : reply["samples"])
        {
            if (!s.is_array() || s.size() != m_d)
            {
                fail("sample of wrong shape: " + truncate(s.dump()));
            }
            vector_t y;
            y.reserve(m_d);
            for (const auto& v : s)
            {
                if (!v.is_number())
                {
                    fail("non-numeric sample entry");
                }
                y.push_back(v.get<double>());
            }
            samples.push_back(std::move(y));
        }

        if (!m_has_density)
        {
            return sample_batch{std::move(samples)};
        }
        if (!reply.contains("densities") || !reply["densities"].is_array() || reply["densities"].size() != k)
        {
            fail("explicit backbone reply lacks " + std::to_string(k) + " densities");
        }
        std::vector<double> densities;
        for (const auto& v : reply["densities"])
        {
            if (!v.is_number() || v.get<double>() < 0.0)
            {
                fail("densities must be nonnegative numbers");
            }
            densities.push_back(v.get<double>());
        }
        return sample_batch{std::move(samples), std::move(densities)};
    }

private:
    void handshake()
    {
        const auto reply = exchange(nlohmann::json{{"op", "hello"}, {"version", bridge_protocol_version}});
        if (!reply.is_object() || !reply.contains("ok") || reply["ok"] != true
            || !reply.contains("has_density") || !reply["has_density"].is_boolean()
            || !reply.contains("p") || !reply["p"].is_number_unsigned()
            || !reply.contains("d") || !reply["d"].is_number_unsigned())
        {
            fail("bad handshake reply: " + reply.dump());
        }
        m_has_density = reply["has_density"].get<bool>();
        m_p = reply["p"].get<std::size_t>();
        m_d = reply["d"].get<std::size_t>();
        if (m_p == 0 || m_d == 0)
        {
            fail("handshake reported zero dimensions");
        }
    }

    void spawn()
    {
        std::signal(SIGPIPE, SIG_IGN);

        char pattern[] = "/tmp/pcp-bridge-stderr-XXXXXX";
        const int err_fd = ::mkstemp(pattern);
        if (err_fd < 0)
        {
            raise(error_kind::protocol, "cannot create stderr capture file");
        }
        m_stderr_path = pattern;

        int to_child[2];
        int from_child[2];
        if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
        {
            raise(error_kind::protocol, "cannot create pipes for '" + m_command + "'");
        }

        m_pid = ::fork();
        if (m_pid < 0)
        {
            raise(error_kind::protocol, "fork failed for '" + m_command + "'");
        }
        if (m_pid == 0)
        {
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::dup2(err_fd, STDERR_FILENO);
            ::close(to_child[0]);
            ::close(to_child[1]);
            ::close(from_child[0]);
            ::close(from_child[1]);
            ::close(err_fd);
            ::execl("/bin/sh", "sh", "-c", m_command.c_str(), static_cast<char*>(nullptr));
            ::_exit(127);
        }

        ::close(to_child[0]);
        ::close(from_child[1]);
        ::close(err_fd);
        m_write_fd = to_child[1];
        m_read_fd = from_child[0];
        ::fcntl(m_write_fd, F_SETFD, FD_CLOEXEC);
        ::fcntl(m_read_fd, F_SETFD, FD_CLOEXEC);
    }

    void shutdown() noexcept
    {
        if (m_pid <= 0)
        {
            return;
        }
        try
        {
            const std::lock_guard lock{m_mutex};
            write_line(nlohmann::json{{"op", "bye"}}.dump());
        }
        catch (...)
        {
        }
        close_fds();

        int status = 0;
        for (int attempt = 0; attempt < 200; ++ attempt)
        {
            if (::waitpid(m_pid, &status, WNOHANG) == m_pid)
            {
                m_pid = -1;
                break;
            }
            ::usleep(10000);
        }
        if (m_pid > 0)
        {
            ::kill(m_pid, SIGKILL);
            ::waitpid(m_pid, &status, 0);
            m_pid = -1;
        }
        if (!m_stderr_path.empty())
        {
            std::remove(m_stderr_path.c_str());
        }
    }

    void close_fds() noexcept
    {
        if (m_write_fd >= 0)
        {
            ::close(m_write_fd);
            m_write_fd = -1;
        }
        if (m_read_fd >= 0)
        {
            ::close(m_read_fd);
            m_read_fd = -1;
        }
    }

    nlohmann::json exchange(const nlohmann::json& request) const
    {
        const std::lock_guard lock{m_mutex};
        write_line(request.dump());
        const auto line = read_line();
        try
        {
            auto reply = nlohmann::json::parse(line);
            if (reply.is_object() && reply.contains("ok") && reply["ok"] == false)
            {
                fail("child reported an error: " + truncate(line));
            }
            return reply;
        }
        catch (const nlohmann::json::parse_error&)
        {
            fail("unparseable reply: " + truncate(line));
        }
    }

    void write_line(const std::string& line) const
    {
        const auto payload = line + "\n";
        std::size_t written = 0;
        while (written < payload.size())
        {
            const auto n = ::write(m_write_fd, payload.data() + written, payload.size() - written);
            if (n <= 0)
            {
                fail("write to child failed (pipe closed)");
            }
            written += static_cast<std::size_t>(n);
        }
    }

    std::string read_line() const
    {
        for (;;)
        {
            const auto newline = m_buffer.find('\n');
            if (newline != std::string::npos)
            {
                auto line = m_buffer.substr(0, newline);
                m_buffer.erase(0, newline + 1);
                return line;
            }
            char chunk[4096];
            const auto n = ::read(m_read_fd, chunk, sizeof(chunk));
            if (n <= 0)
            {
                fail("child closed its output before replying");
            }
            m_buffer.append(chunk, static_cast<std::size_t>(n));
        }
    }

    [[noreturn]] void fail(const std::string& what) const
    {
        std::string captured;
        if (!m_stderr_path.empty())
        {
            std::ifstream in{m_stderr_path};
            std::ostringstream text;
            text << in.rdbuf();
            captured = text.str();
        }
        raise(error_kind::protocol, what + (captured.empty() ? "" : "; child stderr: " + truncate(captured)));
    }

    static std::string truncate(const std::string& text)
    {
        return text.size() <= 512 ? text : text.substr(0, 512) + "...";
    }

    std::string m_command;
    pid_t m_pid{-1};
    int m_write_fd{-1};
    int m_read_fd{-1};
    std::string m_stderr_path;
    mutable std::string m_buffer;
    mutable std::mutex m_mutex;
    bool m_has_density{false};
    std::size_t m_p{0};
    std::size_t m_d{0};
};

} // namespace pcp
