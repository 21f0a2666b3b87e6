// Protocol peer used by the bridge tests.
//
//   bridge_stub echo <p>       y = x0, no densities
//   bridge_stub truth          two_mode oracle law with densities (same code path as in-process)
//   bridge_stub malformed      valid handshake, garbage sample replies
//   bridge_stub short          valid handshake, one sample too few
//   bridge_stub crash          exits after the handshake, writing to stderr
//   bridge_stub error          answers sample requests with {"ok":false,...}

#include <pcp/synth.hpp>

#include <json.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    const std::string mode = argc > 1 ? argv[1] : "echo";
    const std::size_t p = (mode == "echo" && argc > 2) ? std::stoul(argv[2]) : 1;
    const bool has_density = mode == "truth";

    pcp::synth_spec spec;
    spec.name = "two_mode";
    const auto truth = pcp::make_truth_backbone(spec);

    std::string line;
    while (std::getline(std::cin, line))
    {
        nlohmann::json request;
        try
        {
            request = nlohmann::json::parse(line);
        }
        catch (const nlohmann::json::parse_error&)
        {
            std::cout << nlohmann::json{{"ok", false}, {"err", "unparseable request"}}.dump() << std::endl;
            continue;
        }

        const auto op = request.value("op", std::string{});
        if (op == "hello")
        {
            std::cout << nlohmann::json{{"ok", true}, {"has_density", has_density}, {"p", p}, {"d", 1}}.dump() << std::endl;
            if (mode == "crash")
            {
                std::cerr << "stub: simulated crash" << std::endl;
                return 3;
            }
        }
        else if (op == "sample")
        {
            const auto k = request.at("k").get<std::size_t>();
            const auto x = request.at("x").get<pcp::vector_t>();
            if (mode == "malformed")
            {
                std::cout << "this is not json" << std::endl;
                continue;
            }
            if (mode == "error")
            {
                std::cout << nlohmann::json{{"ok", false}, {"err", "model unavailable"}}.dump() << std::endl;
                continue;
            }
            if (mode == "truth")
            {
                pcp::rng_t rng{request.at("seed").get<std::uint64_t>()};
                const auto batch = truth->sample(x, k, rng);
                std::cout << nlohmann::json{{"samples", batch.samples()}, {"densities", batch.densities()}}.dump() << std::endl;
                continue;
            }
            const auto count = mode == "short" ? k - 1 : k;
            std::cout << nlohmann::json{{"samples", std::vector<pcp::vector_t>(count, pcp::vector_t{x.at(0)})}}.dump() << std::endl;
        }
        else if (op == "bye")
        {
            return 0;
        }
        else
        {
            std::cout << nlohmann::json{{"ok", false}, {"err", "unknown op"}}.dump() << std::endl;
        }
    }
    return 0;
}
