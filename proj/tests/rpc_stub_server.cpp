#include "vforest/mock_provider.hpp"
#include "vforest/rpc.hpp"

#include <cstdlib>
#include <iostream>
#include <string>

// Serves the mock provider over stdin/stdout.
//   rpc_stub_server [dim] [seed] [--garbage-after N]
int main(int argc, char** argv) {
    std::size_t dim = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 8;
    std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 0;
    long garbage_after = -1;
    for (int i = 3; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--garbage-after") {
            garbage_after = std::strtol(argv[i + 1], nullptr, 10);
        }
    }
    vforest::MockProvider provider(dim, seed);
    long served = 0;
    for (std::string line; std::getline(std::cin, line);) {
        if (garbage_after >= 0 && served >= garbage_after) {
            std::cout << "not json\n" << std::flush;
            continue;
        }
        std::cout << vforest::rpc::dispatch_line(provider, line) << '\n' << std::flush;
        ++served;
    }
    return 0;
}
