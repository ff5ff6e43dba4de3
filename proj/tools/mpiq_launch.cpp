// SPDX-License-Identifier: Apache-2.0
// mpiq-launch: runs one monitor per configured device plus N classical ranks.
#include <iostream>

#include <CLI11.hpp>

#include "mpiq/launcher.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Launch an MPI-Q job on this host"};
    mpiq::LaunchOptions options;
    std::string qconfig;
    std::uint64_t seed = 0;
    std::int64_t delay_ms = 0;
    app.add_option("--np", options.np, "Number of classical ranks")->required()->check(CLI::PositiveNumber);
    app.add_option("--qconfig", qconfig, "Quantum node configuration file")->required();
    auto* seed_opt = app.add_option("--seed", seed, "Job seed (MPIQ_SEED)");
    app.add_option("--delay-ms", delay_ms, "Latency injected into every monitor")->check(CLI::NonNegativeNumber);
    app.add_option("program", options.program, "Classical program and its arguments (after --)")->required();
    CLI11_PARSE(app, argc, argv);

    options.config_path = qconfig;
    if (*seed_opt) options.seed = seed;
    options.delay = std::chrono::milliseconds(delay_ms);
    try {
        const auto result = mpiq::launch(options);
        for (std::size_t r = 0; r < result.classical_codes.size(); ++r) {
            if (result.classical_codes[r] != 0) {
                std::cerr << "mpiq-launch: rank " << r << " exited with " << result.classical_codes[r] << "\n";
            }
        }
        return result.exit_code;
    } catch (const mpiq::Error& e) {
        std::cerr << "mpiq-launch: " << e.what() << "\n";
        return 1;
    }
}
