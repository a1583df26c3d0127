#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "iontrap/cli.hpp"
#include "iontrap/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"ion trap toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    bool verbose = false;

    const char* commands[] = {"fields",    "trajectory",         "voltages",     "eigen",
                              "propagate", "optimize-transport", "optimize-gate"};
    for (const char* name : commands) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_flag("--verbose", verbose, "progress to stderr");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        iontrap::cli::RunOptions opt;
        opt.config_path = config_path;
        opt.out_dir = out_dir;
        opt.verbose = verbose;
        opt.expected_command = app.get_subcommands().front()->get_name();
        const nlohmann::json summary = iontrap::cli::run(opt);
        std::cout << summary.dump(2) << "\n";
        return 0;
    } catch (const iontrap::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const iontrap::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
