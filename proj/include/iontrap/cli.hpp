#pragma once
#include <string>

#include "json.hpp"

// Scenario-driven front end: each command reads one JSON config (units are
// part of every field name, unknown keys are rejected), writes its module's
// CSV exports plus a summary.json into the output directory, and returns the
// summary. Exit-code mapping for the binary: ConfigError -> 2,
// NumericalError -> 3.
namespace iontrap::cli {

struct RunOptions {
    std::string config_path;
    std::string out_dir = ".";
    bool verbose = false;
    std::string expected_command;  // reject configs for a different command
};

nlohmann::json run(const RunOptions& opt);

// parsed-and-reserialized form of a raw config document: defaults filled in,
// keys sorted; parsing the canonical form again is the identity
nlohmann::json canonical_config(const nlohmann::json& raw);

}  // namespace iontrap::cli
