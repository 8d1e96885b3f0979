#pragma once

#include <string>

#include "json.hpp"

namespace spherecl::cli {

inline constexpr const char* kVersion = "0.1.0";

struct RunOutput {
  int exit_code = 0;
  // Complete result document (newline-terminated); empty when the config
  // failed validation.
  std::string result_json;
  // One-line failure description for the error stream; empty on success.
  std::string diagnostic;
};

// Executes one experiment config. Exit codes: 0 success, 1 failed theorem
// verdict, 2 config validation error, 3 runtime error. The result document
// is {command, config_echo, results, version, wall_time_s} where config_echo
// carries every default filled in, so feeding it back reproduces the run.
RunOutput run_from_json(const nlohmann::json& config);
RunOutput run_from_text(const std::string& config_text);

// Applies SPHERE_CL_THREADS to the linear-algebra thread pool (0 or unset
// leaves the automatic choice).
void apply_thread_env();

// Full command-line entry: --config PATH with optional --seed and --output
// overrides; writes the result document to the output path or stdout.
int run_main(int argc, char** argv);

}  // namespace spherecl::cli
