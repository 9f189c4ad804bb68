#pragma once

namespace synth::cli {

inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumeric = 3;

/// Parses argv and runs one subcommand. Returns the process exit code.
int run(int argc, char** argv);

}  // namespace synth::cli

int run_cli(int argc, char** argv);
