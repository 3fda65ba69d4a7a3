#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace cwgan::runtime {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;              // unknown flag, bad option or config key
inline constexpr int kExitMissingFile = 3;
inline constexpr int kExitIncompatible = 4;       // checkpoint mismatch or phase order

class CliError : public std::runtime_error {
 public:
  CliError(int exit_code, const std::string& message) : std::runtime_error(message), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace cwgan::runtime
