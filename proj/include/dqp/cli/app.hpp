#pragma once

#include <iosfwd>

namespace dqp::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kTimeoutDominated = 3,  // eval: more than half of the episodes hit the planner timeout
  kBadConfig = 4,
  kMissingFile = 5,
};

// Entry point of the dqp tool. Subcommands: gen-levels, collect, train,
// plan, eval, play, config.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace dqp::cli
