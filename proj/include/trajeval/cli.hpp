#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace trajeval {

/// Exit codes: 0 success (task-level evaluator errors included), 1 configuration, data or
/// runtime failure, 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace trajeval
