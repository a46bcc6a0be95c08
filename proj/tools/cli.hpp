#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace fdi {

/// Runs one command; `args` excludes the program name. Returns 0 on success,
/// 2 when validation fails and 1 for usage or input errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
            std::ostream& err = std::cerr);

}  // namespace fdi
