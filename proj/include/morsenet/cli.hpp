#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace morsenet::cli {

enum ExitCode { kOk = 0, kAnalysisError = 1, kUsageError = 2 };

int run(int argc, char** argv);
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace morsenet::cli
