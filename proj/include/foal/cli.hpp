#pragma once

#include "foal/config.hpp"
#include "foal/data.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace foal::cli {

enum ExitCode : int { kOk = 0, kExpectationFailed = 1, kUsageError = 2 };

/// Entry point shared by the `foal` binary and the tests.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Parses `S,P,O,N` (sentences, positive, neutral, negative).
Stats parse_expected_stats(const std::string& text);

TransferPair load_transfer_pair(const DataConfig& data);

}  // namespace foal::cli
