#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace relrec::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kDivergence = 3 };

/// Runs one `relrec` invocation. `args` excludes the program name. Reports and JSON go
/// to `out`, diagnostics and log lines to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// One evaluated model for the results table.
struct ResultCell {
    std::string method;    // row label
    std::string relation;  // column label
    double f1 = 0;
};

/// Methods as rows, relations as columns, each cell "mean (±std)" over repeated runs
/// (sample standard deviation, 0 for a single run), plus an average column.
std::string format_results_table(const std::vector<ResultCell>& cells);

}  // namespace relrec::cli
