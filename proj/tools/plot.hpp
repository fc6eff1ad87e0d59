#pragma once

#include <filesystem>
#include <vector>

namespace unitele::tools {

/// Reads every trial record under `records` and writes deviation.svg, time.svg and
/// trajectory.svg into `out`. Returns the files written. Throws std::runtime_error
/// when no records are found.
std::vector<std::filesystem::path> plot_records(const std::filesystem::path& records,
                                                const std::filesystem::path& out);

}  // namespace unitele::tools
