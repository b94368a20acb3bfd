#pragma once

// File formats shared by the command-line tool and the plotting scripts.
//
// Trajectory CSV: comma separated, header row, LF line endings. Row k holds
// t_k = k dt, the increment dy over (t_{k-1}, t_k] (empty on row 0), and the
// estimates at t_k:
//
//   t,dy,filter.<obs>.re,filter.<obs>.im[,smooth.<obs>.plus,smooth.<obs>.minus_im]
//
// Smoother fields are empty on rows before tau. Numbers use the shortest
// representation that round-trips to the same double.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qsmooth/smoother.hpp"
#include "qsmooth/trajectory.hpp"

namespace qsmooth {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Shortest round-trip decimal form of x.
std::string format_number(double x);

std::string trajectory_csv(const TrajectoryRecord& record, const FilterPath& filter,
                           const SmoothedPath* smoothed = nullptr);

/// Reads the t and dy columns of a trajectory CSV. dt is t_1 - t_0 and the
/// grid must be uniform within 1e-9 relative.
TrajectoryRecord parse_record_csv(std::string_view text, const std::string& source = "<memory>");
TrajectoryRecord read_record_csv(const std::filesystem::path& path);

/// Record files under `path`: the file itself, or the sorted traj_*.csv
/// entries of a directory.
std::vector<std::filesystem::path> record_files(const std::filesystem::path& path);

/// traj_0007.csv style name for trajectory `index`.
std::string trajectory_file_name(std::size_t index);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

std::string sha256_hex(std::string_view data);

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;  // paths relative to the output directory
  std::string tool_version{kToolVersion};

  std::string to_json() const;
};

}  // namespace qsmooth
