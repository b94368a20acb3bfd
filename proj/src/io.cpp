#include "qsmooth/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "json.hpp"

namespace qsmooth {

namespace fs = std::filesystem;

std::string format_number(double x) {
  if (!std::isfinite(x)) throw NumericalError(fmt::format("cannot write non-finite value {}", x));
  if (x == 0.0) return "0";  // also folds -0
  return fmt::format("{}", x);
}

std::string trajectory_csv(const TrajectoryRecord& record, const FilterPath& filter, const SmoothedPath* smoothed) {
  const std::size_t n = record.n_steps();
  if (filter.rho.size() != n + 1) throw DimensionError("trajectory_csv: filter and record lengths differ");
  if (smoothed && smoothed->names.size() != filter.names.size()) {
    throw DimensionError("trajectory_csv: smoother and filter observables differ");
  }

  std::string out = "t,dy";
  for (const auto& name : filter.names) out += fmt::format(",filter.{0}.re,filter.{0}.im", name);
  if (smoothed) {
    for (const auto& name : smoothed->names) out += fmt::format(",smooth.{0}.plus,smooth.{0}.minus_im", name);
  }
  out += '\n';

  for (std::size_t k = 0; k <= n; ++k) {
    out += format_number(static_cast<double>(k) * record.dt);
    out += ',';
    if (k > 0) out += format_number(record.dy[k - 1]);
    for (const auto& series : filter.estimates) {
      out += ',';
      out += format_number(series[k].real());
      out += ',';
      out += format_number(series[k].imag());
    }
    if (smoothed) {
      for (const auto& series : smoothed->values) {
        if (k < smoothed->tau_step) {
          out += ",,";
          continue;
        }
        const SmoothedValue& v = series[k - smoothed->tau_step];
        out += ',';
        out += format_number(v.plus.real());
        out += ',';
        out += format_number(v.minus.imag());
      }
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError(fmt::format("{}: not a finite number: \"{}\"", where, s));
  }
  return v;
}

}  // namespace

TrajectoryRecord parse_record_csv(std::string_view text, const std::string& source) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    start = end + 1;
  }
  if (lines.empty()) throw ParseError(source + ": empty record file");

  const auto header = split_fields(lines[0]);
  const auto t_col = std::find(header.begin(), header.end(), "t");
  const auto dy_col = std::find(header.begin(), header.end(), "dy");
  if (t_col == header.end() || dy_col == header.end()) {
    throw ParseError(source + ": header must contain \"t\" and \"dy\" columns");
  }
  const auto ti = static_cast<std::size_t>(t_col - header.begin());
  const auto di = static_cast<std::size_t>(dy_col - header.begin());
  if (lines.size() < 3) throw ParseError(source + ": need at least two grid points");

  std::vector<double> t;
  TrajectoryRecord record;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split_fields(lines[r]);
    const std::string where = fmt::format("{}:{}", source, r + 1);
    if (fields.size() != header.size()) {
      throw ParseError(fmt::format("{}: expected {} fields, found {}", where, header.size(), fields.size()));
    }
    t.push_back(parse_double(fields[ti], where));
    if (r == 1) {
      if (!fields[di].empty()) throw ParseError(where + ": dy must be empty on the first row");
    } else {
      record.dy.push_back(parse_double(fields[di], where));
    }
  }
  record.dt = t[1] - t[0];
  if (!(record.dt > 0.0)) throw ParseError(source + ": time column must increase");
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double expected = t[0] + static_cast<double>(k) * record.dt;
    if (std::abs(t[k] - expected) > 1e-9 * std::max(1.0, std::abs(expected))) {
      throw ParseError(fmt::format("{}: non-uniform time grid at row {}", source, k + 2));
    }
  }
  return record;
}

TrajectoryRecord read_record_csv(const fs::path& path) { return parse_record_csv(read_file(path), path.string()); }

std::vector<fs::path> record_files(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("no such file or directory " + path.string(), "records");
  if (!fs::is_directory(path)) return {path};
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(path)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("traj_", 0) == 0 && entry.path().extension() == ".csv") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError("no traj_*.csv files in " + path.string(), "records");
  return files;
}

std::string trajectory_file_name(std::size_t index) { return fmt::format("traj_{:04d}.csv", index); }

void write_file_atomic(const fs::path& path, std::string_view content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(fmt::format("cannot rename {} to {}: {}", tmp.string(), path.string(), ec.message()));
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string(), "records");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["outputs"] = outputs;
  j["tool_version"] = tool_version;
  return j.dump(2) + "\n";
}

}  // namespace qsmooth
