#include <filesystem>
#include <random>

#include "catch_amalgamated.hpp"
#include "qsmooth/io.hpp"

using namespace qsmooth;
namespace fs = std::filesystem;
using Catch::Matchers::ContainsSubstring;

namespace {

struct Fixture {
  SystemSpec sys = make_system(Operator::Zero(2, 2), ops::pauli_z(),
                               DensityOperator(ops::pure_state(StateVector::Constant(2, std::sqrt(0.5)))));
  ExperimentSpec exp;
  Fixture() {
    exp.dt = 0.1;
    exp.t_final = 0.5;
    exp.tau = 0.2;
    exp.n_traj = 1;
    exp.seed = 3;
    exp.observables = {{"sx", ops::pauli_x()}, {"sz", ops::pauli_z()}};
  }
};

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t end = text.find('\n', start);
    out.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

}  // namespace

TEST_CASE("numbers round-trip through their shortest form", "[io]") {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int k = 0; k < 1000; ++k) {
    const double x = u(gen) * std::pow(10.0, static_cast<int>(k % 20) - 10);
    CHECK(std::stod(format_number(x)) == x);
  }
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(-0.0) == "0");
  CHECK_THROWS_AS(format_number(std::nan("")), NumericalError);
}

TEST_CASE("trajectory CSV layout", "[io]") {
  Fixture f;
  const TrajectoryRecord rec = simulate_truth(f.sys, f.exp, 0);
  const FilterPath filter = filter_trajectory(rec, f.sys, f.exp);
  const SmoothedPath smooth = smooth_trajectory(rec, filter, f.sys, f.exp);

  const auto plain = lines_of(trajectory_csv(rec, filter));
  REQUIRE(plain.size() == 7);
  CHECK(plain[0] == "t,dy,filter.sx.re,filter.sx.im,filter.sz.re,filter.sz.im");
  CHECK(plain[1].rfind("0,,", 0) == 0);

  const std::string text = trajectory_csv(rec, filter, &smooth);
  CHECK(text.find('\r') == std::string::npos);
  CHECK(text.back() == '\n');
  const auto rows = lines_of(text);
  CHECK(rows[0] ==
        "t,dy,filter.sx.re,filter.sx.im,filter.sz.re,filter.sz.im,"
        "smooth.sx.plus,smooth.sx.minus_im,smooth.sz.plus,smooth.sz.minus_im");
  // tau = 0.2 is grid index 2: rows 1 and 2 (t = 0, 0.1) have empty smoother fields.
  CHECK(rows[1].substr(rows[1].size() - 4) == ",,,,");
  CHECK(rows[2].substr(rows[2].size() - 4) == ",,,,");
  CHECK(rows[3].substr(rows[3].size() - 4) != ",,,,");
  CHECK(rows[3].rfind("0.2,", 0) == 0);
}

TEST_CASE("records read back exactly", "[io]") {
  Fixture f;
  const TrajectoryRecord rec = simulate_truth(f.sys, f.exp, 4);
  const FilterPath filter = filter_trajectory(rec, f.sys, f.exp);
  const TrajectoryRecord back = parse_record_csv(trajectory_csv(rec, filter));
  CHECK(back.dy == rec.dy);
  CHECK(std::abs(back.dt - rec.dt) < 1e-15);
}

TEST_CASE("malformed record files are rejected", "[io]") {
  CHECK_THROWS_AS(parse_record_csv(""), ParseError);
  CHECK_THROWS_WITH(parse_record_csv("t,x\n0,\n0.1,1\n"), ContainsSubstring("\"dy\""));
  CHECK_THROWS_AS(parse_record_csv("t,dy\n0,\n0.1,abc\n"), ParseError);
  CHECK_THROWS_AS(parse_record_csv("t,dy\n0,\n0.1,0.2\n0.3,0.1\n"), ParseError);
  CHECK_THROWS_AS(parse_record_csv("t,dy\n0,1\n0.1,0.2\n"), ParseError);
  CHECK_THROWS_AS(parse_record_csv("t,dy\n0,\n0.1\n"), ParseError);
}

TEST_CASE("atomic writes and record discovery", "[io]") {
  const fs::path dir = fs::temp_directory_path() / "qsmooth_test_io";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_file_atomic(dir / trajectory_file_name(1), "t,dy\n0,\n0.1,0.5\n");
  write_file_atomic(dir / trajectory_file_name(0), "t,dy\n0,\n0.1,0.25\n");
  write_file_atomic(dir / "other.csv", "ignored");
  CHECK(trajectory_file_name(7) == "traj_0007.csv");
  CHECK(read_file(dir / "traj_0000.csv") == "t,dy\n0,\n0.1,0.25\n");
  CHECK_FALSE(fs::exists(dir / "traj_0000.csv.tmp"));

  const auto files = record_files(dir);
  REQUIRE(files.size() == 2);
  CHECK(files[0].filename() == "traj_0000.csv");
  CHECK(read_record_csv(files[1]).dy == std::vector<double>{0.5});
  CHECK(record_files(files[0]).size() == 1);
  CHECK_THROWS_AS(record_files(dir / "missing"), ValidationError);
  fs::remove_all(dir);
}

TEST_CASE("SHA-256 digests", "[io]") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("manifest JSON", "[io]") {
  RunManifest m;
  m.command = "simulate";
  m.config_hash = "abc";
  m.seed = 42;
  m.outputs = {"traj_0000.csv"};
  const std::string json = m.to_json();
  CHECK_THAT(json, ContainsSubstring("\"command\": \"simulate\""));
  CHECK_THAT(json, ContainsSubstring("\"seed\": 42"));
  CHECK_THAT(json, ContainsSubstring("\"tool_version\": \"0.1.0\""));
  CHECK_THAT(json, ContainsSubstring("\"traj_0000.csv\""));
}
