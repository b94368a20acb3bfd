#include "qsmooth/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "json.hpp"
#include "qsmooth/convergence.hpp"
#include "qsmooth/io.hpp"
#include "qsmooth/oracle.hpp"
#include "qsmooth/smoother.hpp"
#include "qsmooth/trajectory.hpp"

namespace qsmooth {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct LoadedConfig {
  Spec spec;
  std::string hash;
};

LoadedConfig load_config(const CommandOptions& opts) {
  if (opts.config.empty()) throw ValidationError("no config file given", "config");
  if (!fs::is_regular_file(opts.config)) {
    throw ValidationError("cannot open config file " + opts.config.string(), "config");
  }
  const std::string text = read_file(opts.config);
  LoadedConfig c{parse_spec(text), sha256_hex(text)};
  if (opts.seed) c.spec.experiment.seed = *opts.seed;
  return c;
}

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ValidationError("cannot create output directory " + dir.string(), "out");
  }
}

/// Runs job(i) for i in [0, count) on up to `threads` workers; the first
/// exception thrown by any job is rethrown after all workers stop.
template <class Job>
void run_parallel(std::size_t count, unsigned threads, Job&& job) {
  const unsigned workers = static_cast<unsigned>(std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(count, 1)));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first;
  std::mutex mu;
  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        job(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
        failed = true;
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first) std::rethrow_exception(first);
}

CommandResult finish(const CommandOptions& opts, const LoadedConfig& cfg, const std::string& command,
                     std::vector<std::string> names) {
  RunManifest manifest;
  manifest.command = command;
  manifest.config_hash = cfg.hash;
  manifest.seed = cfg.spec.experiment.seed;
  manifest.outputs = names;
  CommandResult result;
  for (const auto& n : names) result.outputs.push_back(opts.out / n);
  result.manifest = opts.out / "manifest.json";
  write_file_atomic(result.manifest, manifest.to_json());
  return result;
}

CommandResult simulate_and_write(const CommandOptions& opts, const LoadedConfig& cfg, bool smooth,
                                 const std::string& command) {
  const SystemSpec& sys = cfg.spec.system;
  const ExperimentSpec& exp = cfg.spec.experiment;
  const std::size_t n = static_cast<std::size_t>(exp.n_traj);
  std::vector<std::string> names(n);
  for (std::size_t i = 0; i < n; ++i) names[i] = trajectory_file_name(i);

  run_parallel(n, opts.threads, [&](std::size_t i) {
    const TrajectoryRecord record = simulate_truth(sys, exp, static_cast<std::uint64_t>(i));
    const FilterPath filter = filter_trajectory(record, sys, exp);
    std::optional<SmoothedPath> smoothed;
    if (smooth) smoothed = smooth_trajectory(record, filter, sys, exp);
    write_file_atomic(opts.out / names[i], trajectory_csv(record, filter, smoothed ? &*smoothed : nullptr));
  });
  return finish(opts, cfg, command, std::move(names));
}

void require_qnd(const SystemSpec& sys) {
  const QndReport r = qnd_report(sys);
  if (!r.satisfied) throw QndRequired(r.normality_defect, r.commutator_norm);
}

}  // namespace

CommandResult cmd_simulate(const CommandOptions& opts) {
  const LoadedConfig cfg = load_config(opts);
  prepare_out_dir(opts.out);
  return simulate_and_write(opts, cfg, false, "simulate");
}

CommandResult cmd_smooth(const CommandOptions& opts) {
  const LoadedConfig cfg = load_config(opts);
  const SystemSpec& sys = cfg.spec.system;
  const ExperimentSpec& exp = cfg.spec.experiment;
  require_qnd(sys);
  if (!opts.records) {
    prepare_out_dir(opts.out);
    return simulate_and_write(opts, cfg, true, "smooth");
  }

  const std::vector<fs::path> files = record_files(*opts.records);
  // Read everything first so an output directory equal to the input one is safe.
  std::vector<TrajectoryRecord> records;
  for (const auto& f : files) {
    TrajectoryRecord r = read_record_csv(f);
    if (std::abs(r.dt - exp.dt) > 1e-12 * std::max(1.0, exp.dt)) {
      throw ValidationError(fmt::format("{} has dt = {} but the config has dt = {}", f.string(), r.dt, exp.dt),
                            "records");
    }
    r.dt = exp.dt;
    if (exp.tau_step() > r.n_steps()) {
      throw ValidationError(fmt::format("{} ends before tau = {}", f.string(), exp.tau), "records");
    }
    records.push_back(std::move(r));
  }
  prepare_out_dir(opts.out);
  std::vector<std::string> names;
  for (const auto& f : files) names.push_back(f.filename().string());
  run_parallel(records.size(), opts.threads, [&](std::size_t i) {
    const FilterPath filter = filter_trajectory(records[i], sys, exp.filter_prior(sys), exp.observables);
    const SmoothedPath smoothed = smooth_trajectory(records[i], filter, sys, exp.tau_step(), exp.observables);
    write_file_atomic(opts.out / names[i], trajectory_csv(records[i], filter, &smoothed));
  });
  return finish(opts, cfg, "smooth", std::move(names));
}

CommandResult cmd_oracle(const CommandOptions& opts) {
  const LoadedConfig cfg = load_config(opts);
  const SystemSpec& sys = cfg.spec.system;
  const ExperimentSpec& exp = cfg.spec.experiment;
  const std::size_t n = opts.n_steps.value_or(exp.n_steps());
  if (n == 0) throw ValidationError("must be positive", "n_steps");
  const std::size_t m = exp.tau_step();
  if (m > n) throw ValidationError(fmt::format("tau step {} exceeds n_steps {}", m, n), "experiment.tau");

  const DiscreteModel model = build_model(sys, n, exp.dt);
  const BranchTable table = enumerate_records(model, exp.observables, m);

  ojson report;
  report["model"] = {{"dim", sys.dim},
                     {"n_steps", n},
                     {"dt", exp.dt},
                     {"estimand_step", m},
                     {"joint_dim", model.joint_dim()},
                     {"p_floor", table.p_floor},
                     {"qnd", qnd_check(sys)},
                     {"observables", table.names}};

  ojson records = ojson::array();
  for (const BranchRecord& rec : table.records) {
    ojson r;
    r["y"] = rec.y;
    r["p"] = rec.p;
    r["included"] = rec.included;
    ojson plus = ojson::object(), minus = ojson::object();
    for (std::size_t j = 0; j < table.names.size(); ++j) {
      plus[table.names[j]] = rec.included ? ojson(rec.q_plus[j].real()) : ojson(nullptr);
      minus[table.names[j]] = rec.included ? ojson(rec.q_minus[j].imag()) : ojson(nullptr);
    }
    r["q_plus"] = std::move(plus);
    r["q_minus_im"] = std::move(minus);
    records.push_back(std::move(r));
  }
  report["records"] = std::move(records);

  const Operator propagated = propagate(model, sys.rho0.op(), m);
  ojson orth = ojson::object(), unbiased = ojson::object();
  for (std::size_t j = 0; j < table.names.size(); ++j) {
    const Operator& x = exp.observables[j].op;
    const OrthogonalityResidual res = verify_orthogonality(table, model, x, m, j);
    orth[table.names[j]] = {{"symmetric", res.symmetric}, {"skew", res.skew}};
    complex_t sum_plus = 0.0, sum_minus = 0.0;
    for (const BranchRecord& rec : table.records) {
      if (!rec.included) continue;
      sum_plus += rec.p * rec.q_plus[j];
      sum_minus += rec.p * rec.q_minus[j];
    }
    unbiased[table.names[j]] = {{"plus", std::abs(sum_plus - expect(propagated, x))},
                                {"minus", std::abs(sum_minus)}};
  }
  ojson mse = ojson::array();
  for (const MseByLength& row : mse_by_length(model, exp.observables, m, table.p_floor)) {
    ojson per = ojson::object();
    for (std::size_t j = 0; j < table.names.size(); ++j) {
      const MseSummary& s = row.per_observable[j];
      per[table.names[j]] = {{"combined", s.combined}, {"plus", s.plus}, {"symmetric", s.symmetric}};
    }
    mse.push_back({{"n", row.record_length}, {"mse", std::move(per)}});
  }
  report["checks"] = {{"total_probability", table.total_probability()},
                      {"orthogonality_residual", std::move(orth)},
                      {"unbiasedness_residual", std::move(unbiased)},
                      {"mse_by_n", std::move(mse)}};

  prepare_out_dir(opts.out);
  write_file_atomic(opts.out / "oracle.json", report.dump(2) + "\n");
  return finish(opts, cfg, "oracle", {"oracle.json"});
}

CommandResult cmd_compare(const CommandOptions& opts) {
  const LoadedConfig cfg = load_config(opts);
  const SystemSpec& sys = cfg.spec.system;
  const ExperimentSpec& exp = cfg.spec.experiment;
  const std::vector<double> dts = opts.dts.empty() ? std::vector<double>{exp.dt} : opts.dts;
  for (double dt : dts) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError(fmt::format("invalid dt {}", dt), "dts");
  }
  const std::size_t n = opts.n_steps.value_or(kDefaultCompareSteps);
  if (n == 0) throw ValidationError("must be positive", "n_steps");
  // Fail on the cap before any enumeration runs.
  build_model(sys, n, dts.front());

  std::vector<ConvergenceRow> rows;
  for (double dt : dts) rows.push_back(compare_with_oracle(sys, exp.observables, dt, n));

  auto opt = [](const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); };
  ojson report;
  report["n_steps"] = n;
  report["qnd"] = qnd_check(sys);
  std::vector<std::string> names;
  for (const auto& o : exp.observables) names.push_back(o.name);
  report["observables"] = names;
  ojson jrows = ojson::array();
  std::vector<double> filter_errors, smoother_errors;
  bool have_smoother = true;
  for (const ConvergenceRow& r : rows) {
    jrows.push_back({{"dt", r.dt},
                     {"filter_error", r.filter_error},
                     {"smoother_plus_error", opt(r.smoother_plus_error)},
                     {"smoother_minus_error", opt(r.smoother_minus_error)},
                     {"smoother_error", opt(r.smoother_error())},
                     {"max_trace_plus_error", opt(r.max_trace_plus_error)},
                     {"max_trace_minus", opt(r.max_trace_minus)},
                     {"tau_consistency", opt(r.tau_consistency)}});
    filter_errors.push_back(r.filter_error);
    if (r.smoother_error()) smoother_errors.push_back(*r.smoother_error());
    else have_smoother = false;
  }
  report["rows"] = std::move(jrows);
  report["fitted_order"] = {
      {"filter", opt(fitted_order(dts, filter_errors))},
      {"smoother", have_smoother ? opt(fitted_order(dts, smoother_errors)) : ojson(nullptr)}};

  prepare_out_dir(opts.out);
  write_file_atomic(opts.out / "compare.json", report.dump(2) + "\n");
  return finish(opts, cfg, "compare", {"compare.json"});
}

int report_error(std::exception_ptr error, std::ostream& err) {
  try {
    std::rethrow_exception(error);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const QndRequired& e) {
    err << "error: " << e.what() << '\n';
    return kExitQnd;
  } catch (const CapExceeded& e) {
    err << "error: " << e.what() << '\n';
    return kExitCap;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitOther;
  } catch (...) {
    err << "error: unknown failure\n";
    return kExitOther;
  }
}

}  // namespace qsmooth
