// Command-line driver: build residual flows from a config, run the
// verification suite, or sweep target ratios to compare block counts.
//
// Exit codes: 0 success, 1 verification/target failure flagged in outputs,
// 2 config or certification error, 3 schedule infeasible or certificate
// breach during a build.

#include <algorithm>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mmdflow/build.hpp"
#include "mmdflow/config.hpp"
#include "mmdflow/errors.hpp"
#include "mmdflow/numeric.hpp"
#include "mmdflow/run_io.hpp"
#include "mmdflow/verify.hpp"

namespace {

namespace fs = std::filesystem;
using namespace mmdflow;

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitSchedule = 3;

struct CommonOpts {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
};

ExperimentConfig load_with_overrides(const CommonOpts& opts) {
  ExperimentConfig cfg = load_config(opts.config_path);
  if (opts.out_dir) cfg.out_dir = *opts.out_dir;
  if (opts.seed) cfg.seed = *opts.seed;
  return cfg;
}

/// Config gate shared by every subcommand: the declared constants must pass
/// certification before any run proceeds.
void certify_or_throw(const ExperimentConfig& cfg) {
  const CertificationReport rep =
      certify_constants(*cfg.map, cfg.certify_samples, mix_seed(cfg.seed, 0xCE27));
  if (!rep.pass) {
    std::string msg = "declared constants failed certification:";
    for (const auto& v : rep.violations) msg += "\n  " + v;
    throw ConfigError(msg);
  }
}

int cmd_build(const CommonOpts& opts) {
  ExperimentConfig cfg = load_with_overrides(opts);
  certify_or_throw(cfg);
  fs::create_directories(cfg.out_dir);

  const ParticleCloud q0 =
      sample_distribution(cfg.source, cfg.n_particles, mix_seed(cfg.seed, 1));
  const ParticleCloud p =
      sample_distribution(cfg.target, cfg.n_particles, mix_seed(cfg.seed, 2));

  ResidualFlow flow(cfg.map);
  BuildReport report;
  const double witness_norm = witness_vector(p, q0, *cfg.map).norm();

  if (witness_norm <= cfg.stop_tol) {
    // Nothing to transport; an empty flow already meets the target.
    report.initial_mmd_sq = witness_norm * witness_norm;
    report.final_mmd_sq = report.initial_mmd_sq;
    report.target_delta = cfg.delta;
    report.target_met = true;
    report.rows.push_back({0, 0.0, report.initial_mmd_sq, 0.0, 0.0, 0.0, 0.0});
    report.schedule.kind = cfg.schedule;
    report.schedule.delta = cfg.delta;
  } else if (cfg.schedule == ScheduleKind::FirstOrder) {
    FirstOrderBuildResult result =
        build_first_order(q0, p, cfg.map, cfg.delta, cfg.safety_c,
                          cfg.safety_c_max, cfg.stop_tol);
    std::cout << "first_order: " << result.attempts << " attempt(s), final safety_c "
              << format_double(result.final_safety_c) << "\n";
    flow = std::move(result.flow);
    report = std::move(result.report);
  } else {
    const EpsilonSchedule schedule =
        second_order_schedule(cfg.map->constants(), witness_norm, cfg.delta,
                              cfg.map->dim_in(), cfg.map->dim_out());
    auto [f, r] = build_flow(q0, p, cfg.map, schedule, cfg.stop_tol,
                             cfg.contraction_slack);
    flow = std::move(f);
    report = std::move(r);
  }

  const fs::path dir(cfg.out_dir);
  write_run_csv(dir / "report.csv", report);
  write_json(dir / "summary.json", run_summary_json(report));
  save_flow_json(dir / "flow.json", flow);

  std::cout << "blocks " << report.blocks_used << ", squared MMD "
            << format_double(report.initial_mmd_sq) << " -> "
            << format_double(report.final_mmd_sq) << " (ratio "
            << format_double(report.achieved_ratio) << ", target "
            << format_double(cfg.delta) << ")\n"
            << "outputs in " << dir.string() << "\n";
  if (!report.target_met) {
    std::cerr << "target ratio not met\n";
    return kExitSchedule;
  }
  return kExitOk;
}

int cmd_verify(const CommonOpts& opts) {
  ExperimentConfig cfg = load_with_overrides(opts);
  certify_or_throw(cfg);
  fs::create_directories(cfg.out_dir);

  const VerificationReport rep = run_verification(cfg);
  write_json(fs::path(cfg.out_dir) / "verify_report.json", rep.to_json());

  std::size_t total = rep.extra_checks.size() + 3 * rep.trials.size();
  const auto violations = rep.violations();
  std::cout << "checks: " << total - violations.size() << "/" << total
            << " satisfied\n";
  for (const auto& v : violations) std::cerr << "violation: " << v << "\n";
  return rep.all_satisfied ? kExitOk : kExitVerifyFailed;
}

int cmd_sweep(const CommonOpts& opts, const std::vector<double>& deltas) {
  if (deltas.empty()) throw ConfigError("sweep needs at least one delta");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0 && deltas[i] < 1.0)) {
      throw ConfigError("sweep deltas must lie in (0, 1)");
    }
    if (i > 0 && !(deltas[i] < deltas[i - 1])) {
      throw ConfigError("sweep deltas must be strictly decreasing");
    }
  }

  ExperimentConfig cfg = load_with_overrides(opts);
  certify_or_throw(cfg);
  fs::create_directories(cfg.out_dir);

  std::vector<SweepRow> rows;
  for (std::size_t di = 0; di < deltas.size(); ++di) {
    const double delta = deltas[di];
    // Each row family owns a generator stream derived from (seed, index).
    const std::uint64_t row_seed = mix_seed(cfg.seed, di);
    const ParticleCloud q0 =
        sample_distribution(cfg.source, cfg.n_particles, mix_seed(row_seed, 1));
    const ParticleCloud p =
        sample_distribution(cfg.target, cfg.n_particles, mix_seed(row_seed, 2));
    const double witness_norm = witness_vector(p, q0, *cfg.map).norm();

    for (ScheduleKind kind : {ScheduleKind::FirstOrder, ScheduleKind::SecondOrder}) {
      SweepRow row;
      row.delta = delta;
      row.schedule = schedule_kind_name(kind);
      try {
        if (witness_norm <= cfg.stop_tol) {
          row.ok = true;
          row.n_predicted = 0;
        } else if (kind == ScheduleKind::FirstOrder) {
          FirstOrderBuildResult result =
              build_first_order(q0, p, cfg.map, delta, cfg.safety_c,
                                cfg.safety_c_max, cfg.stop_tol);
          row.epsilon = result.report.schedule.epsilon;
          row.n_predicted = result.report.schedule_blocks;
          row.n_used = result.report.blocks_used;
          row.initial_mmd_sq = result.report.initial_mmd_sq;
          row.final_mmd_sq = result.report.final_mmd_sq;
          row.achieved_ratio = result.report.achieved_ratio;
          row.ok = result.report.target_met;
          if (!row.ok) row.error = "target ratio not met";
        } else {
          const EpsilonSchedule schedule = second_order_schedule(
              cfg.map->constants(), witness_norm, delta, cfg.map->dim_in(),
              cfg.map->dim_out());
          auto [flow, report] = build_flow(q0, p, cfg.map, schedule,
                                           cfg.stop_tol, cfg.contraction_slack);
          row.epsilon = schedule.epsilon;
          row.n_predicted = schedule.num_blocks;
          row.n_used = report.blocks_used;
          row.initial_mmd_sq = report.initial_mmd_sq;
          row.final_mmd_sq = report.final_mmd_sq;
          row.achieved_ratio = report.achieved_ratio;
          row.ok = report.target_met;
          if (!row.ok) row.error = "target ratio not met";
        }
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
      }
      rows.push_back(std::move(row));
    }
  }

  const fs::path out = fs::path(cfg.out_dir) / "sweep.csv";
  write_sweep_csv(out, rows);
  std::cout << "wrote " << rows.size() << " rows to " << out.string() << "\n";

  const long failed =
      std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) { return !r.ok; });
  if (failed > 0) {
    std::cerr << failed << " sweep row(s) flagged an error\n";
    return kExitVerifyFailed;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"greedy residual-flow transport in feature-space MMD"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::vector<double> deltas;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", opts.config_path, "experiment config (JSON)")
        ->required();
    sub->add_option("--out-dir", out_dir, "override the config's output directory");
    sub->add_option("--seed", seed, "override the config's master seed");
  };

  CLI::App* build = app.add_subcommand("build", "build a flow under the configured schedule");
  add_common(build);
  CLI::App* verify = app.add_subcommand("verify", "run the seeded verification suite");
  add_common(verify);
  CLI::App* sweep = app.add_subcommand("sweep", "build under both schedules across deltas");
  add_common(sweep);
  sweep->add_option("--deltas", deltas, "strictly decreasing targets in (0,1)")
      ->required()
      ->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  CLI::App* active = build->parsed() ? build : verify->parsed() ? verify : sweep;
  if (active->count("--out-dir") > 0) opts.out_dir = out_dir;
  if (active->count("--seed") > 0) opts.seed = seed;

  try {
    if (build->parsed()) return cmd_build(opts);
    if (verify->parsed()) return cmd_verify(opts);
    if (sweep->parsed()) return cmd_sweep(opts, deltas);
  } catch (const ScheduleError& e) {
    std::cerr << "schedule error: " << e.what() << "\n";
    return kExitSchedule;
  } catch (const ConstructionError& e) {
    std::cerr << "construction error: " << e.what() << "\n";
    return kExitSchedule;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitSchedule;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
