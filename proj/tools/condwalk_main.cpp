#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "condwalk/errors.hpp"
#include "condwalk/harmonic.hpp"
#include "condwalk/harness.hpp"
#include "condwalk/increments.hpp"
#include "condwalk/kernel.hpp"
#include "condwalk/lattice_oracle.hpp"
#include "condwalk/montecarlo.hpp"
#include "condwalk/predict.hpp"
#include "condwalk/renewal.hpp"

namespace {

using namespace condwalk;

std::string num17(double value) {
  std::array<char, 64> buf;
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(),
                                       value, std::chars_format::general, 17);
  return std::string(buf.data(), ptr);
}

std::string sanitize(std::string name) {
  for (char& c : name) {
    if (c == ',' || c == '\n') c = ' ';
  }
  return name;
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open output file '" + path + "'");
  out << text;
  if (!out) throw IoError("failed while writing '" + path + "'");
}

IncrementLaw resolve_law(const std::string& ref) {
  try {
    return builtin_law(ref);
  } catch (const ConfigError&) {
  }
  return load_law_file(ref);
}

harmonic::HarmonicTable build_table(const IncrementLaw& law,
                                    harmonic::Direction dir, double reach,
                                    std::int64_t paths, std::uint64_t seed) {
  if (law.is_lattice()) {
    try {
      return harmonic::make_skipfree_table(law, dir, reach);
    } catch (const NotSkipFree&) {
    }
    return harmonic::make_extrapolated_table(law, dir, reach,
                                             {256, 1024, 4096});
  }
  return harmonic::make_mc_table(law, dir, reach, 0.1, 1024, paths, seed);
}

// --- subcommand payloads -------------------------------------------------

struct RunArgs {
  std::string config;
  std::string out;
  int threads = 0;
  std::string format;
};

int cmd_run(const RunArgs& args) {
  auto configs = harness::load_config_file(args.config);
  for (auto& cfg : configs) {
    if (args.threads > 0) cfg.threads = args.threads;
  }
  const auto report = harness::run_all(configs);
  harness::Format format =
      configs.empty() ? harness::Format::csv : configs.front().format;
  if (args.format == "csv") format = harness::Format::csv;
  if (args.format == "json") format = harness::Format::json;
  std::string out_path = args.out;
  if (out_path.empty() && !configs.empty()) out_path = configs.front().out;
  write_output(out_path, harness::emit(report, format));
  return 0;
}

struct GridArgs {
  double xmax = 4.0;
  double ymax = 4.0;
  double step = 0.25;
  std::string out;
};

int cmd_kernel_table(const GridArgs& args) {
  std::string text = "x,y,p,ell,psi\n";
  for (double x = 0.0; x <= args.xmax + 1e-12; x += args.step) {
    for (double y = 0.0; y <= args.ymax + 1e-12; y += args.step) {
      text += num17(x) + ',' + num17(y) + ',' + num17(kernel::p_kernel(x, y)) +
              ',' + num17(kernel::ell(x, y)) + ',' + num17(kernel::psi(x, y)) +
              '\n';
    }
  }
  write_output(args.out, text);
  return 0;
}

struct LevelSetArgs {
  std::vector<double> alphas{0.025, 0.1, 0.3};
  double max = 4.0;
  double step = 0.1;
  std::string out;
};

int cmd_level_sets(const LevelSetArgs& args) {
  std::string text = "alpha,x,y,inside\n";
  for (const double alpha : args.alphas) {
    for (double x = 0.0; x <= args.max + 1e-12; x += args.step) {
      for (double y = 0.0; y <= args.max + 1e-12; y += args.step) {
        const bool inside = kernel::superlevel_member(alpha, x, y);
        text += num17(alpha) + ',' + num17(x) + ',' + num17(y) + ',' +
                (inside ? '1' : '0') + '\n';
      }
    }
  }
  write_output(args.out, text);
  return 0;
}

struct CurveArgs {
  double xmax = 6.0;
  double step = 0.05;
  std::string out;
};

int cmd_l_curve(const CurveArgs& args) {
  std::string text = "x,L\n";
  for (double x = 0.0; x <= args.xmax + 1e-12; x += args.step) {
    text += num17(x) + ',' + num17(kernel::bigL(x)) + '\n';
  }
  write_output(args.out, text);
  return 0;
}

struct HarmonicArgs {
  std::string law;
  std::string direction = "forward";
  double xmax = 10.0;
  std::string method = "skipfree";
  std::vector<int> ladder{256, 1024, 4096};
  std::int64_t paths = 50000;
  double step = 0.1;
  int ncap = 1024;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_harmonic(const HarmonicArgs& args) {
  const IncrementLaw law = resolve_law(args.law);
  const auto dir = args.direction == "reversed"
                       ? harmonic::Direction::reversed
                       : harmonic::Direction::forward;
  harmonic::HarmonicTable table;
  if (args.method == "skipfree") {
    table = harmonic::make_skipfree_table(law, dir, args.xmax);
  } else if (args.method == "extrapolated") {
    table = harmonic::make_extrapolated_table(law, dir, args.xmax,
                                              args.ladder);
  } else {
    table = harmonic::make_mc_table(law, dir, args.xmax, args.step, args.ncap,
                                    args.paths, args.seed);
  }
  std::string text = "x,V,err,method\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    text += num17(table.grid_x(i)) + ',' + num17(table.values[i]) + ',' +
            num17(table.errors[i]) + ',' + args.method + '\n';
  }
  write_output(args.out, text);
  return 0;
}

struct OracleArgs {
  std::string law;
  double x = 0.0;
  int n = 16;
  std::string constraint = "n-1";
  std::string out;
};

int cmd_oracle(const OracleArgs& args) {
  const IncrementLaw law = resolve_law(args.law);
  const auto constraint = args.constraint == "n"
                              ? oracle::Constraint::survive_through_n
                              : oracle::Constraint::survive_through_n_minus_1;
  const auto table = oracle::joint_law(law, args.x, args.n, constraint);
  std::string text = "y,prob\n";
  for (const auto& [y, prob] : table.entries()) {
    text += num17(y) + ',' + num17(prob) + '\n';
  }
  write_output(args.out, text);
  return 0;
}

struct ProfileArgs {
  std::string law;
  double x = 0.0;
  int n = 16;
  std::string out;
};

int cmd_exit_pmf(const ProfileArgs& args) {
  const IncrementLaw law = resolve_law(args.law);
  const auto pmf = oracle::exit_pmf(law, args.x, args.n);
  std::string text = "k,prob\n";
  for (std::size_t k = 1; k < pmf.size(); ++k) {
    text += std::to_string(k) + ',' + num17(pmf[k]) + '\n';
  }
  write_output(args.out, text);
  return 0;
}

int cmd_persistence(const ProfileArgs& args) {
  const IncrementLaw law = resolve_law(args.law);
  const auto profile = oracle::persistence_profile(law, args.x, args.n);
  std::string text = "k,prob\n";
  for (std::size_t k = 0; k < profile.size(); ++k) {
    text += std::to_string(k) + ',' + num17(profile[k]) + '\n';
  }
  write_output(args.out, text);
  return 0;
}

struct PredictArgs {
  std::string law;
  double x = 0.0;
  int n = 16;
  std::vector<double> y;
  double xmax = 0.0;
  std::int64_t table_paths = 20000;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_predict(const PredictArgs& args) {
  const IncrementLaw law = resolve_law(args.law);
  double reach = args.xmax;
  if (reach <= 0.0) {
    reach = args.x;
    for (const double y : args.y) reach = std::max(reach, y);
    reach += 2.0;
  }
  const auto inputs = predict::make_inputs(
      law,
      build_table(law, harmonic::Direction::forward, reach, args.table_paths,
                  args.seed),
      build_table(law, harmonic::Direction::reversed,
                  std::max(reach, law.max_down() + 2.0), args.table_paths,
                  args.seed + 1));
  std::string text = "n,x,y,predictor,value\n";
  const auto push = [&](double y, const char* name, double value) {
    text += std::to_string(args.n) + ',' + num17(args.x) + ',' + num17(y) +
            ',' + name + ',' + num17(value) + '\n';
  };
  push(0.0, "persistence", predict::persistence_pred(inputs, args.x, args.n));
  if (law.is_lattice()) {
    push(0.0, "exit",
         predict::exit_pred_lattice(inputs, law, args.x, args.n));
    for (const double y : args.y) {
      push(y, "local", predict::local_pred(inputs, args.x, y, args.n));
      push(y, "caravenna",
           predict::caravenna_pred(inputs, args.x, y, args.n));
    }
  }
  write_output(args.out, text);
  return 0;
}

struct McArgs {
  std::string law;
  double x = 0.0;
  double y = 0.0;
  double v = 1.0;
  int n = 16;
  std::int64_t paths = 100000;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out;
};

int cmd_mc(const McArgs& args) {
  const IncrementLaw law = resolve_law(args.law);
  const auto estimate =
      montecarlo::mc_joint_interval(law, args.x, args.y, args.v, args.n,
                                    args.paths, args.seed, args.threads);
  std::string text = "n,x,y,v,value,stderr\n";
  text += std::to_string(args.n) + ',' + num17(args.x) + ',' + num17(args.y) +
          ',' + num17(args.v) + ',' + num17(estimate.value) + ',' +
          num17(estimate.stderr_) + '\n';
  write_output(args.out, text);
  return 0;
}

struct RenewalArgs {
  std::string law;
  int kterms = 20000;
  double xmax = 5.0;
  std::string out;
};

int cmd_renewal(const RenewalArgs& args) {
  const IncrementLaw law = resolve_law(args.law);
  const auto constants = renewal::spitzer_constants(law, args.kterms);
  const auto report = renewal::identity_report(law, args.xmax, args.kterms);
  std::string text = "name,lhs,rhs,residual,tol,pass\n";
  const auto constant_row = [&](const char* name, double value, double tol) {
    text += std::string(name) + ',' + num17(value) + ',' + num17(value) +
            ",0," + num17(tol) + ",1\n";
  };
  constant_row("c_plus", constants.c_plus, constants.tail_estimate);
  constant_row("c_minus", constants.c_minus, constants.tail_estimate);
  constant_row("c_zero", constants.c_zero, constants.tail_estimate);
  constant_row("fitted_exponent", constants.fitted_exponent, 0.0);
  for (const auto& row : report.rows) {
    text += sanitize(row.name) + ',' + num17(row.lhs) + ',' + num17(row.rhs) +
            ',' + num17(row.residual) + ',' + num17(row.tol) + ',' +
            (row.pass ? '1' : '0') + '\n';
  }
  write_output(args.out, text);
  return report.all_pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical toolkit for random walks killed at the origin"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand(
      "run", "evaluate a config-driven oracle-vs-predictor experiment");
  run->add_option("--config", run_args.config, "experiment config file")
      ->required();
  run->add_option("--out", run_args.out, "output path (default stdout)");
  run->add_option("--threads", run_args.threads,
                  "override the worker count of every section");
  run->add_option("--format", run_args.format, "override the output format")
      ->check(CLI::IsMember({"csv", "json"}));

  GridArgs grid_args;
  auto* kernel_table =
      app.add_subcommand("kernel-table", "tabulate p, ell and psi on a grid");
  kernel_table->add_option("--xmax", grid_args.xmax, "grid extent in x");
  kernel_table->add_option("--ymax", grid_args.ymax, "grid extent in y");
  kernel_table->add_option("--step", grid_args.step, "grid spacing");
  kernel_table->add_option("--out", grid_args.out, "output path");

  LevelSetArgs level_args;
  auto* level_sets = app.add_subcommand(
      "level-sets", "superlevel-set membership of the p kernel");
  level_sets->add_option("--alpha", level_args.alphas, "levels to test")
      ->delimiter(',');
  level_sets->add_option("--max", level_args.max, "grid extent");
  level_sets->add_option("--step", level_args.step, "grid spacing");
  level_sets->add_option("--out", level_args.out, "output path");

  CurveArgs curve_args;
  auto* l_curve =
      app.add_subcommand("l-curve", "the normalized tail function L");
  l_curve->add_option("--xmax", curve_args.xmax, "largest argument");
  l_curve->add_option("--step", curve_args.step, "grid spacing");
  l_curve->add_option("--out", curve_args.out, "output path");

  HarmonicArgs harmonic_args;
  auto* harmonic_cmd =
      app.add_subcommand("harmonic", "tabulate the harmonic function V");
  harmonic_cmd->add_option("--law", harmonic_args.law, "step law")->required();
  harmonic_cmd
      ->add_option("--direction", harmonic_args.direction,
                   "forward or reversed walk")
      ->check(CLI::IsMember({"forward", "reversed"}));
  harmonic_cmd->add_option("--xmax", harmonic_args.xmax, "table reach");
  harmonic_cmd
      ->add_option("--method", harmonic_args.method, "evaluation method")
      ->check(CLI::IsMember({"skipfree", "extrapolated", "mc"}));
  harmonic_cmd
      ->add_option("--ladder", harmonic_args.ladder,
                   "epoch ladder for extrapolation")
      ->delimiter(',');
  harmonic_cmd->add_option("--paths", harmonic_args.paths,
                           "sample paths per grid point (mc)");
  harmonic_cmd->add_option("--step", harmonic_args.step, "grid spacing (mc)");
  harmonic_cmd->add_option("--ncap", harmonic_args.ncap, "depth cap (mc)");
  harmonic_cmd->add_option("--seed", harmonic_args.seed, "RNG seed (mc)");
  harmonic_cmd->add_option("--out", harmonic_args.out, "output path");

  OracleArgs oracle_args;
  auto* oracle_cmd = app.add_subcommand(
      "oracle", "exact joint law of the surviving walk at epoch n");
  oracle_cmd->add_option("--law", oracle_args.law, "step law")->required();
  oracle_cmd->add_option("--x", oracle_args.x, "start");
  oracle_cmd->add_option("--n", oracle_args.n, "epoch")->required();
  oracle_cmd
      ->add_option("--constraint", oracle_args.constraint,
                   "survive through n-1 or through n")
      ->check(CLI::IsMember({"n-1", "n"}));
  oracle_cmd->add_option("--out", oracle_args.out, "output path");

  ProfileArgs exit_args;
  auto* exit_pmf = app.add_subcommand("exit-pmf", "exact exit-time pmf");
  exit_pmf->add_option("--law", exit_args.law, "step law")->required();
  exit_pmf->add_option("--x", exit_args.x, "start");
  exit_pmf->add_option("--n", exit_args.n, "largest epoch")->required();
  exit_pmf->add_option("--out", exit_args.out, "output path");

  ProfileArgs persistence_args;
  auto* persistence_cmd =
      app.add_subcommand("persistence", "exact survival profile");
  persistence_cmd->add_option("--law", persistence_args.law, "step law")
      ->required();
  persistence_cmd->add_option("--x", persistence_args.x, "start");
  persistence_cmd->add_option("--n", persistence_args.n, "largest epoch")
      ->required();
  persistence_cmd->add_option("--out", persistence_args.out, "output path");

  PredictArgs predict_args;
  auto* predict_cmd = app.add_subcommand(
      "predict", "kernel-based predictions at the oracle's coordinates");
  predict_cmd->add_option("--law", predict_args.law, "step law")->required();
  predict_cmd->add_option("--x", predict_args.x, "start");
  predict_cmd->add_option("--n", predict_args.n, "epoch")->required();
  predict_cmd->add_option("--y", predict_args.y, "target states")
      ->delimiter(',');
  predict_cmd->add_option("--xmax", predict_args.xmax,
                          "harmonic-table reach (default: sized from x,y)");
  predict_cmd->add_option("--table-paths", predict_args.table_paths,
                          "sample paths per table point (densities)");
  predict_cmd->add_option("--seed", predict_args.seed, "table RNG seed");
  predict_cmd->add_option("--out", predict_args.out, "output path");

  McArgs mc_args;
  auto* mc_cmd = app.add_subcommand(
      "mc", "Monte Carlo joint interval probability with survival");
  mc_cmd->add_option("--law", mc_args.law, "step law")->required();
  mc_cmd->add_option("--x", mc_args.x, "start");
  mc_cmd->add_option("--y", mc_args.y, "interval left end");
  mc_cmd->add_option("--v", mc_args.v, "interval width");
  mc_cmd->add_option("--n", mc_args.n, "epoch")->required();
  mc_cmd->add_option("--paths", mc_args.paths, "sample paths");
  mc_cmd->add_option("--seed", mc_args.seed, "RNG seed");
  mc_cmd->add_option("--threads", mc_args.threads, "worker count");
  mc_cmd->add_option("--out", mc_args.out, "output path");

  RenewalArgs renewal_args;
  auto* renewal_cmd = app.add_subcommand(
      "renewal", "Spitzer constants and renewal-identity report");
  renewal_cmd->add_option("--law", renewal_args.law, "step law")->required();
  renewal_cmd->add_option("--kterms", renewal_args.kterms, "series terms");
  renewal_cmd->add_option("--xmax", renewal_args.xmax, "identity state grid");
  renewal_cmd->add_option("--out", renewal_args.out, "output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (run->parsed()) return cmd_run(run_args);
    if (kernel_table->parsed()) return cmd_kernel_table(grid_args);
    if (level_sets->parsed()) return cmd_level_sets(level_args);
    if (l_curve->parsed()) return cmd_l_curve(curve_args);
    if (harmonic_cmd->parsed()) return cmd_harmonic(harmonic_args);
    if (oracle_cmd->parsed()) return cmd_oracle(oracle_args);
    if (exit_pmf->parsed()) return cmd_exit_pmf(exit_args);
    if (persistence_cmd->parsed()) return cmd_persistence(persistence_args);
    if (predict_cmd->parsed()) return cmd_predict(predict_args);
    if (mc_cmd->parsed()) return cmd_mc(mc_args);
    if (renewal_cmd->parsed()) return cmd_renewal(renewal_args);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  return 0;
}
