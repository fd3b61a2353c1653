#include <CLI11.hpp>
#include <cstdio>
#include <optional>
#include <string>

#include "bethe/campaign.hpp"
#include "bethe/config.hpp"
#include "bethe/errors.hpp"

namespace {

struct Invocation {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out;
  bool gnuplot = false;
  // empty = take kind/mode from the config file (the `run` subcommand)
  std::optional<bethe::ExperimentKind> kind;
  std::string mode;
};

void add_common(CLI::App* sub, Invocation& inv) {
  sub->add_option("--config", inv.config_path, "experiment config file")
      ->required();
  sub->add_option("--seed", inv.seed, "override the config seed");
  sub->add_option("--workers", inv.workers, "override the worker count");
  sub->add_option("--out", inv.out, "override the output root");
  sub->add_flag("--gnuplot", inv.gnuplot,
                "also write two-column .dat curves (dos kinds)");
}

int execute(const Invocation& inv) {
  bethe::ExperimentConfig cfg;
  try {
    cfg = bethe::parse_config_file(inv.config_path);
  } catch (const bethe::Error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
  if (inv.kind) {
    cfg.kind = *inv.kind;
    cfg.mode = inv.mode;
  }
  if (inv.seed) cfg.moments.seed = *inv.seed;
  if (inv.workers) cfg.moments.workers = *inv.workers;
  if (!inv.out.empty()) cfg.out_dir = inv.out;

  bethe::RunOptions opt;
  opt.gnuplot = inv.gnuplot;
  const bethe::RunOutcome outcome = bethe::run_experiment(cfg, opt);
  if (!outcome.message.empty())
    std::fprintf(stderr, "%s\n", outcome.message.c_str());
  if (!outcome.out_dir.empty())
    std::printf("%s\n", outcome.out_dir.c_str());
  return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bethe-lab: Anderson-model laboratory on finite Bethe-lattice "
               "subtrees"};
  app.require_subcommand(1);
  argv = app.ensure_utf8(argv);

  Invocation inv;
  std::string report_dir;

  CLI::App* run = app.add_subcommand(
      "run", "run the experiment named by the config's kind/mode");
  add_common(run, inv);

  CLI::App* greens =
      app.add_subcommand("greens", "resolvent entries of one sample as CSV");
  add_common(greens, inv);

  CLI::App* moments = app.add_subcommand(
      "moments", "fractional-moment campaigns (decay, resolvent-diff, "
                 "derivatives, bounds)");
  moments->require_subcommand(1);
  CLI::App* m_decay =
      moments->add_subcommand("decay", "shell-averaged decay of E|G|^s");
  CLI::App* m_diff = moments->add_subcommand(
      "resolvent-diff", "volume-difference moments over nested depths");
  CLI::App* m_deriv = moments->add_subcommand(
      "derivatives", "score-weight vs finite-difference estimators");
  CLI::App* m_bounds =
      moments->add_subcommand("bounds", "one-site Lorentzian bound draws");
  for (CLI::App* s : {m_decay, m_diff, m_deriv, m_bounds}) add_common(s, inv);

  CLI::App* dos = app.add_subcommand("dos", "density-of-states campaigns");
  dos->require_subcommand(1);
  CLI::App* d_eigen =
      dos->add_subcommand("eigen", "eigensolve N(E) and kernel-smoothed rho");
  CLI::App* d_stj = dos->add_subcommand(
      "stieltjes", "epsilon-ladder Stieltjes inversion with extrapolation");
  CLI::App* d_smooth = dos->add_subcommand(
      "smoothness", "two-step finite-difference smoothness diagnostic");
  CLI::App* d_lloyd = dos->add_subcommand(
      "lloyd", "Cauchy-potential Monte Carlo against the exact oracle");
  for (CLI::App* s : {d_eigen, d_stj, d_smooth, d_lloyd}) add_common(s, inv);

  CLI::App* validate =
      app.add_subcommand("validate", "run the oracle validation suite");
  add_common(validate, inv);

  CLI::App* report =
      app.add_subcommand("report", "print the summary of a finished run");
  report->add_option("dir", report_dir, "run directory with manifest.json")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (report->parsed()) return bethe::report_directory(report_dir);

  using EK = bethe::ExperimentKind;
  if (greens->parsed()) inv.kind = EK::greens;
  else if (m_decay->parsed()) inv.kind = EK::decay;
  else if (m_diff->parsed()) inv.kind = EK::resolvent_diff;
  else if (m_deriv->parsed()) inv.kind = EK::derivatives;
  else if (m_bounds->parsed()) inv.kind = EK::bounds;
  else if (validate->parsed()) inv.kind = EK::validate;
  else if (d_eigen->parsed()) { inv.kind = EK::dos; inv.mode = "eigen"; }
  else if (d_stj->parsed()) { inv.kind = EK::dos; inv.mode = "stieltjes"; }
  else if (d_smooth->parsed()) { inv.kind = EK::dos; inv.mode = "smoothness"; }
  else if (d_lloyd->parsed()) { inv.kind = EK::dos; inv.mode = "lloyd"; }
  // else: `run` -- kind/mode come from the config file

  return execute(inv);
}
