#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qdcascade/qdcascade.hpp"

namespace fs = std::filesystem;
using namespace qdc;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_metrics_csv(std::ostream& os, const PhotonMetrics& m, const std::string& hash) {
  os << "I_X,I_XX,V_X,V_XX,C,G2bar_X,G2bar_XX,fom,tail_warning,config_hash,schema_version\n";
  char buf[512];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%s,%d\n", m.I_X, m.I_XX,
                m.V_X, m.V_XX, m.C, m.G2bar_X, m.G2bar_XX, m.fom, m.tail_warning ? 1 : 0, hash.c_str(),
                kResultsSchema);
  os << buf;
}

int cmd_simulate(const std::string& config_path, const std::string& out) {
  const ValidatedConfig vc = validate(load_config(config_path));
  const CascadeModel model(vc);
  const Trajectory tr = propagate(model.liouvillian, model.rho0, model.grid);
  ensure_dir(out);
  std::ofstream os(fs::path(out) / "trajectory.csv");
  if (!os) throw IoError("cannot write trajectory.csv");
  write_trajectory_csv(os, tr, model.space);
  std::printf("wrote %zu samples to %s (max |Tr rho - 1| = %.3g, min eigenvalue = %.3g)\n", tr.size(),
              (fs::path(out) / "trajectory.csv").c_str(), tr.max_trace_error, tr.min_eigenvalue);
  return 0;
}

int cmd_metrics(const std::string& config_path, const std::string& out, bool dump) {
  const SystemConfig cfg = load_config(config_path);
  const ValidatedConfig vc = validate(cfg);
  const PhotonMetrics m = metrics_bundle(vc);
  if (out.empty()) {
    write_metrics_csv(std::cout, m, config_hash(cfg));
  } else {
    ensure_dir(out);
    std::ofstream os(fs::path(out) / "metrics.csv");
    write_metrics_csv(os, m, config_hash(cfg));
    std::printf("I_X = %.6f  I_XX = %.6f  C = %.6f  fom = %.6f\n", m.I_X, m.I_XX, m.C, m.fom);
  }
  if (m.tail_warning)
    std::fprintf(stderr, "warning: excited population %.3g remains at t_end\n", m.tail_population);
  if (dump) {
    const fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
    const CascadeModel model(vc);
    const Trajectory tr = propagate(model.liouvillian, model.rho0, model.grid);
    const TwoTimeGrid grid(model.grid);
    EngineOptions eo;
    eo.freeze_pulse_in_tau = vc.config.options.freeze_pulse_in_tau;
    const CorrelationEngine e(model.liouvillian, tr, grid, eo);
    const Channels ch = emission_channels(model.space, vc.config.options.x_channel_includes_cavity);
    write_correlation_map((dir / "g1_X_H.qdcm").string(), g1(e, ch.x[0]));
    write_correlation_map((dir / "g1_XX_H.qdcm").string(), g1(e, ch.xx[0]));
    write_correlation_map((dir / "g2_X_H.qdcm").string(), g2(e, ch.x[0], ch.x[0]));
    write_correlation_map((dir / "g2_XX_H.qdcm").string(), g2(e, ch.xx[0], ch.xx[0]));
  }
  return 0;
}

int cmd_sweep(const std::string& spec_path, const std::string& out, unsigned workers, bool do_resume,
              std::optional<std::size_t> max_points) {
  SweepOptions opt;
  opt.workers = workers;
  opt.max_points = max_points;
  SweepResult res;
  if (do_resume) {
    if (!spec_path.empty()) {
      const SweepSpec given = load_sweep_spec(spec_path);
      const SweepSpec stored = load_sweep_spec((fs::path(out) / "spec.json").string());
      if (spec_hash(given) != spec_hash(stored))
        throw CorruptCheckpoint("--config does not match the sweep stored in " + out, -1);
    }
    res = resume(out, opt);
  } else {
    res = run_sweep(load_sweep_spec(spec_path), out, opt);
  }
  std::size_t failed = 0;
  for (const auto& r : res.records)
    if (!r.metrics) ++failed;
  std::printf("%zu/%zu points complete (%zu evaluated now, %zu failed)\n", res.records.size(), res.spec.n_points(),
              res.evaluated, failed);
  return res.records.size() == res.spec.n_points() ? 0 : 3;
}

int cmd_fit(const std::string& results, const std::string& target, const std::string& out) {
  const RidgeFit fit = ridge_fit(read_surface_csv(results, target));
  json pts = json::array();
  for (const auto& p : fit.points) pts.push_back({{"F_P", p.F_P}, {"hbar_g", p.hbar_g}, {"value", p.value}});
  const json j{{"alpha", fit.alpha},
               {"beta", fit.beta},
               {"residual_rms", fit.residual_rms},
               {"target", target},
               {"points", pts}};
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream os(out);
    if (!os) throw IoError("cannot write " + out);
    os << j.dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Biexciton cascade photon-source simulator"};
  app.require_subcommand(1);

  std::string config, out;
  unsigned workers = 1;
  bool resume_flag = false, dump = false;
  std::optional<std::size_t> max_points;

  auto* sim = app.add_subcommand("simulate", "integrate one configuration and write trajectory.csv");
  sim->add_option("--config", config, "configuration JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", out, "output directory")->default_val(".");

  auto* met = app.add_subcommand("metrics", "compute photon metrics for one configuration");
  met->add_option("--config", config, "configuration JSON")->required()->check(CLI::ExistingFile);
  met->add_option("--out", out, "output directory (prints to stdout if omitted)");
  met->add_flag("--dump-correlations", dump, "also write binary G1/G2 maps of the H channels");

  auto* sw = app.add_subcommand("sweep", "run or resume a parameter sweep");
  sw->add_option("--config", config, "sweep spec JSON");
  sw->add_option("--out", out, "output directory")->required();
  sw->add_option("--workers", workers, "parallel workers")->default_val(1)->check(CLI::PositiveNumber);
  sw->add_flag("--resume", resume_flag, "complete an interrupted sweep in --out");
  sw->add_option("--max-points", max_points, "stop after evaluating this many points");

  std::string results, target = "fom", fit_out;
  auto* fit = app.add_subcommand("fit-ridge", "fit hbar_g = alpha F_P + beta through the row maxima");
  fit->add_option("results", results, "results.csv from a sweep")->required()->check(CLI::ExistingFile);
  fit->add_option("--target", target, "column to maximize (fom or I_XX)")->default_val("fom");
  fit->add_option("--out", fit_out, "write JSON here instead of stdout");

  std::optional<double> g, kappa, fp, ec, q;
  double gamma = 2.5, detuning = 0.0;
  auto* pur = app.add_subcommand("purcell", "convert between (g, kappa) and Purcell factor");
  pur->add_option("--g", g, "hbar g [ueV]");
  pur->add_option("--kappa", kappa, "hbar kappa [ueV]");
  pur->add_option("--gamma", gamma, "hbar gamma_rad [ueV]")->default_val(2.5);
  pur->add_option("--detuning", detuning, "cavity - transition detuning [ueV]")->default_val(0.0);
  pur->add_option("--purcell", fp, "Purcell factor");
  pur->add_option("--E-c", ec, "cavity energy [ueV]");
  pur->add_option("--Q", q, "quality factor");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return cmd_simulate(config, out);
    if (*met) return cmd_metrics(config, out, dump);
    if (*sw) {
      if (config.empty() && !resume_flag) throw CLI::RequiredError("--config");
      return cmd_sweep(config, out, workers, resume_flag, max_points);
    }
    if (*fit) return cmd_fit(results, target, fit_out);
    if (*pur) {
      json j{{"hbar_gamma_rad", gamma}};
      if (g && kappa) {
        j["hbar_g"] = *g;
        j["hbar_kappa"] = *kappa;
        j["detuning"] = detuning;
        j["F_P"] = purcell_factor(*g, *kappa, gamma, detuning);
        if (ec) j["Q"] = *ec / *kappa;
      } else if (fp && ec && q) {
        j["F_P"] = *fp;
        j["hbar_g"] = coupling_from_purcell(*fp, *ec, *q, gamma);
        j["hbar_kappa"] = *ec / *q;
      } else if (fp && g) {
        j["F_P"] = *fp;
        j["hbar_g"] = *g;
        j["hbar_kappa"] = kappa_for_purcell(*fp, *g, gamma);
      } else if (fp && kappa) {
        j["F_P"] = *fp;
        j["hbar_kappa"] = *kappa;
        j["hbar_g"] = coupling_for_purcell(*fp, *kappa, gamma);
      } else {
        std::fprintf(stderr, "purcell: give --g and --kappa, or --purcell with --g, --kappa, or --E-c and --Q\n");
        return 2;
      }
      std::cout << j.dump(2) << "\n";
      return 0;
    }
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
