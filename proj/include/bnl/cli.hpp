#pragma once

// Command-line front end: simulate, fit, cv, report. Exit status 0 on
// success, 1 on a runtime failure, 2 on a usage, validation or file error.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "CLI11.hpp"

#include "bnl/errors.hpp"
#include "bnl/gibbs.hpp"
#include "bnl/io.hpp"
#include "bnl/model.hpp"
#include "bnl/realdata.hpp"
#include "bnl/simgen.hpp"

namespace bnl::cli {

inline constexpr const char* kVersion = "1.0.0";

inline constexpr int kOk = 0;
inline constexpr int kRuntime = 1;
inline constexpr int kUsage = 2;

struct ChainOptions {
  std::size_t n_iter = 50000;
  std::optional<std::size_t> burn_in;
  std::size_t thin = 1;
  double fusion_epsilon = 1e-2;
  std::size_t quantile_draws = 1000;

  ChainConfig resolve(std::uint64_t seed) const {
    ChainConfig c;
    c.n_iter = n_iter;
    c.burn_in = burn_in;
    c.thin = thin;
    c.fusion_epsilon = fusion_epsilon;
    c.quantile_draws = quantile_draws;
    c.seed = seed;
    c.validate();
    return c;
  }
};

struct GridOptions {
  std::vector<double> alpha = sim::default_grid();
  std::vector<double> lambda1 = sim::default_grid();
  std::vector<double> lambda2 = sim::default_grid();
  double nu0 = 1.0;
  double eta0 = 1.0;

  sim::HyperGrid resolve() const {
    sim::HyperGrid g{alpha, lambda1, lambda2, nu0, eta0};
    g.validate();
    return g;
  }
};

struct SimulateOptions {
  sim::SimDesign design;
  std::size_t reps = 1;
  std::vector<std::string> methods{"dlbmn", "bmn"};
  std::string out_dir;
};

struct FitOptions {
  std::string data;
  std::string edges;
  std::string mode = "dlbmn";
  double alpha = 1.0;
  double lambda2 = 1.0;
  double nu0 = 1.0;
  double eta0 = 1.0;
  std::optional<double> lambda1;
  std::string r_file;
  std::uint64_t seed = 0;
  std::string out;
  std::string store_chain;
};

struct CvOptions {
  std::string csv;
  geo::GeoSchema schema;
  bool keep_missing = false;
  std::size_t folds = 5;
  std::size_t k = 5;
  std::string method = "dlbmn";
  std::uint64_t seed = 0;
  std::string out_json;
  std::string out_csv;
};

struct ReportOptions {
  std::vector<std::string> inputs;
  std::string out;
  std::string format = "table";
};

namespace detail {

inline SamplerMode parse_mode(const std::string& s) {
  if (s == "dlbmn") return SamplerMode::dlbmn;
  if (s == "bmn") return SamplerMode::bmn;
  throw DomainError("method must be 'dlbmn' or 'bmn', got '" + s + "'");
}

inline io::json chain_json(const ChainConfig& c) {
  return {{"n_iter", c.n_iter},
          {"burn_in", c.resolved_burn_in()},
          {"thin", c.thin},
          {"seed", c.seed},
          {"fusion_epsilon", c.fusion_epsilon},
          {"quantile_draws", c.quantile_draws}};
}

inline io::json grid_json(const sim::HyperGrid& g) {
  return {{"alpha", g.alpha},
          {"lambda1", g.lambda1},
          {"lambda2", g.lambda2},
          {"nu0", g.nu0},
          {"eta0", g.eta0}};
}

inline io::json provenance(const std::string& command, io::json config) {
  return {{"tool", "bnl"}, {"version", kVersion}, {"command", command}, {"config", std::move(config)}};
}

inline std::string num(double v) { return io::format_number(v); }

inline void write_json(const std::string& path, const io::json& j) {
  io::write_file(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands. Each validates everything before doing any work.

inline int cmd_simulate(const SimulateOptions& o, const ChainOptions& co, const GridOptions& go,
                        std::size_t threads, bool overwrite, std::ostream& log) {
  o.design.validate();
  const auto grid = go.resolve();
  const auto chain = co.resolve(o.design.seed);
  if (o.reps < 1) throw DomainError("reps must be >= 1");
  sim::ExperimentOptions eo;
  eo.repetitions = o.reps;
  eo.threads = threads;
  eo.methods.clear();
  for (const auto& m : o.methods) eo.methods.push_back(detail::parse_mode(m));
  if (eo.methods.empty()) throw DomainError("methods must name at least one method");
  if (o.out_dir.empty()) throw DomainError("out-dir is required");
  const std::string reps_path = o.out_dir + "/simulate_reps.csv";
  const std::string summary_path = o.out_dir + "/simulate_summary.csv";
  io::require_output(reps_path, overwrite);
  io::require_output(summary_path, overwrite);

  const auto prov = detail::provenance(
      "simulate", {{"n", o.design.n},
                   {"p", o.design.p},
                   {"tr", o.design.tr},
                   {"fr", o.design.fr},
                   {"seed", o.design.seed},
                   {"reps", o.reps},
                   {"methods", o.methods},
                   {"grid", detail::grid_json(grid)},
                   {"chain", detail::chain_json(chain)},
                   {"selection", "oracle_min_mse"}});

  const auto result = sim::run_experiment(o.design, grid, chain, eo);
  const auto& d = o.design;
  io::write_file(reps_path, [&](std::ostream& out) {
    io::CsvWriter w(out, prov);
    w.row({"n", "p", "tr", "fr", "method", "alpha", "lambda1", "lambda2", "rep", "seed", "mse",
           "n_edges", "failed_points", "error"});
    for (const auto& r : result.reps) {
      const bool dl = r.method == SamplerMode::dlbmn;
      const bool ok = !r.error;
      w.row({std::to_string(d.n), std::to_string(d.p), detail::num(d.tr), detail::num(d.fr),
             to_string(r.method), ok && dl ? detail::num(r.best.alpha) : "",
             ok && !dl ? detail::num(r.best.lambda1) : "", ok ? detail::num(r.best.lambda2) : "",
             std::to_string(r.rep), std::to_string(r.seed), detail::num(r.mse),
             std::to_string(r.n_edges), std::to_string(r.failed_points), r.error.value_or("")});
    }
  });
  io::write_file(summary_path, [&](std::ostream& out) {
    io::CsvWriter w(out, prov);
    w.row({"n", "p", "tr", "fr", "method", "mean_mse", "sd_mse", "reps", "failed", "selection"});
    for (const auto& c : result.cells) {
      w.row({std::to_string(d.n), std::to_string(d.p), detail::num(d.tr), detail::num(d.fr),
             to_string(c.method), detail::num(c.mean), detail::num(c.sd), std::to_string(c.reps),
             std::to_string(c.failed), "oracle_min_mse"});
    }
  });
  for (const auto& c : result.cells) {
    log << to_string(c.method) << ": mean MSE " << detail::num(c.mean) << " sd "
        << detail::num(c.sd) << " over " << c.reps << " repetitions\n";
  }
  std::size_t failed = 0;
  for (const auto& c : result.cells) failed += c.failed;
  return failed == result.reps.size() ? kRuntime : kOk;
}

inline int cmd_fit(const FitOptions& o, const ChainOptions& co, bool overwrite, std::ostream& log) {
  const auto chain = co.resolve(o.seed);
  io::require_input(o.data, "data");
  if (!o.edges.empty()) io::require_input(o.edges, "edges");
  Hyperparameters h;
  h.mode = detail::parse_mode(o.mode);
  h.alpha = o.alpha;
  h.lambda2 = o.lambda2;
  h.nu0 = o.nu0;
  h.eta0 = o.eta0;
  if (h.mode == SamplerMode::bmn) {
    if (!o.lambda1 || o.r_file.empty()) throw DomainError("mode bmn requires --lambda1 and --r-file");
    io::require_input(o.r_file, "r");
  } else if (o.lambda1 || !o.r_file.empty()) {
    throw DomainError("--lambda1 and --r-file apply only to mode bmn");
  }
  if (o.out.empty()) throw DomainError("out is required");
  io::require_output(o.out, overwrite);
  if (!o.store_chain.empty()) io::require_output(o.store_chain, overwrite);

  const auto data = io::read_dataset_csv(o.data);
  const EdgeSet edges = o.edges.empty() ? EdgeSet(data.n(), {}) : io::read_edges_csv(o.edges, data.n());
  if (h.mode == SamplerMode::bmn) h.bmn = BmnFixed{*o.lambda1, io::read_r_csv(o.r_file, edges)};
  h.validate(edges.size());

  io::json hyper = {{"mode", o.mode}, {"alpha", h.alpha}, {"lambda2", h.lambda2},
                    {"nu0", h.nu0},   {"eta0", h.eta0}};
  if (h.bmn) {
    hyper["lambda1"] = h.bmn->lambda1;
    hyper["r"] = h.bmn->r;
  }
  const auto prov = detail::provenance("fit", {{"data", o.data},
                                               {"edges", o.edges},
                                               {"n", data.n()},
                                               {"p", data.p()},
                                               {"n_edges", edges.size()},
                                               {"hyperparameters", hyper},
                                               {"chain", detail::chain_json(chain)}});
  ChainConfig cfg = chain;
  cfg.store_full_chain = !o.store_chain.empty();
  const auto fit = run_chain(data, edges, h, cfg);

  detail::write_json(o.out, io::summary_json(fit.summary, edges, prov));
  if (!o.store_chain.empty()) {
    io::write_file(o.store_chain, [&](std::ostream& out) {
      out << io::json{{"provenance", prov}}.dump() << '\n';
      for (const auto& rec : fit.chain) out << io::record_json(rec).dump() << '\n';
    });
  }
  log << "kept " << fit.summary.n_kept << " draws; posterior mean sigma^2 "
      << detail::num(fit.summary.mean_sigma2) << '\n';
  return kOk;
}

inline int cmd_cv(const CvOptions& o, const ChainOptions& co, const GridOptions& go,
                  std::size_t threads, bool overwrite, std::ostream& log) {
  geo::CvConfig cfg;
  cfg.folds = o.folds;
  cfg.k = o.k;
  cfg.method = detail::parse_mode(o.method);
  cfg.grid = go.resolve();
  cfg.chain = co.resolve(o.seed);
  cfg.seed = o.seed;
  cfg.threads = threads;
  if (o.folds < 2) throw DomainError("folds must be >= 2");
  if (o.k < 1) throw DomainError("k must be >= 1");
  io::require_input(o.csv, "csv");
  if (o.out_json.empty()) throw DomainError("out-json is required");
  io::require_output(o.out_json, overwrite);
  if (!o.out_csv.empty()) io::require_output(o.out_csv, overwrite);

  const auto geo = geo::load_geo_csv(o.csv, o.schema, !o.keep_missing);
  const auto report = geo::cross_validate(geo, cfg);
  const auto prov = detail::provenance(
      "cv", {{"csv", o.csv},
             {"schema",
              {{"target", o.schema.target},
               {"features", o.schema.features},
               {"latitude", o.schema.latitude},
               {"longitude", o.schema.longitude},
               {"zero_is_missing", o.schema.zero_is_missing}}},
             {"filter_missing", !o.keep_missing},
             {"rows_read", geo.rows_read},
             {"rows_dropped", geo.rows_dropped},
             {"rows_used", geo.data.n()},
             {"folds", o.folds},
             {"k", o.k},
             {"method", o.method},
             {"seed", o.seed},
             {"grid", detail::grid_json(cfg.grid)},
             {"chain", detail::chain_json(cfg.chain)},
             {"selection", "min_fold_pse"}});
  detail::write_json(o.out_json, io::cv_json(report, prov));
  if (!o.out_csv.empty()) {
    io::write_file(o.out_csv, [&](std::ostream& out) {
      io::CsvWriter w(out, prov);
      w.row({"fold", "n_train", "n_test", "n_edges", "pse", "alpha", "lambda1", "lambda2"});
      for (const auto& f : report.folds) {
        const bool dl = f.best.mode == SamplerMode::dlbmn;
        w.row({std::to_string(f.fold), std::to_string(f.n_train), std::to_string(f.n_test),
               std::to_string(f.n_edges), detail::num(f.pse), dl ? detail::num(f.best.alpha) : "",
               dl ? "" : detail::num(f.best.lambda1), detail::num(f.best.lambda2)});
      }
    });
  }
  log << "read " << geo.rows_read << " rows, dropped " << geo.rows_dropped << "; mean PSE "
      << detail::num(report.mean_pse) << " sd " << detail::num(report.sd_pse) << '\n';
  return kOk;
}

/// Aggregates one or more simulate_reps.csv files into a tidy long table
/// (one row per cell and method) or the wide table layout (one row per
/// (tr, fr) cell with mean and sd columns per method).
inline int cmd_report(const ReportOptions& o, bool overwrite, std::ostream& log) {
  if (o.inputs.empty()) throw DomainError("at least one input is required");
  if (o.format != "table" && o.format != "tidy") {
    throw DomainError("format must be 'table' or 'tidy', got '" + o.format + "'");
  }
  for (const auto& in : o.inputs) io::require_input(in, "input");
  if (o.out.empty()) throw DomainError("out is required");
  io::require_output(o.out, overwrite);

  using Key = std::tuple<std::size_t, std::size_t, double, double>;
  std::map<Key, std::map<std::string, std::vector<double>>> cells;
  std::vector<std::string> methods;
  for (const auto& path : o.inputs) {
    const auto t = io::detail::read_table(path);
    const auto col = [&](const char* name) { return io::detail::column(t, name, path); };
    const std::size_t cn = col("n"), cp = col("p"), ct = col("tr"), cf = col("fr"),
                      cm = col("method"), ce = col("mse"), cerr = col("error");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const Key key{io::detail::index_at(t, r, cn, path), io::detail::index_at(t, r, cp, path),
                    io::detail::number_at(t, r, ct, path), io::detail::number_at(t, r, cf, path)};
      const std::string& m = t.rows[r][cm];
      if (std::find(methods.begin(), methods.end(), m) == methods.end()) methods.push_back(m);
      auto& values = cells[key][m];
      if (t.rows[r][cerr].empty()) values.push_back(io::detail::number_at(t, r, ce, path));
    }
  }
  std::sort(methods.begin(), methods.end());
  auto stats = [](const std::vector<double>& v) {
    if (v.empty()) return std::pair{std::numeric_limits<double>::quiet_NaN(), 0.0};
    double s = 0.0;
    for (double x : v) s += x;
    const double mean = s / static_cast<double>(v.size());
    return std::pair{mean, sim::sample_sd(v, mean)};
  };

  const auto prov = detail::provenance("report", {{"inputs", o.inputs}, {"format", o.format}});
  io::write_file(o.out, [&](std::ostream& out) {
    io::CsvWriter w(out, prov);
    if (o.format == "tidy") {
      w.row({"n", "p", "tr", "fr", "method", "mean_mse", "sd_mse", "reps"});
      for (const auto& [key, by_method] : cells) {
        for (const auto& [m, values] : by_method) {
          const auto [mean, sd] = stats(values);
          w.row({std::to_string(std::get<0>(key)), std::to_string(std::get<1>(key)),
                 detail::num(std::get<2>(key)), detail::num(std::get<3>(key)), m,
                 detail::num(mean), detail::num(sd), std::to_string(values.size())});
        }
      }
      return;
    }
    std::vector<std::string> header{"n", "p", "tr", "fr"};
    for (const auto& m : methods) {
      header.push_back(m + "_mean");
      header.push_back(m + "_sd");
    }
    w.row(header);
    for (const auto& [key, by_method] : cells) {
      std::vector<std::string> row{std::to_string(std::get<0>(key)),
                                   std::to_string(std::get<1>(key)),
                                   detail::num(std::get<2>(key)), detail::num(std::get<3>(key))};
      for (const auto& m : methods) {
        const auto it = by_method.find(m);
        if (it == by_method.end()) {
          row.insert(row.end(), {"", ""});
          continue;
        }
        const auto [mean, sd] = stats(it->second);
        row.push_back(detail::num(mean));
        row.push_back(detail::num(sd));
      }
      w.row(row);
    }
  });
  log << "wrote " << cells.size() << " cells to " << o.out << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

namespace detail {

inline void add_chain_options(CLI::App* app, ChainOptions& co) {
  app->add_option("--n-iter", co.n_iter, "Gibbs sweeps per chain")->capture_default_str();
  app->add_option("--burn-in", co.burn_in, "Discarded sweeps (default n-iter / 2)");
  app->add_option("--thin", co.thin, "Keep every thin-th sweep after burn-in")->capture_default_str();
  app->add_option("--fusion-epsilon", co.fusion_epsilon, "Distance below which an edge counts as fused")
      ->capture_default_str();
  app->add_option("--quantile-draws", co.quantile_draws, "Draws retained for W quantiles")
      ->capture_default_str();
}

inline void add_grid_options(CLI::App* app, GridOptions& go) {
  app->add_option("--alpha-grid", go.alpha, "DLBMN alpha candidates")->delimiter(',');
  app->add_option("--lambda1-grid", go.lambda1, "BMN lambda1 candidates")->delimiter(',');
  app->add_option("--lambda2-grid", go.lambda2, "lambda2 candidates")->delimiter(',');
  app->add_option("--nu0", go.nu0, "sigma^2 prior shape parameter")->capture_default_str();
  app->add_option("--eta0", go.eta0, "sigma^2 prior scale parameter")->capture_default_str();
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian multi-task regression with network lasso", "bnl"};
  app.set_config("--config", "", "TOML config file; sections name subcommands");
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  bool overwrite = false;
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  app.add_flag("--overwrite", overwrite, "Replace existing output files");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  ChainOptions chain;
  GridOptions grid;

  SimulateOptions sim_o;
  auto* sim_cmd = app.add_subcommand("simulate", "Run the synthetic experiment for one (TR, FR) cell");
  sim_cmd->add_option("--n", sim_o.design.n, "Samples (multiple of 3)")->capture_default_str();
  sim_cmd->add_option("--p", sim_o.design.p, "Features")->capture_default_str();
  sim_cmd->add_option("--tr", sim_o.design.tr, "Fraction of same-group pairs kept")->capture_default_str();
  sim_cmd->add_option("--fr", sim_o.design.fr, "Fraction of cross-group pairs added")->capture_default_str();
  sim_cmd->add_option("--reps", sim_o.reps, "Repetitions")->capture_default_str();
  sim_cmd->add_option("--seed", sim_o.design.seed, "Root seed")->capture_default_str();
  sim_cmd->add_option("--methods", sim_o.methods, "dlbmn, bmn or both")->delimiter(',');
  sim_cmd->add_option("--out-dir", sim_o.out_dir, "Directory for simulate_reps.csv and simulate_summary.csv")
      ->required();
  detail::add_chain_options(sim_cmd, chain);
  detail::add_grid_options(sim_cmd, grid);

  FitOptions fit_o;
  auto* fit_cmd = app.add_subcommand("fit", "Run one chain and write its posterior summary");
  fit_cmd->add_option("--data", fit_o.data, "CSV with column y and feature columns")->required();
  fit_cmd->add_option("--edges", fit_o.edges, "CSV with columns a, b (0-based)");
  fit_cmd->add_option("--mode", fit_o.mode, "dlbmn or bmn")->capture_default_str();
  fit_cmd->add_option("--alpha", fit_o.alpha, "Dirichlet concentration")->capture_default_str();
  fit_cmd->add_option("--lambda2", fit_o.lambda2, "Coefficient shrinkage")->capture_default_str();
  fit_cmd->add_option("--nu0", fit_o.nu0, "sigma^2 prior shape parameter")->capture_default_str();
  fit_cmd->add_option("--eta0", fit_o.eta0, "sigma^2 prior scale parameter")->capture_default_str();
  fit_cmd->add_option("--lambda1", fit_o.lambda1, "Fixed lambda1 (bmn)");
  fit_cmd->add_option("--r-file", fit_o.r_file, "CSV with columns a, b, r (bmn)");
  fit_cmd->add_option("--seed", fit_o.seed, "Chain seed")->capture_default_str();
  fit_cmd->add_option("--out", fit_o.out, "Summary JSON path")->required();
  fit_cmd->add_option("--store-chain", fit_o.store_chain, "JSON-lines dump of kept draws");
  detail::add_chain_options(fit_cmd, chain);

  CvOptions cv_o;
  auto* cv_cmd = app.add_subcommand("cv", "Cross-validate on a geo-tagged CSV");
  cv_cmd->add_option("--csv", cv_o.csv, "Input CSV with header")->required();
  cv_cmd->add_option("--target", cv_o.schema.target, "Response column")->capture_default_str();
  cv_cmd->add_option("--features", cv_o.schema.features, "Feature columns")->delimiter(',');
  cv_cmd->add_option("--lat", cv_o.schema.latitude, "Latitude column")->capture_default_str();
  cv_cmd->add_option("--lon", cv_o.schema.longitude, "Longitude column")->capture_default_str();
  cv_cmd->add_option("--zero-missing", cv_o.schema.zero_is_missing, "Columns where 0 means missing")
      ->delimiter(',');
  cv_cmd->add_flag("--keep-missing", cv_o.keep_missing, "Fail on missing values instead of dropping rows");
  cv_cmd->add_option("--folds", cv_o.folds, "Folds")->capture_default_str();
  cv_cmd->add_option("--k", cv_o.k, "Neighbours for the graph and for prediction")->capture_default_str();
  cv_cmd->add_option("--method", cv_o.method, "dlbmn or bmn")->capture_default_str();
  cv_cmd->add_option("--seed", cv_o.seed, "Fold and chain seed")->capture_default_str();
  cv_cmd->add_option("--out-json", cv_o.out_json, "Report JSON path")->required();
  cv_cmd->add_option("--out-csv", cv_o.out_csv, "Per-fold CSV path");
  detail::add_chain_options(cv_cmd, chain);
  detail::add_grid_options(cv_cmd, grid);

  ReportOptions rep_o;
  auto* rep_cmd = app.add_subcommand("report", "Aggregate simulate_reps.csv files into a table");
  rep_cmd->add_option("--input", rep_o.inputs, "simulate_reps.csv files")->required();
  rep_cmd->add_option("--out", rep_o.out, "Output CSV")->required();
  rep_cmd->add_option("--format", rep_o.format, "table or tidy")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*sim_cmd) return cmd_simulate(sim_o, chain, grid, threads, overwrite, out);
    if (*fit_cmd) return cmd_fit(fit_o, chain, overwrite, out);
    if (*cv_cmd) return cmd_cv(cv_o, chain, grid, threads, overwrite, out);
    if (*rep_cmd) return cmd_report(rep_o, overwrite, out);
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const io::PathError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}

}  // namespace bnl::cli
