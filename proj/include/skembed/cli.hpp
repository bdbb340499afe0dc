/*
 * Copyright 2026 The skembed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/// @file cli.hpp
/// @brief The `skembed` command line: solve, converge, metrics, check-sg,
/// recover and certify. Reports are JSON (CSV for rate tables).
///
/// Exit codes: 0 success, 1 usage or input error, 2 arbitrage rejection or
/// an infeasible LP, 3 non-convergence.

#pragma once

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "skembed/io.hpp"

namespace skembed::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kRejected = 2, kNotConverged = 3 };

struct RunConfig {
  std::string command;
  std::string market_path;
  std::string marginals_path;
  std::vector<std::string> measure_paths;  // metrics
  std::string method = "both";
  int steps = 16;
  double dt = 0.0625;
  std::string payoff_kind = "STOPPED_ABS_CAPPED";
  double cap = 1.0;
  double tol = 1e-3;
  int max_iters = 5000;
  std::vector<double> power;  // {p} or {p, V}
  int horizon_sg = 0;         // 0: use the lattice horizon, at most 12
  std::string out;
  std::string csv;
  std::string config;
  bool trace = false;
  bool dump_table = false;
  std::string schedule = "STAB";
  int levels = 5;
  double base_width = 1.0;
  double base_step = 1.0;
  double radius = 0.0;  // metrics: 0 picks the larger support radius
  int enumerate_limit = 12;

  PayoffSpec payoff() const { return PayoffSpec{payoff_kind_from_string(payoff_kind), cap}.checked(); }
  LatticeSpec lattice(int stages) const { return LatticeSpec::from_dt(steps, dt, stages); }

  void validate() const {
    if (steps < 1) throw InvalidInput("--lattice-steps must be >= 1");
    if (!(dt > 0.0)) throw InvalidInput("--dt must be positive");
    if (!(tol > 0.0)) throw InvalidInput("--tol must be positive");
    if (max_iters < 1) throw InvalidInput("--max-iters must be >= 1");
    if (!power.empty() && !(power[0] > 1.0)) throw InvalidInput("--power: p must exceed 1");
    if (power.size() > 1 && !(power[1] > 0.0)) throw InvalidInput("--power: V must be positive");
  }
};

namespace detail {

using io::Json;

/// Thrown to leave a command with a specific exit code after the report
/// has been written.
struct Exit {
  int code;
};

class Runner {
 public:
  Runner(const RunConfig& cfg, std::ostream& out, std::ostream& err) : cfg_(cfg), out_(out), err_(err) {}

  int dispatch() {
    cfg_.validate();
    const auto& c = cfg_.command;
    if (c == "solve") return solve();
    if (c == "converge") return converge();
    if (c == "metrics") return metrics();
    if (c == "check-sg") return check_sg();
    if (c == "recover") return recover();
    if (c == "certify") return certify();
    throw InvalidInput("unknown command '" + c + "'");
  }

 private:
  Json header(int stages) const {
    Json j{{"command", cfg_.command}};
    if (stages > 0) {
      j["lattice"] = io::to_json(cfg_.lattice(stages));
      j["payoff"] = io::to_json(cfg_.payoff());
    }
    return j;
  }

  void emit(const Json& report) {
    const auto text = io::dump(io::stamp(report));
    if (cfg_.out.empty()) {
      out_ << text;
      return;
    }
    std::ofstream f(cfg_.out);
    if (!f) throw InvalidInput("cannot write '" + cfg_.out + "'");
    f << text;
  }

  MarketData load_market() const {
    if (cfg_.market_path.empty()) throw InvalidInput("--market is required");
    auto mk = io::market_from_json(io::read_file(cfg_.market_path), cfg_.market_path);
    if (cfg_.power.size() == 2) mk.power = PowerConstraint{cfg_.power[0], cfg_.power[1]};
    if (cfg_.power.size() == 1) {
      if (!mk.power) throw InvalidInput("--power needs V when the market file has no power field");
      mk.power->p = cfg_.power[0];
    }
    return mk;
  }

  std::vector<DiscreteMeasure> load_marginals() const {
    if (cfg_.marginals_path.empty()) throw InvalidInput("--marginals is required");
    return io::marginals_from_json(io::read_file(cfg_.marginals_path), cfg_.marginals_path);
  }

  /// Rejects markets outside the closure of the no-arbitrage set; with
  /// `interior`, boundary quotes are rejected as well.
  void screen(const MarketData& mk, Json& report, bool interior) {
    const auto v = arbitrage_check(mk);
    report["arbitrage"] = io::to_json(v);
    if (v.ok || (!interior && v.in_closure())) return;
    err_ << "error: market rejected: " << skembed::detail::describe(v) << "\n";
    report["status"] = "REJECTED";
    emit(report);
    throw Exit{kRejected};
  }

  DualOptions dual_options() const {
    DualOptions o;
    o.max_iters = cfg_.max_iters;
    return o;
  }

  int solve() {
    const bool by_marginals = !cfg_.marginals_path.empty();
    if (by_marginals == !cfg_.market_path.empty())
      throw InvalidInput("solve: give exactly one of --market or --marginals");
    const auto& method = cfg_.method;
    if (method != "primal" && method != "dual" && method != "both")
      throw InvalidInput("--method must be primal, dual or both");
    const bool want_primal = method != "dual";
    const bool want_dual = method != "primal";

    Constraints cons;
    int stages = 0;
    MarketData market;
    std::vector<DiscreteMeasure> mus;
    Json report;
    if (by_marginals) {
      mus = load_marginals();
      stages = static_cast<int>(mus.size());
      report = header(stages);
      const auto v = peacock_check(mus);
      report["peacock"] = io::to_json(v);
      if (!v.ok || !v.centered) {
        err_ << "error: marginals are not a centered peacock: " << skembed::detail::describe(v) << "\n";
        report["status"] = "REJECTED";
        emit(report);
        return kRejected;
      }
      cons = Constraints::of_marginals(mus);
    } else {
      market = load_market();
      stages = static_cast<int>(market.maturities());
      report = header(stages);
      report["market"] = io::to_json(market);
      report["market"].erase("skembed_schema");
      screen(market, report, want_dual);
      cons = Constraints::calls(market);
    }
    const auto lattice = cfg_.lattice(stages);
    const auto payoff = cfg_.payoff();

    std::optional<PrimalReport> primal;
    if (want_primal) {
      primal = solve_primal(cons, lattice, payoff);
      report["primal"] = io::to_json(*primal);
      if (primal->status != LPStatus::OPTIMAL) {
        err_ << "error: primal LP is " << to_string(primal->status) << "\n";
        report["status"] = to_string(primal->status);
        emit(report);
        return kRejected;
      }
    }

    int code = kOk;
    if (want_dual) {
      auto opt = dual_options();
      if (primal) opt.target = primal->value;
      DualReport dual;
      std::vector<double> knots;
      if (by_marginals) {
        for (int k = -lattice.steps; k <= lattice.steps; ++k) knots.push_back(k * lattice.dx);
        dual = solve_dual_measure(mus, knots, lattice, payoff, opt);
      } else {
        dual = solve_dual(market, lattice, payoff, opt);
      }
      if (!by_marginals && lattice.steps <= cfg_.enumerate_limit) {
        const auto cert = verify_certificate(dual, market, lattice, payoff, cfg_.enumerate_limit);
        dual.certificate_residual = cert.min_residual;
      }
      report["dual"] = io::to_json(dual, cfg_.trace);
      if (cfg_.dump_table) {
        MarketData mk = market;
        if (by_marginals) {
          mk.strikes = knots;
          mk.calls = Matrix(mus.size(), knots.size(), 0.0);
          for (std::size_t i = 0; i < mus.size(); ++i)
            for (std::size_t j = 0; j < knots.size(); ++j) mk.calls(i, j) = call_price(mus[i], knots[j]);
        }
        const InnerSolver inner(lattice, payoff, mk);
        const auto r = inner.solve(dual.optimizer.alpha, dual.optimizer.beta);
        report["value_table"] = io::value_table_json(inner.graph(), r.table);
      }
      if (dual.status == DualStatus::NOT_CONVERGED) code = kNotConverged;
      if (primal) {
        const double gap = dual.value - primal->value;
        const double allowed = cfg_.tol * (1.0 + std::abs(primal->value));
        report["gap"] = gap;
        report["gap_tolerance"] = allowed;
        report["gap_ok"] = std::abs(gap) <= allowed;
        if (std::abs(gap) > allowed) code = kNotConverged;
      }
    }
    report["status"] = code == kOk ? "OK" : "NOT_CONVERGED";
    emit(report);
    if (code == kNotConverged) err_ << "error: dual did not converge to tolerance\n";
    return code;
  }

  GridSchedule schedule() const {
    return make_schedule(schedule_kind_from_string(cfg_.schedule), cfg_.levels, cfg_.base_width,
                         cfg_.base_step);
  }

  int converge() {
    const auto mus = load_marginals();
    const int stages = static_cast<int>(mus.size());
    Json report = header(stages);
    const auto v = peacock_check(mus);
    if (!v.ok || !v.centered) {
      err_ << "error: marginals are not a centered peacock: " << skembed::detail::describe(v) << "\n";
      report["peacock"] = io::to_json(v);
      report["status"] = "REJECTED";
      emit(report);
      return kRejected;
    }
    if (cfg_.power.size() > 1)
      throw InvalidInput("converge: --power takes only p; V is the last marginal's p-th moment");
    const auto sch = schedule();
    ConvergenceOptions opt;
    opt.primal.simplex.max_nonzeros = 4'000'000;
    if (!cfg_.power.empty()) opt.power_p = cfg_.power[0];
    RateTable table;
    try {
      table = convergence_run(mus, cfg_.payoff(), sch, cfg_.lattice(stages), opt);
    } catch (const MarketRejected& e) {
      err_ << "error: " << e.what() << "\n";
      report["status"] = "INFEASIBLE";
      emit(report);
      return kRejected;
    }
    report["schedule"] = {{"kind", cfg_.schedule}, {"levels", cfg_.levels},
                          {"base_width", cfg_.base_width}, {"base_step", cfg_.base_step}};
    report["table"] = io::to_json(table);
    report["audit"] = io::to_json(rate_audit(table, opt.power_p.value_or(opt.envelope_p)));
    report["status"] = "OK";
    if (!cfg_.csv.empty()) {
      std::ofstream f(cfg_.csv);
      if (!f) throw InvalidInput("cannot write '" + cfg_.csv + "'");
      f << table.to_csv();
    }
    emit(report);
    return kOk;
  }

  int metrics() {
    if (cfg_.measure_paths.size() != 2) throw InvalidInput("metrics: expects two measure files");
    const auto a = io::measure_from_json(io::read_file(cfg_.measure_paths[0]), cfg_.measure_paths[0]);
    const auto b = io::measure_from_json(io::read_file(cfg_.measure_paths[1]), cfg_.measure_paths[1]);
    double R = cfg_.radius;
    if (R <= 0.0)
      R = std::max({std::abs(a.min_position()), std::abs(a.max_position()), std::abs(b.min_position()),
                    std::abs(b.max_position()), 1e-12});
    Json report{{"command", "metrics"}};
    const auto m = metric_report(a, b, R);
    report["metrics"] = io::to_json(m);
    report["metrics"].erase("skembed_schema");
    report["certificate"] = io::to_json(rate_certificate(a, b, R));
    report["status"] = "OK";
    emit(report);
    return kOk;
  }

  int check_sg() {
    const auto market = load_market();
    const int stages = static_cast<int>(market.maturities());
    if (stages != 1) throw InvalidInput("check-sg: needs a single maturity");
    Json report = header(stages);
    screen(market, report, false);
    const auto lattice = cfg_.lattice(1);
    const auto payoff = cfg_.payoff();
    const auto primal = solve_primal(Constraints::calls(market), lattice, payoff);
    report["primal"] = {{"status", to_string(primal.status)}};
    if (primal.status != LPStatus::OPTIMAL) {
      err_ << "error: primal LP is " << to_string(primal.status) << "\n";
      report["status"] = to_string(primal.status);
      emit(report);
      return kRejected;
    }
    report["primal"]["value"] = primal.value;
    const int H = cfg_.horizon_sg > 0 ? cfg_.horizon_sg : std::min(lattice.steps, 12);
    const auto support = SupportSet::from_policy(*primal.graph, primal.stop_prob);
    report["horizon_sg"] = H;
    report["support_paths"] = support.paths.size();
    report["stop_go"] = io::to_json(check_support(support, payoff, lattice, H));
    report["status"] = "OK";
    emit(report);
    return kOk;
  }

  int recover() {
    std::vector<DiscreteMeasure> mus = load_marginals();
    if (mus.size() != 1) throw InvalidInput("recover: expects a single measure");
    Json report{{"command", "recover"}};
    report["schedule"] = {{"kind", cfg_.schedule}, {"levels", cfg_.levels},
                          {"base_width", cfg_.base_width}, {"base_step", cfg_.base_step}};
    report["rows"] = io::to_json(recovery_run(mus.front(), schedule()));
    report["status"] = "OK";
    emit(report);
    return kOk;
  }

  int certify() {
    const auto market = load_market();
    const int stages = static_cast<int>(market.maturities());
    Json report = header(stages);
    screen(market, report, true);
    const auto lattice = cfg_.lattice(stages);
    const auto payoff = cfg_.payoff();
    auto dual = solve_dual(market, lattice, payoff, dual_options());
    const auto cert = verify_certificate(dual, market, lattice, payoff, cfg_.enumerate_limit);
    dual.certificate_residual = cert.min_residual;
    report["dual"] = io::to_json(dual, cfg_.trace);
    report["certificate"] = io::to_json(cert);
    const bool ok = cert.min_residual >= -1e-8;
    report["status"] = ok ? "OK" : "CERTIFICATE_VIOLATED";
    emit(report);
    if (dual.status == DualStatus::NOT_CONVERGED) return kNotConverged;
    return ok ? kOk : kNotConverged;
  }

  RunConfig cfg_;
  std::ostream& out_;
  std::ostream& err_;
};

/// Fills every option the command line left unset from a JSON config.
inline void apply_config(const Json& j, RunConfig& c, const CLI::App& sub) {
  auto unset = [&](const std::string& flag) {
    const auto* o = sub.get_option_no_throw(flag);
    return o == nullptr || o->count() == 0;
  };
  const std::string where = "config";
  auto num = [&](const Json& v, const std::string& f) { return io::detail::number(v, where, f); };
  auto str = [&](const Json& v, const std::string& f) {
    if (!v.is_string()) io::detail::fail(where, f, "must be a string");
    return v.get<std::string>();
  };
  if (j.contains("lattice")) {
    const auto& l = j["lattice"];
    if (l.contains("steps") && unset("--lattice-steps")) c.steps = static_cast<int>(num(l["steps"], "lattice.steps"));
    if (l.contains("dt") && unset("--dt")) c.dt = num(l["dt"], "lattice.dt");
  }
  if (j.contains("payoff")) {
    const auto p = io::payoff_from_json(j["payoff"], where + ".payoff");
    if (unset("--payoff")) c.payoff_kind = std::string(to_string(p.kind));
    if (unset("--cap")) c.cap = p.cap;
  }
  if (j.contains("tol") && unset("--tol")) c.tol = num(j["tol"], "tol");
  if (j.contains("max_iters") && unset("--max-iters")) c.max_iters = static_cast<int>(num(j["max_iters"], "max_iters"));
  if (j.contains("horizon_sg") && unset("--horizon-sg")) c.horizon_sg = static_cast<int>(num(j["horizon_sg"], "horizon_sg"));
  if (j.contains("power") && unset("--power")) {
    const auto& p = j["power"];
    c.power = {num(io::detail::require(p, where, "p", "power.p"), "power.p")};
    if (p.contains("V")) c.power.push_back(num(p["V"], "power.V"));
  }
  if (j.contains("method") && unset("--method")) c.method = str(j["method"], "method");
  if (j.contains("market") && unset("--market")) c.market_path = str(j["market"], "market");
  if (j.contains("marginals") && unset("--marginals")) c.marginals_path = str(j["marginals"], "marginals");
  if (j.contains("out") && unset("--out")) c.out = str(j["out"], "out");
  if (j.contains("schedule")) {
    const auto& s = j["schedule"];
    if (s.contains("kind") && unset("--schedule")) c.schedule = str(s["kind"], "schedule.kind");
    if (s.contains("levels") && unset("--levels")) c.levels = static_cast<int>(num(s["levels"], "schedule.levels"));
    if (s.contains("base_width") && unset("--base-width")) c.base_width = num(s["base_width"], "schedule.base_width");
    if (s.contains("base_step") && unset("--base-step")) c.base_step = num(s["base_step"], "schedule.base_step");
  }
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"skembed: model-independent bounds by optimal embedding on a random-walk lattice"};
  app.name("skembed");
  app.require_subcommand(1);
  RunConfig cfg;

  auto common = [&](CLI::App* s, bool lattice) {
    if (lattice) {
      s->add_option("--lattice-steps", cfg.steps, "lattice steps N")->capture_default_str();
      s->add_option("--dt", cfg.dt, "time step (dx = sqrt(dt))")->capture_default_str();
      s->add_option("--payoff", cfg.payoff_kind, "payoff kind")
          ->check(CLI::IsMember({"LOOKBACK_MAX_CAPPED", "STOPPED_ABS_CAPPED", "RANGE_CAPPED",
                                 "FORWARD_STRADDLE_CAPPED"}))
          ->capture_default_str();
      s->add_option("--cap", cfg.cap, "payoff cap")->capture_default_str();
      s->add_option("--tol", cfg.tol, "relative duality-gap tolerance")->capture_default_str();
      s->add_option("--max-iters", cfg.max_iters, "dual iteration limit")->capture_default_str();
      s->add_option("--power", cfg.power, "power constraint: p [V]")->expected(1, 2);
    }
    s->add_option("--out", cfg.out, "write the JSON report here instead of stdout");
    s->add_option("--config", cfg.config, "JSON config supplying unset options");
  };
  auto schedule_opts = [&](CLI::App* s) {
    s->add_option("--schedule", cfg.schedule, "STAB or STAB2")->check(CLI::IsMember({"STAB", "STAB2"}));
    s->add_option("--levels", cfg.levels, "schedule levels")->capture_default_str();
    s->add_option("--base-width", cfg.base_width, "level-0 strike half-width")->capture_default_str();
    s->add_option("--base-step", cfg.base_step, "level-0 strike spacing")->capture_default_str();
  };

  auto* solve = app.add_subcommand("solve", "primal LP and/or dual bound on one instance");
  common(solve, true);
  solve->add_option("--market", cfg.market_path, "market JSON (strikes, calls, power)");
  solve->add_option("--marginals", cfg.marginals_path, "marginals JSON, solves P(mu)");
  solve->add_option("--method", cfg.method, "primal, dual or both")
      ->check(CLI::IsMember({"primal", "dual", "both"}))
      ->capture_default_str();
  solve->add_flag("--trace", cfg.trace, "include the dual iteration history");
  solve->add_flag("--dump-table", cfg.dump_table, "include the value table at the dual optimizer");

  auto* converge = app.add_subcommand("converge", "nested-grid convergence run with rate audit");
  common(converge, true);
  schedule_opts(converge);
  converge->add_option("--marginals", cfg.marginals_path, "marginals JSON");
  converge->add_option("--csv", cfg.csv, "write the rate table as CSV");

  auto* metrics = app.add_subcommand("metrics", "Levy-Prokhorov and Wasserstein-1 between two measures");
  common(metrics, false);
  metrics->add_option("measures", cfg.measure_paths, "two measure JSON files")->expected(2);
  metrics->add_option("--radius", cfg.radius, "common support radius R");

  auto* sg = app.add_subcommand("check-sg", "stop-go audit of the primal optimizer (one maturity)");
  common(sg, true);
  sg->add_option("--market", cfg.market_path, "market JSON");
  sg->add_option("--horizon-sg", cfg.horizon_sg, "continuation horizon H (<= 12)");

  auto* recover = app.add_subcommand("recover", "rebuild a measure from nested call grids");
  common(recover, false);
  schedule_opts(recover);
  recover->add_option("--marginals", cfg.marginals_path, "measure JSON");

  auto* certify = app.add_subcommand("certify", "dual solve plus pathwise superhedge check");
  common(certify, true);
  certify->add_option("--market", cfg.market_path, "market JSON");
  certify->add_flag("--trace", cfg.trace, "include the dual iteration history");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  cfg.command = sub->get_name();
  try {
    if (!cfg.config.empty()) detail::apply_config(io::read_file(cfg.config), cfg, *sub);
    detail::Runner runner(cfg, out, err);
    return runner.dispatch();
  } catch (const detail::Exit& e) {
    return e.code;
  } catch (const MarketRejected& e) {
    err << "error: " << e.what() << "\n";
    return kRejected;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace skembed::cli
