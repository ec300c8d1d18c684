// cotalk: simulation, service and maintenance commands.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cotalk/chain.hpp"
#include "cotalk/error.hpp"
#include "cotalk/gateway.hpp"
#include "cotalk/service.hpp"
#include "cotalk/sim.hpp"

namespace {

using nlohmann::json;
using namespace cotalk;

struct ScenarioFlags {
  std::string scenario_file;
  std::optional<int> n_units;
  std::vector<int> capacity;
  std::optional<double> diminish, words_per_unit, v_talk, v_type, v_read, t_observe, overlap, beta,
      gamma;
  std::optional<std::string> baseline;
  std::optional<std::uint64_t> seed;
  bool calibrated = false;

  void add(CLI::App* app) {
    app->add_option("--scenario", scenario_file, "JSON scenario file (flags override it)");
    app->add_flag("--calibrated", calibrated, "Start from the calibrated scenario");
    app->add_option("--n-units", n_units, "Latent semantic units per image");
    app->add_option("--capacity", capacity, "Units coverable per round, e.g. --capacity 30 15");
    app->add_option("--diminish", diminish, "Factor extending the capacity list");
    app->add_option("--words-per-unit", words_per_unit);
    app->add_option("--v-talk", v_talk, "Talking speed (WPM)");
    app->add_option("--v-type", v_type, "Typing speed (WPM)");
    app->add_option("--v-read", v_read, "Reading speed (WPM)");
    app->add_option("--t-observe", t_observe, "Seconds each annotator observes the image");
    app->add_option("--baseline-output", baseline, "talk|type for single and parallel annotators")
        ->check(CLI::IsMember({"talk", "type"}));
    app->add_option("--parallel-overlap", overlap, "Per-unit coverage probability for parallel");
    app->add_option("--beta", beta);
    app->add_option("--gamma", gamma);
    app->add_option("--seed", seed, "RNG seed (mandatory in CI mode)");
  }

  sim::SimScenario build() const {
    sim::SimScenario s = calibrated ? sim::SimScenario::calibrated() : sim::SimScenario{};
    if (!scenario_file.empty()) {
      std::ifstream in(scenario_file);
      if (!in) throw Error(ErrorCode::InvalidScenario, "cannot read " + scenario_file);
      json doc = json::parse(in);
      json base = sim::to_json(s);
      base.update(doc);
      s = sim::scenario_from_json(base);
    }
    if (n_units) s.n_units = *n_units;
    if (!capacity.empty()) s.annotator_capacity = capacity;
    if (diminish) s.diminish_factor = *diminish;
    if (words_per_unit) s.words_per_unit = *words_per_unit;
    if (v_talk) s.v_talk = *v_talk;
    if (v_type) s.v_type = *v_type;
    if (v_read) s.v_read = *v_read;
    if (t_observe) s.t_observe_image = *t_observe;
    if (baseline) s.baseline_output = *baseline == "talk" ? sim::OutputChannel::talk : sim::OutputChannel::type;
    if (overlap) s.parallel_overlap_model = *overlap;
    if (beta) s.beta = *beta;
    if (gamma) s.gamma = *gamma;
    if (seed) s.rng_seed = *seed;
    s.validate();
    return s;
  }
};

bool ci_mode(bool flag) {
  if (flag) return true;
  const char* ci = std::getenv("CI");
  return ci && *ci && std::string(ci) != "0" && std::string(ci) != "false";
}

void require_seed(bool ci, const ScenarioFlags& f) {
  if (ci && !f.seed) throw CLI::ValidationError("--seed", "is mandatory in CI mode");
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw Error(ErrorCode::Io, "cannot write " + path);
  return file;
}

void write_json(const std::string& path, const json& doc) {
  if (path.empty()) return;
  std::ofstream f;
  open_out(path, f) << doc.dump(2) << '\n';
}

std::vector<sim::Strategy> parse_strategies(const std::vector<std::string>& labels) {
  std::vector<sim::Strategy> out;
  for (const auto& l : labels) out.push_back(sim::Strategy::parse(l));
  return out;
}

std::vector<double> parse_range(const std::string& spec) {
  // "a:b:step" or comma list
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    double a = 0, b = 0, step = 1;
    char c1 = 0, c2 = 0;
    std::istringstream in(spec);
    in >> a >> c1 >> b >> c2 >> step;
    if (!in || step <= 0 || b < a) throw CLI::ValidationError("range", "expected a:b:step");
    for (double x = a; x <= b + 1e-9; x += step) out.push_back(x);
  } else {
    std::istringstream in(spec);
    std::string tok;
    while (std::getline(in, tok, ',')) out.push_back(std::stod(tok));
  }
  return out;
}

volatile std::sig_atomic_t g_stop = 0;
service::Server* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cotalk: sequential annotation chains, metrics and simulation"};
  app.require_subcommand(1);
  bool ci_flag = false;
  app.add_flag("--ci", ci_flag, "CI mode (also enabled by the CI environment variable)");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo run of one or more strategies");
  ScenarioFlags sim_flags;
  sim_flags.add(simulate);
  std::vector<std::string> sim_strategies{"single", "parallel(2)", "cotalk(2)"};
  int sim_trials = 1000, sim_threads = 1;
  std::string sim_csv = "-", sim_json;
  simulate->add_option("--strategy", sim_strategies, "single | parallel(m) | cotalk(n)");
  simulate->add_option("--trials", sim_trials)->check(CLI::PositiveNumber);
  simulate->add_option("--threads", sim_threads)->check(CLI::PositiveNumber);
  simulate->add_option("--csv", sim_csv, "CSV output path ('-' for stdout)");
  simulate->add_option("--json", sim_json, "JSON summary path");

  // delta-t
  auto* dt = app.add_subcommand("delta-t", "Closed-form time gap T_parallel(m) - T_cotalk(n)");
  ScenarioFlags dt_flags;
  dt_flags.add(dt);
  int dt_n = 2, dt_m = 3;
  bool dt_report = false;
  std::string dt_json;
  dt->add_option("-n,--cotalk-rounds", dt_n);
  dt->add_option("-m,--parallel-rounds", dt_m);
  dt->add_flag("--report", dt_report, "Report premise violations instead of failing");
  dt->add_option("--json", dt_json, "JSON output path");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Quality/time sweep over a scenario grid");
  ScenarioFlags sw_flags;
  sw_flags.add(sweep);
  std::string sw_wpu = "2:8:1", sw_tobs;
  std::vector<std::string> sw_strategies{"single", "parallel(2)", "cotalk(2)"};
  int sw_trials = 1000, sw_threads = 1;
  std::string sw_csv = "-", sw_json;
  sweep->add_option("--wpu-range", sw_wpu, "words_per_unit values: a:b:step or a,b,c");
  sweep->add_option("--t-observe-range", sw_tobs, "t_observe values: a:b:step or a,b,c");
  sweep->add_option("--strategy", sw_strategies);
  sweep->add_option("--trials", sw_trials)->check(CLI::PositiveNumber);
  sweep->add_option("--threads", sw_threads)->check(CLI::PositiveNumber);
  sweep->add_option("--csv", sw_csv);
  sweep->add_option("--json", sw_json);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string serve_config;
  std::optional<int> serve_port;
  std::optional<std::string> serve_data, serve_host;
  serve->add_option("--config", serve_config, "key=value configuration file");
  serve->add_option("--port", serve_port);
  serve->add_option("--host", serve_host);
  serve->add_option("--data-dir", serve_data);

  // export
  auto* exp = app.add_subcommand("export", "Export finalized sessions from a data directory");
  std::string exp_dir = "data", exp_format = "jsonl", exp_out = "-";
  std::optional<std::string> exp_mode;
  exp->add_option("--data-dir", exp_dir);
  exp->add_option("--format", exp_format)->check(CLI::IsMember({"jsonl", "csv"}));
  exp->add_option("--mode", exp_mode)->check(CLI::IsMember({"single", "parallel", "cotalk"}));
  exp->add_option("--out", exp_out);

  // replay-verify
  auto* rv = app.add_subcommand("replay-verify", "Replay the event log and compare with the snapshot");
  std::string rv_dir = "data";
  rv->add_option("--data-dir", rv_dir);

  CLI11_PARSE(app, argc, argv);
  const bool ci = ci_mode(ci_flag);

  try {
    if (*simulate) {
      require_seed(ci, sim_flags);
      sim::SimScenario s = sim_flags.build();
      std::ofstream f;
      std::ostream& out = open_out(sim_csv, f);
      out << "strategy,trials,mean_covered_units,mean_total_time_s,mean_speed_units_per_s,"
             "mean_duplication_pct,mean_J,mean_E\n";
      json summary = {{"scenario", sim::to_json(s)}, {"results", json::array()}};
      for (const auto& st : parse_strategies(sim_strategies)) {
        auto t = sim::simulate_trials(s, st, sim_trials, sim_threads);
        out << st.label() << ',' << t.trials << ',' << t.mean_covered << ',' << t.mean_time_s << ','
            << t.mean_speed << ',' << t.mean_duplication_pct << ',' << t.mean_j << ',' << t.mean_e
            << '\n';
        summary["results"].push_back(sim::to_json(t));
      }
      write_json(sim_json, summary);
      return 0;
    }
    if (*dt) {
      sim::SimScenario s = dt_flags.build();
      auto r = sim::delta_t(s, dt_n, dt_m, dt_report ? sim::PremiseCheck::report : sim::PremiseCheck::strict);
      json doc = sim::to_json(r);
      doc["n"] = dt_n;
      doc["m"] = dt_m;
      doc["scenario"] = sim::to_json(s);
      std::cout << "n,m,t_parallel_s,t_cotalk_s,delta_t_s,premise_holds\n"
                << dt_n << ',' << dt_m << ',' << r.t_parallel << ',' << r.t_cotalk << ',' << r.delta_t
                << ',' << (r.premise_holds ? "true" : "false") << '\n';
      write_json(dt_json, doc);
      return 0;
    }
    if (*sweep) {
      require_seed(ci, sw_flags);
      sim::SimScenario base = sw_flags.build();
      std::vector<double> wpus = parse_range(sw_wpu);
      std::vector<double> tobs = sw_tobs.empty() ? std::vector<double>{base.t_observe_image}
                                                 : parse_range(sw_tobs);
      std::vector<sim::SimScenario> grid;
      for (double t : tobs) {
        for (double w : wpus) {
          sim::SimScenario s = base;
          s.words_per_unit = w;
          s.t_observe_image = t;
          grid.push_back(s);
        }
      }
      auto rows = sim::pareto_sweep(grid, parse_strategies(sw_strategies), sw_trials, sw_threads);
      std::ofstream f;
      std::ostream& out = open_out(sw_csv, f);
      out << "scenario,words_per_unit,t_observe_s,strategy,J,T_s,E,speed_units_per_s,duplication_pct,"
             "dominated\n";
      json summary = {{"base_scenario", sim::to_json(base)}, {"rows", json::array()}};
      for (const auto& r : rows) {
        const auto& s = grid[r.scenario_index];
        out << r.scenario_index << ',' << s.words_per_unit << ',' << s.t_observe_image << ','
            << r.strategy.label() << ',' << r.j << ',' << r.t << ',' << r.e << ',' << r.speed << ','
            << r.duplication_pct << ',' << (r.dominated ? "true" : "false") << '\n';
        summary["rows"].push_back({{"scenario", r.scenario_index},
                                   {"words_per_unit", s.words_per_unit},
                                   {"t_observe_s", s.t_observe_image},
                                   {"strategy", r.strategy.label()},
                                   {"J", r.j},
                                   {"T_s", r.t},
                                   {"E", r.e},
                                   {"speed_units_per_s", r.speed},
                                   {"duplication_pct", r.duplication_pct},
                                   {"dominated", r.dominated}});
      }
      write_json(sw_json, summary);
      return 0;
    }
    if (*serve) {
      std::optional<std::filesystem::path> file;
      if (!serve_config.empty()) file = serve_config;
      service::ApiConfig cfg = service::load_config(file);
      if (serve_port) cfg.port = *serve_port;
      if (serve_host) cfg.host = *serve_host;
      if (serve_data) cfg.data_dir = *serve_data;
      auto engine = std::make_shared<chain::Engine>(service::make_gateway(cfg));
      service::StoreOptions opts;
      opts.log.snapshot_every = cfg.snapshot_every;
      auto store = std::make_shared<service::SessionStore>(cfg.data_dir, engine,
                                                           service::make_matcher(cfg), opts);
      service::Server server(cfg, store);
      g_server = &server;
      std::signal(SIGINT, [](int) {
        g_stop = 1;
        if (g_server) g_server->stop();
      });
      std::signal(SIGTERM, [](int) {
        g_stop = 1;
        if (g_server) g_server->stop();
      });
      std::cerr << "listening on " << cfg.host << ':' << cfg.port << " (data " << cfg.data_dir.string()
                << ", gateway " << cfg.gateway << ")\n";
      if (!server.listen() && !g_stop) {
        std::cerr << "cannot listen on " << cfg.host << ':' << cfg.port << '\n';
        return 1;
      }
      return 0;
    }
    if (*exp) {
      auto sessions = service::replay_or_throw(exp_dir);
      std::vector<chain::SessionState> finals;
      for (auto& [id, s] : sessions) {
        if (s.status != chain::SessionStatus::finalized) continue;
        if (exp_mode && s.mode.label() != *exp_mode) continue;
        finals.push_back(s);
      }
      std::ofstream f;
      std::ostream& out = open_out(exp_out, f);
      if (exp_format == "jsonl") {
        out << service::export_jsonl(finals);
      } else {
        out << service::export_metrics_csv(finals, metrics::DuplicationMatcher::exact());
      }
      return 0;
    }
    if (*rv) {
      auto full = service::replay_directory(rv_dir, false);
      json report = {{"events_applied", full.events_applied},
                     {"last_seq", full.last_seq},
                     {"sessions", full.sessions.size()},
                     {"state_hash", service::store_hash(full.sessions)}};
      int rc = 0;
      if (full.corrupt_line) {
        report["corrupt_line"] = *full.corrupt_line;
        report["corrupt_detail"] = full.corrupt_detail;
        rc = 2;
      }
      auto snap = service::replay_directory(rv_dir, true);
      if (snap.used_snapshot) {
        std::string h = service::store_hash(snap.sessions);
        report["snapshot_state_hash"] = h;
        report["snapshot_matches"] = h == report["state_hash"].get<std::string>();
        if (h != report["state_hash"].get<std::string>() && rc == 0) rc = 3;
      }
      std::cout << report.dump(2) << '\n';
      return rc;
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
