// Command-line front end: solve, validate, plot-data, simulate, examples, serve.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bcert/app/bundled.hpp"
#include "bcert/app/runner.hpp"
#include "bcert/app/service.hpp"
#include "bcert/app/simulate.hpp"

namespace {

using bcert::app::Json;

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << "\n";
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw bcert::ConfigError("out: cannot write '" + path + "'");
  out << text << "\n";
}

std::vector<double> parse_csv(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw bcert::ConfigError("x0: '" + item + "' is not a number");
    }
  }
  return out;
}

bcert::app::RunConfig load(const std::string& config, const std::string& example) {
  if (!example.empty()) return bcert::app::bundled_config(example);
  if (config.empty()) throw bcert::ConfigError("config: pass --config FILE or --example NAME");
  return bcert::app::load_config(config);
}

httplib::Server* g_server = nullptr;

void stop_server(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polynomial barrier certificate synthesis for safety of dynamical systems", "bcert"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(bcert::app::kToolVersion));

  std::string config, example, out, certificate;

  auto* solve = app.add_subcommand("solve", "Search for a barrier certificate described by a config");
  bool parallel = false, serial = false;
  std::vector<unsigned> degrees;
  unsigned max_degree = 0;
  double feas_tol = 0;
  int max_iter = 0;
  unsigned workers = 0;
  solve->add_option("--config", config, "Config file");
  solve->add_option("--example", example, "Bundled example name");
  solve->add_flag("--parallel", parallel, "Search degrees concurrently");
  solve->add_flag("--serial", serial, "Search degrees one after another");
  solve->add_option("--degrees", degrees, "Even degrees to try, e.g. 2,4,6")->delimiter(',');
  solve->add_option("--max-degree", max_degree, "Try degrees 2, 4, ..., P");
  solve->add_option("--feas-tol", feas_tol, "Solver feasibility and gap tolerance");
  solve->add_option("--max-iter", max_iter, "Solver iteration limit");
  solve->add_option("--workers", workers, "Parallel worker limit (default: hardware threads)");
  solve->add_option("--out", out, "Result file (default: stdout)");

  auto* validate = app.add_subcommand("validate", "Re-check a certificate against a config");
  validate->add_option("--config", config, "Config file");
  validate->add_option("--example", example, "Bundled example name");
  validate->add_option("--certificate", certificate, "Result or certificate file")->required();

  auto* plot = app.add_subcommand("plot-data", "Emit a level-set grid for a two-dimensional certificate");
  std::size_t resolution = 101;
  plot->add_option("--config", config, "Config file");
  plot->add_option("--example", example, "Bundled example name");
  plot->add_option("--certificate", certificate, "Result or certificate file")->required();
  plot->add_option("--resolution", resolution, "Samples per axis");
  plot->add_option("--out", out, "Output file (default: stdout)");

  auto* simulate = app.add_subcommand("simulate", "Sample a trajectory of the configured system");
  std::string x0;
  std::uint64_t seed = 0;
  double horizon = -1, dt = 0.01;
  simulate->add_option("--config", config, "Config file");
  simulate->add_option("--example", example, "Bundled example name");
  simulate->add_option("--x0", x0, "Initial state, comma separated")->required();
  simulate->add_option("--seed", seed, "Random seed");
  simulate->add_option("--horizon", horizon, "Steps (discrete time) or time (continuous); default: t or 100");
  simulate->add_option("--dt", dt, "Euler-Maruyama step for continuous classes");
  simulate->add_option("--out", out, "Output file (default: stdout)");

  auto* examples = app.add_subcommand("examples", "List or export bundled benchmark configs");
  examples->require_subcommand(1);
  auto* list = examples->add_subcommand("list", "List bundled configs");
  auto* exp = examples->add_subcommand("export", "Print a bundled config");
  std::string name;
  exp->add_option("name", name, "Example name")->required();
  exp->add_option("--out", out, "Output file (default: stdout)");

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  int port = 8080;
  std::string host = "127.0.0.1";
  bcert::app::ServiceOptions service_opt;
  serve->add_option("--port", port, "Port");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--job-cap", service_opt.job_cap, "Concurrently running jobs");
  serve->add_option("--timeout", service_opt.timeout_seconds, "Per-job time limit in seconds");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) {
      bcert::app::RunOptions opt;
      if (max_degree) {
        opt.degrees.emplace();
        for (unsigned d = 2; d <= max_degree; d += 2) opt.degrees->push_back(d);
      }
      if (!degrees.empty()) opt.degrees = degrees;
      if (parallel) opt.parallel = true;
      if (serial) opt.parallel = false;
      if (feas_tol > 0) opt.feas_tol = feas_tol;
      if (max_iter > 0) opt.max_iter = max_iter;
      opt.max_workers = workers;
      const bcert::app::RunResult r = bcert::app::run_config(load(config, example), opt);
      write_output(out, bcert::app::result_to_json(r).dump(2));
      std::cerr << bcert::to_string(r.status);
      if (r.certificate) {
        std::cerr << " degree=" << r.certificate->degree << " gamma=" << r.certificate->gamma
                  << " lambda=" << r.certificate->lambda;
        if (r.certificate->confidence) std::cerr << " c=" << r.certificate->c << " confidence=" << *r.certificate->confidence;
      } else if (!r.message.empty()) {
        std::cerr << ": " << r.message;
      }
      std::cerr << " (" << r.wall_seconds << " s)\n";
      return bcert::app::exit_code(r.status);
    }
    if (*validate) {
      const bcert::app::BuiltRun run = bcert::app::prepare(load(config, example));
      const bcert::Certificate cert = bcert::app::load_certificate(certificate);
      bcert::SafetyProblem prob = run.problem;
      prob.b_degree = cert.degree;
      const bcert::ValidationReport rep = bcert::check_certificate(cert, run.system, prob);
      std::cout << bcert::app::detail::validation_to_json(rep).dump(2) << "\n";
      std::cerr << (rep.ok ? "valid" : "invalid: " + rep.failures.front()) << "\n";
      return rep.ok ? 0 : 1;
    }
    if (*plot) {
      const bcert::app::BuiltRun run = bcert::app::prepare(load(config, example));
      const bcert::Certificate cert = bcert::app::load_certificate(certificate);
      const auto grid = bcert::app::level_set_grid(cert.barrier, cert.gamma, cert.lambda, run.problem.space, resolution);
      write_output(out, bcert::app::grid_to_json(grid).dump());
      return 0;
    }
    if (*simulate) {
      const bcert::app::RunConfig cfg = load(config, example);
      const bcert::app::BuiltRun run = bcert::app::prepare(cfg);
      if (horizon < 0) horizon = cfg.t ? static_cast<double>(*cfg.t) : 100.0;
      const auto traj = bcert::app::simulate_trajectory(run.system, run.problem.space, parse_csv(x0), horizon, dt, seed);
      write_output(out, bcert::app::trajectory_to_json(traj).dump());
      return 0;
    }
    if (*list) {
      for (const auto& n : bcert::app::bundled_names()) std::cout << n << "\n";
      return 0;
    }
    if (*exp) {
      write_output(out, bcert::app::config_to_json(bcert::app::bundled_config(name)).dump(2));
      return 0;
    }
    if (*serve) {
      bcert::app::Service service(service_opt);
      httplib::Server server;
      service.mount(server);
      g_server = &server;
      std::signal(SIGINT, stop_server);
      std::signal(SIGTERM, stop_server);
      std::cerr << "listening on " << host << ":" << port << "\n";
      if (!server.listen(host, port)) {
        std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
        return bcert::app::kExitInternal;
      }
      return 0;
    }
  } catch (const bcert::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return bcert::app::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return bcert::app::kExitInternal;
  }
  return 0;
}
