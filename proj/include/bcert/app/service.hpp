#pragma once

#include <chrono>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <json.hpp>

// Eigen must precede httplib: <resolv.h> defines a `_res` macro that
// collides with identifiers in Eigen's product kernels.
#include "bcert/app/bundled.hpp"
#include "bcert/app/runner.hpp"
#include "bcert/app/simulate.hpp"

#include <httplib.h>

namespace bcert::app {

struct ServiceOptions {
  std::size_t job_cap = 4;         // concurrently running jobs
  double timeout_seconds = 300;    // per job
  std::size_t plot_resolution = 101;
};

/// Request handling behind the HTTP API. Transport-independent so it can be
/// exercised without sockets; `mount` wires it into an httplib server.
class Service {
 public:
  struct Response {
    int status = 200;
    Json body;
  };

  explicit Service(ServiceOptions opt = {}) : opt_(opt) {}

  ~Service() {
    std::map<std::string, std::shared_ptr<Job>> jobs;
    {
      std::lock_guard lock(mu_);
      jobs = jobs_;
    }
    for (auto& [id, job] : jobs) job->stop.request_stop();
    for (auto& [id, job] : jobs) {
      if (job->worker.joinable()) job->worker.join();
      if (job->watchdog.joinable()) job->watchdog.join();
    }
  }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// POST /api/v1/solve. Synchronous unless `async`; `timeout_seconds`
  /// can only shorten the configured job timeout.
  Response solve(const std::string& body, std::optional<double> timeout_seconds = std::nullopt, bool async = false) {
    BuiltRun run;
    try {
      run = prepare(parse_config(body));
    } catch (const Error& e) {
      return unprocessable(e);
    }
    double timeout = opt_.timeout_seconds;
    if (timeout_seconds) {
      if (!(*timeout_seconds > 0)) return {422, error_body("timeout", "InvalidParameter", "timeout must be positive")};
      timeout = std::min(timeout, *timeout_seconds);
    }

    auto job = std::make_shared<Job>();
    {
      std::lock_guard lock(mu_);
      std::size_t running = 0;
      for (const auto& [id, j] : jobs_) {
        std::lock_guard job_lock(j->mu);
        running += j->done ? 0 : 1;
      }
      if (running >= opt_.job_cap) {
        return {409, error_body("", "Capacity", "job capacity of " + std::to_string(opt_.job_cap) + " reached")};
      }
      job->id = std::to_string(++next_id_);
      jobs_[job->id] = job;
    }
    run.problem.solver.cancel = job->stop.get_token();
    const std::size_t res = opt_.plot_resolution;
    job->worker = std::jthread([job, run = std::move(run), res] {
      Json out;
      std::string state;
      try {
        RunResult r = execute(run);
        out = result_to_json(r);
        out["exit_code"] = exit_code(r.status);
        if (r.certificate && dynamics(run.system).size() == 2) {
          const Certificate& c = *r.certificate;
          out["plot_data"] = grid_to_json(level_set_grid(c.barrier, c.gamma, c.lambda, run.problem.space, res));
        }
        state = "done";
      } catch (const std::exception& e) {
        out = error_body("", "InternalError", e.what());
        state = "failed";
      }
      std::lock_guard lock(job->mu);
      if (job->state == "running") job->state = job->timed_out ? "timeout" : state;
      job->result = std::move(out);
      job->result["job_id"] = job->id;
      job->done = true;
      job->cv.notify_all();
    });
    job->watchdog = std::jthread([job, timeout] {
      std::unique_lock lock(job->mu);
      const auto limit = std::chrono::duration<double>(timeout);
      if (!job->cv.wait_for(lock, limit, [&] { return job->done; })) {
        job->timed_out = true;
        job->stop.request_stop();
      }
    });

    if (async) return {202, {{"job_id", job->id}, {"status_url", "/api/v1/jobs/" + job->id}}};
    std::unique_lock lock(job->mu);
    job->cv.wait(lock, [&] { return job->done; });
    return respond(*job);
  }

  /// GET /api/v1/jobs/{id}.
  Response job(const std::string& id) {
    std::shared_ptr<Job> job;
    {
      std::lock_guard lock(mu_);
      auto it = jobs_.find(id);
      if (it == jobs_.end()) return {404, error_body("id", "NotFound", "no job '" + id + "'")};
      job = it->second;
    }
    std::lock_guard lock(job->mu);
    if (!job->done) return {200, {{"job_id", id}, {"state", "running"}}};
    Response r = respond(*job);
    r.body = {{"job_id", id}, {"state", job->state}, {"result", r.body}};
    return r;
  }

  /// DELETE /api/v1/jobs/{id}: cancels a running job.
  Response cancel(const std::string& id) {
    std::lock_guard lock(mu_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) return {404, error_body("id", "NotFound", "no job '" + id + "'")};
    it->second->stop.request_stop();
    return {202, {{"job_id", id}, {"state", "cancelling"}}};
  }

  Response examples() const {
    Json names = bundled_names();
    return {200, {{"examples", names}}};
  }

  Response example(const std::string& name) const {
    auto text = bundled_text(name);
    if (!text) return {404, error_body("name", "NotFound", "no bundled example '" + name + "'")};
    return {200, config_to_json(parse_config(std::string(*text)))};
  }

  Response health() const { return {200, {{"status", "ok"}, {"tool", kToolName}, {"version", kToolVersion}}}; }

  void mount(httplib::Server& server) {
    auto send = [](httplib::Response& res, const Response& r) {
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    server.Post("/api/v1/solve", [this, send](const httplib::Request& req, httplib::Response& res) {
      std::optional<double> timeout;
      if (req.has_param("timeout")) {
        try {
          timeout = std::stod(req.get_param_value("timeout"));
        } catch (const std::exception&) {
          return send(res, {422, error_body("timeout", "InvalidParameter", "timeout must be a number of seconds")});
        }
      }
      const bool async = req.has_param("async") && req.get_param_value("async") != "0";
      send(res, solve(req.body, timeout, async));
    });
    server.Get(R"(/api/v1/jobs/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, job(req.matches[1]));
    });
    server.Delete(R"(/api/v1/jobs/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, cancel(req.matches[1]));
    });
    server.Get("/api/v1/examples", [this, send](const httplib::Request&, httplib::Response& res) { send(res, examples()); });
    server.Get(R"(/api/v1/examples/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, example(req.matches[1]));
    });
    server.Get("/healthz", [this, send](const httplib::Request&, httplib::Response& res) { send(res, health()); });
  }

 private:
  struct Job {
    std::string id;
    std::stop_source stop;
    std::mutex mu;
    std::condition_variable cv;
    bool done = false;
    bool timed_out = false;
    std::string state = "running";
    Json result;
    std::jthread worker, watchdog;
  };

  static Json error_body(const std::string& field, const std::string& kind, const std::string& message) {
    Json e = {{"field", field}, {"message", message}};
    return {{"error", kind}, {"message", message}, {"errors", Json::array({e})}};
  }

  /// 422 with the offending key, taken from the "key: message" convention.
  static Response unprocessable(const Error& e) {
    std::string msg = e.what();
    const std::string prefix = e.kind() + ": ";
    if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
    std::string field;
    if (e.kind() == "ConfigError") {
      const auto colon = msg.find(':');
      if (colon != std::string::npos) field = msg.substr(0, colon);
    }
    const int code = exit_code_for(e) == kExitInvalidInput ? 422 : 500;
    return {code, error_body(field, e.kind(), msg)};
  }

  static Response respond(const Job& job) {
    if (job.state == "timeout") {
      return {408, {{"error", "Timeout"}, {"message", "job exceeded its time limit and was cancelled"}, {"job_id", job.id}}};
    }
    if (job.state == "failed") return {500, job.result};
    return {200, job.result};
  }

  ServiceOptions opt_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::size_t next_id_ = 0;
};

}  // namespace bcert::app
