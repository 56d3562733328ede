#pragma once

// HTTP probe service: sessions hold a dataset and its MAP reconstruction; probes
// run the structure test for a mask against a session. Jobs run on a worker queue
// and everything is persisted under the data directory:
//
//   <data_dir>/sessions/<id>/{session.json, y.json/raw, x_map.json/raw}
//   <data_dir>/probes/<id>/{probe.json, x_map_s, x_c, x_s, difference (RAWJ)}

#include "hypothesis_test.hpp"
#include "rawj.hpp"

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

namespace httplib {
class Server;
}

namespace buqo {

/// Client error carrying an HTTP status and the offending request field.
class RequestError : public std::runtime_error {
public:
  RequestError(int status, std::string field, const std::string &message)
      : std::runtime_error(message), status_(status), field_(std::move(field)) {}
  int status() const { return status_; }
  const std::string &field() const { return field_; }

private:
  int status_;
  std::string field_;
};

struct ServiceOptions {
  fs::path data_dir = "buqo-data";
  int workers = 1;
  SolverConfig map_solver;
  TestConfig test;
};

class ProbeService {
public:
  explicit ProbeService(ServiceOptions opts);
  ~ProbeService();
  ProbeService(const ProbeService &) = delete;
  ProbeService &operator=(const ProbeService &) = delete;

  /// Body: {"geometry": {angles, detectors, image_size}, then either
  /// "sinogram": {"values": [...]} or {"rawj": path} with "epsilon", or
  /// "phantom": {...} with "noise": {"sigma_rel", "seed"}}; optional "psi", "max_iters".
  nlohmann::json create_session(const nlohmann::json &body);
  nlohmann::json get_session(const std::string &id) const;
  /// Body: {"rle": [...], "alpha", "delta", "ring_width"}.
  nlohmann::json submit_probe(const std::string &session_id, const nlohmann::json &body);
  nlohmann::json get_probe(const std::string &id) const;
  /// which: x_map, x_map_s, x_c, x_s, difference.
  Image probe_image(const std::string &id, const std::string &which) const;
  /// Decodes and re-encodes {"height", "width", "rle"}.
  static nlohmann::json echo_mask(const nlohmann::json &body);

  /// Blocks until the job queue is empty and no job is running.
  void wait_idle();

  /// Registers the HTTP routes.
  void mount(httplib::Server &server);

private:
  struct Session;
  struct Probe;

  void enqueue(std::function<void()> job);
  void worker_loop();
  void reconstruct(const std::shared_ptr<Session> &s);
  void run_probe(const std::shared_ptr<Probe> &p);
  void load_existing();
  void persist_session(const Session &s) const;
  void persist_probe(const Probe &p) const;
  std::string next_id(char prefix);
  std::shared_ptr<Session> find_session(const std::string &id) const;
  std::shared_ptr<Probe> find_probe(const std::string &id) const;
  nlohmann::json session_json(const Session &s) const;
  nlohmann::json probe_json(const Probe &p) const;

  ServiceOptions opts_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, std::shared_ptr<Probe>> probes_;
  std::uint64_t counter_ = 0;

  std::mutex queue_mu_;
  std::condition_variable queue_cv_;
  std::condition_variable idle_cv_;
  std::deque<std::function<void()>> queue_;
  int running_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

/// Runs the service until the process is stopped. Port 0 picks a free port; the
/// bound port is reported through `on_listen` before serving.
int serve(const ServiceOptions &opts, const std::string &host, int port,
          const std::function<void(int)> &on_listen = {});

} // namespace buqo
