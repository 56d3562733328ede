#include "probe_service.hpp"

#include "ct_forward.hpp"
#include "data_metric.hpp"
#include "map_io.hpp"
#include "png_encode.hpp"
#include "rle.hpp"

#include "httplib.h"

#include <cstdio>

namespace buqo {

namespace {

const std::vector<std::string> kImageNames{"x_map", "x_map_s", "x_c", "x_s", "difference"};

std::string status_text(int code) {
  switch (code) {
  case 0:
    return "queued";
  case 1:
    return "running";
  case 2:
    return "done";
  default:
    return "failed";
  }
}

template <class T> T required(const json &body, const std::string &key, const std::string &field) {
  if (!body.is_object() || !body.contains(key))
    throw RequestError(400, field, "missing field '" + field + "'");
  try {
    return body.at(key).get<T>();
  } catch (const json::exception &) {
    throw RequestError(400, field, "field '" + field + "' has the wrong type");
  }
}

template <class T> T optional_field(const json &body, const std::string &key, T fallback) {
  if (!body.contains(key))
    return fallback;
  try {
    return body.at(key).get<T>();
  } catch (const json::exception &) {
    throw RequestError(400, key, "field '" + key + "' has the wrong type");
  }
}

} // namespace

struct ProbeService::Session {
  std::string id;
  fs::path dir;
  Geometry geometry;
  SparsityKind psi = SparsityKind::Haar3;
  double epsilon = 0.0;
  Sinogram y;
  int max_iters = 0;
  // Guarded by the service mutex.
  std::string status = "reconstructing";
  std::string error;
  std::optional<MapResult> map;
  std::vector<std::string> probes;
};

struct ProbeService::Probe {
  std::string id;
  std::string session;
  fs::path dir;
  Mask mask;
  double alpha = kDefaultAlpha;
  double delta = kDefaultDelta;
  std::size_t ring_width = kDefaultRingWidth;
  // Guarded by the service mutex; 0 queued, 1 running, 2 done, 3 failed.
  int state = 0;
  std::string error;
  std::optional<TestReport> report;
};

ProbeService::ProbeService(ServiceOptions opts) : opts_(std::move(opts)) {
  std::error_code ec;
  fs::create_directories(opts_.data_dir / "sessions", ec);
  fs::create_directories(opts_.data_dir / "probes", ec);
  if (ec)
    throw IoError("cannot create data directory " + opts_.data_dir.string() + ": " + ec.message());
  load_existing();
  const int n = std::max(1, opts_.workers);
  for (int i = 0; i < n; ++i)
    workers_.emplace_back([this] { worker_loop(); });
}

ProbeService::~ProbeService() {
  {
    std::lock_guard lk(queue_mu_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  for (auto &t : workers_)
    t.join();
}

void ProbeService::enqueue(std::function<void()> job) {
  {
    std::lock_guard lk(queue_mu_);
    queue_.push_back(std::move(job));
  }
  queue_cv_.notify_one();
}

void ProbeService::worker_loop() {
  for (;;) {
    std::function<void()> job;
    {
      std::unique_lock lk(queue_mu_);
      queue_cv_.wait(lk, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_ && queue_.empty())
        return;
      job = std::move(queue_.front());
      queue_.pop_front();
      ++running_;
    }
    job();
    {
      std::lock_guard lk(queue_mu_);
      --running_;
    }
    idle_cv_.notify_all();
  }
}

void ProbeService::wait_idle() {
  std::unique_lock lk(queue_mu_);
  idle_cv_.wait(lk, [&] { return queue_.empty() && running_ == 0; });
}

std::string ProbeService::next_id(char prefix) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%06llu", prefix, static_cast<unsigned long long>(++counter_));
  return buf;
}

std::shared_ptr<ProbeService::Session> ProbeService::find_session(const std::string &id) const {
  std::lock_guard lk(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end())
    throw RequestError(404, "id", "unknown session '" + id + "'");
  return it->second;
}

std::shared_ptr<ProbeService::Probe> ProbeService::find_probe(const std::string &id) const {
  std::lock_guard lk(mu_);
  auto it = probes_.find(id);
  if (it == probes_.end())
    throw RequestError(404, "id", "unknown probe '" + id + "'");
  return it->second;
}

json ProbeService::create_session(const json &body) {
  if (!body.is_object())
    throw RequestError(400, "body", "request body must be a JSON object");
  if (!body.contains("geometry"))
    throw RequestError(400, "geometry", "missing field 'geometry'");
  const json &g = body.at("geometry");
  auto s = std::make_shared<Session>();
  s->geometry.angles = required<std::size_t>(g, "angles", "geometry.angles");
  s->geometry.detectors = required<std::size_t>(g, "detectors", "geometry.detectors");
  s->geometry.image_size = required<std::size_t>(g, "image_size", "geometry.image_size");
  try {
    s->geometry.validate();
  } catch (const std::invalid_argument &e) {
    throw RequestError(400, "geometry", e.what());
  }
  try {
    s->psi = parse_sparsity(optional_field<std::string>(body, "psi", "haar3"));
    make_sparsity(s->psi, s->geometry.image_size, s->geometry.image_size);
  } catch (const RequestError &) {
    throw;
  } catch (const std::invalid_argument &e) {
    throw RequestError(400, "psi", e.what());
  }
  s->max_iters = optional_field<int>(body, "max_iters", opts_.map_solver.max_iters);
  if (s->max_iters < 1)
    throw RequestError(400, "max_iters", "max_iters must be positive");

  const std::size_t a = s->geometry.angles, d = s->geometry.detectors;
  if (body.contains("sinogram")) {
    const json &sj = body.at("sinogram");
    try {
      if (sj.contains("rawj"))
        s->y = read_rawj_sinogram(sj.at("rawj").get<std::string>());
      else
        s->y = Sinogram(a, d, required<Vec>(sj, "values", "sinogram.values"));
    } catch (const RequestError &) {
      throw;
    } catch (const std::exception &e) {
      throw RequestError(400, "sinogram", e.what());
    }
    if (s->y.angles != a || s->y.detectors != d)
      throw RequestError(400, "sinogram", "sinogram shape does not match the geometry");
    s->epsilon = required<double>(body, "epsilon", "epsilon");
    if (!(s->epsilon >= 0.0))
      throw RequestError(400, "epsilon", "epsilon must be nonnegative");
  } else if (body.contains("phantom")) {
    Phantom ph;
    try {
      ph = phantom_from_json(body.at("phantom"));
    } catch (const std::exception &e) {
      throw RequestError(400, "phantom", e.what());
    }
    if (ph.size != s->geometry.image_size)
      throw RequestError(400, "phantom", "phantom size does not match geometry.image_size");
    const json noise = body.value("noise", json::object());
    const NoiseModel nm{optional_field<double>(noise, "sigma_rel", 0.0),
                        optional_field<std::uint64_t>(noise, "seed", 0)};
    if (!(nm.sigma_rel >= 0.0))
      throw RequestError(400, "noise.sigma_rel", "sigma_rel must be nonnegative");
    ParallelBeamProjector phi(s->geometry);
    SimulatedData sim;
    try {
      sim = simulate_data(phi, nm, render_phantom(ph));
    } catch (const std::exception &e) {
      throw RequestError(400, "phantom", e.what());
    }
    s->y = std::move(sim.y);
    s->epsilon = optional_field<double>(body, "epsilon", sim.epsilon);
  } else {
    throw RequestError(400, "sinogram", "missing field 'sinogram' (or 'phantom')");
  }

  {
    std::lock_guard lk(mu_);
    s->id = next_id('s');
    s->dir = opts_.data_dir / "sessions" / s->id;
    sessions_[s->id] = s;
  }
  fs::create_directories(s->dir);
  write_rawj(s->dir / "y", s->y);
  persist_session(*s);
  enqueue([this, s] { reconstruct(s); });
  return {{"id", s->id}, {"status", "reconstructing"}};
}

void ProbeService::reconstruct(const std::shared_ptr<Session> &s) {
  try {
    const std::size_t n = s->geometry.image_size;
    ParallelBeamProjector phi(s->geometry);
    SolverConfig cfg = opts_.map_solver;
    cfg.max_iters = s->max_iters;
    MapResult map =
        solve_map({&phi, make_sparsity(s->psi, n, n), n, n, s->y.values, s->epsilon, make_data_metric(s->geometry)}, cfg);
    save_map_result(s->dir / "x_map", map);
    std::lock_guard lk(mu_);
    if (map.residual > data_bound(s->epsilon, cfg.feas_tol, s->y.values)) {
      s->status = "failed";
      s->error = "MAP reconstruction did not reach the data constraint within " + std::to_string(cfg.max_iters) +
                 " iterations";
    } else {
      s->status = "ready";
    }
    s->map = std::move(map);
  } catch (const std::exception &e) {
    std::lock_guard lk(mu_);
    s->status = "failed";
    s->error = e.what();
  }
  std::lock_guard lk(mu_);
  persist_session(*s);
}

json ProbeService::session_json(const Session &s) const {
  json j{{"id", s.id},
         {"status", s.status},
         {"geometry",
          {{"angles", s.geometry.angles},
           {"detectors", s.geometry.detectors},
           {"image_size", s.geometry.image_size}}},
         {"epsilon", s.epsilon},
         {"psi", to_string(s.psi)},
         {"max_iters", s.max_iters},
         {"probes", s.probes}};
  if (!s.error.empty())
    j["error"] = s.error;
  if (s.map)
    j["map"] = map_result_json(*s.map);
  return j;
}

json ProbeService::get_session(const std::string &id) const {
  auto s = find_session(id);
  std::lock_guard lk(mu_);
  return session_json(*s);
}

void ProbeService::persist_session(const Session &s) const {
  write_text(s.dir / "session.json", session_json(s).dump(2) + "\n");
}

json ProbeService::submit_probe(const std::string &session_id, const json &body) {
  auto s = find_session(session_id);
  if (!body.is_object())
    throw RequestError(400, "body", "request body must be a JSON object");
  auto p = std::make_shared<Probe>();
  const auto runs = required<std::vector<std::uint64_t>>(body, "rle", "rle");
  const std::size_t n = s->geometry.image_size;
  try {
    p->mask = rle_decode(runs, n, n);
  } catch (const std::invalid_argument &e) {
    throw RequestError(400, "rle", std::string("mask does not match the session image: ") + e.what());
  }
  if (p->mask.count() == 0)
    throw RequestError(400, "rle", "empty structure mask");
  p->alpha = optional_field<double>(body, "alpha", kDefaultAlpha);
  p->delta = optional_field<double>(body, "delta", opts_.test.delta);
  p->ring_width = optional_field<std::size_t>(body, "ring_width", kDefaultRingWidth);
  if (!(p->alpha > 0.0 && p->alpha < 1.0))
    throw RequestError(400, "alpha", "alpha must lie in (0, 1)");
  if (!(p->delta >= 0.0))
    throw RequestError(400, "delta", "delta must be nonnegative");
  if (p->ring_width < 1)
    throw RequestError(400, "ring_width", "ring_width must be positive");
  {
    std::lock_guard lk(mu_);
    if (s->status != "ready")
      throw RequestError(409, "session", "session " + s->id + " is " + s->status + ", MAP not ready");
    p->id = next_id('p');
    p->session = s->id;
    p->dir = opts_.data_dir / "probes" / p->id;
    probes_[p->id] = p;
    s->probes.push_back(p->id);
    persist_session(*s);
  }
  fs::create_directories(p->dir);
  write_pgm_mask(p->dir / "mask.pgm", p->mask);
  {
    std::lock_guard lk(mu_);
    persist_probe(*p);
  }
  enqueue([this, p] { run_probe(p); });
  return {{"id", p->id}, {"session", s->id}, {"status", "queued"}};
}

void ProbeService::run_probe(const std::shared_ptr<Probe> &p) {
  {
    std::lock_guard lk(mu_);
    p->state = 1;
    persist_probe(*p);
  }
  try {
    auto s = find_session(p->session);
    const MapResult &map = *s->map;
    const std::size_t n = s->geometry.image_size;
    // Own projector per probe so its counters are this probe's alone.
    ParallelBeamProjector phi(s->geometry);
    const CredibleRegion region =
        make_credible_region(phi, s->y.values, s->epsilon, make_sparsity(s->psi, n, n), map, p->alpha,
                             make_data_metric(s->geometry));
    const StructureSet set(p->mask, sample_neighborhood(map.x, p->mask, p->ring_width));
    TestConfig cfg = opts_.test;
    cfg.delta = p->delta;
    TestReport rep = run_test(map, region, set, cfg);
    write_rawj(p->dir / "x_map_s", rep.x_map_s);
    write_rawj(p->dir / "x_c", rep.x_c);
    write_rawj(p->dir / "x_s", rep.x_s);
    write_rawj(p->dir / "difference", rep.difference);
    std::lock_guard lk(mu_);
    p->report = std::move(rep);
    p->state = 2;
  } catch (const std::exception &e) {
    std::lock_guard lk(mu_);
    p->state = 3;
    p->error = e.what();
  }
  std::lock_guard lk(mu_);
  persist_probe(*p);
}

json ProbeService::probe_json(const Probe &p) const {
  json j{{"id", p.id},
         {"session", p.session},
         {"status", status_text(p.state)},
         {"alpha", p.alpha},
         {"delta", p.delta},
         {"ring_width", p.ring_width},
         {"mask_pixels", p.mask.count()}};
  if (p.state == 3)
    j["error"] = p.error;
  if (p.state == 2 && p.report) {
    j["report"] = p.report->to_json();
    json images = json::object();
    for (const auto &name : kImageNames)
      images[name] = "/probes/" + p.id + "/images/" + name;
    j["images"] = images;
  }
  return j;
}

json ProbeService::get_probe(const std::string &id) const {
  auto p = find_probe(id);
  std::lock_guard lk(mu_);
  return probe_json(*p);
}

void ProbeService::persist_probe(const Probe &p) const { write_text(p.dir / "probe.json", probe_json(p).dump(2) + "\n"); }

Image ProbeService::probe_image(const std::string &id, const std::string &which) const {
  auto p = find_probe(id);
  if (std::find(kImageNames.begin(), kImageNames.end(), which) == kImageNames.end())
    throw RequestError(404, "which", "unknown image '" + which + "'");
  std::lock_guard lk(mu_);
  if (p->state != 2 || !p->report)
    throw RequestError(409, "id", "probe " + id + " is " + status_text(p->state));
  const TestReport &r = *p->report;
  if (which == "x_map")
    return r.x_map;
  if (which == "x_map_s")
    return r.x_map_s;
  if (which == "x_c")
    return r.x_c;
  if (which == "x_s")
    return r.x_s;
  return r.difference;
}

json ProbeService::echo_mask(const json &body) {
  const auto h = required<std::size_t>(body, "height", "height");
  const auto w = required<std::size_t>(body, "width", "width");
  const auto runs = required<std::vector<std::uint64_t>>(body, "rle", "rle");
  Mask m;
  try {
    m = rle_decode(runs, h, w);
  } catch (const std::invalid_argument &e) {
    throw RequestError(400, "rle", e.what());
  }
  return {{"height", h}, {"width", w}, {"count", m.count()}, {"rle", rle_encode(m)}};
}

void ProbeService::load_existing() {
  std::error_code ec;
  for (const auto &entry : fs::directory_iterator(opts_.data_dir / "sessions", ec)) {
    try {
      const json j = json::parse(read_text(entry.path() / "session.json"));
      auto s = std::make_shared<Session>();
      s->id = j.at("id").get<std::string>();
      s->dir = entry.path();
      s->geometry = {j.at("geometry").at("angles").get<std::size_t>(), j.at("geometry").at("detectors").get<std::size_t>(),
                     j.at("geometry").at("image_size").get<std::size_t>()};
      s->psi = parse_sparsity(j.at("psi").get<std::string>());
      s->epsilon = j.at("epsilon").get<double>();
      s->max_iters = j.value("max_iters", opts_.map_solver.max_iters);
      s->y = read_rawj_sinogram(s->dir / "y");
      s->status = j.at("status").get<std::string>();
      s->error = j.value("error", "");
      s->probes = j.value("probes", std::vector<std::string>{});
      if (j.contains("map") && fs::exists(s->dir / "x_map.json"))
        s->map = load_map_result(s->dir / "x_map");
      if (s->status == "reconstructing") {
        s->status = "failed";
        s->error = "interrupted by a service restart";
      }
      sessions_[s->id] = s;
      counter_ = std::max<std::uint64_t>(counter_, std::stoull(s->id.substr(1)));
    } catch (const std::exception &) {
      // Not a session directory we wrote; leave it alone.
    }
  }
  for (const auto &entry : fs::directory_iterator(opts_.data_dir / "probes", ec)) {
    try {
      const json j = json::parse(read_text(entry.path() / "probe.json"));
      auto p = std::make_shared<Probe>();
      p->id = j.at("id").get<std::string>();
      p->session = j.at("session").get<std::string>();
      p->dir = entry.path();
      p->mask = read_pgm_mask(p->dir / "mask.pgm");
      p->alpha = j.at("alpha").get<double>();
      p->delta = j.at("delta").get<double>();
      p->ring_width = j.at("ring_width").get<std::size_t>();
      const std::string st = j.at("status").get<std::string>();
      if (st == "done" && j.contains("report")) {
        const json &r = j.at("report");
        TestReport rep;
        rep.rho = r.at("rho").get<double>();
        const std::string d = r.at("decision").get<std::string>();
        rep.decision = d == "reject-H0"          ? Decision::RejectH0
                       : d == "cannot-reject-H0" ? Decision::CannotRejectH0
                                                 : Decision::Inconclusive;
        rep.delta = r.at("delta").get<double>();
        rep.alpha = r.at("alpha").get<double>();
        rep.eta = r.at("eta").get<double>();
        rep.stage1_exit = r.at("stage1_exit").get<bool>();
        rep.converged = r.at("converged").get<bool>();
        rep.iterations = r.at("iterations").get<int>();
        rep.distance = r.at("distance").get<double>();
        rep.denominator = r.at("denominator").get<double>();
        rep.note = r.value("note", "");
        rep.c_residuals = {r.at("c_residuals").at("data").get<double>(), r.at("c_residuals").at("l1").get<double>(),
                           r.at("c_residuals").at("min").get<double>(), r.at("c_residuals").at("member").get<bool>()};
        rep.s_residuals = {r.at("s_residuals").at("intensity").get<double>(),
                           r.at("s_residuals").at("energy").get<double>(),
                           r.at("s_residuals").at("smoothness").get<double>()};
        rep.c_feasible = r.at("c_feasible").get<bool>();
        rep.s_feasible = r.at("s_feasible").get<bool>();
        rep.phi_forward = r.at("phi_forward").get<std::uint64_t>();
        rep.phi_adjoint = r.at("phi_adjoint").get<std::uint64_t>();
        rep.map_phi_evaluations = r.at("map_phi_evaluations").get<std::uint64_t>();
        rep.evaluation_ratio = r.at("evaluation_ratio").get<double>();
        rep.x_map = read_rawj_image(opts_.data_dir / "sessions" / p->session / "x_map");
        rep.x_map_s = read_rawj_image(p->dir / "x_map_s");
        rep.x_c = read_rawj_image(p->dir / "x_c");
        rep.x_s = read_rawj_image(p->dir / "x_s");
        rep.difference = read_rawj_image(p->dir / "difference");
        p->report = std::move(rep);
        p->state = 2;
      } else if (st == "failed") {
        p->state = 3;
        p->error = j.value("error", "");
      } else {
        p->state = 3;
        p->error = "interrupted by a service restart";
      }
      probes_[p->id] = p;
      counter_ = std::max<std::uint64_t>(counter_, std::stoull(p->id.substr(1)));
    } catch (const std::exception &) {
    }
  }
}

void ProbeService::mount(httplib::Server &srv) {
  auto send_json = [](httplib::Response &res, const json &j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
  };
  auto guarded = [send_json](auto fn) {
    return [fn, send_json](const httplib::Request &req, httplib::Response &res) {
      try {
        fn(req, res);
      } catch (const RequestError &e) {
        send_json(res, {{"error", e.what()}, {"field", e.field()}}, e.status());
      } catch (const json::parse_error &e) {
        send_json(res, {{"error", std::string("malformed JSON: ") + e.what()}, {"field", "body"}}, 400);
      } catch (const std::exception &e) {
        send_json(res, {{"error", e.what()}}, 500);
      }
    };
  };
  auto body_json = [](const httplib::Request &req) { return json::parse(req.body); };

  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  srv.Options(R"(.*)", [](const httplib::Request &, httplib::Response &res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  srv.Get("/health", [send_json](const httplib::Request &, httplib::Response &res) { send_json(res, {{"ok", true}}); });
  srv.Post("/sessions", guarded([this, send_json, body_json](const httplib::Request &req, httplib::Response &res) {
             send_json(res, create_session(body_json(req)), 201);
           }));
  srv.Get("/sessions/:id", guarded([this, send_json](const httplib::Request &req, httplib::Response &res) {
            send_json(res, get_session(req.path_params.at("id")));
          }));
  srv.Post("/sessions/:id/probes",
           guarded([this, send_json, body_json](const httplib::Request &req, httplib::Response &res) {
             send_json(res, submit_probe(req.path_params.at("id"), body_json(req)), 202);
           }));
  srv.Get("/probes/:id", guarded([this, send_json](const httplib::Request &req, httplib::Response &res) {
            send_json(res, get_probe(req.path_params.at("id")));
          }));
  srv.Get("/probes/:id/images/:which", guarded([this](const httplib::Request &req, httplib::Response &res) {
            const std::string id = req.path_params.at("id"), which = req.path_params.at("which");
            const Image img = probe_image(id, which);
            const std::string format = req.has_param("format") ? req.get_param_value("format") : "png";
            if (format == "png") {
              res.set_content(encode_png(img), "image/png");
            } else if (format == "rawj") {
              json h{{"height", img.height},
                     {"width", img.width},
                     {"dtype", "f64"},
                     {"order", "row-major"},
                     {"data", "/probes/" + id + "/images/" + which + "?format=raw"}};
              res.set_content(h.dump(), "application/json");
            } else if (format == "raw") {
              res.set_content(encode_f64_le(img.values), "application/octet-stream");
            } else {
              throw RequestError(400, "format", "format must be png, rawj or raw");
            }
          }));
  srv.Post("/masks/echo", guarded([send_json, body_json](const httplib::Request &req, httplib::Response &res) {
             send_json(res, echo_mask(body_json(req)));
           }));
}

int serve(const ServiceOptions &opts, const std::string &host, int port, const std::function<void(int)> &on_listen) {
  ProbeService svc(opts);
  httplib::Server srv;
  svc.mount(srv);
  const int bound = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  if (bound < 0)
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  if (on_listen)
    on_listen(bound);
  return srv.listen_after_bind() ? 0 : 1;
}

} // namespace buqo
