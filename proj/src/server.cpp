#include "sgas/server.hpp"

#include <httplib.h>

#include "sgas/pipeline.hpp"
#include "sgas/ply.hpp"

namespace sgas {

namespace {

struct NotFound : std::runtime_error {
  using std::runtime_error::runtime_error;
};

HttpResponse json_response(int status, const nlohmann::json& j) { return {status, j.dump(), "application/json"}; }

HttpResponse error_response(int status, const std::string& code, const std::string& reason) {
  return json_response(status, {{"error", code}, {"reason", reason}});
}

template <typename T>
T field(const nlohmann::json& j, const char* name) {
  require(j.is_object() && j.contains(name), std::string("missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::kInvalidInput, std::string("field '") + name + "' has the wrong type");
  }
}

std::string content_key(const PartSet& parts) { return hex64(fnv1a(to_ply(parts.merged()))); }

}  // namespace

nlohmann::json cloud_to_json(const PointCloud& c) {
  std::vector<double> flat;
  flat.reserve(3 * c.size());
  for (const auto& p : c.points) flat.insert(flat.end(), {p.x(), p.y(), p.z()});
  return {{"points", flat}, {"labels", c.labels}};
}

PointCloud cloud_from_json(const nlohmann::json& j) {
  const auto flat = field<std::vector<double>>(j, "points");
  require(!flat.empty() && flat.size() % 3 == 0, "points must be a non-empty flat xyz array");
  PointCloud c;
  for (std::size_t k = 0; k < flat.size(); k += 3) c.points.emplace_back(flat[k], flat[k + 1], flat[k + 2]);
  if (j.contains("labels") && !j.at("labels").empty()) c.labels = field<std::vector<int>>(j, "labels");
  c.validate();
  return c;
}

EditService::EditService(Checkpoint ckpt, std::vector<PointCloud> shapes, EditOptions options)
    : ckpt_(std::move(ckpt)), shapes_(std::move(shapes)), options_(options) {
  ckpt_.require_gan();
  for (std::size_t s = 0; s < shapes_.size(); ++s)
    shape_parts_.push_back(split_by_labels(shapes_[s], ckpt_.spec, s));
}

std::optional<Session> EditService::session(const std::string& id) const {
  std::lock_guard lock(session_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second;
}

HttpResponse EditService::handle(const std::string& method, const std::string& path, const std::string& body,
                                 const std::map<std::string, std::string>& query) {
  try {
    if (method == "GET") {
      if (path == "/v1/spec") return spec();
      if (path == "/v1/shapes") return shapes(query);
      const std::string prefix = "/v1/results/", suffix = ".ply";
      if (path.starts_with(prefix) && path.ends_with(suffix) && path.size() > prefix.size() + suffix.size())
        return result_ply(path.substr(prefix.size(), path.size() - prefix.size() - suffix.size()));
      return error_response(404, "not_found", "no route " + path);
    }
    if (method != "POST") return error_response(405, "method_not_allowed", method);
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      return error_response(400, "malformed_json", e.what());
    }
    if (!req.is_object()) return error_response(400, "invalid_input", "request body must be a JSON object");
    if (path == "/v1/sessions") return create_session(req);
    if (path == "/v1/edit") return edit(req);
    if (path == "/v1/reedit") return reedit(req);
    if (path == "/v1/interpolate") return interpolate(req);
    if (path == "/v1/stylemix") return stylemix(req);
    return error_response(404, "not_found", "no route " + path);
  } catch (const NotFound& e) {
    return error_response(404, "not_found", e.what());
  } catch (const Error& e) {
    const int status = e.code() == ErrorCode::kInvalidInput || e.code() == ErrorCode::kContractViolation ? 400 : 500;
    return error_response(status, to_string(e.code()), e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

EditMask EditService::parse_mask(const nlohmann::json& req) const {
  require(req.contains("mask") && req.at("mask").is_array(), "mask must be an array");
  EditMask mask;
  for (const auto& v : req.at("mask")) {
    require(v.is_boolean() || (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)),
            "mask entries must be booleans or 0/1");
    mask.push_back(v.is_boolean() ? v.get<bool>() : v.get<int>() == 1);
  }
  require(static_cast<int>(mask.size()) == ckpt_.spec.n,
          "mask has length " + std::to_string(mask.size()) + ", expected " + std::to_string(ckpt_.spec.n));
  return mask;
}

Session& EditService::find_session(const std::string& id) {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFound("unknown session '" + id + "'");
  return it->second;
}

std::shared_ptr<const EditResult> EditService::find_result(const std::string& id) const {
  std::shared_lock lock(result_mutex_);
  auto it = results_.find(id);
  if (it == results_.end()) throw NotFound("unknown result '" + id + "'");
  return it->second;
}

nlohmann::json EditService::publish(const std::string& key, EditResult r) {
  const std::string id = hex64(fnv1a(key));
  nlohmann::json out = result_metadata(r);
  out["id"] = id;
  out["cloud"] = cloud_to_json(r.cloud);
  std::unique_lock lock(result_mutex_);
  results_.try_emplace(id, std::make_shared<const EditResult>(std::move(r)));
  return out;
}

void EditService::append_history(const std::string& session_id, HistoryEntry entry) {
  std::lock_guard lock(session_mutex_);
  find_session(session_id).history.push_back(std::move(entry));
}

PartSet EditService::segment_upload(const PointCloud& cloud) {
  if (cloud.has_labels()) return split_by_labels(cloud, ckpt_.spec, 0);
  PointCloud c = normalize(cloud);
  const auto P = static_cast<std::size_t>(ckpt_.spec.points_per_shape);
  require(c.size() >= P, "uploaded cloud needs at least " + std::to_string(P) + " points");
  if (c.size() > P) c = downsample(c, P, SampleStrategy::kFarthestPoint, 0);
  std::lock_guard lock(anchor_mutex_);
  if (!anchors_) {
    require(!shapes_.empty(), "unlabeled uploads need a dataset to fit structure points");
    anchors_ = fit_structure_points(shapes_, ckpt_.spec.n, 0);
  }
  return cosegment(c, *anchors_, ckpt_.spec, 0);
}

HttpResponse EditService::create_session(const nlohmann::json& req) {
  const auto source = field<nlohmann::json>(req, "source");
  Session s;
  if (source.contains("dataset_index")) {
    const auto idx = field<long long>(source, "dataset_index");
    require(idx >= 0 && static_cast<std::size_t>(idx) < shape_parts_.size(),
            "dataset_index " + std::to_string(idx) + " is out of range");
    s.current = shape_parts_[static_cast<std::size_t>(idx)];
    s.source = "dataset:" + std::to_string(idx);
  } else if (source.contains("cloud")) {
    s.current = segment_upload(cloud_from_json(source.at("cloud")));
    s.source = "upload:" + content_key(s.current);
  } else {
    fail(ErrorCode::kInvalidInput, "source needs dataset_index or cloud");
  }
  std::lock_guard lock(session_mutex_);
  s.id = "s" + std::to_string(next_session_++);
  sessions_[s.id] = s;
  return json_response(200, {{"session_id", s.id}, {"source", s.source}, {"parts", cloud_to_json(s.current.merged())}});
}

HttpResponse EditService::edit(const nlohmann::json& req) {
  const auto sid = field<std::string>(req, "session_id");
  const EditMask mask = parse_mask(req);
  const int k = field<int>(req, "k");
  const auto seed = field<std::uint64_t>(req, "seed");
  require(k >= 1 && k <= 64, "k must be in [1, 64]");
  PartSet current;
  {
    std::lock_guard lock(session_mutex_);
    current = find_session(sid).current;
  }
  const std::string base = content_key(current) + "|edit|" + nlohmann::json(std::vector<int>(mask.begin(), mask.end())).dump();
  auto results = sgas::edit(ckpt_, current, mask, k, seed, options_);
  nlohmann::json out = nlohmann::json::array();
  HistoryEntry h{"edit", mask, seed, {}};
  for (std::size_t j = 0; j < results.size(); ++j) {
    auto r = publish(base + "|" + std::to_string(results[j].seed), std::move(results[j]));
    h.result_ids.push_back(r["id"]);
    out.push_back(std::move(r));
  }
  append_history(sid, std::move(h));
  return json_response(200, {{"session_id", sid}, {"results", out}});
}

HttpResponse EditService::reedit(const nlohmann::json& req) {
  const auto sid = field<std::string>(req, "session_id");
  const auto rid = field<std::string>(req, "result_id");
  const EditMask mask = parse_mask(req);
  const int k = field<int>(req, "k");
  const auto seed = field<std::uint64_t>(req, "seed");
  require(k >= 1 && k <= 64, "k must be in [1, 64]");
  {
    std::lock_guard lock(session_mutex_);
    find_session(sid);
  }
  const auto previous = find_result(rid);
  const std::string base = rid + "|reedit|" + nlohmann::json(std::vector<int>(mask.begin(), mask.end())).dump();
  auto results = sgas::reedit(ckpt_, *previous, mask, k, seed, options_);
  nlohmann::json out = nlohmann::json::array();
  HistoryEntry h{"reedit:" + rid, mask, seed, {}};
  for (auto& r : results) {
    const std::uint64_t s = r.seed;
    auto j = publish(base + "|" + std::to_string(s), std::move(r));
    h.result_ids.push_back(j["id"]);
    out.push_back(std::move(j));
  }
  append_history(sid, std::move(h));
  return json_response(200, {{"session_id", sid}, {"results", out}});
}

HttpResponse EditService::interpolate(const nlohmann::json& req) {
  const auto sid = field<std::string>(req, "session_id");
  const EditMask mask = parse_mask(req);
  const auto id_s = field<std::string>(req, "result_id_s");
  const auto id_t = field<std::string>(req, "result_id_t");
  const int steps = field<int>(req, "steps");
  require(steps >= 2 && steps <= 256, "steps must be in [2, 256]");
  PartSet current;
  {
    std::lock_guard lock(session_mutex_);
    current = find_session(sid).current;
  }
  const auto rs = find_result(id_s), rt = find_result(id_t);
  require(rs->epsilon.size() > 0 && rt->epsilon.size() > 0, "interpolation endpoints must carry their noise");
  auto results = interpolate_edit(ckpt_, current, mask, rs->epsilon, rt->epsilon, steps, rs->seed, options_);
  const std::string base = content_key(current) + "|interp|" + id_s + "|" + id_t + "|" +
                           nlohmann::json(std::vector<int>(mask.begin(), mask.end())).dump() + "|" +
                           std::to_string(steps);
  nlohmann::json out = nlohmann::json::array();
  HistoryEntry h{"interpolate", mask, rs->seed, {}};
  for (std::size_t s = 0; s < results.size(); ++s) {
    auto j = publish(base + "|" + std::to_string(s), std::move(results[s]));
    j["alpha"] = static_cast<double>(s) / static_cast<double>(steps - 1);
    h.result_ids.push_back(j["id"]);
    out.push_back(std::move(j));
  }
  append_history(sid, std::move(h));
  return json_response(200, {{"session_id", sid}, {"results", out}});
}

HttpResponse EditService::stylemix(const nlohmann::json& req) {
  const auto assignments = field<nlohmann::json>(req, "assignments");
  require(assignments.is_array() && !assignments.empty(), "assignments must be a non-empty array");
  std::vector<std::shared_ptr<const EditResult>> held;
  std::vector<std::pair<const EditResult*, std::vector<int>>> donors;
  std::string key = "stylemix";
  for (const auto& a : assignments) {
    const auto rid = field<std::string>(a, "result_id");
    const auto slots = field<std::vector<int>>(a, "slots");
    held.push_back(find_result(rid));
    donors.emplace_back(held.back().get(), slots);
    key += "|" + rid + ":" + nlohmann::json(slots).dump();
  }
  auto j = publish(key, style_mix(donors, ckpt_.spec.points_per_shape));
  return json_response(200, {{"result", j}});
}

HttpResponse EditService::shapes(const std::map<std::string, std::string>& query) const {
  auto number = [&](const char* name, long long def) {
    auto it = query.find(name);
    if (it == query.end()) return def;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(it->second, &used);
      require(used == it->second.size(), "");
      return v;
    } catch (const std::exception&) {
      fail(ErrorCode::kInvalidInput, std::string("query parameter '") + name + "' must be an integer");
    }
  };
  const long long offset = number("offset", 0), limit = number("limit", 20);
  require(offset >= 0 && limit >= 0 && limit <= 1000, "offset must be >= 0 and limit in [0, 1000]");
  nlohmann::json list = nlohmann::json::array();
  for (auto i = static_cast<std::size_t>(offset); i < shapes_.size() && i < static_cast<std::size_t>(offset + limit); ++i) {
    auto c = cloud_to_json(shape_parts_[i].merged());
    c["index"] = i;
    list.push_back(std::move(c));
  }
  return json_response(200, {{"total", shapes_.size()}, {"offset", offset}, {"shapes", list}});
}

HttpResponse EditService::result_ply(const std::string& id) const {
  return {200, sgas::result_ply(*find_result(id)), "application/octet-stream"};
}

HttpResponse EditService::spec() const {
  return json_response(200, {{"spec", ckpt_.spec},
                             {"points_per_part", ckpt_.spec.points_per_part()},
                             {"pruned", ckpt_.pruned()},
                             {"options", options_}});
}

HttpServer::HttpServer(EditService& service) : server_(std::make_unique<httplib::Server>()) {
  auto adapt = [&service](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query[k] = v;
    const HttpResponse r = service.handle(req.method, req.path, req.body, query);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  server_->Get(R"(/v1/.*)", adapt);
  server_->Post(R"(/v1/.*)", adapt);
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) fail(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::listen() {
  if (!server_->listen_after_bind()) fail(ErrorCode::kIo, "server stopped unexpectedly");
}

void HttpServer::stop() { server_->stop(); }

void serve(EditService& service, const std::string& host, int port) {
  HttpServer server(service);
  server.bind(host, port);
  server.listen();
}

}  // namespace sgas
