#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgas/checkpoint.hpp"
#include "sgas/editing.hpp"

namespace httplib {
class Server;
}

namespace sgas {

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

struct HistoryEntry {
  std::string op;
  EditMask mask;
  std::uint64_t seed = 0;
  std::vector<std::string> result_ids;
};

struct Session {
  std::string id;
  std::string source;  // "dataset:<index>" or "upload:<hash>"
  PartSet current;
  std::vector<HistoryEntry> history;
};

/// Request handling for the HTTP API, independent of the transport so it can
/// be driven directly in tests. Inference is pure over the checkpoint;
/// sessions and results live in memory.
class EditService {
 public:
  EditService(Checkpoint ckpt, std::vector<PointCloud> shapes, EditOptions options = {});

  HttpResponse handle(const std::string& method, const std::string& path, const std::string& body,
                      const std::map<std::string, std::string>& query = {});

  const Checkpoint& checkpoint() const { return ckpt_; }
  std::optional<Session> session(const std::string& id) const;

 private:
  HttpResponse create_session(const nlohmann::json& req);
  HttpResponse edit(const nlohmann::json& req);
  HttpResponse reedit(const nlohmann::json& req);
  HttpResponse interpolate(const nlohmann::json& req);
  HttpResponse stylemix(const nlohmann::json& req);
  HttpResponse shapes(const std::map<std::string, std::string>& query) const;
  HttpResponse result_ply(const std::string& id) const;
  HttpResponse spec() const;

  PartSet segment_upload(const PointCloud& cloud);
  Session& find_session(const std::string& id);
  std::shared_ptr<const EditResult> find_result(const std::string& id) const;
  nlohmann::json publish(const std::string& key, EditResult r);
  void append_history(const std::string& session_id, HistoryEntry entry);
  EditMask parse_mask(const nlohmann::json& j) const;

  Checkpoint ckpt_;
  std::vector<PointCloud> shapes_;
  std::vector<PartSet> shape_parts_;
  EditOptions options_;

  mutable std::mutex anchor_mutex_;
  std::optional<StructurePoints> anchors_;

  mutable std::mutex session_mutex_;
  std::map<std::string, Session> sessions_;
  std::uint64_t next_session_ = 1;

  mutable std::shared_mutex result_mutex_;
  std::map<std::string, std::shared_ptr<const EditResult>> results_;
};

nlohmann::json cloud_to_json(const PointCloud& c);
PointCloud cloud_from_json(const nlohmann::json& j);

/// httplib transport over an EditService.
class HttpServer {
 public:
  explicit HttpServer(EditService& service);
  ~HttpServer();
  /// Binds to host:port (0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called.
  void listen();
  void stop();

 private:
  std::unique_ptr<httplib::Server> server_;
};

/// Blocks serving `service` on host:port until the process is stopped.
void serve(EditService& service, const std::string& host, int port);

}  // namespace sgas
