#include <doctest.h>

#include <thread>

#include "sgas/server.hpp"
#include "support.hpp"

// after Eigen: resolv.h defines _res
#include <httplib.h>

using namespace sgas;
using nlohmann::json;

namespace {

std::vector<PointCloud> toy_shapes(int count) {
  std::mt19937_64 rng(21);
  std::vector<PointCloud> out;
  for (int s = 0; s < count; ++s) out.push_back(testing::blob_parts(3, 16, rng).merged());
  return out;
}

struct Fixture {
  EditService service{testing::tiny_checkpoint(3, 16, 8), toy_shapes(4)};

  json post(const std::string& path, const json& body, int expect = 200) {
    const auto r = service.handle("POST", path, body.dump());
    CHECK(r.status == expect);
    return json::parse(r.body);
  }
  std::string open_session(int index = 0) {
    return post("/v1/sessions", {{"source", {{"dataset_index", index}}}})["session_id"];
  }
};

}  // namespace

TEST_CASE("sessions and edits") {
  Fixture f;
  const auto sid = f.open_session(1);
  CHECK(sid == "s1");
  const auto res = f.post("/v1/edit", {{"session_id", sid}, {"mask", {1, 0, 0}}, {"k", 3}, {"seed", 5}});
  REQUIRE(res["results"].size() == 3);
  const auto& first = res["results"][0];
  CHECK(first["provenance"] == json::array({"GENERATED", "PASSTHROUGH", "PASSTHROUGH"}));
  CHECK(first["cloud"]["points"].size() == 48 * 3);
  CHECK(first["seed"] == derive_seed(5, 0));

  // booleans and 0/1 are interchangeable, ids are content addressed
  const auto again = f.post("/v1/edit", {{"session_id", sid}, {"mask", {true, false, false}}, {"k", 3}, {"seed", 5}});
  CHECK(again["results"][2]["id"] == res["results"][2]["id"]);
  CHECK(f.service.session(sid)->history.size() == 2);

  const auto ply = f.service.handle("GET", "/v1/results/" + first["id"].get<std::string>() + ".ply", "");
  CHECK(ply.status == 200);
  CHECK(ply.body.rfind("ply\n", 0) == 0);
  CHECK(f.service.handle("GET", "/v1/results/nope.ply", "").status == 404);
}

TEST_CASE("reedit, interpolate and style mix") {
  Fixture f;
  const auto sid = f.open_session();
  const auto res = f.post("/v1/edit", {{"session_id", sid}, {"mask", {1, 0, 0}}, {"k", 2}, {"seed", 1}});
  const std::string a = res["results"][0]["id"], b = res["results"][1]["id"];

  const auto re = f.post("/v1/reedit", {{"session_id", sid}, {"result_id", a}, {"mask", {0, 1, 0}}, {"k", 2}, {"seed", 3}});
  CHECK(re["results"].size() == 2);

  const auto path = f.post("/v1/interpolate",
                           {{"session_id", sid}, {"mask", {1, 0, 0}}, {"result_id_s", a}, {"result_id_t", b}, {"steps", 3}});
  REQUIRE(path["results"].size() == 3);
  CHECK(path["results"][0]["cloud"] == res["results"][0]["cloud"]);
  CHECK(path["results"][2]["cloud"] == res["results"][1]["cloud"]);

  const std::string c = re["results"][0]["id"];
  const auto mix = f.post("/v1/stylemix", {{"assignments", {{{"result_id", a}, {"slots", {0, 2}}}, {{"result_id", c}, {"slots", {1}}}}}});
  CHECK(mix["result"]["provenance"].size() == 3);
  f.post("/v1/stylemix", {{"assignments", {{{"result_id", a}, {"slots", {0}}}}}}, 400);
}

TEST_CASE("catalogue endpoints") {
  Fixture f;
  const auto spec = json::parse(f.service.handle("GET", "/v1/spec", "").body);
  CHECK(spec["spec"]["n"] == 3);
  CHECK(spec["options"]["tau"] == 0.5);
  const auto page = f.service.handle("GET", "/v1/shapes", "", {{"offset", "1"}, {"limit", "2"}});
  CHECK(page.status == 200);
  const auto body = json::parse(page.body);
  CHECK(body["total"] == 4);
  CHECK(body["shapes"].size() == 2);
  CHECK(body["shapes"][0]["index"] == 1);
  CHECK(f.service.handle("GET", "/v1/shapes", "", {{"limit", "x"}}).status == 400);
}

TEST_CASE("uploads") {
  Fixture f;
  const auto labeled = toy_shapes(1)[0];
  const auto r = f.post("/v1/sessions", {{"source", {{"cloud", cloud_to_json(labeled)}}}});
  CHECK(r["source"].get<std::string>().rfind("upload:", 0) == 0);
  PointCloud unlabeled = labeled;
  unlabeled.labels.clear();
  const auto u = f.post("/v1/sessions", {{"source", {{"cloud", cloud_to_json(unlabeled)}}}});
  const auto s = f.service.session(u["session_id"]);
  REQUIRE(s.has_value());
  CHECK(s->current.present_count() == 3);
  CHECK(cloud_from_json(cloud_to_json(labeled)).labels == labeled.labels);
}

TEST_CASE("malformed requests") {
  Fixture f;
  const auto sid = f.open_session();
  const auto bad = f.post("/v1/edit", {{"session_id", sid}, {"mask", {1, 0}}, {"k", 1}, {"seed", 1}}, 400);
  CHECK(bad.contains("error"));
  CHECK(bad.contains("reason"));
  f.post("/v1/edit", {{"session_id", sid}, {"mask", {1, 2, 0}}, {"k", 1}, {"seed", 1}}, 400);
  f.post("/v1/edit", {{"session_id", sid}, {"mask", "100"}, {"k", 1}, {"seed", 1}}, 400);
  f.post("/v1/edit", {{"session_id", sid}, {"mask", {1, 0, 0}}, {"k", 0}, {"seed", 1}}, 400);
  f.post("/v1/edit", {{"session_id", sid}, {"mask", {1, 0, 0}}, {"k", 65}, {"seed", 1}}, 400);
  f.post("/v1/edit", {{"session_id", sid}, {"mask", {1, 0, 0}}, {"seed", 1}}, 400);
  f.post("/v1/edit", {{"session_id", "s99"}, {"mask", {1, 0, 0}}, {"k", 1}, {"seed", 1}}, 404);
  f.post("/v1/sessions", {{"source", {{"dataset_index", 40}}}}, 400);
  CHECK(f.service.handle("POST", "/v1/edit", "{not json").status == 400);
  CHECK(f.service.handle("POST", "/v1/nothing", "{}").status == 404);
  CHECK(f.service.handle("DELETE", "/v1/edit", "").status == 405);
}

TEST_CASE("concurrent identical requests over http") {
  Fixture f;
  HttpServer server(f.service);
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread loop([&] { server.listen(); });

  httplib::Client setup("127.0.0.1", port);
  const auto created = setup.Post("/v1/sessions", R"({"source": {"dataset_index": 2}})", "application/json");
  REQUIRE(created);
  const std::string sid = json::parse(created->body)["session_id"];
  const std::string body = json{{"session_id", sid}, {"mask", {0, 1, 1}}, {"k", 4}, {"seed", 17}}.dump();

  std::vector<std::string> bodies(16);
  std::vector<int> status(16, 0);
  std::vector<std::thread> clients;
  for (int t = 0; t < 16; ++t)
    clients.emplace_back([&, t] {
      httplib::Client c("127.0.0.1", port);
      if (auto r = c.Post("/v1/edit", body, "application/json")) {
        status[static_cast<std::size_t>(t)] = r->status;
        bodies[static_cast<std::size_t>(t)] = r->body;
      }
    });
  for (auto& c : clients) c.join();
  for (int t = 0; t < 16; ++t) {
    CHECK(status[static_cast<std::size_t>(t)] == 200);
    CHECK(bodies[static_cast<std::size_t>(t)] == bodies[0]);
  }
  const auto bad = setup.Post("/v1/edit", json{{"session_id", sid}, {"mask", {1, 1}}, {"k", 1}, {"seed", 1}}.dump(),
                              "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  server.stop();
  loop.join();
}
