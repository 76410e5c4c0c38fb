#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <thread>

#include "athena/service.hpp"
#include "test_util.hpp"

using namespace athena;
using nlohmann::json;

namespace {

catalog::Dataset write_library(const std::filesystem::path& dir, std::size_t users = 40, std::size_t items = 100,
                               std::size_t events = 1200) {
  catalog::SynthConfig cfg;
  cfg.n_users = users;
  cfg.n_items = items;
  cfg.n_events = events;
  auto data = catalog::generate_synthetic(cfg, 8);
  catalog::save_dataset(dir, data);
  return data;
}

service::ServiceConfig config_for(const test::TempDir& dir) {
  service::ServiceConfig c;
  c.data_dir = dir.path();
  c.model_path = dir / "model.bundle";
  c.tick_seconds = 0;  // ticks are driven by hand
  return c;
}

struct Running {
  explicit Running(service::ServiceConfig c) : svc(std::move(c)) {
    port = svc.start("127.0.0.1", 0);
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }
  json get(const std::string& path, int expect) {
    auto r = client->Get(path);
    EXPECT_TRUE(r) << path;
    if (!r) return {};
    EXPECT_EQ(r->status, expect) << path << ": " << r->body;
    return json::parse(r->body);
  }
  json send(const std::string& method, const std::string& path, const json& body, int expect) {
    auto r = method == "PUT" ? client->Put(path, body.dump(), "application/json")
                             : client->Post(path, body.dump(), "application/json");
    EXPECT_TRUE(r) << path;
    if (!r) return {};
    EXPECT_EQ(r->status, expect) << path << ": " << r->body;
    return json::parse(r->body);
  }
  void retrain() {
    send("POST", "/admin/retrain", json::object(), 202);
    svc.wait_for_retrain();
  }

  service::Service svc;
  int port = 0;
  std::unique_ptr<httplib::Client> client;
};

class MemorySink : public notify::DeliverySink {
 public:
  std::string name() const override { return "memory"; }
  void deliver(const notify::EmailMessage&, std::string_view user_id, std::int64_t) override {
    users.emplace_back(user_id);
  }
  std::vector<std::string> users;
};

}  // namespace

TEST(Service, CatalogEndpoints) {
  test::TempDir dir;
  auto data = write_library(dir.path());
  Running s(config_for(dir));

  auto page = s.get("/items?page=2&page_size=7", 200);
  EXPECT_EQ(page["total"], data.items.size());
  EXPECT_EQ(page["items"].size(), 7u);
  EXPECT_EQ(page["items"][0]["id"], data.items[7].id);
  auto rice = s.get("/items?community=rice&page_size=100", 200);
  for (const auto& item : rice["items"]) {
    auto comms = item["communities"].get<std::vector<std::string>>();
    EXPECT_NE(std::find(comms.begin(), comms.end(), "rice"), comms.end());
  }
  EXPECT_EQ(s.get("/items?community=wheat", 400)["field"], "community");
  EXPECT_EQ(s.get("/items?page_size=500", 400)["field"], "page_size");
  EXPECT_EQ(s.get("/items?page=0", 400)["field"], "page");

  auto one = s.get("/items/" + data.items[3].id, 200);
  EXPECT_EQ(one["item"]["id"], data.items[3].id);
  EXPECT_LE(one["related"].size(), 5u);
  EXPECT_TRUE(s.get("/items/no-such-item", 404).contains("error"));

  EXPECT_EQ(s.get("/search", 400)["field"], "q");
  auto hits = s.get("/search?q=rice%20yield&limit=3", 200);
  EXPECT_LE(hits["results"].size(), 3u);
  EXPECT_EQ(hits["query"], "rice yield");
}

TEST(Service, EventsUpdateStats) {
  test::TempDir dir;
  auto data = write_library(dir.path());
  Running s(config_for(dir));
  auto before = s.get("/stats", 200);
  EXPECT_EQ(before["n_events"], data.events.size());
  EXPECT_EQ(before["n_users"], data.users.size());

  const auto& user = data.users[0].id;
  const auto& item = data.items[0].id;
  auto ok = s.send("POST", "/events", {{"user_id", user}, {"item_id", item}, {"kind", "like"}}, 202);
  EXPECT_EQ(ok["status"], "accepted");
  EXPECT_TRUE(ok["event"]["timestamp"].is_number_integer());
  auto dropped = s.send("POST", "/events", {{"user_id", user}, {"kind", "search"}, {"query", "rice"}}, 202);
  EXPECT_EQ(dropped["status"], "dropped");
  s.send("POST", "/events", {{"user_id", "ghost"}, {"item_id", item}, {"kind", "view"}}, 404);
  s.send("POST", "/events", {{"user_id", user}, {"item_id", "nope"}, {"kind", "view"}}, 404);
  EXPECT_EQ(s.send("POST", "/events", {{"user_id", user}, {"item_id", item}, {"kind", "poke"}}, 400)["field"], "kind");
  auto r = s.client->Post("/events", "{not json", "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 400);

  auto after = s.get("/stats", 200);
  EXPECT_EQ(after["n_events"], data.events.size() + 1);
  EXPECT_EQ(after["events_by_kind"]["like"], before["events_by_kind"]["like"].get<int>() + 1);
  EXPECT_EQ(after["dropped_searches"], before["dropped_searches"].get<int>() + 1);
  EXPECT_LE(after["top_items_by_events"].size(), 10u);
  EXPECT_EQ(catalog::load_events(dir / "events.jsonl").size(), data.events.size() + 1);
}

TEST(Service, RecommendationsAndRetrain) {
  test::TempDir dir;
  auto data = write_library(dir.path());
  Running s(config_for(dir));
  const auto& user = data.users[2].id;
  s.get("/users/" + user + "/recommendations", 503);
  EXPECT_TRUE(s.get("/admin/status", 200)["model_version"].is_null());

  s.retrain();
  EXPECT_EQ(s.svc.model_version(), 1u);
  auto recs = s.get("/users/" + user + "/recommendations?n=4&alpha=0.7", 200);
  EXPECT_EQ(recs["model_version"], 1);
  EXPECT_EQ(recs["alpha"], 0.7);
  ASSERT_EQ(recs["recommendations"].size(), 4u);
  for (const auto& r : recs["recommendations"]) {
    EXPECT_TRUE(r.contains("title"));
    EXPECT_FALSE(r["reason"].get<std::string>().empty());
    EXPECT_GE(r["score"].get<double>(), 0.0);
    EXPECT_LE(r["score"].get<double>(), 1.0);
  }
  EXPECT_EQ(s.get("/users/" + user + "/recommendations?alpha=2", 400)["field"], "alpha");
  s.get("/users/ghost/recommendations", 404);
  EXPECT_TRUE(std::filesystem::exists(dir / "model.bundle"));

  s.retrain();
  EXPECT_EQ(s.get("/admin/status", 200)["model_version"], 2);
}

TEST(Service, RetrainQueueing) {
  test::TempDir dir;
  write_library(dir.path(), 400, 800, 20000);
  service::Service svc(config_for(dir));
  auto first = svc.request_retrain();
  auto second = svc.request_retrain();
  auto third = svc.request_retrain();
  EXPECT_EQ(first.status, "started");
  EXPECT_FALSE(first.conflict);
  EXPECT_EQ(second.status, "queued");
  EXPECT_EQ(second.version, first.version + 1);
  EXPECT_TRUE(third.conflict);
  EXPECT_EQ(third.version, second.version);
  svc.wait_for_retrain();
  EXPECT_EQ(svc.model_version(), second.version);
}

TEST(Service, ReadsDuringRetrainSeeWholeModels) {
  test::TempDir dir;
  auto data = write_library(dir.path(), 150, 300, 5000);
  Running s(config_for(dir));
  s.retrain();
  std::atomic<bool> done = false;
  std::atomic<int> bad = 0, reads = 0;
  std::vector<std::thread> readers;
  for (int t = 0; t < 3; ++t)
    readers.emplace_back([&, t] {
      httplib::Client c("127.0.0.1", s.port);
      std::uint64_t last = 0;
      while (!done) {
        auto r = c.Get("/users/" + data.users[t].id + "/recommendations?n=5");
        if (!r || r->status != 200) {
          ++bad;
          continue;
        }
        auto body = json::parse(r->body);
        auto v = body["model_version"].get<std::uint64_t>();
        if (v < last || v < 1 || v > 4 || body["recommendations"].size() != 5) ++bad;
        last = v;
        ++reads;
      }
    });
  for (int i = 0; i < 3; ++i) s.retrain();
  done = true;
  for (auto& t : readers) t.join();
  EXPECT_EQ(bad, 0);
  EXPECT_GT(reads, 0);
  EXPECT_EQ(s.svc.model_version(), 4u);
}

TEST(Service, PreferencesAndScheduleRoundTrip) {
  test::TempDir dir;
  auto data = write_library(dir.path());
  const auto user = data.users[1].id;
  {
    Running s(config_for(dir));
    json prefs{{"communities", {"corn", "rice"}}, {"material_types", {"thesis"}}};
    s.send("PUT", "/users/" + user + "/preferences", prefs, 200);
    auto back = s.get("/users/" + user + "/preferences", 200);
    EXPECT_EQ(back["communities"], json({"corn", "rice"}));
    EXPECT_EQ(back["material_types"], json({"thesis"}));
    EXPECT_EQ(s.send("PUT", "/users/" + user + "/preferences", {{"communities", {"wheat"}}}, 400)["field"],
              "communities");

    json sched{{"enabled", true}, {"frequency", "weekly"}, {"weekday", "fri"}, {"time_of_day", "07:45"},
               {"utc_offset_minutes", 480}};
    s.send("PUT", "/users/" + user + "/schedule", sched, 200);
    EXPECT_EQ(s.get("/users/" + user + "/schedule", 200), sched);
    EXPECT_EQ(s.send("PUT", "/users/" + user + "/schedule",
                     {{"enabled", true}, {"frequency", "daily"}, {"time_of_day", "25:00"}}, 400)["field"],
              "time_of_day");
    s.get("/users/ghost/schedule", 404);
    s.send("POST", "/events", {{"user_id", user}, {"item_id", data.items[5].id}, {"kind", "view"}}, 202);
    s.retrain();
  }
  // Restart over the same directory: state and model come back.
  Running again(config_for(dir));
  EXPECT_EQ(again.get("/users/" + user + "/preferences", 200)["communities"], json({"corn", "rice"}));
  EXPECT_EQ(again.get("/users/" + user + "/schedule", 200)["weekday"], "fri");
  EXPECT_EQ(again.get("/stats", 200)["n_events"], data.events.size() + 1);
  EXPECT_EQ(again.svc.model_version(), 1u);
  again.get("/users/" + user + "/recommendations", 200);
  again.retrain();
  EXPECT_EQ(again.svc.model_version(), 2u);
}

TEST(Service, SchedulerTickDelivers) {
  test::TempDir dir;
  auto data = write_library(dir.path());
  Running s(config_for(dir));
  MemorySink sink;
  EXPECT_TRUE(s.svc.run_scheduler_tick(1704067200, sink).empty());  // no model yet
  s.retrain();
  const auto user = data.users[0].id;
  s.send("PUT", "/users/" + user + "/schedule",
         {{"enabled", true}, {"frequency", "daily"}, {"time_of_day", "00:00"}, {"utc_offset_minutes", 0}}, 200);
  auto records = s.svc.run_scheduler_tick(1704067200 + 60, sink);
  std::size_t mine = 0;
  for (const auto& r : records) mine += r.user_id == user;
  EXPECT_EQ(mine, 1u);
  EXPECT_TRUE(s.svc.run_scheduler_tick(1704067200 + 120, sink).empty());
  EXPECT_TRUE(std::filesystem::exists(dir / "deliveries.jsonl"));
}
