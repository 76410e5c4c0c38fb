#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "athena/bundle.hpp"
#include "athena/catalog.hpp"
#include "athena/hybrid.hpp"
#include "athena/notify.hpp"

namespace httplib {
class Server;
}

namespace athena::service {

struct ServiceConfig {
  std::filesystem::path data_dir;
  std::optional<std::filesystem::path> model_path;  // loaded at start, rewritten by retrains
  std::optional<std::filesystem::path> outbox;      // default: <data_dir>/outbox
  cf::TrainConfig train;
  hybrid::BlendConfig blend;
  std::int64_t tick_seconds = 60;   // scheduler period; 0 disables
  std::int64_t retrain_every = 0;   // seconds; 0 disables
  std::size_t digest_size = 5;
};

/// One published model version. Immutable once published.
struct ModelState {
  cf::ModelBundle bundle;
  std::unique_ptr<hybrid::Recommender> recommender;
};

/// Holds the current model; readers get a complete snapshot, retrains
/// replace it with one pointer swap.
class ModelHandle {
 public:
  std::shared_ptr<const ModelState> get() const;
  void publish(std::shared_ptr<const ModelState> state);

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const ModelState> current_;
};

/// Outcome of a retrain request. Idle: a run starts. Running: one follow-up
/// run is queued. Already queued: the request coalesces into that run and
/// `conflict` is set.
struct RetrainTicket {
  std::uint64_t version = 0;  // version the run serving this request will publish
  std::string status;         // "started" or "queued"
  bool conflict = false;
};

/// HTTP API over the catalog, event log and current models.
///
/// No authentication: user ids in paths and bodies are trusted.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds (port 0 picks a free port), starts the HTTP and background
  // threads, and returns the bound port. Throws IoError if binding fails.
  int start(const std::string& host, int port);
  void stop();

  RetrainTicket request_retrain();
  // Blocks until no retrain is running.
  void wait_for_retrain();
  std::uint64_t model_version() const;

  std::vector<notify::DeliveryRecord> run_scheduler_tick(std::int64_t now, notify::DeliverySink& sink);

 private:
  void register_routes();
  void retrain_worker(std::uint64_t version);
  void append_event(catalog::ActivityEvent event);
  catalog::Dataset snapshot() const;
  void persist_users() const;
  void background_loop();
  std::shared_ptr<const ModelState> make_state(cf::ModelBundle bundle) const;

  ServiceConfig config_;
  std::vector<catalog::Item> items_;
  std::unordered_map<std::string, std::size_t> item_pos_;
  cbf::TfIdfModel catalog_tfidf_;

  mutable std::shared_mutex store_mutex_;  // users_, events_, per-user index, counts
  std::vector<catalog::UserProfile> users_;
  std::unordered_map<std::string, std::size_t> user_pos_;
  std::vector<catalog::ActivityEvent> events_;
  std::unordered_map<std::string, std::vector<catalog::ActivityEvent>> user_events_;
  std::vector<std::uint64_t> item_counts_;
  std::size_t dropped_searches_ = 0;
  std::mutex writer_mutex_;  // events.jsonl / users.jsonl writes

  ModelHandle models_;
  notify::DeliveryLog deliveries_;
  notify::Scheduler scheduler_;

  std::mutex retrain_mutex_;
  std::condition_variable retrain_done_;
  bool retrain_running_ = false;
  bool retrain_queued_ = false;
  std::uint64_t running_version_ = 0;
  std::uint64_t next_version_ = 1;
  std::string last_retrain_error_;
  std::thread retrain_thread_;

  std::unique_ptr<httplib::Server> http_;
  std::thread http_thread_;
  std::thread background_thread_;
  std::mutex stop_mutex_;
  std::condition_variable stop_cv_;
  bool stopping_ = false;
  bool started_ = false;
};

}  // namespace athena::service
