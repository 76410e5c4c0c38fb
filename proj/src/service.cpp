#include "athena/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>

#include "athena/error.hpp"
#include "athena/ranking.hpp"

namespace athena::service {

using nlohmann::json;
using nlohmann::ordered_json;

std::shared_ptr<const ModelState> ModelHandle::get() const {
  std::lock_guard lock(mutex_);
  return current_;
}

void ModelHandle::publish(std::shared_ptr<const ModelState> state) {
  std::lock_guard lock(mutex_);
  current_ = std::move(state);
}

namespace {

std::int64_t unix_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

struct HttpError {
  int status;
  std::string message;
  std::string field;
};

void reply(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message, const std::string& field) {
  ordered_json body;
  body["error"] = message;
  body["field"] = field.empty() ? ordered_json(nullptr) : ordered_json(field);
  reply(res, status, body);
}

// Maps domain exceptions onto status codes.
template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const HttpError& e) {
      reply_error(res, e.status, e.message, e.field);
    } catch (const ValidationError& e) {
      reply_error(res, 400, e.what(), e.field());
    } catch (const UnknownUserError& e) {
      reply_error(res, 404, e.what(), "user_id");
    } catch (const UnknownItemError& e) {
      reply_error(res, 404, e.what(), "item_id");
    } catch (const json::exception& e) {
      reply_error(res, 400, std::string("malformed JSON: ") + e.what(), "body");
    } catch (const ConfigError& e) {
      reply_error(res, 400, e.what(), "");
    } catch (const std::exception& e) {
      reply_error(res, 500, e.what(), "");
    }
  };
}

std::size_t size_param(const httplib::Request& req, const std::string& name, std::size_t fallback, std::size_t lo,
                       std::size_t hi) {
  if (!req.has_param(name)) return fallback;
  const auto raw = req.get_param_value(name);
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(raw, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != raw.size())
    throw HttpError{400, "expected an integer", name};
  if (v < static_cast<long long>(lo) || v > static_cast<long long>(hi))
    throw HttpError{400, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]", name};
  return static_cast<std::size_t>(v);
}

json parse_body(const httplib::Request& req) {
  json body = json::parse(req.body);
  if (!body.is_object()) throw HttpError{400, "expected a JSON object", "body"};
  return body;
}

ordered_json item_summary(const catalog::Item& item, double score) {
  ordered_json j;
  j["item_id"] = item.id;
  j["title"] = item.title;
  j["score"] = score;
  return j;
}

}  // namespace

Service::Service(ServiceConfig config)
    : config_(std::move(config)),
      deliveries_(config_.data_dir / "deliveries.jsonl") {
  config_.blend.validate();
  config_.train.weights.validate();
  auto data = catalog::load_dataset(config_.data_dir);
  items_ = std::move(data.items);
  for (std::size_t i = 0; i < items_.size(); ++i) item_pos_.emplace(items_[i].id, i);
  catalog_tfidf_ = cbf::build_tfidf(items_, config_.train.tfidf);

  users_ = std::move(data.users);
  for (std::size_t i = 0; i < users_.size(); ++i) user_pos_.emplace(users_[i].id, i);
  item_counts_.assign(items_.size(), 0);
  events_.reserve(data.events.size());
  for (auto& e : data.events) {
    item_counts_[item_pos_.at(e.item_id)]++;
    user_events_[e.user_id].push_back(e);
    events_.push_back(std::move(e));
  }
  if (auto path = config_.data_dir / catalog::kEventsFile; std::filesystem::exists(path))
    dropped_searches_ = catalog::load_event_log(path).dropped_searches;

  if (config_.model_path && std::filesystem::exists(*config_.model_path)) {
    auto bundle = cf::load_bundle(*config_.model_path);
    next_version_ = bundle.version + 1;
    models_.publish(make_state(std::move(bundle)));
  }
  register_routes();
}

Service::~Service() { stop(); }

std::shared_ptr<const ModelState> Service::make_state(cf::ModelBundle bundle) const {
  auto state = std::make_shared<ModelState>();
  state->bundle = std::move(bundle);
  state->recommender = std::make_unique<hybrid::Recommender>(items_, state->bundle.cf, state->bundle.tfidf,
                                                             config_.train.weights);
  return state;
}

std::uint64_t Service::model_version() const {
  auto m = models_.get();
  return m ? m->bundle.version : 0;
}

catalog::Dataset Service::snapshot() const {
  catalog::Dataset data;
  data.items = items_;
  std::shared_lock lock(store_mutex_);
  data.users = users_;
  data.events = events_;
  lock.unlock();
  std::stable_sort(data.events.begin(), data.events.end(),
                   [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  return data;
}

void Service::append_event(catalog::ActivityEvent event) {
  std::lock_guard writer(writer_mutex_);
  {
    std::ofstream out(config_.data_dir / catalog::kEventsFile, std::ios::app);
    out << catalog::to_json(event).dump() << '\n';
    out.flush();
    if (!out) throw IoError("cannot append to events.jsonl");
  }
  std::unique_lock lock(store_mutex_);
  item_counts_[item_pos_.at(event.item_id)]++;
  user_events_[event.user_id].push_back(event);
  events_.push_back(std::move(event));
}

// Caller holds writer_mutex_.
void Service::persist_users() const {
  std::shared_lock lock(store_mutex_);
  auto copy = users_;
  lock.unlock();
  catalog::save_users(config_.data_dir / catalog::kUsersFile, copy);
}

RetrainTicket Service::request_retrain() {
  std::lock_guard lock(retrain_mutex_);
  if (!retrain_running_) {
    if (retrain_thread_.joinable()) retrain_thread_.join();
    retrain_running_ = true;
    running_version_ = next_version_++;
    retrain_thread_ = std::thread([this, v = running_version_] { retrain_worker(v); });
    return {running_version_, "started", false};
  }
  if (!retrain_queued_) {
    retrain_queued_ = true;
    return {running_version_ + 1, "queued", false};
  }
  return {running_version_ + 1, "queued", true};
}

void Service::retrain_worker(std::uint64_t version) {
  for (;;) {
    std::string error;
    try {
      auto data = snapshot();
      const std::int64_t trained_at = data.events.empty() ? unix_now() : data.events.back().timestamp;
      auto bundle = cf::train_bundle(data.items, data.users, data.events, config_.train, trained_at, version);
      if (config_.model_path) cf::save_bundle(*config_.model_path, bundle);
      models_.publish(make_state(std::move(bundle)));
    } catch (const std::exception& e) {
      error = e.what();
      std::cerr << "retrain " << version << " failed: " << error << '\n';
    }
    std::lock_guard lock(retrain_mutex_);
    last_retrain_error_ = error;
    if (!retrain_queued_) {
      retrain_running_ = false;
      retrain_done_.notify_all();
      return;
    }
    retrain_queued_ = false;
    version = running_version_ = next_version_++;
  }
}

void Service::wait_for_retrain() {
  std::unique_lock lock(retrain_mutex_);
  retrain_done_.wait(lock, [this] { return !retrain_running_; });
}

std::vector<notify::DeliveryRecord> Service::run_scheduler_tick(std::int64_t now, notify::DeliverySink& sink) {
  auto model = models_.get();
  if (!model) return {};
  auto data = snapshot();
  hybrid::Context ctx(data, model->bundle.cf, model->bundle.tfidf, config_.train.weights);
  return scheduler_.tick(now, data.users, ctx, deliveries_, sink, config_.digest_size);
}

void Service::background_loop() {
  notify::FileSink sink(config_.outbox.value_or(config_.data_dir / "outbox"));
  const auto start = std::chrono::steady_clock::now();
  auto next_tick = start;
  auto next_retrain = start + std::chrono::seconds(config_.retrain_every);
  for (;;) {
    auto wake = std::chrono::steady_clock::time_point::max();
    if (config_.tick_seconds > 0) wake = std::min(wake, next_tick);
    if (config_.retrain_every > 0) wake = std::min(wake, next_retrain);
    {
      std::unique_lock lock(stop_mutex_);
      if (wake == std::chrono::steady_clock::time_point::max())
        stop_cv_.wait(lock, [this] { return stopping_; });
      else
        stop_cv_.wait_until(lock, wake, [this] { return stopping_; });
      if (stopping_) return;
    }
    const auto now = std::chrono::steady_clock::now();
    if (config_.tick_seconds > 0 && now >= next_tick) {
      try {
        run_scheduler_tick(unix_now(), sink);
      } catch (const std::exception& e) {
        std::cerr << "scheduler tick failed: " << e.what() << '\n';
      }
      next_tick = now + std::chrono::seconds(config_.tick_seconds);
    }
    if (config_.retrain_every > 0 && now >= next_retrain) {
      request_retrain();
      next_retrain = now + std::chrono::seconds(config_.retrain_every);
    }
  }
}

int Service::start(const std::string& host, int port) {
  if (started_) throw ConfigError("service already started");
  int bound = port == 0 ? http_->bind_to_any_port(host) : (http_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  started_ = true;
  http_thread_ = std::thread([this] { http_->listen_after_bind(); });
  background_thread_ = std::thread([this] { background_loop(); });
  http_->wait_until_ready();
  return bound;
}

void Service::stop() {
  {
    std::lock_guard lock(stop_mutex_);
    stopping_ = true;
  }
  stop_cv_.notify_all();
  if (http_) http_->stop();
  if (http_thread_.joinable()) http_thread_.join();
  if (background_thread_.joinable()) background_thread_.join();
  wait_for_retrain();
  if (retrain_thread_.joinable()) retrain_thread_.join();
}

void Service::register_routes() {
  http_ = std::make_unique<httplib::Server>();
  auto& s = *http_;

  s.Get("/items", guarded([this](const httplib::Request& req, httplib::Response& res) {
    std::optional<catalog::Community> community;
    std::optional<catalog::MaterialType> material;
    if (req.has_param("community")) {
      community = catalog::parse_community(req.get_param_value("community"));
      if (!community) throw HttpError{400, "unknown community", "community"};
    }
    if (req.has_param("material_type")) {
      material = catalog::parse_material_type(req.get_param_value("material_type"));
      if (!material) throw HttpError{400, "unknown material type", "material_type"};
    }
    const auto page = size_param(req, "page", 1, 1, std::numeric_limits<int>::max());
    const auto page_size = size_param(req, "page_size", 20, 1, 100);

    std::vector<const catalog::Item*> matching;
    for (const auto& item : items_) {
      if (community && !item.communities.contains(*community)) continue;
      if (material && item.material_type != *material) continue;
      matching.push_back(&item);
    }
    ordered_json body;
    body["page"] = page;
    body["page_size"] = page_size;
    body["total"] = matching.size();
    body["items"] = ordered_json::array();
    const std::size_t first = (page - 1) * page_size;
    for (std::size_t i = first; i < matching.size() && i < first + page_size; ++i)
      body["items"].push_back(catalog::to_json(*matching[i]));
    reply(res, 200, body);
  }));

  s.Get(R"(/items/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    auto it = item_pos_.find(id);
    if (it == item_pos_.end()) throw UnknownItemError(id);
    ordered_json body;
    body["item"] = catalog::to_json(items_[it->second]);
    body["related"] = ordered_json::array();
    for (const auto& r : cbf::related_items(catalog_tfidf_, id, 5))
      body["related"].push_back(item_summary(items_[item_pos_.at(r.item_id)], r.score));
    reply(res, 200, body);
  }));

  s.Get("/search", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto q = req.has_param("q") ? req.get_param_value("q") : std::string{};
    if (q.empty()) throw HttpError{400, "query must not be empty", "q"};
    const auto limit = size_param(req, "limit", 10, 1, 100);
    ordered_json body;
    body["query"] = q;
    body["results"] = ordered_json::array();
    for (const auto& r : cbf::search(catalog_tfidf_, q, limit))
      body["results"].push_back(item_summary(items_[item_pos_.at(r.item_id)], r.score));
    reply(res, 200, body);
  }));

  s.Post("/events", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req);
    if (!body.contains("timestamp") || body["timestamp"].is_null()) body["timestamp"] = unix_now();
    auto event = catalog::event_from_json(body);
    {
      std::shared_lock lock(store_mutex_);
      const auto& uid = body["user_id"].get_ref<const std::string&>();
      if (!user_pos_.contains(uid)) throw UnknownUserError(uid);
    }
    if (!event) {
      std::unique_lock lock(store_mutex_);
      ++dropped_searches_;
      reply(res, 202, {{"status", "dropped"}});
      return;
    }
    if (!item_pos_.contains(event->item_id)) throw UnknownItemError(event->item_id);
    auto echo = catalog::to_json(*event);
    append_event(std::move(*event));
    reply(res, 202, {{"status", "accepted"}, {"event", echo}});
  }));

  s.Get(R"(/users/([^/]+)/recommendations)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    auto blend = config_.blend;
    const auto n = size_param(req, "n", blend.n_default, 1, 1000);
    if (req.has_param("alpha")) {
      const auto raw = req.get_param_value("alpha");
      std::size_t pos = 0;
      double a = -1;
      try {
        a = std::stod(raw, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos == 0 || pos != raw.size() || !(a >= 0.0 && a <= 1.0))
        throw HttpError{400, "must be a number in [0, 1]", "alpha"};
      blend.alpha = a;
    }
    catalog::UserProfile user;
    std::vector<catalog::ActivityEvent> events;
    std::vector<std::uint64_t> counts;
    {
      std::shared_lock lock(store_mutex_);
      auto it = user_pos_.find(id);
      if (it == user_pos_.end()) throw UnknownUserError(id);
      user = users_[it->second];
      if (auto e = user_events_.find(id); e != user_events_.end()) events = e->second;
      counts = item_counts_;
    }
    auto model = models_.get();
    if (!model) throw HttpError{503, "no model trained yet", ""};
    const auto recs = model->recommender->recommend(user, events, counts, n, blend);

    ordered_json body;
    body["user_id"] = id;
    body["model_version"] = model->bundle.version;
    body["trained_at"] = model->bundle.trained_at;
    body["alpha"] = blend.alpha;
    body["recommendations"] = ordered_json::array();
    for (const auto& r : recs) {
      ordered_json j;
      j["item_id"] = r.item_id;
      j["title"] = items_[item_pos_.at(r.item_id)].title;
      j["score"] = r.score;
      j["source"] = hybrid::to_string(r.source);
      j["reason"] = r.reason;
      body["recommendations"].push_back(std::move(j));
    }
    reply(res, 200, body);
  }));

  auto find_user = [this](const std::string& id) {
    auto it = user_pos_.find(id);
    if (it == user_pos_.end()) throw UnknownUserError(id);
    return it->second;
  };

  s.Get(R"(/users/([^/]+)/preferences)", guarded([this, find_user](const httplib::Request& req, httplib::Response& res) {
    std::shared_lock lock(store_mutex_);
    reply(res, 200, catalog::to_json(users_[find_user(req.matches[1])].preferences));
  }));

  s.Put(R"(/users/([^/]+)/preferences)", guarded([this, find_user](const httplib::Request& req, httplib::Response& res) {
    auto prefs = catalog::preferences_from_json(parse_body(req));
    std::lock_guard writer(writer_mutex_);
    {
      std::unique_lock lock(store_mutex_);
      users_[find_user(req.matches[1])].preferences = prefs;
    }
    persist_users();
    reply(res, 200, catalog::to_json(prefs));
  }));

  s.Get(R"(/users/([^/]+)/schedule)", guarded([this, find_user](const httplib::Request& req, httplib::Response& res) {
    std::shared_lock lock(store_mutex_);
    reply(res, 200, notify::schedule_to_json(users_[find_user(req.matches[1])].schedule));
  }));

  s.Put(R"(/users/([^/]+)/schedule)", guarded([this, find_user](const httplib::Request& req, httplib::Response& res) {
    auto schedule = notify::schedule_from_json(parse_body(req));
    std::lock_guard writer(writer_mutex_);
    {
      std::unique_lock lock(store_mutex_);
      users_[find_user(req.matches[1])].schedule = schedule;
    }
    persist_users();
    reply(res, 200, notify::schedule_to_json(schedule));
  }));

  s.Post("/admin/retrain", guarded([this](const httplib::Request&, httplib::Response& res) {
    const auto ticket = request_retrain();
    reply(res, ticket.conflict ? 409 : 202, {{"version", ticket.version}, {"status", ticket.status}});
  }));

  s.Get("/admin/status", guarded([this](const httplib::Request&, httplib::Response& res) {
    auto model = models_.get();
    ordered_json body;
    body["model_version"] = model ? ordered_json(model->bundle.version) : ordered_json(nullptr);
    body["trained_at"] = model ? ordered_json(model->bundle.trained_at) : ordered_json(nullptr);
    std::lock_guard lock(retrain_mutex_);
    body["retraining"] = retrain_running_;
    body["queued"] = retrain_queued_;
    body["last_error"] = last_retrain_error_.empty() ? ordered_json(nullptr) : ordered_json(last_retrain_error_);
    reply(res, 200, body);
  }));

  s.Get("/stats", guarded([this](const httplib::Request&, httplib::Response& res) {
    ordered_json body;
    std::shared_lock lock(store_mutex_);
    body["n_items"] = items_.size();
    body["n_users"] = users_.size();
    body["n_events"] = events_.size();
    body["dropped_searches"] = dropped_searches_;
    std::map<catalog::EventKind, std::size_t> kinds{
        {catalog::EventKind::search, 0}, {catalog::EventKind::view, 0}, {catalog::EventKind::like, 0}};
    for (const auto& e : events_) kinds[e.kind]++;
    body["events_by_kind"] = ordered_json::object();
    for (auto [k, c] : kinds) body["events_by_kind"][std::string(catalog::to_string(k))] = c;

    std::vector<std::size_t> order(items_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::size_t top = std::min<std::size_t>(10, order.size());
    std::partial_sort(order.begin(), order.begin() + top, order.end(), [&](std::size_t a, std::size_t b) {
      return item_counts_[a] != item_counts_[b] ? item_counts_[a] > item_counts_[b] : items_[a].id < items_[b].id;
    });
    body["top_items_by_events"] = ordered_json::array();
    for (std::size_t i = 0; i < top && item_counts_[order[i]] > 0; ++i)
      body["top_items_by_events"].push_back(
          {{"item_id", items_[order[i]].id}, {"title", items_[order[i]].title}, {"events", item_counts_[order[i]]}});
    lock.unlock();

    std::map<catalog::Community, std::size_t> per_community;
    for (const auto& item : items_)
      for (auto c : item.communities) per_community[c]++;
    body["items_per_community"] = ordered_json::object();
    for (auto [c, n] : per_community) body["items_per_community"][std::string(catalog::to_string(c))] = n;
    reply(res, 200, body);
  }));
}

}  // namespace athena::service
