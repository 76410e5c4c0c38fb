#include "athena/catalog.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <unordered_set>

#include "athena/error.hpp"

namespace athena::catalog {

namespace {

constexpr std::array<std::string_view, kMaterialTypeCount> kMaterialNames = {
    "book",    "serial",   "thesis",  "non_print", "vertical_file", "inventory_project",
    "technical_report", "reprint", "analytic", "journal", "article", "poster"};

constexpr std::array<std::string_view, kCommunityCount> kCommunityNames = {
    "banana", "cacao", "coconut", "coffee", "corn", "rice", "soybean", "sugarcane", "tomato", "other"};

constexpr std::array<std::string_view, 3> kEventKindNames = {"search", "view", "like"};

template <typename E, std::size_t N>
std::optional<E> parse_enum(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == s) return static_cast<E>(i);
  return std::nullopt;
}

const nlohmann::json* find(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

std::string require_string(const nlohmann::json& j, const char* key, std::size_t line, bool allow_empty) {
  const auto* v = find(j, key);
  if (!v || !v->is_string()) throw ValidationError(line, key, "expected a string");
  auto s = v->get<std::string>();
  if (!allow_empty && s.empty()) throw ValidationError(line, key, "must not be empty");
  return s;
}

template <typename E, typename Parse>
std::set<E> enum_set(const nlohmann::json* v, const char* field, std::size_t line, Parse parse) {
  std::set<E> out;
  if (!v || v->is_null()) return out;
  if (!v->is_array()) throw ValidationError(line, field, "expected an array");
  for (const auto& e : *v) {
    if (!e.is_string()) throw ValidationError(line, field, "expected string values");
    auto parsed = parse(e.get<std::string>());
    if (!parsed) throw ValidationError(line, field, "unknown value '" + e.get<std::string>() + "'");
    out.insert(*parsed);
  }
  return out;
}

// Calls fn(json, line_number) for each non-blank line.
template <typename Fn>
void for_each_jsonl(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line, e.what());
    }
    if (!j.is_object()) throw ParseError(line, "expected a JSON object");
    fn(j, line);
  }
  if (in.bad()) throw IoError("read failed on " + path.string());
}

template <typename T>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& rows) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    for (const auto& row : rows) out << to_json(row).dump() << '\n';
    if (!out) throw IoError("write failed on " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot replace " + path.string() + ": " + ec.message());
}

}  // namespace

std::string_view to_string(MaterialType m) { return kMaterialNames[static_cast<std::size_t>(m)]; }
std::string_view to_string(Community c) { return kCommunityNames[static_cast<std::size_t>(c)]; }
std::string_view to_string(EventKind k) { return kEventKindNames[static_cast<std::size_t>(k)]; }

std::optional<MaterialType> parse_material_type(std::string_view s) {
  return parse_enum<MaterialType>(kMaterialNames, s);
}
std::optional<Community> parse_community(std::string_view s) { return parse_enum<Community>(kCommunityNames, s); }
std::optional<EventKind> parse_event_kind(std::string_view s) { return parse_enum<EventKind>(kEventKindNames, s); }

std::string format_date(Date d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                static_cast<unsigned>(d.day()));
  return buf;
}

std::optional<Date> parse_date(std::string_view iso) {
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return std::nullopt;
  int y = 0;
  unsigned m = 0, d = 0;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (iso[i] < '0' || iso[i] > '9') return std::nullopt;
  y = std::stoi(std::string(iso.substr(0, 4)));
  m = static_cast<unsigned>(std::stoi(std::string(iso.substr(5, 2))));
  d = static_cast<unsigned>(std::stoi(std::string(iso.substr(8, 2))));
  Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) return std::nullopt;
  return date;
}

bool PreferenceFilter::passes(const Item& item) const {
  if (!material_types.empty() && !material_types.contains(item.material_type)) return false;
  if (communities.empty()) return true;
  return std::any_of(item.communities.begin(), item.communities.end(),
                     [&](Community c) { return communities.contains(c); });
}

bool valid_email(std::string_view email) {
  auto at = email.find('@');
  if (at == std::string_view::npos || email.find('@', at + 1) != std::string_view::npos) return false;
  return at > 0 && at + 1 < email.size();
}

nlohmann::ordered_json to_json(const Item& item) {
  nlohmann::ordered_json j;
  j["id"] = item.id;
  j["title"] = item.title;
  j["description"] = item.description;
  j["material_type"] = to_string(item.material_type);
  auto& comms = j["communities"] = nlohmann::ordered_json::array();
  for (auto c : item.communities) comms.push_back(to_string(c));
  j["publication_date"] = format_date(item.publication_date);
  return j;
}

nlohmann::ordered_json to_json(const PreferenceFilter& prefs) {
  nlohmann::ordered_json j;
  auto& comms = j["communities"] = nlohmann::ordered_json::array();
  for (auto c : prefs.communities) comms.push_back(to_string(c));
  auto& mats = j["material_types"] = nlohmann::ordered_json::array();
  for (auto m : prefs.material_types) mats.push_back(to_string(m));
  return j;
}

nlohmann::ordered_json to_json(const UserProfile& user) {
  nlohmann::ordered_json j;
  j["id"] = user.id;
  j["full_name"] = user.full_name;
  j["email"] = user.email;
  j["preferences"] = to_json(user.preferences);
  j["schedule"] = notify::schedule_to_json(user.schedule);
  return j;
}

nlohmann::ordered_json to_json(const ActivityEvent& event) {
  nlohmann::ordered_json j;
  j["user_id"] = event.user_id;
  j["item_id"] = event.item_id;
  j["kind"] = to_string(event.kind);
  j["timestamp"] = event.timestamp;
  j["query"] = event.query ? nlohmann::ordered_json(*event.query) : nlohmann::ordered_json(nullptr);
  return j;
}

Item item_from_json(const nlohmann::json& j, std::size_t line) {
  Item item;
  item.id = require_string(j, "id", line, false);
  item.title = require_string(j, "title", line, false);
  if (const auto* d = find(j, "description"); d && !d->is_null()) {
    if (!d->is_string()) throw ValidationError(line, "description", "expected a string");
    item.description = d->get<std::string>();
  }
  auto mat = require_string(j, "material_type", line, false);
  auto parsed_mat = parse_material_type(mat);
  if (!parsed_mat) throw ValidationError(line, "material_type", "unknown value '" + mat + "'");
  item.material_type = *parsed_mat;
  item.communities = enum_set<Community>(find(j, "communities"), "communities", line, parse_community);
  if (item.communities.empty()) throw ValidationError(line, "communities", "must not be empty");
  auto date = require_string(j, "publication_date", line, false);
  auto parsed_date = parse_date(date);
  if (!parsed_date) throw ValidationError(line, "publication_date", "expected YYYY-MM-DD, got '" + date + "'");
  item.publication_date = *parsed_date;
  return item;
}

PreferenceFilter preferences_from_json(const nlohmann::json& j, std::size_t line) {
  if (!j.is_object()) throw ValidationError(line, "preferences", "expected an object");
  PreferenceFilter prefs;
  prefs.communities = enum_set<Community>(find(j, "communities"), "communities", line, parse_community);
  prefs.material_types =
      enum_set<MaterialType>(find(j, "material_types"), "material_types", line, parse_material_type);
  return prefs;
}

UserProfile user_from_json(const nlohmann::json& j, std::size_t line) {
  UserProfile user;
  user.id = require_string(j, "id", line, false);
  user.full_name = require_string(j, "full_name", line, true);
  user.email = require_string(j, "email", line, false);
  if (!valid_email(user.email)) throw ValidationError(line, "email", "malformed address '" + user.email + "'");
  if (const auto* p = find(j, "preferences"); p && !p->is_null()) user.preferences = preferences_from_json(*p, line);
  if (const auto* s = find(j, "schedule"); s && !s->is_null()) user.schedule = notify::schedule_from_json(*s, line);
  return user;
}

std::optional<ActivityEvent> event_from_json(const nlohmann::json& j, std::size_t line) {
  ActivityEvent event;
  event.user_id = require_string(j, "user_id", line, false);
  auto kind = require_string(j, "kind", line, false);
  auto parsed_kind = parse_event_kind(kind);
  if (!parsed_kind) throw ValidationError(line, "kind", "unknown value '" + kind + "'");
  event.kind = *parsed_kind;

  const auto* ts = find(j, "timestamp");
  if (!ts || !ts->is_number_integer()) throw ValidationError(line, "timestamp", "expected an integer");
  event.timestamp = ts->get<std::int64_t>();
  if (event.timestamp <= 0) throw ValidationError(line, "timestamp", "must be positive");

  if (const auto* q = find(j, "query"); q && !q->is_null()) {
    if (!q->is_string()) throw ValidationError(line, "query", "expected a string");
    event.query = q->get<std::string>();
  }
  if (event.kind == EventKind::search && !event.query)
    throw ValidationError(line, "query", "search events require a query");
  if (event.kind != EventKind::search && event.query)
    throw ValidationError(line, "query", "only search events carry a query");

  const auto* item = find(j, "item_id");
  if (!item || item->is_null()) {
    if (event.kind == EventKind::search) return std::nullopt;
    throw ValidationError(line, "item_id", "expected a string");
  }
  if (!item->is_string() || item->get<std::string>().empty())
    throw ValidationError(line, "item_id", "expected a non-empty string");
  event.item_id = item->get<std::string>();
  return event;
}

std::vector<Item> load_items(const std::filesystem::path& path) {
  std::vector<Item> items;
  std::unordered_set<std::string> ids;
  for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    auto item = item_from_json(j, line);
    if (!ids.insert(item.id).second) throw ValidationError(line, "id", "duplicate item id '" + item.id + "'");
    items.push_back(std::move(item));
  });
  return items;
}

std::vector<UserProfile> load_users(const std::filesystem::path& path) {
  std::vector<UserProfile> users;
  std::unordered_set<std::string> ids;
  for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    auto user = user_from_json(j, line);
    if (!ids.insert(user.id).second) throw ValidationError(line, "id", "duplicate user id '" + user.id + "'");
    users.push_back(std::move(user));
  });
  return users;
}

namespace {

struct NumberedEvent {
  ActivityEvent event;
  std::size_t line;
};

std::vector<NumberedEvent> read_events(const std::filesystem::path& path, std::size_t& dropped) {
  std::vector<NumberedEvent> out;
  for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    if (auto e = event_from_json(j, line))
      out.push_back({std::move(*e), line});
    else
      ++dropped;
  });
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.event.timestamp < b.event.timestamp; });
  return out;
}

}  // namespace

EventLog load_event_log(const std::filesystem::path& path) {
  EventLog log;
  auto numbered = read_events(path, log.dropped_searches);
  log.events.reserve(numbered.size());
  for (auto& n : numbered) log.events.push_back(std::move(n.event));
  return log;
}

std::vector<ActivityEvent> load_events(const std::filesystem::path& path) { return load_event_log(path).events; }

void save_items(const std::filesystem::path& path, const std::vector<Item>& items) { write_jsonl(path, items); }
void save_users(const std::filesystem::path& path, const std::vector<UserProfile>& users) {
  write_jsonl(path, users);
}
void save_events(const std::filesystem::path& path, const std::vector<ActivityEvent>& events) {
  write_jsonl(path, events);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset data;
  data.items = load_items(dir / kItemsFile);
  data.users = load_users(dir / kUsersFile);
  std::size_t dropped = 0;
  auto events_path = dir / kEventsFile;
  std::vector<NumberedEvent> numbered;
  if (std::filesystem::exists(events_path)) numbered = read_events(events_path, dropped);

  std::unordered_set<std::string> user_ids, item_ids;
  for (const auto& u : data.users) user_ids.insert(u.id);
  for (const auto& i : data.items) item_ids.insert(i.id);
  data.events.reserve(numbered.size());
  for (auto& n : numbered) {
    if (!user_ids.contains(n.event.user_id))
      throw ValidationError(n.line, "user_id", "unknown user '" + n.event.user_id + "'");
    if (!item_ids.contains(n.event.item_id))
      throw ValidationError(n.line, "item_id", "unknown item '" + n.event.item_id + "'");
    data.events.push_back(std::move(n.event));
  }
  return data;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& data) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  save_items(dir / kItemsFile, data.items);
  save_users(dir / kUsersFile, data.users);
  save_events(dir / kEventsFile, data.events);
}

void validate(const Dataset& data) {
  std::unordered_set<std::string> user_ids, item_ids;
  for (const auto& i : data.items) {
    if (i.id.empty()) throw ValidationError(0, "id", "empty item id");
    if (i.title.empty()) throw ValidationError(0, "title", "empty title on item '" + i.id + "'");
    if (i.communities.empty()) throw ValidationError(0, "communities", "no communities on item '" + i.id + "'");
    if (!item_ids.insert(i.id).second) throw ValidationError(0, "id", "duplicate item id '" + i.id + "'");
  }
  for (const auto& u : data.users) {
    if (!user_ids.insert(u.id).second) throw ValidationError(0, "id", "duplicate user id '" + u.id + "'");
    if (!valid_email(u.email)) throw ValidationError(0, "email", "malformed address on user '" + u.id + "'");
  }
  std::int64_t last = 0;
  for (const auto& e : data.events) {
    if (!user_ids.contains(e.user_id)) throw ValidationError(0, "user_id", "unknown user '" + e.user_id + "'");
    if (!item_ids.contains(e.item_id)) throw ValidationError(0, "item_id", "unknown item '" + e.item_id + "'");
    if (e.timestamp <= 0) throw ValidationError(0, "timestamp", "must be positive");
    if (e.timestamp < last) throw ValidationError(0, "timestamp", "events out of order");
    if ((e.kind == EventKind::search) != e.query.has_value())
      throw ValidationError(0, "query", "query must be present exactly on search events");
    last = e.timestamp;
  }
}

}  // namespace athena::catalog
