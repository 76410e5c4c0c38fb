#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "athena/schedule.hpp"

namespace athena::catalog {

enum class MaterialType {
  book,
  serial,
  thesis,
  non_print,
  vertical_file,
  inventory_project,
  technical_report,
  reprint,
  analytic,
  journal,
  article,
  poster,
};

enum class Community { banana, cacao, coconut, coffee, corn, rice, soybean, sugarcane, tomato, other };

enum class EventKind { search, view, like };

inline constexpr int kMaterialTypeCount = 12;
inline constexpr int kCommunityCount = 10;

std::string_view to_string(MaterialType m);
std::string_view to_string(Community c);
std::string_view to_string(EventKind k);
std::optional<MaterialType> parse_material_type(std::string_view s);
std::optional<Community> parse_community(std::string_view s);
std::optional<EventKind> parse_event_kind(std::string_view s);

using Date = std::chrono::year_month_day;
std::string format_date(Date d);
std::optional<Date> parse_date(std::string_view iso);

struct Item {
  std::string id;
  std::string title;
  std::string description;
  MaterialType material_type = MaterialType::book;
  std::set<Community> communities;
  Date publication_date{std::chrono::year{2000}, std::chrono::month{1}, std::chrono::day{1}};

  bool operator==(const Item&) const = default;
};

/// Empty sets mean "no restriction" on that axis.
struct PreferenceFilter {
  std::set<Community> communities;
  std::set<MaterialType> material_types;

  bool passes(const Item& item) const;
  bool operator==(const PreferenceFilter&) const = default;
};

struct UserProfile {
  std::string id;
  std::string full_name;
  std::string email;
  PreferenceFilter preferences;
  notify::DeliverySchedule schedule;

  bool operator==(const UserProfile&) const = default;
};

struct ActivityEvent {
  std::string user_id;
  std::string item_id;
  EventKind kind = EventKind::view;
  std::int64_t timestamp = 0;  // UTC seconds
  std::optional<std::string> query;

  bool operator==(const ActivityEvent&) const = default;
};

struct Dataset {
  std::vector<Item> items;
  std::vector<UserProfile> users;
  std::vector<ActivityEvent> events;  // non-decreasing timestamp

  bool operator==(const Dataset&) const = default;
};

// JSON mapping for the JSONL line formats. The *_from_json functions throw
// ValidationError tagged with `line`.
nlohmann::ordered_json to_json(const Item& item);
nlohmann::ordered_json to_json(const PreferenceFilter& prefs);
nlohmann::ordered_json to_json(const UserProfile& user);
nlohmann::ordered_json to_json(const ActivityEvent& event);
Item item_from_json(const nlohmann::json& j, std::size_t line = 0);
PreferenceFilter preferences_from_json(const nlohmann::json& j, std::size_t line = 0);
UserProfile user_from_json(const nlohmann::json& j, std::size_t line = 0);

// Result of parsing one event line: nullopt when it is a search without a
// clicked item, which ingestion drops.
std::optional<ActivityEvent> event_from_json(const nlohmann::json& j, std::size_t line = 0);

bool valid_email(std::string_view email);

std::vector<Item> load_items(const std::filesystem::path& path);
std::vector<UserProfile> load_users(const std::filesystem::path& path);

struct EventLog {
  std::vector<ActivityEvent> events;  // sorted by timestamp (stable)
  std::size_t dropped_searches = 0;   // searches with no clicked item
};
EventLog load_event_log(const std::filesystem::path& path);
std::vector<ActivityEvent> load_events(const std::filesystem::path& path);

void save_items(const std::filesystem::path& path, const std::vector<Item>& items);
void save_users(const std::filesystem::path& path, const std::vector<UserProfile>& users);
void save_events(const std::filesystem::path& path, const std::vector<ActivityEvent>& events);

inline constexpr std::string_view kItemsFile = "items.jsonl";
inline constexpr std::string_view kUsersFile = "users.jsonl";
inline constexpr std::string_view kEventsFile = "events.jsonl";

/// Loads items.jsonl, users.jsonl and events.jsonl from `dir` and checks
/// cross-references (every event names a known user and item).
Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const std::filesystem::path& dir, const Dataset& data);

// Throws ValidationError on the first broken Dataset invariant.
void validate(const Dataset& data);

struct SynthConfig {
  std::size_t n_users = 200;
  std::size_t n_items = 500;
  std::size_t n_events = 6000;
  double cold_item_fraction = 0.2;
  double empty_description_fraction = 0.2;
  double home_fraction = 0.95;    // share of like/view events on home communities
  double search_fraction = 0.1;   // share of events that are search clicks
  double like_fraction = 0.3;     // share of non-search events that are likes
  double preference_fraction = 0.0;  // users whose filter is set to a home community
};

/// Deterministic synthetic library for a given (config, seed).
///
/// Each user gets one or two home communities and, within each home
/// community, a favoured topic; items get a community, a topic and a latent
/// popularity. Exactly round(cold_item_fraction * n_items) items receive no
/// events and round(empty_description_fraction * n_items) have an empty
/// description. Throws ConfigError on degenerate sizes.
Dataset generate_synthetic(const SynthConfig& config, std::uint64_t seed);

// Home communities chosen for each synthetic user, parallel to Dataset::users.
// Recomputed from (config, seed) so tests can audit planted structure.
std::vector<std::set<Community>> synthetic_home_communities(const SynthConfig& config, std::uint64_t seed);

}  // namespace athena::catalog
