#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "athena/catalog.hpp"
#include "athena/error.hpp"

namespace athena::catalog {

namespace {

using Rng = std::mt19937_64;

constexpr std::array<std::array<std::string_view, 5>, kCommunityCount> kCommunityWords = {{
    {"banana", "musa", "cavendish", "saba", "lakatan"},
    {"cacao", "cocoa", "theobroma", "pod", "chocolate"},
    {"coconut", "copra", "cocos", "niyog", "coir"},
    {"coffee", "arabica", "robusta", "coffea", "barako"},
    {"corn", "maize", "zea", "cob", "kernel"},
    {"rice", "paddy", "oryza", "palay", "lowland"},
    {"soybean", "soya", "glycine", "legume", "tofu"},
    {"sugarcane", "cane", "saccharum", "sugar", "molasses"},
    {"tomato", "solanum", "lycopersicon", "fruitworm", "greenhouse"},
    {"technology", "announcement", "innovation", "extension", "bulletin"},
}};

constexpr std::size_t kTopicCount = 6;
constexpr std::array<std::array<std::string_view, 8>, kTopicCount> kTopicWords = {{
    {"pest", "insect", "borer", "infestation", "pesticide", "larvae", "damage", "control"},
    {"soil", "fertilizer", "nitrogen", "nutrient", "compost", "organic", "ph", "potassium"},
    {"breeding", "variety", "cultivar", "hybrid", "genetic", "trait", "selection", "seedling"},
    {"irrigation", "drought", "rainfall", "climate", "water", "flood", "moisture", "weather"},
    {"postharvest", "storage", "drying", "processing", "packaging", "shelf", "quality", "milling"},
    {"market", "price", "farmer", "income", "cooperative", "trade", "value", "supply"},
}};

constexpr std::array<std::string_view, 30> kFillerWords = {
    "study",   "results",   "research", "analysis",  "data",        "method",    "philippines", "province",
    "region",  "assessment", "evaluation", "production", "yield",   "growth",    "development", "performance",
    "effects", "report",    "field",    "trial",     "sample",      "observed",  "using",       "among",
    "based",   "different", "increase", "level",     "conducted",   "impact"};

constexpr std::int64_t kEpochStart = 1609459200;  // 2021-01-01T00:00:00Z
constexpr std::int64_t kEventSpan = 180LL * 86400;
constexpr std::size_t kCohortSize = 5;
constexpr std::size_t kReadingListSize = 40;
constexpr double kReadingListShare = 0.5;

struct SynthItem {
  std::size_t index;
  std::set<Community> communities;
  std::size_t topic;
  double popularity;
  bool cold;
};

struct SynthUser {
  std::vector<Community> homes;
  std::vector<std::size_t> favourite_topic;  // parallel to homes
  std::vector<std::size_t> reading_list;     // shared with the user's cohort
};

struct Generated {
  Dataset data;
  std::vector<std::set<Community>> homes;
};

std::size_t pick(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

double unit(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

template <std::size_t N>
std::string_view pick_word(Rng& rng, const std::array<std::string_view, N>& words) {
  return words[pick(rng, N)];
}

std::string make_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%05zu", prefix, i + 1);
  return buf;
}

// Popularity-weighted draw from `pool` (indices into items).
std::size_t draw_weighted(Rng& rng, const std::vector<std::size_t>& pool, const std::vector<SynthItem>& items) {
  double total = 0.0;
  for (auto i : pool) total += items[i].popularity;
  double r = unit(rng) * total;
  for (auto i : pool) {
    r -= items[i].popularity;
    if (r <= 0.0) return i;
  }
  return pool.back();
}

Generated generate(const SynthConfig& cfg, std::uint64_t seed) {
  if (cfg.n_users < 2) throw ConfigError("n_users must be at least 2");
  if (cfg.n_items < 10) throw ConfigError("n_items must be at least 10");
  if (cfg.n_events < cfg.n_users) throw ConfigError("n_events must be at least n_users");
  auto in_unit = [](double f) { return f >= 0.0 && f <= 1.0; };
  if (!in_unit(cfg.cold_item_fraction) || !in_unit(cfg.empty_description_fraction) ||
      !in_unit(cfg.search_fraction) || !in_unit(cfg.like_fraction) || !in_unit(cfg.preference_fraction))
    throw ConfigError("fractions must lie in [0, 1]");
  if (cfg.home_fraction < 0.9 || cfg.home_fraction > 1.0) throw ConfigError("home_fraction must lie in [0.9, 1]");

  const auto n_cold = static_cast<std::size_t>(std::llround(cfg.cold_item_fraction * cfg.n_items));
  const auto n_empty = static_cast<std::size_t>(std::llround(cfg.empty_description_fraction * cfg.n_items));
  const std::size_t n_warm = cfg.n_items - n_cold;
  if (n_warm == 0) throw ConfigError("cold_item_fraction leaves no items with events");
  if (cfg.n_events < n_warm + cfg.n_users)
    throw ConfigError("n_events must cover every warm item and every user at least once");

  Rng rng(seed);
  Generated out;
  auto& data = out.data;

  // Items.
  std::vector<SynthItem> items(cfg.n_items);
  std::vector<std::size_t> order(cfg.n_items);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_cold(cfg.n_items, false), is_empty(cfg.n_items, false);
  for (std::size_t i = 0; i < n_cold; ++i) is_cold[order[i]] = true;
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < n_empty; ++i) is_empty[order[i]] = true;

  std::lognormal_distribution<double> popularity(0.0, 1.5);
  std::discrete_distribution<int> material({20, 8, 10, 3, 2, 3, 12, 3, 6, 10, 20, 3});
  for (std::size_t i = 0; i < cfg.n_items; ++i) {
    auto& si = items[i];
    si.index = i;
    auto primary = static_cast<Community>(pick(rng, kCommunityCount));
    si.communities.insert(primary);
    if (unit(rng) < 0.15) si.communities.insert(static_cast<Community>(pick(rng, kCommunityCount)));
    si.topic = pick(rng, kTopicCount);
    si.popularity = popularity(rng);
    si.cold = is_cold[i];

    const auto& cwords = kCommunityWords[static_cast<std::size_t>(primary)];
    const auto& twords = kTopicWords[si.topic];
    std::string title(pick_word(rng, cwords));
    title[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(title[0])));
    title += ' ';
    title += pick_word(rng, twords);
    title += ' ';
    title += pick_word(rng, twords);
    title += ' ';
    title += pick_word(rng, kFillerWords);

    std::string description;
    if (!is_empty[i]) {
      std::vector<Community> comms(si.communities.begin(), si.communities.end());
      auto words = 15 + pick(rng, 21);
      for (std::size_t w = 0; w < words; ++w) {
        double r = unit(rng);
        std::string_view word;
        if (r < 0.25)
          word = pick_word(rng, kCommunityWords[static_cast<std::size_t>(comms[pick(rng, comms.size())])]);
        else if (r < 0.6)
          word = pick_word(rng, twords);
        else
          word = pick_word(rng, kFillerWords);
        if (!description.empty()) description += ' ';
        description += word;
      }
      description += '.';
    }

    Item item;
    item.id = make_id("item", i);
    item.title = std::move(title);
    item.description = std::move(description);
    item.material_type = static_cast<MaterialType>(material(rng));
    item.communities = si.communities;
    item.publication_date = Date{std::chrono::year{2000 + static_cast<int>(pick(rng, 22))},
                                 std::chrono::month{static_cast<unsigned>(1 + pick(rng, 12))},
                                 std::chrono::day{static_cast<unsigned>(1 + pick(rng, 28))}};
    data.items.push_back(std::move(item));
  }

  // Warm pools by (community, topic) and by community.
  std::vector<std::size_t> warm;
  std::array<std::vector<std::size_t>, kCommunityCount> by_community;
  std::array<std::array<std::vector<std::size_t>, kTopicCount>, kCommunityCount> by_topic;
  for (const auto& si : items) {
    if (si.cold) continue;
    warm.push_back(si.index);
    for (auto c : si.communities) {
      by_community[static_cast<std::size_t>(c)].push_back(si.index);
      by_topic[static_cast<std::size_t>(c)][si.topic].push_back(si.index);
    }
  }

  // Users. First homes cycle through a shuffled community list so every
  // community has residents once n_users >= community count.
  std::array<std::size_t, kCommunityCount> comm_cycle{};
  std::iota(comm_cycle.begin(), comm_cycle.end(), 0);
  std::shuffle(comm_cycle.begin(), comm_cycle.end(), rng);
  std::vector<SynthUser> users(cfg.n_users);
  for (std::size_t u = 0; u < cfg.n_users; ++u) {
    auto& su = users[u];
    su.homes.push_back(static_cast<Community>(comm_cycle[u % kCommunityCount]));
    if (unit(rng) < 0.4) {
      auto second = static_cast<Community>(pick(rng, kCommunityCount));
      if (second != su.homes[0]) su.homes.push_back(second);
    }
    for (std::size_t h = 0; h < su.homes.size(); ++h) su.favourite_topic.push_back(pick(rng, kTopicCount));
    out.homes.emplace_back(su.homes.begin(), su.homes.end());

    UserProfile profile;
    profile.id = make_id("user", u);
    profile.full_name = "Library User " + std::to_string(u + 1);
    profile.email = "user" + std::to_string(u + 1) + "@example.org";
    if (unit(rng) < cfg.preference_fraction) profile.preferences.communities.insert(su.homes[0]);
    auto& s = profile.schedule;
    s.enabled = unit(rng) < 0.5;
    s.frequency = unit(rng) < 0.5 ? notify::Frequency::daily : notify::Frequency::weekly;
    if (s.frequency == notify::Frequency::weekly) s.weekday = static_cast<notify::Weekday>(pick(rng, 7));
    s.minute_of_day = static_cast<int>(6 * 60 + 30 * pick(rng, 29));
    s.utc_offset_minutes = 480;
    data.users.push_back(std::move(profile));
  }

  // Cohorts: small groups sharing a first home and a reading list drawn from
  // it regardless of topic, so co-consumption carries signal text does not.
  for (std::size_t c = 0; c < kCommunityCount; ++c) {
    std::vector<std::size_t> residents;
    for (std::size_t u = 0; u < cfg.n_users; ++u)
      if (static_cast<std::size_t>(users[u].homes[0]) == c) residents.push_back(u);
    for (std::size_t first = 0; first < residents.size(); first += kCohortSize) {
      std::vector<std::size_t> list;
      for (std::size_t k = 0; k < kReadingListSize && !by_community[c].empty(); ++k) {
        auto i = draw_weighted(rng, by_community[c], items);
        if (std::find(list.begin(), list.end(), i) == list.end()) list.push_back(i);
      }
      for (std::size_t r = first; r < std::min(first + kCohortSize, residents.size()); ++r)
        users[residents[r]].reading_list = list;
    }
  }

  // Event targets per user: coverage of every warm item first, then one event
  // for every user still without one, then activity-weighted fill.
  std::vector<std::vector<std::size_t>> targets(cfg.n_users);
  std::vector<std::size_t> off_home(cfg.n_users, 0);
  auto homed_in = [&](std::size_t u, const std::set<Community>& comms) {
    return std::any_of(users[u].homes.begin(), users[u].homes.end(),
                       [&](Community c) { return comms.contains(c); });
  };
  for (auto i : warm) {
    std::vector<std::size_t> residents;
    for (std::size_t u = 0; u < cfg.n_users; ++u)
      if (homed_in(u, items[i].communities)) residents.push_back(u);
    std::size_t u = residents.empty() ? pick(rng, cfg.n_users) : residents[pick(rng, residents.size())];
    if (residents.empty()) ++off_home[u];
    targets[u].push_back(i);
  }

  std::vector<double> activity(cfg.n_users);
  for (auto& a : activity) a = 0.3 + 1.4 * unit(rng);
  std::vector<std::size_t> quota(cfg.n_users, 0);
  std::size_t assigned = 0;
  for (std::size_t u = 0; u < cfg.n_users; ++u) {
    quota[u] = std::max<std::size_t>(targets[u].size(), 1);
    assigned += quota[u];
  }
  std::discrete_distribution<std::size_t> who(activity.begin(), activity.end());
  for (; assigned < cfg.n_events; ++assigned) ++quota[who(rng)];

  auto draw_home = [&](std::size_t u) {
    const auto& su = users[u];
    std::size_t h = pick(rng, su.homes.size());
    auto c = static_cast<std::size_t>(su.homes[h]);
    if (h == 0 && !su.reading_list.empty() && unit(rng) < kReadingListShare)
      return su.reading_list[pick(rng, su.reading_list.size())];
    const auto& fav = by_topic[c][su.favourite_topic[h]];
    if (!fav.empty() && unit(rng) < 0.6) return draw_weighted(rng, fav, items);
    if (!by_community[c].empty()) return draw_weighted(rng, by_community[c], items);
    return draw_weighted(rng, warm, items);
  };

  for (std::size_t u = 0; u < cfg.n_users; ++u) {
    const std::size_t extra = quota[u] - targets[u].size();
    const auto allowed_off = static_cast<std::size_t>(std::floor((1.0 - cfg.home_fraction) * quota[u] + 1e-9));
    std::size_t n_off = allowed_off > off_home[u] ? allowed_off - off_home[u] : 0;
    n_off = std::min(n_off, extra);
    std::vector<bool> off(extra, false);
    for (std::size_t k = 0; k < n_off; ++k) off[k] = true;
    std::shuffle(off.begin(), off.end(), rng);
    for (std::size_t k = 0; k < extra; ++k) targets[u].push_back(off[k] ? draw_weighted(rng, warm, items) : draw_home(u));
  }

  // Materialise events with random times and kinds.
  for (std::size_t u = 0; u < cfg.n_users; ++u) {
    for (auto i : targets[u]) {
      ActivityEvent e;
      e.user_id = data.users[u].id;
      e.item_id = data.items[i].id;
      e.timestamp = kEpochStart + static_cast<std::int64_t>(pick(rng, static_cast<std::size_t>(kEventSpan)));
      double r = unit(rng);
      if (r < cfg.search_fraction) {
        e.kind = EventKind::search;
        const auto& title = data.items[i].title;
        auto space = title.find(' ');
        std::string q = title.substr(0, space);
        for (auto& ch : q) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        e.query = q;
      } else {
        e.kind = unit(rng) < cfg.like_fraction ? EventKind::like : EventKind::view;
      }
      data.events.push_back(std::move(e));
    }
  }
  std::stable_sort(data.events.begin(), data.events.end(),
                   [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  return out;
}

}  // namespace

Dataset generate_synthetic(const SynthConfig& config, std::uint64_t seed) { return generate(config, seed).data; }

std::vector<std::set<Community>> synthetic_home_communities(const SynthConfig& config, std::uint64_t seed) {
  return generate(config, seed).homes;
}

}  // namespace athena::catalog
