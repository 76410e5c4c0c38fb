#include "athena/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>
#include <unordered_map>

#include "athena/error.hpp"

namespace athena::eval {

using catalog::ActivityEvent;
using catalog::EventKind;

namespace {

bool held_out_kind(EventKind k) { return k == EventKind::like || k == EventKind::view; }

}  // namespace

Split split_events(std::span<const ActivityEvent> events, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw FractionError("test fraction must lie strictly in (0, 1)");

  std::mt19937_64 rng(seed);
  std::vector<std::uint64_t> tie(events.size());
  for (auto& t : tie) t = rng();

  std::map<std::string, std::vector<std::size_t>> by_user;
  for (std::size_t i = 0; i < events.size(); ++i) by_user[events[i].user_id].push_back(i);

  std::vector<char> to_test(events.size(), 0);
  for (auto& [user, idx] : by_user) {
    if (idx.size() < 2) continue;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (events[a].timestamp != events[b].timestamp) return events[a].timestamp < events[b].timestamp;
      return tie[a] != tie[b] ? tie[a] < tie[b] : a < b;
    });
    std::size_t eligible = 0;
    for (auto i : idx) eligible += held_out_kind(events[i].kind) ? 1 : 0;
    auto quota = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(eligible) - 1e-12));
    for (auto it = idx.rbegin(); it != idx.rend() && quota > 0; ++it) {
      if (!held_out_kind(events[*it].kind)) continue;
      to_test[*it] = 1;
      --quota;
    }
  }

  // Output keeps timestamp order with the same tie-break.
  std::vector<std::size_t> order(events.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (events[a].timestamp != events[b].timestamp) return events[a].timestamp < events[b].timestamp;
    return tie[a] != tie[b] ? tie[a] < tie[b] : a < b;
  });
  Split split;
  for (auto i : order) (to_test[i] ? split.test : split.train).push_back(events[i]);
  return split;
}

Metrics precision_recall_f(std::span<const std::string> recommended, const std::set<std::string>& relevant,
                           const std::set<std::string>& possible) {
  std::size_t hits = 0;
  for (const auto& r : recommended) hits += relevant.contains(r) ? 1 : 0;
  std::size_t reachable = 0;
  for (const auto& p : possible) reachable += relevant.contains(p) ? 1 : 0;

  Metrics m;
  if (!recommended.empty()) m.precision = static_cast<double>(hits) / static_cast<double>(recommended.size());
  if (reachable > 0) m.recall = static_cast<double>(hits) / static_cast<double>(reachable);
  if (m.precision + m.recall > 0.0) m.f_measure = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

FilterConfig parse_filter(std::string_view text) {
  FilterConfig c;
  c.name = std::string(text);
  if (text == "cf") {
    c.kind = FilterKind::cf_only;
  } else if (text == "cbf") {
    c.kind = FilterKind::cbf_only;
  } else if (text == "hybrid") {
    c.name = "hybrid:0.5";
  } else if (text.starts_with("hybrid:")) {
    const std::string value(text.substr(7));
    char* end = nullptr;
    c.alpha = std::strtod(value.c_str(), &end);
    if (value.empty() || *end != '\0' || !(c.alpha >= 0.0 && c.alpha <= 1.0))
      throw ConfigError("bad hybrid alpha in '" + std::string(text) + "'");
  } else {
    throw ConfigError("unknown filter config '" + std::string(text) + "' (expected hybrid:A, cf or cbf)");
  }
  return c;
}

std::vector<FilterConfig> parse_filters(std::string_view comma_separated) {
  std::vector<FilterConfig> out;
  std::size_t start = 0;
  while (start <= comma_separated.size()) {
    auto comma = comma_separated.find(',', start);
    auto part = comma_separated.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    if (!part.empty()) out.push_back(parse_filter(part));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw ConfigError("no filter configs given");
  return out;
}

namespace {

struct UserOutcome {
  std::size_t hits = 0;
  std::size_t recommended = 0;
  std::size_t relevant = 0;
  Metrics metrics;
};

std::vector<std::string> top_ids(const std::vector<Scored>& ranked) {
  std::vector<std::string> ids;
  for (const auto& s : ranked) ids.push_back(s.item_id);
  return ids;
}

}  // namespace

EvalReport compare_filters(const catalog::Dataset& data, std::span<const FilterConfig> configs,
                           const EvalOptions& options) {
  const auto split = split_events(data.events, options.test_fraction, options.seed);

  catalog::Dataset train_data;
  train_data.items = data.items;
  train_data.users = data.users;
  train_data.events = split.train;

  std::int64_t trained_at = 0;
  for (const auto& e : split.train) trained_at = std::max(trained_at, e.timestamp);
  cf::ModelBundle bundle;
  try {
    bundle = cf::train_bundle(data.items, data.users, split.train, options.train, trained_at);
  } catch (const Error& e) {
    std::string names;
    for (const auto& c : configs) names += (names.empty() ? "" : ",") + c.name;
    throw Error("training for configs [" + names + "] failed: " + e.what());
  }
  const hybrid::Context ctx(train_data, bundle.cf, bundle.tfidf, options.train.weights);

  // Held-out relevant items per test user, in user order.
  std::map<std::string, std::set<std::string>> relevant;
  for (const auto& e : split.test) relevant[e.user_id].insert(e.item_id);
  std::vector<const catalog::UserProfile*> users;
  for (const auto& u : data.users)
    if (relevant.contains(u.id)) users.push_back(&u);

  EvalReport report;
  report.n = options.n;
  report.seed = options.seed;
  report.test_fraction = options.test_fraction;

  for (const auto& config : configs) {
    std::vector<UserOutcome> outcomes(users.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (long ui = 0; ui < static_cast<long>(users.size()); ++ui) {
      const auto& user = *users[static_cast<std::size_t>(ui)];
      const auto user_events = ctx.events_of(user.id);
      std::vector<std::string> recs;
      switch (config.kind) {
        case FilterKind::hybrid: {
          auto blend = options.blend;
          blend.alpha = config.alpha;
          for (auto& r : ctx.recommender().recommend(user, user_events, ctx.item_event_counts(), options.n, blend))
            recs.push_back(r.item_id);
          break;
        }
        case FilterKind::cf_only:
          recs = top_ids(cf::top_n_cf(bundle.cf, user.id, options.n, true));
          break;
        case FilterKind::cbf_only: {
          auto scores = ctx.recommender().cbf_scores(user_events);
          const auto items = ctx.recommender().items();
          if (scores.empty()) scores.assign(items.size(), 0.0);
          std::set<std::string> seen;
          for (const auto& e : user_events) seen.insert(e.item_id);
          std::vector<std::string> ids;
          for (const auto& it : items) ids.push_back(it.id);
          recs = top_ids(rank_top(ids, scores, options.n, [&](std::size_t i) { return !seen.contains(ids[i]); }));
          break;
        }
      }
      const auto& rel = relevant.at(user.id);
      auto& out = outcomes[static_cast<std::size_t>(ui)];
      out.metrics = precision_recall_f(recs, rel, rel);
      out.recommended = recs.size();
      out.relevant = rel.size();
      for (const auto& r : recs) out.hits += rel.contains(r) ? 1 : 0;
    }

    ReportRow row;
    row.config = config.name;
    row.n_users_evaluated = users.size();
    if (!users.empty()) {
      if (options.averaging == Averaging::macro) {
        for (const auto& o : outcomes) {
          row.precision += o.metrics.precision;
          row.recall += o.metrics.recall;
          row.f_measure += o.metrics.f_measure;
        }
        const auto count = static_cast<double>(users.size());
        row.precision /= count;
        row.recall /= count;
        row.f_measure /= count;
      } else {
        std::size_t hits = 0, recommended = 0, rel = 0;
        for (const auto& o : outcomes) {
          hits += o.hits;
          recommended += o.recommended;
          rel += o.relevant;
        }
        if (recommended) row.precision = static_cast<double>(hits) / static_cast<double>(recommended);
        if (rel) row.recall = static_cast<double>(hits) / static_cast<double>(rel);
        if (row.precision + row.recall > 0)
          row.f_measure = 2 * row.precision * row.recall / (row.precision + row.recall);
      }
    }
    report.rows.push_back(std::move(row));
  }
  std::sort(report.rows.begin(), report.rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return a.f_measure != b.f_measure ? a.f_measure > b.f_measure : a.config < b.config;
  });
  return report;
}

std::string to_text(const EvalReport& report) {
  std::size_t width = 6;
  for (const auto& r : report.rows) width = std::max(width, r.config.size());
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "seed %llu  N=%zu  test_fraction=%.2f\n",
                static_cast<unsigned long long>(report.seed), report.n, report.test_fraction);
  out << buf;
  std::snprintf(buf, sizeof buf, "%-*s  %9s  %9s  %9s  %6s\n", static_cast<int>(width), "config", "precision",
                "recall", "f_measure", "users");
  out << buf;
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %9.4f  %9.4f  %9.4f  %6zu\n", static_cast<int>(width), r.config.c_str(),
                  r.precision, r.recall, r.f_measure, r.n_users_evaluated);
    out << buf;
  }
  return out.str();
}

nlohmann::ordered_json to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["n"] = report.n;
  j["seed"] = report.seed;
  j["test_fraction"] = report.test_fraction;
  auto& rows = j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"config", r.config},
                    {"precision", r.precision},
                    {"recall", r.recall},
                    {"f_measure", r.f_measure},
                    {"n_users_evaluated", r.n_users_evaluated}});
  }
  return j;
}

std::string to_csv(const EvalReport& report, bool with_header) {
  std::ostringstream out;
  out.precision(17);
  if (with_header) out << "seed,config,n,precision,recall,f_measure,n_users_evaluated\n";
  for (const auto& r : report.rows)
    out << report.seed << ',' << r.config << ',' << report.n << ',' << r.precision << ',' << r.recall << ','
        << r.f_measure << ',' << r.n_users_evaluated << '\n';
  return out.str();
}

}  // namespace athena::eval
