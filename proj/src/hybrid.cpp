#include "athena/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "athena/error.hpp"

namespace athena::hybrid {

using catalog::ActivityEvent;
using catalog::EventKind;

namespace {

bool feeds_profile(EventKind k) { return k == EventKind::like || k == EventKind::view; }

// Weighted sum of TF-IDF rows; nullopt when no like/view event maps to a row.
std::optional<linalg::SparseVector> build_profile(const cbf::TfIdfModel& model, std::span<const ActivityEvent> events,
                                                  const cf::EventWeights& weights) {
  std::map<std::uint32_t, double> acc;
  bool any = false;
  for (const auto& e : events) {
    if (!feeds_profile(e.kind)) continue;
    auto row = model.row_of(e.item_id);
    if (!row) continue;
    any = true;
    const double w = weights.weight(e.kind);
    const auto& v = model.vectors[*row];
    for (std::size_t i = 0; i < v.size(); ++i) acc[v.indices[i]] += w * v.values[i];
  }
  if (!any) return std::nullopt;
  linalg::SparseVector out;
  for (const auto& [col, val] : acc) {
    out.indices.push_back(col);
    out.values.push_back(val);
  }
  return out;
}

std::string quoted_title(const catalog::Item& item) { return "\"" + item.title + "\""; }

}  // namespace

std::string_view to_string(Source s) {
  switch (s) {
    case Source::cf: return "cf";
    case Source::cbf: return "cbf";
    case Source::hybrid: return "hybrid";
    case Source::popularity: return "popularity";
  }
  return "hybrid";
}

std::string_view to_string(PreferenceMode m) { return m == PreferenceMode::filter ? "filter" : "boost"; }

void BlendConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(boost_factor >= 1.0)) throw ConfigError("boost_factor must be at least 1");
  if (n_default < 1) throw ConfigError("n_default must be at least 1");
}

void min_max_normalize(std::span<double> scores) {
  if (scores.empty()) return;
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  const double min = *lo, max = *hi;
  if (!(max > min)) {
    std::fill(scores.begin(), scores.end(), 0.5);
    return;
  }
  for (auto& s : scores) s = std::clamp((s - min) / (max - min), 0.0, 1.0);
}

ScoreMap min_max_normalize(const ScoreMap& scores) {
  std::vector<double> values;
  for (const auto& [id, s] : scores) values.push_back(s);
  min_max_normalize(values);
  ScoreMap out;
  std::size_t i = 0;
  for (const auto& [id, s] : scores) out.emplace(id, values[i++]);
  return out;
}

ScoreMap cbf_user_scores(const cbf::TfIdfModel& model, std::span<const ActivityEvent> user_events,
                         const cf::EventWeights& weights) {
  auto profile = build_profile(model, user_events, weights);
  if (!profile) return {};
  auto scores = cbf::score_all(model, *profile);
  ScoreMap out;
  for (std::size_t r = 0; r < scores.size(); ++r) out.emplace(model.item_ids[r], scores[r]);
  return out;
}

namespace {

std::vector<Recommendation> rank_by_counts(std::span<const catalog::Item> items, std::span<const std::uint64_t> counts,
                                           const catalog::PreferenceFilter& prefs, const std::vector<char>* seen,
                                           std::size_t n) {
  std::uint64_t max_count = 0;
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if ((seen && (*seen)[i]) || !prefs.passes(items[i])) continue;
    pool.push_back(i);
    max_count = std::max(max_count, counts[i]);
  }
  std::sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) {
    return counts[a] != counts[b] ? counts[a] > counts[b] : items[a].id < items[b].id;
  });
  pool.resize(std::min(pool.size(), n));
  std::vector<Recommendation> out;
  for (auto i : pool) {
    Recommendation r;
    r.item_id = items[i].id;
    r.score = max_count == 0 ? 0.0 : static_cast<double>(counts[i]) / static_cast<double>(max_count);
    r.source = Source::popularity;
    r.reason = "popular: " + std::to_string(counts[i]) + " interactions";
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::vector<Recommendation> popularity_fallback(std::span<const ActivityEvent> events,
                                                std::span<const catalog::Item> items,
                                                const catalog::PreferenceFilter& prefs, std::size_t n) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < items.size(); ++i) pos.emplace(items[i].id, i);
  std::vector<std::uint64_t> counts(items.size(), 0);
  for (const auto& e : events)
    if (auto it = pos.find(e.item_id); it != pos.end()) ++counts[it->second];
  return rank_by_counts(items, counts, prefs, nullptr, n);
}

Recommender::Recommender(std::span<const catalog::Item> items, const cf::CfModel& cf, const cbf::TfIdfModel& tfidf,
                         cf::EventWeights weights)
    : items_(items), cf_(&cf), tfidf_(&tfidf), weights_(weights) {
  cf_col_.resize(items.size());
  tfidf_row_.resize(items.size());
  item_of_col_.resize(cf.items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    item_pos_.emplace(items[i].id, i);
    cf_col_[i] = cf.items.find(items[i].id);
    if (cf_col_[i]) item_of_col_[*cf_col_[i]] = i;
    tfidf_row_[i] = tfidf.row_of(items[i].id);
  }
}

std::vector<double> Recommender::cbf_scores(std::span<const ActivityEvent> user_events) const {
  auto p = build_profile(*tfidf_, user_events, weights_);
  if (!p) return {};
  auto by_row = cbf::score_all(*tfidf_, *p);
  std::vector<double> out(items_.size(), 0.0);
  for (std::size_t i = 0; i < items_.size(); ++i)
    if (tfidf_row_[i]) out[i] = by_row[*tfidf_row_[i]];
  return out;
}

std::string Recommender::reason_for(std::size_t item, Source source,
                                    std::span<const ActivityEvent> user_events) const {
  if (source == Source::cf) return "readers with similar activity engaged with this";
  double best = 0.0;
  const ActivityEvent* best_event = nullptr;
  if (tfidf_row_[item]) {
    const auto& v = tfidf_->vectors[*tfidf_row_[item]];
    for (const auto& e : user_events) {
      if (!feeds_profile(e.kind)) continue;
      auto row = tfidf_->row_of(e.item_id);
      if (!row) continue;
      const double s = cbf::cosine_similarity(v, tfidf_->vectors[*row]);
      if (s > best || (s == best && best_event && e.kind == EventKind::like && best_event->kind != EventKind::like)) {
        best = s;
        best_event = &e;
      }
    }
  }
  if (!best_event || best <= 0.0) return "matches your reading interests";
  auto it = item_pos_.find(best_event->item_id);
  const std::string kind = best_event->kind == EventKind::like ? "liked" : "viewed";
  const std::string what = it == item_pos_.end() ? best_event->item_id : quoted_title(items_[it->second]);
  return "similar to " + kind + " item " + what;
}

std::vector<Recommendation> Recommender::recommend(const catalog::UserProfile& user,
                                                   std::span<const ActivityEvent> user_events,
                                                   std::span<const std::uint64_t> item_event_counts, std::size_t n,
                                                   const BlendConfig& blend) const {
  blend.validate();
  if (item_event_counts.size() != items_.size())
    throw ValidationError(0, "item_event_counts", "must have one count per item");
  const std::size_t count = items_.size();

  std::vector<char> seen(count, 0);
  for (const auto& e : user_events)
    if (auto it = item_pos_.find(e.item_id); it != item_pos_.end()) seen[it->second] = 1;
  const auto cf_row = cf_->users.find(user.id);
  const bool cf_known = cf_row && cf_->has_history(*cf_row);
  if (cf_known)
    for (auto c : cf_->seen[*cf_row])
      if (item_of_col_[c]) seen[*item_of_col_[c]] = 1;

  auto cbf = cbf_scores(user_events);
  if (!cf_known && cbf.empty()) return rank_by_counts(items_, item_event_counts, user.preferences, &seen, n);

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < count; ++i) {
    if (seen[i]) continue;
    if (blend.preference_mode == PreferenceMode::filter && !user.preferences.passes(items_[i])) continue;
    candidates.push_back(i);
  }
  if (candidates.empty() || n == 0) return {};

  std::vector<double> cbf_norm(candidates.size(), 0.0);
  if (!cbf.empty())
    for (std::size_t c = 0; c < candidates.size(); ++c) cbf_norm[c] = cbf[candidates[c]];
  min_max_normalize(cbf_norm);

  std::vector<double> scores(candidates.size());
  Source source = Source::cbf;
  if (cf_known) {
    const auto predicted = cf::predict_user(*cf_, *cf_row);
    std::vector<double> cf_norm(candidates.size(), std::numeric_limits<double>::quiet_NaN());
    double lowest = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (auto col = cf_col_[candidates[c]]) {
        cf_norm[c] = predicted[*col];
        lowest = std::min(lowest, cf_norm[c]);
      }
    }
    for (auto& s : cf_norm)
      if (std::isnan(s)) s = std::isfinite(lowest) ? lowest : 0.0;
    min_max_normalize(cf_norm);
    for (std::size_t c = 0; c < candidates.size(); ++c)
      scores[c] = std::clamp(blend.alpha * cf_norm[c] + (1.0 - blend.alpha) * cbf_norm[c], 0.0, 1.0);
    source = blend.alpha == 1.0 ? Source::cf : blend.alpha == 0.0 ? Source::cbf : Source::hybrid;
  } else {
    scores = cbf_norm;
  }

  if (blend.preference_mode == PreferenceMode::boost) {
    for (std::size_t c = 0; c < candidates.size(); ++c)
      if (user.preferences.passes(items_[candidates[c]])) scores[c] *= blend.boost_factor;
    min_max_normalize(scores);
  }

  std::vector<std::size_t> order(candidates.size());
  for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
  const std::size_t take = std::min(n, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return items_[candidates[a]].id < items_[candidates[b]].id;
                    });
  std::vector<Recommendation> out;
  out.reserve(take);
  for (std::size_t r = 0; r < take; ++r) {
    const std::size_t item = candidates[order[r]];
    out.push_back({items_[item].id, scores[order[r]], source, reason_for(item, source, user_events)});
  }
  return out;
}

Context::Context(const catalog::Dataset& data, const cf::CfModel& cf, const cbf::TfIdfModel& tfidf,
                 cf::EventWeights weights)
    : data_(&data), recommender_(data.items, cf, tfidf, weights) {
  for (std::size_t u = 0; u < data.users.size(); ++u) users_.emplace(data.users[u].id, u);
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < data.items.size(); ++i) pos.emplace(data.items[i].id, i);
  counts_.assign(data.items.size(), 0);
  for (const auto& e : data.events) {
    events_[e.user_id].push_back(e);
    if (auto it = pos.find(e.item_id); it != pos.end()) ++counts_[it->second];
  }
}

const catalog::UserProfile* Context::find_user(std::string_view id) const {
  auto it = users_.find(std::string(id));
  return it == users_.end() ? nullptr : &data_->users[it->second];
}

std::span<const ActivityEvent> Context::events_of(std::string_view user_id) const {
  auto it = events_.find(std::string(user_id));
  if (it == events_.end()) return {};
  return it->second;
}

std::vector<Recommendation> recommend(std::string_view user_id, std::size_t n, const Context& ctx,
                                      const BlendConfig& blend) {
  const auto* user = ctx.find_user(user_id);
  if (!user) throw UnknownUserError(std::string(user_id));
  return ctx.recommender().recommend(*user, ctx.events_of(user_id), ctx.item_event_counts(), n, blend);
}

}  // namespace athena::hybrid
