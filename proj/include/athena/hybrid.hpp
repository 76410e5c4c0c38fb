#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "athena/catalog.hpp"
#include "athena/cbf.hpp"
#include "athena/cf.hpp"

namespace athena::hybrid {

enum class Source { cf, cbf, hybrid, popularity };
enum class PreferenceMode { filter, boost };

std::string_view to_string(Source s);
std::string_view to_string(PreferenceMode m);

struct Recommendation {
  std::string item_id;
  double score = 0.0;  // in [0, 1]
  Source source = Source::hybrid;
  std::string reason;

  bool operator==(const Recommendation&) const = default;
};

struct BlendConfig {
  double alpha = 0.5;  // CF weight; CBF gets 1 - alpha
  PreferenceMode preference_mode = PreferenceMode::filter;
  double boost_factor = 1.5;
  std::size_t n_default = 10;

  // Throws ConfigError.
  void validate() const;
};

using ScoreMap = std::map<std::string, double>;

/// (s - min) / (max - min); a flat input maps to 0.5.
ScoreMap min_max_normalize(const ScoreMap& scores);
void min_max_normalize(std::span<double> scores);

/// Cosine between each item and the user's profile: the weighted sum of the
/// TF-IDF vectors of liked and viewed items. Empty when the user has no like
/// or view events.
ScoreMap cbf_user_scores(const cbf::TfIdfModel& model, std::span<const catalog::ActivityEvent> user_events,
                         const cf::EventWeights& weights = {});

/// Items by total event count (all kinds), preference-filtered, ties by id.
std::vector<Recommendation> popularity_fallback(std::span<const catalog::ActivityEvent> events,
                                                std::span<const catalog::Item> items,
                                                const catalog::PreferenceFilter& prefs, std::size_t n);

/// Blends CF and CBF for one user against fixed models.
///
/// Items, models and weights are captured at construction; all methods are
/// const and safe to call concurrently.
class Recommender {
 public:
  Recommender(std::span<const catalog::Item> items, const cf::CfModel& cf, const cbf::TfIdfModel& tfidf,
              cf::EventWeights weights = {});

  /// `user_events` are this user's events; `item_event_counts` is parallel to
  /// the item list and drives the popularity route.
  std::vector<Recommendation> recommend(const catalog::UserProfile& user,
                                        std::span<const catalog::ActivityEvent> user_events,
                                        std::span<const std::uint64_t> item_event_counts, std::size_t n,
                                        const BlendConfig& blend) const;

  std::span<const catalog::Item> items() const { return items_; }

  // Dense per-item CBF scores for a user's events; empty without a profile.
  std::vector<double> cbf_scores(std::span<const catalog::ActivityEvent> user_events) const;

 private:
  std::string reason_for(std::size_t item, Source source, std::span<const catalog::ActivityEvent> user_events) const;

  std::span<const catalog::Item> items_;
  const cf::CfModel* cf_;
  const cbf::TfIdfModel* tfidf_;
  cf::EventWeights weights_;
  std::unordered_map<std::string, std::size_t> item_pos_;
  std::vector<std::optional<std::size_t>> cf_col_;     // item -> CF column
  std::vector<std::optional<std::size_t>> tfidf_row_;  // item -> TF-IDF row
  std::vector<std::optional<std::size_t>> item_of_col_;
};

/// A dataset snapshot bound to trained models, for id-based lookups.
class Context {
 public:
  Context(const catalog::Dataset& data, const cf::CfModel& cf, const cbf::TfIdfModel& tfidf,
          cf::EventWeights weights = {});

  const catalog::UserProfile* find_user(std::string_view id) const;
  std::span<const catalog::ActivityEvent> events_of(std::string_view user_id) const;
  std::span<const std::uint64_t> item_event_counts() const { return counts_; }
  const Recommender& recommender() const { return recommender_; }

 private:
  const catalog::Dataset* data_;
  Recommender recommender_;
  std::unordered_map<std::string, std::size_t> users_;
  std::unordered_map<std::string, std::vector<catalog::ActivityEvent>> events_;
  std::vector<std::uint64_t> counts_;
};

/// Final list for a registered user. Throws UnknownUserError.
std::vector<Recommendation> recommend(std::string_view user_id, std::size_t n, const Context& ctx,
                                      const BlendConfig& blend);

}  // namespace athena::hybrid
