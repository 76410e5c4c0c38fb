#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "athena/bundle.hpp"
#include "athena/catalog.hpp"
#include "athena/hybrid.hpp"

namespace athena::eval {

struct Split {
  std::vector<catalog::ActivityEvent> train;
  std::vector<catalog::ActivityEvent> test;
};

/// Per-user temporal split: the latest ceil(test_fraction * n) like/view
/// events of each user go to test, where n is that user's like/view count.
/// Users with fewer than two events stay in train. The seed only orders
/// events sharing a timestamp. Throws FractionError unless 0 < f < 1.
Split split_events(std::span<const catalog::ActivityEvent> events, double test_fraction, std::uint64_t seed);

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;

  bool operator==(const Metrics&) const = default;
};

/// Precision = |rec & rel| / |rec|, recall = |rec & rel| / |possible & rel|,
/// F = harmonic mean; each is 0 when its denominator is 0.
Metrics precision_recall_f(std::span<const std::string> recommended, const std::set<std::string>& relevant,
                           const std::set<std::string>& possible);

enum class FilterKind { hybrid, cf_only, cbf_only };

struct FilterConfig {
  std::string name;
  FilterKind kind = FilterKind::hybrid;
  double alpha = 0.5;  // hybrid only
};

// "hybrid:0.5", "hybrid" (alpha 0.5), "cf", "cbf". Throws ConfigError.
FilterConfig parse_filter(std::string_view text);
std::vector<FilterConfig> parse_filters(std::string_view comma_separated);

enum class Averaging { macro, micro };

struct EvalOptions {
  std::size_t n = 10;
  double test_fraction = 0.2;
  std::uint64_t seed = 1;
  Averaging averaging = Averaging::macro;
  cf::TrainConfig train;
  hybrid::BlendConfig blend;  // alpha overridden per config
};

struct ReportRow {
  std::string config;
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
  std::size_t n_users_evaluated = 0;

  bool operator==(const ReportRow&) const = default;
};

struct EvalReport {
  std::vector<ReportRow> rows;  // f_measure descending, then name
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double test_fraction = 0.0;

  bool operator==(const EvalReport&) const = default;
};

/// Trains on the train split and scores each config's top-N lists against
/// every test user's held-out like/view items.
EvalReport compare_filters(const catalog::Dataset& data, std::span<const FilterConfig> configs,
                           const EvalOptions& options);

std::string to_text(const EvalReport& report);
nlohmann::ordered_json to_json(const EvalReport& report);
// Header line plus one row per config; `with_header` false appends rows only.
std::string to_csv(const EvalReport& report, bool with_header = true);

}  // namespace athena::eval
