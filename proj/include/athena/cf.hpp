#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "athena/catalog.hpp"
#include "athena/linalg.hpp"
#include "athena/ranking.hpp"

namespace athena::cf {

/// How activity events turn into implicit scores.
struct EventWeights {
  double search = 1.0;  // search that led to a click
  double view = 1.0;
  double like = 3.0;
  double cap = 5.0;  // per (user, item) after summing
  // Only events within this many seconds of the newest event count.
  std::optional<std::int64_t> recency_window;

  double weight(catalog::EventKind kind) const;
  // Throws ConfigError unless every weight and the cap are positive.
  void validate() const;
};

/// Bijection between ids and dense positions.
struct IndexMap {
  std::vector<std::string> ids;
  std::unordered_map<std::string, std::size_t> positions;

  static IndexMap from_ids(std::vector<std::string> ids);
  std::optional<std::size_t> find(std::string_view id) const;
  std::size_t size() const { return ids.size(); }
  bool operator==(const IndexMap&) const = default;
};

struct InteractionMatrix {
  linalg::SparseMatrix matrix;  // users x items
  IndexMap users;
  IndexMap items;
  std::vector<std::vector<std::uint32_t>> seen;  // per user, the stored columns
};

/// Sums event weights per (user, item) and caps the total. Every listed
/// user and item keeps a slot even without events. Throws
/// UnknownUserError / UnknownItemError for events outside the index.
InteractionMatrix build_interaction_matrix(std::span<const catalog::ActivityEvent> events, const EventWeights& weights,
                                           std::vector<std::string> user_ids, std::vector<std::string> item_ids);

struct CfModel {
  linalg::SvdFactors factors;
  IndexMap users;
  IndexMap items;
  std::vector<std::vector<std::uint32_t>> seen;
  std::size_t k = 0;
  std::int64_t trained_at = 0;

  bool operator==(const CfModel&) const = default;
  // True when the user row had at least one observed entry at training time.
  bool has_history(std::size_t user_row) const { return !seen[user_row].empty(); }
};

// min(20, min(m, n) - 1), at least 1.
std::size_t default_rank(std::size_t rows, std::size_t cols);

/// Mean-centres the rows, factorizes with truncated SVD and keeps the means.
/// A requested rank above min(m, n) is clamped; nullopt picks default_rank.
/// Throws EmptyMatrixError when nothing was observed.
CfModel train_cf(const InteractionMatrix& m, std::optional<std::size_t> k = std::nullopt, std::int64_t trained_at = 0,
                 const linalg::SvdOptions& svd = {});

// Predicted score for every item column of `user_row`.
std::vector<double> predict_user(const CfModel& model, std::size_t user_row);

/// Items ranked by predicted score. Throws UnknownUserError.
std::vector<Scored> top_n_cf(const CfModel& model, std::string_view user_id, std::size_t n, bool exclude_seen);

}  // namespace athena::cf
