#include "athena/cf.hpp"

#include <algorithm>
#include <map>

#include "athena/error.hpp"

namespace athena::cf {

double EventWeights::weight(catalog::EventKind kind) const {
  switch (kind) {
    case catalog::EventKind::search: return search;
    case catalog::EventKind::view: return view;
    case catalog::EventKind::like: return like;
  }
  return 0.0;
}

void EventWeights::validate() const {
  if (!(search > 0.0) || !(view > 0.0) || !(like > 0.0)) throw ConfigError("event weights must be positive");
  if (!(cap > 0.0)) throw ConfigError("score cap must be positive");
  if (recency_window && *recency_window <= 0) throw ConfigError("recency window must be positive");
}

IndexMap IndexMap::from_ids(std::vector<std::string> ids) {
  IndexMap m;
  m.ids = std::move(ids);
  for (std::size_t i = 0; i < m.ids.size(); ++i)
    if (!m.positions.emplace(m.ids[i], i).second) throw ValidationError(0, "id", "duplicate id '" + m.ids[i] + "'");
  return m;
}

std::optional<std::size_t> IndexMap::find(std::string_view id) const {
  auto it = positions.find(std::string(id));
  if (it == positions.end()) return std::nullopt;
  return it->second;
}

InteractionMatrix build_interaction_matrix(std::span<const catalog::ActivityEvent> events, const EventWeights& weights,
                                           std::vector<std::string> user_ids, std::vector<std::string> item_ids) {
  weights.validate();
  InteractionMatrix out;
  out.users = IndexMap::from_ids(std::move(user_ids));
  out.items = IndexMap::from_ids(std::move(item_ids));

  std::int64_t cutoff = 0;
  if (weights.recency_window && !events.empty()) {
    std::int64_t newest = 0;
    for (const auto& e : events) newest = std::max(newest, e.timestamp);
    cutoff = newest - *weights.recency_window;
  }

  std::map<std::pair<std::size_t, std::size_t>, double> sums;
  for (const auto& e : events) {
    auto u = out.users.find(e.user_id);
    if (!u) throw UnknownUserError(e.user_id);
    auto i = out.items.find(e.item_id);
    if (!i) throw UnknownItemError(e.item_id);
    if (e.timestamp < cutoff) continue;
    sums[{*u, *i}] += weights.weight(e.kind);
  }
  std::vector<linalg::Triplet> triplets;
  triplets.reserve(sums.size());
  for (const auto& [key, value] : sums) triplets.push_back({key.first, key.second, std::min(value, weights.cap)});
  out.matrix = linalg::SparseMatrix::from_triplets(out.users.size(), out.items.size(), std::move(triplets));

  out.seen.resize(out.users.size());
  for (std::size_t u = 0; u < out.users.size(); ++u) {
    auto cols = out.matrix.row_indices(u);
    out.seen[u].assign(cols.begin(), cols.end());
  }
  return out;
}

std::size_t default_rank(std::size_t rows, std::size_t cols) {
  const std::size_t smallest = std::min(rows, cols);
  return std::max<std::size_t>(1, std::min<std::size_t>(20, smallest > 0 ? smallest - 1 : 0));
}

CfModel train_cf(const InteractionMatrix& m, std::optional<std::size_t> k, std::int64_t trained_at,
                 const linalg::SvdOptions& svd) {
  if (m.matrix.nnz() == 0) throw EmptyMatrixError("interaction matrix has no observed entries");
  const std::size_t smallest = std::min(m.matrix.rows(), m.matrix.cols());
  std::size_t rank = k ? *k : default_rank(m.matrix.rows(), m.matrix.cols());
  if (rank == 0) throw RankError("rank must be at least 1");
  rank = std::min(rank, smallest);

  auto centered = linalg::mean_center_rows(m.matrix);
  CfModel model;
  model.factors = linalg::truncated_svd(centered.centered, rank, svd);
  model.factors.row_means = std::move(centered.row_means);
  model.users = m.users;
  model.items = m.items;
  model.seen = m.seen;
  model.k = rank;
  model.trained_at = trained_at;
  return model;
}

std::vector<double> predict_user(const CfModel& model, std::size_t user_row) {
  return linalg::predict_row(model.factors, user_row);
}

std::vector<Scored> top_n_cf(const CfModel& model, std::string_view user_id, std::size_t n, bool exclude_seen) {
  auto row = model.users.find(user_id);
  if (!row) throw UnknownUserError(std::string(user_id));
  auto scores = predict_user(model, *row);
  std::vector<bool> skip(scores.size(), false);
  if (exclude_seen)
    for (auto c : model.seen[*row]) skip[c] = true;
  return rank_top(model.items.ids, scores, n, [&](std::size_t i) { return !skip[i]; });
}

}  // namespace athena::cf
