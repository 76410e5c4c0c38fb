#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace athena {

struct Scored {
  std::string item_id;
  double score = 0.0;

  bool operator==(const Scored&) const = default;
};

// Descending score, ascending id on ties.
inline bool ranks_before(const Scored& a, const Scored& b) {
  return a.score != b.score ? a.score > b.score : a.item_id < b.item_id;
}

/// Top-n of (ids[i], scores[i]) over positions where keep(i) holds.
template <typename Keep>
std::vector<Scored> rank_top(std::span<const std::string> ids, std::span<const double> scores, std::size_t n,
                             Keep&& keep) {
  std::vector<Scored> all;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (keep(i)) all.push_back({ids[i], scores[i]});
  const std::size_t take = std::min(n, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(), ranks_before);
  all.resize(take);
  return all;
}

}  // namespace athena
