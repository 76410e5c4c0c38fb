#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "athena/catalog.hpp"
#include "athena/linalg.hpp"
#include "athena/ranking.hpp"

namespace athena::cbf {

/// Lowercases, splits on every non-alphanumeric ASCII byte, and drops tokens
/// shorter than two characters or made only of digits.
std::vector<std::string> tokenize(std::string_view text);

struct TfIdfConfig {
  std::set<std::string> stop_words;  // removed after tokenizing; empty by default
};

/// TF-IDF weights over item title + description.
///
/// weight(term, item) = count(term in item) * ln(n_docs / doc_freq(term)).
/// Zero weights are not stored, so a term found in every document has an
/// empty column.
struct TfIdfModel {
  std::vector<std::string> terms;  // column -> term, sorted
  std::unordered_map<std::string, std::uint32_t> vocabulary;
  std::vector<std::uint64_t> doc_freq;  // per column, 1 <= df <= n_docs
  std::uint64_t n_docs = 0;
  std::vector<std::string> item_ids;  // row -> item id, catalog order
  std::unordered_map<std::string, std::size_t> item_rows;
  std::vector<linalg::SparseVector> vectors;  // per row
  std::vector<double> sq_norms;               // per row

  std::size_t size() const { return item_ids.size(); }
  std::optional<std::size_t> row_of(std::string_view item_id) const;
  double weight(std::size_t row, std::string_view term) const;

  bool operator==(const TfIdfModel&) const = default;
};

// Throws EmptyCorpusError on an empty item list.
TfIdfModel build_tfidf(std::span<const catalog::Item> items, const TfIdfConfig& config = {});

// Rebuilds lookup tables and norms from the persisted fields.
TfIdfModel assemble_tfidf(std::vector<std::string> terms, std::vector<std::uint64_t> doc_freq, std::uint64_t n_docs,
                          std::vector<std::string> item_ids, std::vector<linalg::SparseVector> vectors);

double cosine_similarity(const linalg::SparseVector& a, const linalg::SparseVector& b);

// Cosine of `query` against every row.
std::vector<double> score_all(const TfIdfModel& model, const linalg::SparseVector& query);

/// Top-n items most similar to `item_id`, excluding itself. Throws
/// UnknownItemError.
std::vector<Scored> related_items(const TfIdfModel& model, std::string_view item_id, std::size_t n);

// Query text as a pseudo-document; terms outside the vocabulary are ignored.
linalg::SparseVector query_vector(const TfIdfModel& model, std::string_view text);

// Items with positive similarity to the query text, best first.
std::vector<Scored> search(const TfIdfModel& model, std::string_view text, std::size_t limit);

}  // namespace athena::cbf
