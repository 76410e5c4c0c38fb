#include "athena/cbf.hpp"

#include <cmath>
#include <map>

#include "athena/error.hpp"
#include "athena/kernels.hpp"

namespace athena::cbf {

namespace {

bool is_alnum(unsigned char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

std::map<std::string, std::uint64_t> term_counts(std::string_view text, const TfIdfConfig& config) {
  std::map<std::string, std::uint64_t> counts;
  for (auto& t : tokenize(text))
    if (!config.stop_words.contains(t)) ++counts[t];
  return counts;
}

double idf(std::uint64_t n_docs, std::uint64_t df) {
  return std::log(static_cast<double>(n_docs) / static_cast<double>(df));
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    bool digits_only = std::all_of(current.begin(), current.end(), [](char c) { return c >= '0' && c <= '9'; });
    if (current.size() >= 2 && !digits_only) out.push_back(current);
    current.clear();
  };
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (is_alnum(c)) {
      current.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
    } else if (!current.empty()) {
      flush();
    }
  }
  if (!current.empty()) flush();
  return out;
}

std::optional<std::size_t> TfIdfModel::row_of(std::string_view item_id) const {
  auto it = item_rows.find(std::string(item_id));
  if (it == item_rows.end()) return std::nullopt;
  return it->second;
}

double TfIdfModel::weight(std::size_t row, std::string_view term) const {
  auto it = vocabulary.find(std::string(term));
  if (it == vocabulary.end() || row >= vectors.size()) return 0.0;
  const auto& v = vectors[row];
  auto pos = std::lower_bound(v.indices.begin(), v.indices.end(), it->second);
  if (pos == v.indices.end() || *pos != it->second) return 0.0;
  return v.values[static_cast<std::size_t>(pos - v.indices.begin())];
}

TfIdfModel build_tfidf(std::span<const catalog::Item> items, const TfIdfConfig& config) {
  if (items.empty()) throw EmptyCorpusError("cannot build TF-IDF over an empty catalog");

  std::vector<std::map<std::string, std::uint64_t>> docs;
  docs.reserve(items.size());
  std::map<std::string, std::uint64_t> df;
  for (const auto& item : items) {
    docs.push_back(term_counts(item.title + " " + item.description, config));
    for (const auto& [term, count] : docs.back()) ++df[term];
  }

  std::vector<std::string> terms;
  std::vector<std::uint64_t> doc_freq;
  std::unordered_map<std::string, std::uint32_t> column;
  for (const auto& [term, d] : df) {
    column.emplace(term, static_cast<std::uint32_t>(terms.size()));
    terms.push_back(term);
    doc_freq.push_back(d);
  }

  const auto n = static_cast<std::uint64_t>(items.size());
  std::vector<linalg::SparseVector> vectors(items.size());
  std::vector<std::string> ids;
  for (std::size_t row = 0; row < items.size(); ++row) {
    ids.push_back(items[row].id);
    for (const auto& [term, count] : docs[row]) {
      const auto col = column.at(term);
      const double w = static_cast<double>(count) * idf(n, doc_freq[col]);
      if (w == 0.0) continue;
      vectors[row].indices.push_back(col);
      vectors[row].values.push_back(w);
    }
  }
  return assemble_tfidf(std::move(terms), std::move(doc_freq), n, std::move(ids), std::move(vectors));
}

TfIdfModel assemble_tfidf(std::vector<std::string> terms, std::vector<std::uint64_t> doc_freq, std::uint64_t n_docs,
                          std::vector<std::string> item_ids, std::vector<linalg::SparseVector> vectors) {
  TfIdfModel m;
  m.terms = std::move(terms);
  m.doc_freq = std::move(doc_freq);
  m.n_docs = n_docs;
  m.item_ids = std::move(item_ids);
  m.vectors = std::move(vectors);
  for (std::size_t c = 0; c < m.terms.size(); ++c) m.vocabulary.emplace(m.terms[c], static_cast<std::uint32_t>(c));
  for (std::size_t r = 0; r < m.item_ids.size(); ++r) m.item_rows.emplace(m.item_ids[r], r);
  m.sq_norms.reserve(m.vectors.size());
  for (const auto& v : m.vectors) m.sq_norms.push_back(linalg::squared_norm(v));
  return m;
}

double cosine_similarity(const linalg::SparseVector& a, const linalg::SparseVector& b) {
  return linalg::cosine_from_parts(linalg::dot(a, b), linalg::squared_norm(a), linalg::squared_norm(b));
}

std::vector<double> score_all(const TfIdfModel& model, const linalg::SparseVector& query) {
  std::vector<double> scores(model.size());
  kernels::cosine_scan(query, linalg::squared_norm(query), model.vectors, model.sq_norms, scores);
  return scores;
}

std::vector<Scored> related_items(const TfIdfModel& model, std::string_view item_id, std::size_t n) {
  auto row = model.row_of(item_id);
  if (!row) throw UnknownItemError(std::string(item_id));
  auto scores = score_all(model, model.vectors[*row]);
  return rank_top(model.item_ids, scores, n, [&](std::size_t i) { return i != *row; });
}

linalg::SparseVector query_vector(const TfIdfModel& model, std::string_view text) {
  std::map<std::uint32_t, std::uint64_t> counts;
  for (const auto& t : tokenize(text)) {
    auto it = model.vocabulary.find(t);
    if (it != model.vocabulary.end()) ++counts[it->second];
  }
  linalg::SparseVector v;
  for (const auto& [col, count] : counts) {
    const double w = static_cast<double>(count) * idf(model.n_docs, model.doc_freq[col]);
    if (w == 0.0) continue;
    v.indices.push_back(col);
    v.values.push_back(w);
  }
  return v;
}

std::vector<Scored> search(const TfIdfModel& model, std::string_view text, std::size_t limit) {
  auto q = query_vector(model, text);
  if (q.empty()) return {};
  auto scores = score_all(model, q);
  return rank_top(model.item_ids, scores, limit, [&](std::size_t i) { return scores[i] > 0.0; });
}

}  // namespace athena::cbf
