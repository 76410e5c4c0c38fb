#include "athena/bundle.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <sstream>

#include "athena/error.hpp"

namespace athena::cf {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out_.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out_.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f64s(std::span<const double> vs) {
    for (double v : vs) f64(v);
  }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void section(std::string_view tag, const Writer& body) {
    out_.append(tag);
    u64(body.out_.size());
    out_.append(body.out_);
  }
  const std::string& bytes() const { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  bool done() const { return pos_ == data_.size(); }
  std::string_view take(std::size_t n) {
    if (data_.size() - pos_ < n) throw FormatError("model bundle truncated");
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() {
    auto s = take(4);
    std::uint32_t v = 0;
    for (int b = 3; b >= 0; --b) v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(b)]);
    return v;
  }
  std::uint64_t u64() {
    auto s = take(8);
    std::uint64_t v = 0;
    for (int b = 7; b >= 0; --b) v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(b)]);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() { return std::string(take(u32())); }
  // Element count that must fit in the remaining bytes at `width` each.
  std::size_t count(std::size_t width) {
    auto n = u64();
    if (width > 0 && n > (data_.size() - pos_) / width) throw FormatError("model bundle count exceeds payload");
    return static_cast<std::size_t>(n);
  }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

void write_ids(Writer& w, const std::vector<std::string>& ids) {
  w.u64(ids.size());
  for (const auto& id : ids) w.str(id);
}

std::vector<std::string> read_ids(Reader& r) {
  std::vector<std::string> ids(r.count(4));
  for (auto& id : ids) id = r.str();
  return ids;
}

std::string model_sections(const ModelBundle& b) {
  const auto& f = b.cf.factors;
  Writer out;

  Writer fact;
  fact.u64(f.rows());
  fact.u64(f.cols());
  fact.u64(f.rank());
  fact.f64s(f.sigma);
  fact.f64s(f.u.data());
  fact.f64s(f.vt.data());
  fact.f64s(f.row_means);
  out.section("FACT", fact);

  Writer users, items;
  write_ids(users, b.cf.users.ids);
  write_ids(items, b.cf.items.ids);
  out.section("USER", users);
  out.section("ITEM", items);

  Writer seen;
  seen.u64(b.cf.seen.size());
  for (const auto& cols : b.cf.seen) {
    seen.u64(cols.size());
    for (auto c : cols) seen.u32(c);
  }
  out.section("SEEN", seen);

  const auto& t = b.tfidf;
  Writer tf;
  tf.u64(t.n_docs);
  write_ids(tf, t.terms);
  tf.u64(t.doc_freq.size());
  for (auto d : t.doc_freq) tf.u64(d);
  write_ids(tf, t.item_ids);
  tf.u64(t.vectors.size());
  for (const auto& v : t.vectors) {
    tf.u64(v.size());
    for (auto i : v.indices) tf.u32(i);
    tf.f64s(v.values);
  }
  out.section("TFID", tf);
  return out.bytes();
}

std::vector<double> read_f64s(Reader& r, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = r.f64();
  return v;
}

}  // namespace

std::string fingerprint(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
  return out;
}

std::string config_fingerprint(const TrainConfig& c) {
  std::ostringstream s;
  s.precision(17);
  s << "search=" << c.weights.search << ";view=" << c.weights.view << ";like=" << c.weights.like
    << ";cap=" << c.weights.cap << ";window=" << (c.weights.recency_window ? *c.weights.recency_window : -1)
    << ";k=" << (c.k ? static_cast<long long>(*c.k) : -1) << ";svd=" << static_cast<int>(c.svd.method) << ","
    << c.svd.dense_limit << "," << c.svd.max_iterations << "," << c.svd.tolerance << ";stop=";
  for (const auto& w : c.tfidf.stop_words) s << w << ',';
  return fingerprint(s.str());
}

ModelBundle train_bundle(std::span<const catalog::Item> items, std::span<const catalog::UserProfile> users,
                         std::span<const catalog::ActivityEvent> events, const TrainConfig& config,
                         std::int64_t trained_at, std::uint64_t version) {
  std::vector<std::string> user_ids, item_ids;
  for (const auto& u : users) user_ids.push_back(u.id);
  for (const auto& i : items) item_ids.push_back(i.id);
  auto matrix = build_interaction_matrix(events, config.weights, std::move(user_ids), std::move(item_ids));

  ModelBundle b;
  b.cf = train_cf(matrix, config.k, trained_at, config.svd);
  b.tfidf = cbf::build_tfidf(items, config.tfidf);
  b.config_fingerprint = config_fingerprint(config);
  b.trained_at = trained_at;
  b.version = version;
  return b;
}

std::string serialize_bundle(const ModelBundle& b) {
  nlohmann::ordered_json header;
  header["format_version"] = kBundleFormatVersion;
  header["k"] = b.cf.k;
  header["trained_at"] = b.trained_at;
  header["version"] = b.version;
  header["config_fingerprint"] = b.config_fingerprint;
  return header.dump() + "\n" + model_sections(b);
}

ModelBundle deserialize_bundle(std::string_view bytes) {
  const auto newline = bytes.find('\n');
  if (newline == std::string_view::npos) throw FormatError("model bundle has no header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, newline));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model bundle header: ") + e.what());
  }

  ModelBundle b;
  try {
    if (header.at("format_version").get<int>() != kBundleFormatVersion)
      throw FormatError("unsupported bundle format_version " + header.at("format_version").dump());
    b.cf.k = header.at("k").get<std::size_t>();
    b.trained_at = header.at("trained_at").get<std::int64_t>();
    b.cf.trained_at = b.trained_at;
    b.version = header.value("version", std::uint64_t{1});
    b.config_fingerprint = header.value("config_fingerprint", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model bundle header: ") + e.what());
  }

  Reader r(bytes.substr(newline + 1));
  bool fact = false, users = false, items = false, seen = false, tfid = false;
  while (!r.done()) {
    auto tag = r.take(4);
    const auto length = r.count(1);
    Reader s(r.take(length));
    if (tag == "FACT") {
      const auto m = s.u64(), n = s.u64(), k = s.u64();
      if (k != b.cf.k) throw FormatError("header rank disagrees with factor section");
      if (m * k + k * n + m + k > length / 8) throw FormatError("factor section too short");
      auto& f = b.cf.factors;
      f.sigma = read_f64s(s, k);
      f.u = linalg::DenseMatrix(m, k);
      for (auto& x : f.u.data()) x = s.f64();
      f.vt = linalg::DenseMatrix(k, n);
      for (auto& x : f.vt.data()) x = s.f64();
      f.row_means = read_f64s(s, m);
      fact = true;
    } else if (tag == "USER") {
      b.cf.users = IndexMap::from_ids(read_ids(s));
      users = true;
    } else if (tag == "ITEM") {
      b.cf.items = IndexMap::from_ids(read_ids(s));
      items = true;
    } else if (tag == "SEEN") {
      b.cf.seen.resize(s.count(8));
      for (auto& cols : b.cf.seen) {
        cols.resize(s.count(4));
        for (auto& c : cols) c = s.u32();
      }
      seen = true;
    } else if (tag == "TFID") {
      const auto n_docs = s.u64();
      auto terms = read_ids(s);
      std::vector<std::uint64_t> df(s.count(8));
      for (auto& d : df) d = s.u64();
      auto ids = read_ids(s);
      std::vector<linalg::SparseVector> vectors(s.count(8));
      for (auto& v : vectors) {
        v.indices.resize(s.count(12));
        for (auto& i : v.indices) i = s.u32();
        v.values = read_f64s(s, v.indices.size());
      }
      b.tfidf = cbf::assemble_tfidf(std::move(terms), std::move(df), n_docs, std::move(ids), std::move(vectors));
      tfid = true;
    }
  }
  if (!(fact && users && items && seen && tfid)) throw FormatError("model bundle is missing a section");
  const auto& f = b.cf.factors;
  if (f.rows() != b.cf.users.size() || f.cols() != b.cf.items.size() || b.cf.seen.size() != b.cf.users.size())
    throw FormatError("model bundle sections disagree on dimensions");
  return b;
}

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    const auto bytes = serialize_bundle(bundle);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed on " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot replace " + path.string() + ": " + ec.message());
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_bundle(bytes);
}

std::string model_fingerprint(const ModelBundle& bundle) { return fingerprint(model_sections(bundle)); }

}  // namespace athena::cf
