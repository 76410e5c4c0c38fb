#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "athena/catalog.hpp"
#include "athena/cbf.hpp"
#include "athena/cf.hpp"

namespace athena::cf {

inline constexpr int kBundleFormatVersion = 1;

struct TrainConfig {
  EventWeights weights;
  std::optional<std::size_t> k;  // nullopt: default_rank
  cbf::TfIdfConfig tfidf;
  linalg::SvdOptions svd;
};

// Stable hex digest of every knob that changes training output.
std::string config_fingerprint(const TrainConfig& config);

/// Everything serving needs from one training run.
struct ModelBundle {
  CfModel cf;
  cbf::TfIdfModel tfidf;
  std::string config_fingerprint;
  std::int64_t trained_at = 0;
  std::uint64_t version = 1;

  bool operator==(const ModelBundle&) const = default;
};

/// Trains both models on `events` over the full item and user lists.
ModelBundle train_bundle(std::span<const catalog::Item> items, std::span<const catalog::UserProfile> users,
                         std::span<const catalog::ActivityEvent> events, const TrainConfig& config,
                         std::int64_t trained_at, std::uint64_t version = 1);

/// Bundle file layout:
///
///   {"format_version":1,"k":K,"trained_at":T,"version":V,"config_fingerprint":"..."}\n
///   section*   where section = tag[4] | u64 byte length | payload
///
/// Sections FACT (m, n, k, sigma, U, Vt, row means), USER and ITEM (id lists),
/// SEEN (per-user columns) and TFID (terms, document frequencies, item ids,
/// sparse vectors). Integers and IEEE-754 doubles are little-endian; strings
/// are u32 length + bytes. Unknown sections are skipped on read.
std::string serialize_bundle(const ModelBundle& bundle);
ModelBundle deserialize_bundle(std::string_view bytes);  // throws FormatError

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle);
ModelBundle load_bundle(const std::filesystem::path& path);

// 64-bit FNV-1a as 16 hex digits.
std::string fingerprint(std::string_view bytes);

// Digest of the model sections only (ignores trained_at and version).
std::string model_fingerprint(const ModelBundle& bundle);

}  // namespace athena::cf
