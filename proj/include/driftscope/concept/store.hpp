#pragma once

#include <filesystem>
#include <optional>
#include <shared_mutex>
#include <vector>

#include "driftscope/concept/concept.hpp"

namespace driftscope {

/// Append-only store of identified concepts, optionally backed by a
/// JSON-lines file. Writes are serialized; reads may run concurrently.
class ConceptStore {
 public:
  /// In-memory only.
  ConceptStore() = default;
  /// Loads any records already in `path`; new records are appended to it.
  explicit ConceptStore(std::filesystem::path path);

  /// Persists a new immutable record and returns its id (strictly increasing).
  std::uint64_t identify(ConceptContext context, AttributeRanking ranking, MatrixSpec matrix, std::string note,
                         EpochSeconds created_at);

  std::optional<ConceptRecord> get(std::uint64_t id) const;
  /// Creation order.
  std::vector<ConceptRecord> list() const;
  std::size_t size() const;

 private:
  std::optional<std::filesystem::path> path_;
  mutable std::shared_mutex mutex_;
  std::vector<ConceptRecord> records_;
  std::uint64_t next_id_ = 1;
};

}  // namespace driftscope
