#include "driftscope/concept/store.hpp"

#include <fstream>
#include <mutex>

#include "driftscope/errors.hpp"

namespace driftscope {

ConceptStore::ConceptStore(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(*path_);
  if (!in) return;  // created on first write
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records_.push_back(nlohmann::json::parse(line).get<ConceptRecord>());
    } catch (const std::exception& e) {
      throw StorageFailure("concept store " + path_->string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
    next_id_ = std::max(next_id_, records_.back().id + 1);
  }
}

std::uint64_t ConceptStore::identify(ConceptContext context, AttributeRanking ranking, MatrixSpec matrix,
                                     std::string note, EpochSeconds created_at) {
  std::unique_lock lock(mutex_);
  ConceptRecord record{next_id_, std::move(context), std::move(ranking), std::move(matrix), created_at, std::move(note)};
  if (path_) {
    std::ofstream out(*path_, std::ios::app);
    if (!out) throw StorageFailure("cannot open concept store " + path_->string());
    out << nlohmann::json(record).dump() << '\n';
    out.flush();
    if (!out) throw StorageFailure("cannot append to concept store " + path_->string());
  }
  records_.push_back(std::move(record));
  return next_id_++;
}

std::optional<ConceptRecord> ConceptStore::get(std::uint64_t id) const {
  std::shared_lock lock(mutex_);
  for (const auto& r : records_) {
    if (r.id == id) return r;
  }
  return std::nullopt;
}

std::vector<ConceptRecord> ConceptStore::list() const {
  std::shared_lock lock(mutex_);
  return records_;
}

std::size_t ConceptStore::size() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

}  // namespace driftscope
