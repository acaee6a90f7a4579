#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "driftscope/core/batching.hpp"
#include "driftscope/core/types.hpp"

namespace driftscope {

inline constexpr std::size_t kDefaultAttributeCap = 15;
inline constexpr std::size_t kDefaultBins = 6;
inline constexpr double kHeavyCellShare = 0.05;

/// Inclusive segment range.
struct SegmentRange {
  SegmentIndex first = 0;
  SegmentIndex last = 0;

  bool contains(SegmentIndex t) const noexcept { return t >= first && t <= last; }
  bool operator==(const SegmentRange&) const = default;
};

struct SourceSelection {
  SourceId source_id;
  std::vector<SegmentRange> ranges;

  bool operator==(const SourceSelection&) const = default;
};

/// Analyst-chosen sources and per-source segment ranges.
struct ConceptContext {
  std::vector<SourceSelection> selections;

  /// Throws InvalidArgument on unknown/duplicate sources, inverted or
  /// overlapping ranges, or ranges off the grid.
  void validate(const DatasetSchema& schema) const;
  bool operator==(const ConceptContext&) const = default;
};

/// Batches a (validated) context selects, grouped in context order.
std::vector<const Batch*> selected_batches(const ConceptContext& context, std::span<const SourceBatches> data);
std::size_t selected_record_count(const ConceptContext& context, std::span<const SourceBatches> data);

/// Cosine similarity of the mean-centred attribute column and the
/// mean-centred label vector; 0 if either centred vector vanishes.
double attribute_correlation(const Batch& batch, std::size_t attribute);

struct RankedAttribute {
  std::size_t index = 0;
  std::string name;
  double score = 0.0;

  bool operator==(const RankedAttribute&) const = default;
};

struct AttributeRanking {
  std::vector<RankedAttribute> entries;

  bool operator==(const AttributeRanking&) const = default;
};

/// Scores each attribute by its mean per-batch correlation over the selected
/// non-empty batches; orders by |score| descending (ties by name) and keeps
/// at most `cap`. Throws EmptySelection when no selected batch has records.
AttributeRanking rank_attributes(const ConceptContext& context, std::span<const SourceBatches> data,
                                 const DatasetSchema& schema, std::size_t cap = kDefaultAttributeCap);

enum class Stroke { kNone, kLight, kDark };
std::string to_string(Stroke stroke);

struct CellStats {
  std::uint64_t pos = 0;
  std::uint64_t neg = 0;
  bool heavy = false;

  std::uint64_t count() const noexcept { return pos + neg; }
  /// (pos - neg) / (pos + neg); empty cells have no ratio.
  std::optional<double> ratio() const noexcept;
  /// Dark when heavy, light when the cell holds more than one record.
  Stroke stroke() const noexcept;

  bool operator==(const CellStats&) const = default;
};

/// One matrix axis: the data-source pseudo-attribute (one bin per source) or
/// an attribute with equal-width bins.
struct MatrixAxis {
  std::string name;
  bool is_source = false;
  std::size_t attribute_index = 0;
  std::vector<double> edges;        // bins + 1 values, attributes only
  std::vector<SourceId> categories;  // source axis only

  std::size_t bins() const noexcept { return is_source ? categories.size() : edges.size() - 1; }
  /// Out-of-range values clamp to the first/last bin. Throws for a source
  /// not in `categories`.
  std::size_t bin_of(const DataRecord& record) const;

  bool operator==(const MatrixAxis&) const = default;
};

struct Histogram {
  std::vector<std::uint64_t> pos;
  std::vector<std::uint64_t> neg;

  bool operator==(const Histogram&) const = default;
};

/// Binned correlation matrix of one context. `pairs[i * n + j]` holds the
/// bins(i) x bins(j) cells (row-major by i's bin) for i != j; diagonal
/// entries are empty and `diagonal[i]` carries that axis's histograms.
struct MatrixSpec {
  std::vector<MatrixAxis> axes;
  std::uint64_t total_records = 0;
  std::vector<std::vector<CellStats>> pairs;
  std::vector<Histogram> diagonal;

  std::size_t axis_count() const noexcept { return axes.size(); }
  const CellStats& cell(std::size_t i, std::size_t j, std::size_t bin_i, std::size_t bin_j) const;

  bool operator==(const MatrixSpec&) const = default;
};

/// Equal-width axes over the selection's min/max, source axis first.
std::vector<MatrixAxis> make_axes(const ConceptContext& context, std::span<const SourceBatches> data,
                                  const DatasetSchema& schema, const AttributeRanking& ranking, std::size_t bins);

/// Counts every record of the batches into the given axes.
MatrixSpec count_matrix(std::vector<MatrixAxis> axes, std::span<const Batch* const> batches);

MatrixSpec build_matrix(const ConceptContext& context, std::span<const SourceBatches> data, const DatasetSchema& schema,
                        const AttributeRanking& ranking, std::size_t bins = kDefaultBins);

/// (pos - neg) / (pos + neg) over every record; 0 when there are none.
double global_label_ratio(std::span<const SourceBatches> data);

/// Cell ratios shifted by the global ratio, clamped to [-1, 1]; layout
/// mirrors `MatrixSpec::pairs`.
struct RebasedMatrix {
  double baseline = 0.0;
  std::vector<std::vector<std::optional<double>>> pairs;
};

RebasedMatrix rebase_colors(const MatrixSpec& matrix, double global_ratio);

/// Segments strictly between the confirmations bracketing t; clamped to the
/// grid when t precedes the first or follows the last confirmation.
SegmentRange recommend_segment(std::span<const SegmentIndex> confirmations, SegmentIndex t,
                               SegmentIndex segment_count);

struct ConceptRecord {
  std::uint64_t id = 0;
  ConceptContext context;
  AttributeRanking ranking;
  MatrixSpec matrix;
  EpochSeconds created_at = 0;
  std::string note;

  bool operator==(const ConceptRecord&) const = default;
};

/// Stored concept on the lower-left, live context on the upper-right, both
/// counted on the stored concept's axes.
struct PairedMatrix {
  MatrixSpec lower;
  MatrixSpec upper;
};

struct CellAddress {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t bin_i = 0;
  std::size_t bin_j = 0;

  bool operator==(const CellAddress&) const = default;
};

/// The symmetric partner of a cell, used for linked highlighting.
CellAddress mirror(const CellAddress& cell) noexcept;

/// Throws SchemaMismatch when the stored concept's axes do not fit `schema`.
PairedMatrix compare(const ConceptRecord& stored, const ConceptContext& live, std::span<const SourceBatches> data,
                     const DatasetSchema& schema);

void to_json(nlohmann::json& j, const SegmentRange& r);
void from_json(const nlohmann::json& j, SegmentRange& r);
void to_json(nlohmann::json& j, const ConceptContext& c);
void from_json(const nlohmann::json& j, ConceptContext& c);
void to_json(nlohmann::json& j, const AttributeRanking& r);
void from_json(const nlohmann::json& j, AttributeRanking& r);
void to_json(nlohmann::json& j, const MatrixSpec& m);
void from_json(const nlohmann::json& j, MatrixSpec& m);
void to_json(nlohmann::json& j, const RebasedMatrix& m);
void to_json(nlohmann::json& j, const ConceptRecord& r);
void from_json(const nlohmann::json& j, ConceptRecord& r);
void to_json(nlohmann::json& j, const PairedMatrix& m);

}  // namespace driftscope
