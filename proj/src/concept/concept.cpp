#include "driftscope/concept/concept.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "driftscope/errors.hpp"

namespace driftscope {
namespace {

std::vector<SegmentRange> sorted_ranges(std::vector<SegmentRange> ranges) {
  std::sort(ranges.begin(), ranges.end(), [](const SegmentRange& a, const SegmentRange& b) { return a.first < b.first; });
  return ranges;
}

const SourceBatches* find_source(std::span<const SourceBatches> data, const SourceId& id) {
  for (const auto& sb : data) {
    if (sb.source_id == id) return &sb;
  }
  return nullptr;
}

// Copies `old` into a matrix whose source axis gained trailing categories.
MatrixSpec widen_source_axis(const MatrixSpec& old, const std::vector<MatrixAxis>& axes) {
  MatrixSpec out;
  out.axes = axes;
  out.total_records = old.total_records;
  const std::size_t n = axes.size();
  out.pairs.resize(n * n);
  out.diagonal.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t bi = axes[i].bins();
    const std::size_t old_bi = old.axes[i].bins();
    out.diagonal[i].pos.assign(bi, 0);
    out.diagonal[i].neg.assign(bi, 0);
    std::copy(old.diagonal[i].pos.begin(), old.diagonal[i].pos.end(), out.diagonal[i].pos.begin());
    std::copy(old.diagonal[i].neg.begin(), old.diagonal[i].neg.end(), out.diagonal[i].neg.begin());
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const std::size_t bj = axes[j].bins();
      const std::size_t old_bj = old.axes[j].bins();
      auto& cells = out.pairs[i * n + j];
      cells.assign(bi * bj, CellStats{});
      for (std::size_t a = 0; a < old_bi; ++a) {
        for (std::size_t b = 0; b < old_bj; ++b) cells[a * bj + b] = old.pairs[i * n + j][a * old_bj + b];
      }
    }
  }
  return out;
}

}  // namespace

void ConceptContext::validate(const DatasetSchema& schema) const {
  if (selections.empty()) throw EmptySelection("context selects no sources");
  std::set<SourceId> seen;
  const SegmentIndex segments = schema.segment_count();
  for (const auto& sel : selections) {
    if (!schema.source_index(sel.source_id)) throw InvalidArgument("context names unknown source " + sel.source_id);
    if (!seen.insert(sel.source_id).second) throw InvalidArgument("context lists source " + sel.source_id + " twice");
    const auto ranges = sorted_ranges(sel.ranges);
    for (std::size_t r = 0; r < ranges.size(); ++r) {
      if (ranges[r].first > ranges[r].last) throw InvalidArgument("inverted segment range in context");
      if (ranges[r].first < 0 || ranges[r].last >= segments) {
        throw InvalidArgument("segment range [" + std::to_string(ranges[r].first) + ", " +
                              std::to_string(ranges[r].last) + "] lies off the grid");
      }
      if (r > 0 && ranges[r].first <= ranges[r - 1].last) {
        throw InvalidArgument("overlapping segment ranges for source " + sel.source_id);
      }
    }
  }
}

std::vector<const Batch*> selected_batches(const ConceptContext& context, std::span<const SourceBatches> data) {
  std::vector<const Batch*> out;
  for (const auto& sel : context.selections) {
    const SourceBatches* sb = find_source(data, sel.source_id);
    if (!sb) throw InvalidArgument("no batches for source " + sel.source_id);
    for (const auto& range : sorted_ranges(sel.ranges)) {
      for (SegmentIndex t = range.first; t <= range.last; ++t) {
        if (t < 0 || static_cast<std::size_t>(t) >= sb->batches.size()) {
          throw InvalidArgument("segment " + std::to_string(t) + " lies off the grid");
        }
        out.push_back(&sb->batches[static_cast<std::size_t>(t)]);
      }
    }
  }
  return out;
}

std::size_t selected_record_count(const ConceptContext& context, std::span<const SourceBatches> data) {
  std::size_t n = 0;
  for (const Batch* b : selected_batches(context, data)) n += b->size();
  return n;
}

double attribute_correlation(const Batch& batch, std::size_t attribute) {
  if (batch.empty()) throw EmptyBatch("cannot correlate an empty batch");
  const auto& records = batch.records;
  if (attribute >= records.front().x.size()) throw InvalidArgument("attribute index out of range");

  const auto first_value = records.front().x[attribute];
  const auto first_label = records.front().y;
  const bool constant_value =
      std::all_of(records.begin(), records.end(), [&](const DataRecord& r) { return r.x[attribute] == first_value; });
  const bool constant_label =
      std::all_of(records.begin(), records.end(), [&](const DataRecord& r) { return r.y == first_label; });
  if (constant_value || constant_label) return 0.0;

  const auto n = static_cast<double>(records.size());
  double mean_x = 0.0, mean_y = 0.0;
  for (const auto& r : records) {
    mean_x += r.x[attribute];
    mean_y += r.y;
  }
  mean_x /= n;
  mean_y /= n;
  double dot = 0.0, sxx = 0.0, syy = 0.0;
  for (const auto& r : records) {
    const double dx = r.x[attribute] - mean_x;
    const double dy = r.y - mean_y;
    dot += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(sxx * syy), -1.0, 1.0);
}

AttributeRanking rank_attributes(const ConceptContext& context, std::span<const SourceBatches> data,
                                 const DatasetSchema& schema, std::size_t cap) {
  const std::size_t dims = schema.attribute_count();
  std::vector<double> sums(dims, 0.0);
  std::size_t used = 0;
  for (const Batch* batch : selected_batches(context, data)) {
    if (batch->empty()) continue;
    ++used;
    for (std::size_t k = 0; k < dims; ++k) sums[k] += attribute_correlation(*batch, k);
  }
  if (used == 0) throw EmptySelection("context selects no records");

  AttributeRanking ranking;
  for (std::size_t k = 0; k < dims; ++k) {
    ranking.entries.push_back({k, schema.attribute_names[k], sums[k] / static_cast<double>(used)});
  }
  std::sort(ranking.entries.begin(), ranking.entries.end(), [](const RankedAttribute& a, const RankedAttribute& b) {
    const double ma = std::abs(a.score), mb = std::abs(b.score);
    if (ma != mb) return ma > mb;
    return a.name < b.name;
  });
  if (ranking.entries.size() > cap) ranking.entries.resize(cap);
  return ranking;
}

std::string to_string(Stroke stroke) {
  switch (stroke) {
    case Stroke::kNone: return "none";
    case Stroke::kLight: return "light";
    case Stroke::kDark: return "dark";
  }
  return "none";
}

std::optional<double> CellStats::ratio() const noexcept {
  if (count() == 0) return std::nullopt;
  return (static_cast<double>(pos) - static_cast<double>(neg)) / static_cast<double>(count());
}

Stroke CellStats::stroke() const noexcept {
  if (heavy) return Stroke::kDark;
  if (count() > 1) return Stroke::kLight;
  return Stroke::kNone;
}

std::size_t MatrixAxis::bin_of(const DataRecord& record) const {
  if (is_source) {
    auto it = std::find(categories.begin(), categories.end(), record.source_id);
    if (it == categories.end()) throw InvalidArgument("source " + record.source_id + " is not on the matrix axis");
    return static_cast<std::size_t>(it - categories.begin());
  }
  const std::size_t b = bins();
  const double lo = edges.front();
  const double hi = edges.back();
  if (!(hi > lo)) return 0;
  const double pos = (record.x.at(attribute_index) - lo) / (hi - lo) * static_cast<double>(b);
  if (!(pos > 0.0)) return 0;
  return std::min(static_cast<std::size_t>(pos), b - 1);
}

const CellStats& MatrixSpec::cell(std::size_t i, std::size_t j, std::size_t bin_i, std::size_t bin_j) const {
  if (i == j || i >= axes.size() || j >= axes.size()) throw InvalidArgument("no off-diagonal cell at that address");
  return pairs[i * axes.size() + j].at(bin_i * axes[j].bins() + bin_j);
}

std::vector<MatrixAxis> make_axes(const ConceptContext& context, std::span<const SourceBatches> data,
                                  const DatasetSchema& schema, const AttributeRanking& ranking, std::size_t bins) {
  if (bins == 0) throw InvalidArgument("bin count must be positive");
  if (ranking.entries.empty()) throw InvalidArgument("ranking is empty");
  const auto batches = selected_batches(context, data);

  std::vector<MatrixAxis> axes;
  MatrixAxis source_axis;
  source_axis.name = "source";
  source_axis.is_source = true;
  for (const auto& sel : context.selections) source_axis.categories.push_back(sel.source_id);
  axes.push_back(std::move(source_axis));

  for (const auto& entry : ranking.entries) {
    if (entry.index >= schema.attribute_count()) throw SchemaMismatch("ranked attribute outside schema");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const Batch* b : batches) {
      for (const auto& r : b->records) {
        lo = std::min(lo, r.x[entry.index]);
        hi = std::max(hi, r.x[entry.index]);
      }
    }
    if (lo > hi) throw EmptySelection("context selects no records");
    MatrixAxis axis;
    axis.name = entry.name;
    axis.attribute_index = entry.index;
    axis.edges.resize(bins + 1);
    for (std::size_t e = 0; e <= bins; ++e) {
      axis.edges[e] = lo + (hi - lo) * static_cast<double>(e) / static_cast<double>(bins);
    }
    axis.edges.back() = hi;
    axes.push_back(std::move(axis));
  }
  return axes;
}

MatrixSpec count_matrix(std::vector<MatrixAxis> axes, std::span<const Batch* const> batches) {
  MatrixSpec m;
  m.axes = std::move(axes);
  const std::size_t n = m.axes.size();
  m.pairs.resize(n * n);
  m.diagonal.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.diagonal[i].pos.assign(m.axes[i].bins(), 0);
    m.diagonal[i].neg.assign(m.axes[i].bins(), 0);
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) m.pairs[i * n + j].assign(m.axes[i].bins() * m.axes[j].bins(), CellStats{});
    }
  }

  std::vector<std::size_t> bin(n);
  for (const Batch* batch : batches) {
    for (const auto& record : batch->records) {
      ++m.total_records;
      for (std::size_t i = 0; i < n; ++i) bin[i] = m.axes[i].bin_of(record);
      const bool positive = record.y == 1;
      for (std::size_t i = 0; i < n; ++i) {
        (positive ? m.diagonal[i].pos : m.diagonal[i].neg)[bin[i]]++;
        for (std::size_t j = 0; j < n; ++j) {
          if (i == j) continue;
          auto& cell = m.pairs[i * n + j][bin[i] * m.axes[j].bins() + bin[j]];
          (positive ? cell.pos : cell.neg)++;
        }
      }
    }
  }

  const double heavy_cut = kHeavyCellShare * static_cast<double>(m.total_records);
  for (auto& cells : m.pairs) {
    for (auto& cell : cells) cell.heavy = static_cast<double>(cell.count()) > heavy_cut;
  }
  return m;
}

MatrixSpec build_matrix(const ConceptContext& context, std::span<const SourceBatches> data, const DatasetSchema& schema,
                        const AttributeRanking& ranking, std::size_t bins) {
  context.validate(schema);
  auto axes = make_axes(context, data, schema, ranking, bins);
  const auto batches = selected_batches(context, data);
  return count_matrix(std::move(axes), batches);
}

double global_label_ratio(std::span<const SourceBatches> data) {
  std::uint64_t pos = 0, total = 0;
  for (const auto& sb : data) {
    for (const auto& b : sb.batches) {
      for (const auto& r : b.records) {
        pos += r.y == 1 ? 1 : 0;
        ++total;
      }
    }
  }
  if (total == 0) return 0.0;
  return (2.0 * static_cast<double>(pos) - static_cast<double>(total)) / static_cast<double>(total);
}

RebasedMatrix rebase_colors(const MatrixSpec& matrix, double global_ratio) {
  RebasedMatrix out;
  out.baseline = global_ratio;
  out.pairs.resize(matrix.pairs.size());
  for (std::size_t p = 0; p < matrix.pairs.size(); ++p) {
    for (const auto& cell : matrix.pairs[p]) {
      const auto r = cell.ratio();
      out.pairs[p].push_back(r ? std::optional<double>(std::clamp(*r - global_ratio, -1.0, 1.0)) : std::nullopt);
    }
  }
  return out;
}

SegmentRange recommend_segment(std::span<const SegmentIndex> confirmations, SegmentIndex t,
                               SegmentIndex segment_count) {
  const SegmentIndex last = std::max<SegmentIndex>(segment_count - 1, 0);
  std::optional<SegmentIndex> previous;
  std::optional<SegmentIndex> next;
  for (SegmentIndex c : confirmations) {
    if (c <= t && (!previous || c > *previous)) previous = c;
    if (c > t && (!next || c < *next)) next = c;
  }
  SegmentRange range{previous ? *previous + 1 : 0, next ? *next - 1 : last};
  range.first = std::clamp<SegmentIndex>(range.first, 0, last);
  range.last = std::clamp<SegmentIndex>(range.last, 0, last);
  if (range.first > range.last) {
    // two confirmations in adjacent segments leave nothing in between
    const SegmentIndex at = std::clamp<SegmentIndex>(t, 0, last);
    range = {at, at};
  }
  return range;
}

CellAddress mirror(const CellAddress& cell) noexcept { return {cell.j, cell.i, cell.bin_j, cell.bin_i}; }

PairedMatrix compare(const ConceptRecord& stored, const ConceptContext& live, std::span<const SourceBatches> data,
                     const DatasetSchema& schema) {
  const auto& old_axes = stored.matrix.axes;
  if (old_axes.empty() || !old_axes.front().is_source) throw SchemaMismatch("stored concept has no source axis");
  for (std::size_t i = 1; i < old_axes.size(); ++i) {
    const auto& axis = old_axes[i];
    if (axis.is_source || axis.attribute_index >= schema.attribute_count() ||
        schema.attribute_names[axis.attribute_index] != axis.name) {
      throw SchemaMismatch("stored concept axis `" + axis.name + "` does not exist in the current schema");
    }
  }
  for (const auto& source : old_axes.front().categories) {
    if (!schema.source_index(source)) throw SchemaMismatch("stored concept refers to unknown source " + source);
  }
  live.validate(schema);

  auto axes = old_axes;
  for (const auto& sel : live.selections) {
    auto& categories = axes.front().categories;
    if (std::find(categories.begin(), categories.end(), sel.source_id) == categories.end()) {
      categories.push_back(sel.source_id);
    }
  }

  PairedMatrix paired;
  paired.lower = axes == old_axes ? stored.matrix : widen_source_axis(stored.matrix, axes);
  const auto batches = selected_batches(live, data);
  paired.upper = count_matrix(std::move(axes), batches);
  return paired;
}

// ---- JSON ----------------------------------------------------------------

void to_json(nlohmann::json& j, const SegmentRange& r) { j = nlohmann::json::array({r.first, r.last}); }

void from_json(const nlohmann::json& j, SegmentRange& r) {
  if (j.is_array()) {
    if (j.size() != 2) throw InvalidArgument("segment range must be [first, last]");
    r.first = j.at(0).get<SegmentIndex>();
    r.last = j.at(1).get<SegmentIndex>();
  } else {
    r.first = j.at("first").get<SegmentIndex>();
    r.last = j.at("last").get<SegmentIndex>();
  }
}

void to_json(nlohmann::json& j, const ConceptContext& c) {
  auto selections = nlohmann::json::array();
  for (const auto& sel : c.selections) selections.push_back({{"source", sel.source_id}, {"ranges", sel.ranges}});
  j = {{"selections", std::move(selections)}};
}

void from_json(const nlohmann::json& j, ConceptContext& c) {
  c.selections.clear();
  for (const auto& sel : j.at("selections")) {
    c.selections.push_back({sel.at("source").get<SourceId>(), sel.at("ranges").get<std::vector<SegmentRange>>()});
  }
}

void to_json(nlohmann::json& j, const AttributeRanking& r) {
  j = nlohmann::json::array();
  for (const auto& e : r.entries) j.push_back({{"index", e.index}, {"name", e.name}, {"score", e.score}});
}

void from_json(const nlohmann::json& j, AttributeRanking& r) {
  r.entries.clear();
  for (const auto& e : j) {
    r.entries.push_back({e.at("index").get<std::size_t>(), e.at("name").get<std::string>(), e.at("score").get<double>()});
  }
}

namespace {

nlohmann::json cell_json(const CellStats& c) {
  nlohmann::json j = {{"pos", c.pos}, {"neg", c.neg}, {"heavy", c.heavy}, {"stroke", to_string(c.stroke())}};
  const auto r = c.ratio();
  j["ratio"] = r ? nlohmann::json(*r) : nlohmann::json(nullptr);
  return j;
}

}  // namespace

void to_json(nlohmann::json& j, const MatrixSpec& m) {
  auto axes = nlohmann::json::array();
  for (const auto& a : m.axes) {
    nlohmann::json axis = {{"name", a.name}, {"kind", a.is_source ? "source" : "attribute"}, {"bins", a.bins()}};
    if (a.is_source) {
      axis["categories"] = a.categories;
    } else {
      axis["attribute_index"] = a.attribute_index;
      axis["edges"] = a.edges;
    }
    axes.push_back(std::move(axis));
  }
  const std::size_t n = m.axes.size();
  auto pairs = nlohmann::json::array();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t jj = 0; jj < n; ++jj) {
      if (i == jj) continue;
      auto cells = nlohmann::json::array();
      for (const auto& c : m.pairs[i * n + jj]) cells.push_back(cell_json(c));
      pairs.push_back({{"i", i}, {"j", jj}, {"cells", std::move(cells)}});
    }
  }
  auto diagonal = nlohmann::json::array();
  for (const auto& h : m.diagonal) diagonal.push_back({{"pos", h.pos}, {"neg", h.neg}});
  j = {{"axes", std::move(axes)}, {"total_records", m.total_records}, {"pairs", std::move(pairs)},
       {"diagonal", std::move(diagonal)}};
}

void from_json(const nlohmann::json& j, MatrixSpec& m) {
  m = MatrixSpec{};
  for (const auto& a : j.at("axes")) {
    MatrixAxis axis;
    axis.name = a.at("name").get<std::string>();
    axis.is_source = a.at("kind").get<std::string>() == "source";
    if (axis.is_source) {
      axis.categories = a.at("categories").get<std::vector<SourceId>>();
    } else {
      axis.attribute_index = a.at("attribute_index").get<std::size_t>();
      axis.edges = a.at("edges").get<std::vector<double>>();
    }
    m.axes.push_back(std::move(axis));
  }
  m.total_records = j.at("total_records").get<std::uint64_t>();
  const std::size_t n = m.axes.size();
  m.pairs.assign(n * n, {});
  for (const auto& p : j.at("pairs")) {
    const auto i = p.at("i").get<std::size_t>();
    const auto jj = p.at("j").get<std::size_t>();
    if (i >= n || jj >= n || i == jj) throw InvalidArgument("matrix pair index out of range");
    auto& cells = m.pairs[i * n + jj];
    for (const auto& c : p.at("cells")) {
      cells.push_back({c.at("pos").get<std::uint64_t>(), c.at("neg").get<std::uint64_t>(), c.at("heavy").get<bool>()});
    }
  }
  for (const auto& h : j.at("diagonal")) {
    m.diagonal.push_back({h.at("pos").get<std::vector<std::uint64_t>>(), h.at("neg").get<std::vector<std::uint64_t>>()});
  }
}

void to_json(nlohmann::json& j, const RebasedMatrix& m) {
  const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(m.pairs.size()))));
  auto pairs = nlohmann::json::array();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t jj = 0; jj < n; ++jj) {
      if (i == jj) continue;
      auto adjusted = nlohmann::json::array();
      for (const auto& v : m.pairs[i * n + jj]) adjusted.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
      pairs.push_back({{"i", i}, {"j", jj}, {"adjusted", std::move(adjusted)}});
    }
  }
  j = {{"baseline", m.baseline}, {"pairs", std::move(pairs)}};
}

void to_json(nlohmann::json& j, const ConceptRecord& r) {
  j = {{"id", r.id},           {"context", r.context},       {"ranking", r.ranking},
       {"matrix", r.matrix},   {"created_at", r.created_at}, {"note", r.note}};
}

void from_json(const nlohmann::json& j, ConceptRecord& r) {
  r.id = j.at("id").get<std::uint64_t>();
  r.context = j.at("context").get<ConceptContext>();
  r.ranking = j.at("ranking").get<AttributeRanking>();
  r.matrix = j.at("matrix").get<MatrixSpec>();
  r.created_at = j.at("created_at").get<EpochSeconds>();
  r.note = j.value("note", std::string{});
}

void to_json(nlohmann::json& j, const PairedMatrix& m) { j = {{"lower", m.lower}, {"upper", m.upper}}; }

}  // namespace driftscope
