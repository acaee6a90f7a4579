// Random datasets and contexts for tests.
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "driftscope/concept/concept.hpp"
#include "oracles.hpp"

namespace fixture {

using namespace driftscope;

struct Dataset {
  DatasetSchema schema;
  std::vector<SourceBatches> data;
};

/// `sources` x `segments` grid with up to `max_per_batch` records per batch
/// and `attributes` uniform attributes on [lo, hi).
inline Dataset random_dataset(oracle::Rng& rng, std::size_t sources, std::size_t attributes, std::size_t segments,
                              int max_per_batch, double lo = 0.0, double hi = 1.0) {
  Dataset d;
  for (std::size_t k = 0; k < attributes; ++k) d.schema.attribute_names.push_back("a" + std::to_string(k));
  for (std::size_t s = 0; s < sources; ++s) d.schema.sources.push_back({"s" + std::to_string(s), ""});
  d.schema.unit = 10;
  d.schema.span_start = 0;
  d.schema.span_end = static_cast<EpochSeconds>(segments) * 10;
  for (std::size_t s = 0; s < sources; ++s) {
    SourceBatches sb{"s" + std::to_string(s), {}};
    for (std::size_t t = 0; t < segments; ++t) {
      Batch b{sb.source_id, static_cast<SegmentIndex>(t), {}, 0.0};
      const int n = rng.integer(0, max_per_batch);
      for (int i = 0; i < n; ++i) {
        std::vector<double> x(attributes);
        for (auto& v : x) v = rng.uniform(lo, hi);
        b.records.push_back({sb.source_id, static_cast<EpochSeconds>(t * 10 + static_cast<std::size_t>(i) % 10), x,
                             rng.coin(0.4) ? 1 : 0});
      }
      sb.batches.push_back(std::move(b));
    }
    d.data.push_back(std::move(sb));
  }
  return d;
}

/// A random valid context: a non-empty subset of sources, each with one or
/// two disjoint ranges.
inline ConceptContext random_context(oracle::Rng& rng, const Dataset& d) {
  ConceptContext c;
  const auto T = static_cast<int>(d.schema.segment_count());
  for (const auto& src : d.schema.sources) {
    if (!c.selections.empty() && rng.coin(0.4)) continue;
    SourceSelection sel{src.id, {}};
    const int a = rng.integer(0, T - 1);
    const int b = rng.integer(a, T - 1);
    sel.ranges.push_back({a, b});
    if (b + 2 < T && rng.coin(0.3)) {
      const int e = rng.integer(b + 2, T - 1);
      sel.ranges.push_back({b + 2, e});
    }
    c.selections.push_back(std::move(sel));
  }
  return c;
}

inline std::vector<const DataRecord*> records_of(const ConceptContext& c, const Dataset& d) {
  std::vector<const DataRecord*> out;
  for (const auto& sel : c.selections) {
    for (const auto& sb : d.data) {
      if (sb.source_id != sel.source_id) continue;
      for (const auto& r : sel.ranges) {
        for (auto t = r.first; t <= r.last; ++t) {
          for (const auto& rec : sb.batches[static_cast<std::size_t>(t)].records) out.push_back(&rec);
        }
      }
    }
  }
  return out;
}

/// Recounts every cell of `m` with a double loop over the selected records.
/// Returns one line per disagreement; empty means `m` is exact.
inline std::vector<std::string> naive_matrix_diff(const MatrixSpec& m, const ConceptContext& c, const Dataset& d) {
  std::vector<std::string> diff;
  auto complain = [&](const std::string& what) { diff.push_back(what); };
  const auto records = records_of(c, d);
  const std::size_t n = m.axis_count();
  if (m.total_records != records.size()) complain("total_records");

  std::vector<double> lo(n, 0), hi(n, 0);
  for (std::size_t a = 1; a < n; ++a) {
    lo[a] = std::numeric_limits<double>::infinity();
    hi[a] = -lo[a];
    for (const auto* r : records) {
      lo[a] = std::min(lo[a], r->x[m.axes[a].attribute_index]);
      hi[a] = std::max(hi[a], r->x[m.axes[a].attribute_index]);
    }
  }
  auto bin = [&](std::size_t a, const DataRecord& r) -> std::size_t {
    if (a == 0) {
      for (std::size_t k = 0; k < c.selections.size(); ++k) {
        if (c.selections[k].source_id == r.source_id) return k;
      }
      return c.selections.size();
    }
    return oracle::equal_width_bin(r.x[m.axes[a].attribute_index], lo[a], hi[a], m.axes[a].bins());
  };

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      std::uint64_t conserved = 0;
      for (std::size_t bi = 0; bi < m.axes[i].bins(); ++bi) {
        for (std::size_t bj = 0; bj < m.axes[j].bins(); ++bj) {
          std::uint64_t pos = 0, neg = 0;
          for (const auto* r : records) {
            if (bin(i, *r) == bi && bin(j, *r) == bj) (r->y == 1 ? pos : neg)++;
          }
          const auto& cell = m.cell(i, j, bi, bj);
          const auto where = "cell (" + std::to_string(i) + "," + std::to_string(j) + ";" + std::to_string(bi) + "," +
                             std::to_string(bj) + ")";
          if (cell.pos != pos || cell.neg != neg) complain(where + " counts");
          if (cell.heavy != (static_cast<double>(pos + neg) > 0.05 * static_cast<double>(records.size()))) {
            complain(where + " heavy flag");
          }
          if (!(m.cell(j, i, bj, bi) == cell)) complain(where + " mirror");
          conserved += cell.count();
        }
      }
      if (conserved != records.size()) complain("conservation for pair " + std::to_string(i) + "," + std::to_string(j));
    }
    std::uint64_t hist = 0;
    for (std::size_t b = 0; b < m.axes[i].bins(); ++b) {
      std::uint64_t pos = 0, neg = 0;
      for (const auto* r : records) {
        if (bin(i, *r) == b) (r->y == 1 ? pos : neg)++;
      }
      if (m.diagonal[i].pos[b] != pos || m.diagonal[i].neg[b] != neg) complain("diagonal " + std::to_string(i));
      hist += pos + neg;
    }
    if (hist != records.size()) complain("diagonal conservation " + std::to_string(i));
  }
  return diff;
}

}  // namespace fixture
