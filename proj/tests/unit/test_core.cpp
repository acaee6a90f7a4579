#include <doctest.h>

#include <sstream>

#include "../support/oracles.hpp"
#include "driftscope/core/batching.hpp"
#include "driftscope/core/ingest.hpp"
#include "driftscope/core/manifest.hpp"
#include "driftscope/errors.hpp"

using namespace driftscope;

namespace {

DatasetSchema two_attr_schema() {
  DatasetSchema s;
  s.attribute_names = {"a", "b"};
  s.sources = {{"s1", "One"}, {"s2", "Two"}};
  s.unit = 86400;
  s.span_start = 0;
  s.span_end = 3 * 86400;
  return s;
}

IngestResult ingest(const std::string& text, const DatasetSchema& schema) {
  std::istringstream in(text);
  return ingest_csv(in, schema, "test.csv");
}

}  // namespace

TEST_SUITE("core.ingest") {
  TEST_CASE("single valid row gives one record and no rejects") {
    auto r = ingest("timestamp,source,label,a,b\n10,s1,1,0.5,2.5\n", two_attr_schema());
    REQUIRE(r.records.size() == 1);
    CHECK(r.rejects.empty());
    CHECK(r.records[0].y == 1);
    CHECK(r.records[0].x == std::vector<double>{0.5, 2.5});
    CHECK(r.records[0].timestamp == 10);
  }

  TEST_CASE("missing cell takes the running mean of earlier rows of the same source") {
    const std::string csv =
        "timestamp,source,label,a,b\n"
        "1,s1,0,2.0,1\n"
        "2,s1,1,4.0,1\n"
        "3,s1,0,,1\n"
        "4,s1,1,5.0,1\n";
    auto r = ingest(csv, two_attr_schema());
    REQUIRE(r.records.size() == 4);
    // oracle: mean over the prior observed values of the same source
    const double expected = (2.0 + 4.0) / 2.0;
    CHECK(r.records[2].x[0] == doctest::Approx(expected).epsilon(1e-15));
  }

  TEST_CASE("missing cell with no history imputes zero; other sources do not leak") {
    const std::string csv =
        "timestamp,source,label,a,b\n"
        "1,s2,0,9.0,1\n"
        "2,s1,0,NA,1\n";
    auto r = ingest(csv, two_attr_schema());
    REQUIRE(r.records.size() == 2);
    CHECK(r.records[0].source_id == "s1");
    CHECK(r.records[0].x[0] == 0.0);
  }

  TEST_CASE("wrong header is rejected") {
    CHECK_THROWS_AS(ingest("timestamp,source,label,b,a\n", two_attr_schema()), MalformedHeader);
    CHECK_THROWS_AS(ingest("time,source,label,a,b\n", two_attr_schema()), MalformedHeader);
    CHECK_THROWS_AS(ingest("", two_attr_schema()), MalformedHeader);
  }

  TEST_CASE("bad rows are collected with their row index") {
    const std::string csv =
        "timestamp,source,label,a,b\n"
        "1,s1,0,1,1\n"
        "bogus,s1,0,1,1\n"
        "3,s1,2,1,1\n"
        "4,s9,1,1,1\n"
        "5,s1,1,1,1\n"
        "6,s1,1,1,1\n"
        "7,s1,1,1,1\n";
    auto r = ingest(csv, two_attr_schema());
    CHECK(r.records.size() == 4);
    REQUIRE(r.rejects.size() == 3);
    CHECK(r.rejects[0].row == 2);
    CHECK(r.rejects[1].row == 3);
    CHECK(r.rejects[2].row == 4);
    CHECK(r.rejects[0].file == "test.csv");
  }

  TEST_CASE("more than half rejected aborts the ingest") {
    const std::string csv =
        "timestamp,source,label,a,b\n"
        "x,s1,0,1,1\n"
        "y,s1,0,1,1\n"
        "1,s1,0,1,1\n";
    CHECK_THROWS_AS(ingest(csv, two_attr_schema()), IngestError);
  }

  TEST_CASE("records come back sorted by source then time") {
    const std::string csv =
        "timestamp,source,label,a,b\n"
        "5,s2,0,1,1\n"
        "3,s1,0,1,1\n"
        "1,s2,0,1,1\n"
        "2,s1,0,1,1\n";
    auto r = ingest(csv, two_attr_schema());
    std::vector<std::pair<std::string, EpochSeconds>> order;
    for (const auto& rec : r.records) order.emplace_back(rec.source_id, rec.timestamp);
    CHECK(order == std::vector<std::pair<std::string, EpochSeconds>>{{"s1", 2}, {"s1", 3}, {"s2", 1}, {"s2", 5}});
  }

  TEST_CASE("label predicate binarizes a raw column") {
    auto schema = two_attr_schema();
    schema.label_name = "aqi";
    schema.label_predicate = LabelPredicate{"aqi", CompareOp::kGreater, 100.0};
    auto r = ingest("timestamp,source,aqi,a,b\n1,s1,150,1,1\n2,s1,80,1,1\n", schema);
    REQUIRE(r.records.size() == 2);
    CHECK(r.records[0].y == 1);
    CHECK(r.records[1].y == 0);
  }

  TEST_CASE("ingest is deterministic") {
    const std::string csv = "timestamp,source,label,a,b\n1,s1,0,1,\n2,s2,1,,3\nbad,s1,0,1,1\n4,s1,1,2,2\n";
    auto a = ingest(csv, two_attr_schema());
    auto b = ingest(csv, two_attr_schema());
    CHECK(a.records == b.records);
    CHECK(a.rejects == b.rejects);
  }

  TEST_CASE("timestamps: ISO forms and epoch seconds") {
    CHECK(parse_timestamp("0") == 0);
    CHECK(parse_timestamp("1970-01-02") == 86400);
    CHECK(parse_timestamp("2015-01-01T00:00:00Z") == 1420070400);
    CHECK(parse_timestamp("2015-01-01 08:00:00+08:00") == 1420070400);
    CHECK(parse_timestamp("2015-01-01T00:00:00.75Z") == 1420070400);
    CHECK_FALSE(parse_timestamp("2015-13-01").has_value());
    CHECK_FALSE(parse_timestamp("noon").has_value());
    CHECK(parse_timestamp(format_timestamp(1420070400)) == 1420070400);
  }

  TEST_CASE("quoted fields") {
    CHECK(split_csv_line(R"(1,"s,1","say ""hi""",3)") == std::vector<std::string>{"1", "s,1", R"(say "hi")", "3"});
  }
}

TEST_SUITE("core.batching") {
  TEST_CASE("24 hourly records in a one-day unit form one batch") {
    auto schema = two_attr_schema();
    schema.span_end = 86400;
    std::vector<DataRecord> recs;
    for (int h = 0; h < 24; ++h) recs.push_back({"s1", h * 3600, {0, 0}, 0});
    auto out = batchify(recs, schema);
    REQUIRE(out.size() == 2);
    REQUIRE(out[0].batches.size() == 1);
    CHECK(out[0].batches[0].size() == 24);
    CHECK(out[1].batches[0].empty());
  }

  TEST_CASE("hours 23 and 25 land in segments 0 and 1") {
    auto schema = two_attr_schema();
    std::vector<DataRecord> recs{{"s1", 23 * 3600, {0, 0}, 0}, {"s1", 25 * 3600, {0, 0}, 0}};
    auto out = batchify(recs, schema);
    for (const auto& rec : recs) {
      const auto expected = (rec.timestamp - schema.span_start) / schema.unit;  // floor-division oracle
      const auto& b = out[0].batches[static_cast<std::size_t>(expected)];
      CHECK(std::find(b.records.begin(), b.records.end(), rec) != b.records.end());
    }
    CHECK(out[0].batches[0].size() == 1);
    CHECK(out[0].batches[1].size() == 1);
  }

  TEST_CASE("zero records over three units yield three empty placeholders") {
    auto out = batchify({}, two_attr_schema());
    REQUIRE(out.size() == 2);
    for (const auto& sb : out) {
      REQUIRE(sb.batches.size() == 3);
      for (std::size_t t = 0; t < 3; ++t) {
        CHECK(sb.batches[t].empty());
        CHECK(sb.batches[t].segment_index == static_cast<SegmentIndex>(t));
      }
    }
  }

  TEST_CASE("negative offsets use floor division") {
    auto schema = two_attr_schema();
    schema.span_start = 1000;
    CHECK(schema.segment_of(999) == -1);
    CHECK(schema.segment_of(1000) == 0);
  }

  TEST_CASE("out-of-span records are rejected") {
    std::vector<DataRecord> late{{"s1", 3 * 86400, {0, 0}, 0}};
    CHECK_THROWS_AS(batchify(late, two_attr_schema()), TimestampOutOfSpan);
    std::vector<DataRecord> early{{"s1", -1, {0, 0}, 0}};
    CHECK_THROWS_AS(batchify(early, two_attr_schema()), TimestampOutOfSpan);
  }

  TEST_CASE("property: partition and grid alignment") {
    oracle::Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
      auto schema = two_attr_schema();
      schema.unit = rng.integer(1, 50);
      schema.span_start = rng.integer(-100, 100);
      schema.span_end = schema.span_start + schema.unit * rng.integer(1, 20);
      std::vector<DataRecord> recs;
      std::map<std::string, std::size_t> per_source;
      const int n = rng.integer(0, 200);
      for (int i = 0; i < n; ++i) {
        const std::string s = rng.coin() ? "s1" : "s2";
        recs.push_back({s, rng.integer(static_cast<int>(schema.span_start), static_cast<int>(schema.span_end - 1)),
                        {0, 0}, 0});
        ++per_source[s];
      }
      std::stable_sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
      auto out = batchify(recs, schema);
      REQUIRE(out.size() == 2);
      CHECK(out[0].batches.size() == out[1].batches.size());
      for (const auto& sb : out) {
        std::size_t total = 0;
        for (std::size_t t = 0; t < sb.batches.size(); ++t) {
          const auto& b = sb.batches[t];
          CHECK(b.segment_index == static_cast<SegmentIndex>(t));
          total += b.size();
          for (const auto& r : b.records) {
            CHECK(r.source_id == sb.source_id);
            CHECK(r.timestamp >= schema.span_start + b.segment_index * schema.unit);
            CHECK(r.timestamp < schema.span_start + (b.segment_index + 1) * schema.unit);
          }
          CHECK(std::is_sorted(b.records.begin(), b.records.end(),
                               [](const auto& a, const auto& c) { return a.timestamp < c.timestamp; }));
        }
        CHECK(total == per_source[sb.source_id]);
      }
    }
  }
}

TEST_SUITE("core.normalize") {
  NormalizationStats stats_2_6() {
    NormalizationStats s(1);
    s.observe({2.0});
    s.observe({6.0});
    return s;
  }

  TEST_CASE("min, max and interior values") {
    const auto s = stats_2_6();
    CHECK(normalize(std::vector<double>{2.0}, s)[0] == 0.0);
    CHECK(normalize(std::vector<double>{6.0}, s)[0] == 1.0);
    CHECK(normalize(std::vector<double>{3.0}, s)[0] == doctest::Approx((3.0 - 2.0) / (6.0 - 2.0)).epsilon(1e-15));
  }

  TEST_CASE("constant attribute maps to one half; unseen extremes clamp") {
    NormalizationStats s(1);
    s.observe({4.0});
    CHECK(normalize(std::vector<double>{4.0}, s)[0] == 0.5);
    const auto t = stats_2_6();
    CHECK(normalize(std::vector<double>{10.0}, t)[0] == 1.0);
    CHECK(normalize(std::vector<double>{-1.0}, t)[0] == 0.0);
  }

  TEST_CASE("property: streaming statistics invariants") {
    oracle::Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
      NormalizationStats s(3);
      std::vector<std::vector<double>> seen;
      for (int i = 0; i < rng.integer(1, 100); ++i) {
        std::vector<double> x{rng.normal(0, 5), rng.uniform(-1, 1), rng.normal(100, 0.1)};
        s.observe(x);
        seen.push_back(x);
      }
      for (std::size_t k = 0; k < 3; ++k) {
        const auto& a = s.attributes[k];
        double mean = 0.0;
        for (const auto& x : seen) mean += x[k];
        mean /= static_cast<double>(seen.size());
        CHECK(a.min <= a.mean + 1e-12);
        CHECK(a.mean <= a.max + 1e-12);
        CHECK(a.variance() >= 0.0);
        CHECK(a.mean == doctest::Approx(mean).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("property: normalize inverts denormalize on frozen stats") {
    oracle::Rng rng(13);
    const auto s = stats_2_6();
    for (int i = 0; i < 200; ++i) {
      const double u = rng.uniform();
      const auto back = normalize(denormalize(std::vector<double>{u}, s), s);
      CHECK(back[0] == doctest::Approx(u).epsilon(1e-12));
    }
  }
}

TEST_SUITE("core.manifest") {
  TEST_CASE("manifest round-trips through JSON") {
    DatasetManifest m;
    m.schema = two_attr_schema();
    m.schema.label_predicate = LabelPredicate{"a", CompareOp::kLessEqual, 3.5};
    m.files = {"/data/x.csv"};
    m.windows = {{"s1", 100}};
    const auto back = parse_manifest(manifest_to_json(m), "/");
    CHECK(back.schema == m.schema);
    CHECK(back.files == m.files);
    CHECK(back.windows == m.windows);
  }

  TEST_CASE("durations and relative paths") {
    CHECK(parse_duration(nlohmann::json(3600)) == 3600);
    CHECK(parse_duration(nlohmann::json("15m")) == 900);
    CHECK(parse_duration(nlohmann::json("1d")) == 86400);
    CHECK_THROWS(parse_duration(nlohmann::json("5y")));
    nlohmann::json doc = manifest_to_json(DatasetManifest{two_attr_schema(), {"rel.csv"}, {}});
    doc["unit"] = "1d";
    doc["span"] = {{"start", "1970-01-01"}, {"end", "1970-01-04"}};
    const auto m = parse_manifest(doc, "/base");
    CHECK(m.files.front() == std::filesystem::path("/base/rel.csv"));
    CHECK(m.schema.segment_count() == 3);
  }

  TEST_CASE("schema invariants are enforced") {
    auto s = two_attr_schema();
    s.attribute_names = {"a", "a"};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = two_attr_schema();
    s.sources.clear();
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = two_attr_schema();
    s.unit = 0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
  }
}
