#include "driftscope/service/api.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "driftscope/errors.hpp"

namespace driftscope {
namespace {

int status_for(const std::string& code) {
  if (code == "invalid_argument" || code == "dimension_mismatch") return 400;
  if (code == "not_found") return 404;
  if (code == "schema_mismatch") return 409;
  if (code == "single_source" || code == "empty_selection" || code == "insufficient_data") return 422;
  return 500;
}

ApiResponse error_response(int status, const std::string& code, const std::string& message) {
  return {status, {{"error", {{"code", code}, {"message", message}}}}};
}

std::optional<std::string> param(const ApiRequest& request, const std::string& name) {
  auto it = request.query.find(name);
  if (it == request.query.end()) return std::nullopt;
  return it->second;
}

template <typename T>
std::optional<T> number_param(const ApiRequest& request, const std::string& name) {
  const auto text = param(request, name);
  if (!text) return std::nullopt;
  T value{};
  const auto* end = text->data() + text->size();
  auto [ptr, ec] = std::from_chars(text->data(), end, value);
  if (ec != std::errc() || ptr != end) throw InvalidArgument("query parameter '" + name + "' is not a number");
  return value;
}

nlohmann::json parse_body(const std::string& body) {
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    throw InvalidArgument("request body is not valid JSON");
  }
}

template <typename T>
T field(const nlohmann::json& body, const char* name) {
  if (!body.is_object() || !body.contains(name)) throw InvalidArgument(std::string("missing field '") + name + "'");
  try {
    return body.at(name).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("field '") + name + "' is malformed: " + e.what());
  }
}

template <typename T>
T field_or(const nlohmann::json& body, const char* name, T fallback) {
  return body.is_object() && body.contains(name) ? field<T>(body, name) : fallback;
}

// Mean accuracy per bucket of consecutive defined points.
nlohmann::json downsample(const std::vector<std::pair<SegmentIndex, double>>& points, std::size_t max_points) {
  auto out = nlohmann::json::array();
  if (max_points == 0 || points.size() <= max_points) {
    for (const auto& [t, a] : points) out.push_back({t, a});
    return out;
  }
  for (std::size_t b = 0; b < max_points; ++b) {
    const std::size_t lo = b * points.size() / max_points;
    const std::size_t hi = (b + 1) * points.size() / max_points;
    double sum = 0.0;
    for (std::size_t k = lo; k < hi; ++k) sum += points[k].second;
    out.push_back({points[lo].first, sum / static_cast<double>(hi - lo)});
  }
  return out;
}

std::vector<SegmentIndex> warning_segments(const SourceAnalysis& s) {
  std::vector<SegmentIndex> out;
  for (const auto& e : s.events) {
    if (e.kind == DriftKind::kWarning && (out.empty() || out.back() != e.segment)) out.push_back(e.segment);
  }
  return out;
}

// Segments from each warning until the detector leaves the warning state,
// approximated by the next confirmation or the first later batch whose
// mean level falls below the warning threshold.
std::vector<SegmentInterval> warning_runs(const SourceAnalysis& s, double warning_level) {
  std::vector<SegmentInterval> runs;
  const auto confirmations = s.confirmation_segments();
  for (SegmentIndex start : warning_segments(s)) {
    if (!runs.empty() && start <= runs.back().end) continue;
    SegmentIndex end = start;
    const auto last = static_cast<SegmentIndex>(s.batches.size()) - 1;
    while (end < last && !std::binary_search(confirmations.begin(), confirmations.end(), end) &&
           s.batches[static_cast<std::size_t>(end + 1)].drift_level >= warning_level) {
      ++end;
    }
    runs.push_back({start, end});
  }
  return runs;
}

}  // namespace

ApiService::ApiService(const AnalysisBundle& bundle, ConceptStore& store)
    : bundle_(bundle), store_(store), data_(bundle.source_batches()) {}

ApiResponse ApiService::handle(const ApiRequest& request) const {
  try {
    const auto& p = request.path;
    const bool get = request.method == "GET";
    const bool post = request.method == "POST";
    if (get && p == "/api/schema") return {200, schema()};
    if (get && p == "/api/timeline") return {200, timeline(request)};
    if (get && p == "/api/accuracy") return {200, accuracy(request)};
    if (get && p == "/api/trajectories") return {200, trajectories(request)};
    if (get && p == "/api/consistency") return {200, consistency(request)};
    if (get && p == "/api/recommend") return {200, recommend(request)};
    if (get && p == "/api/batches") return {200, batches(request)};
    if (post && p == "/api/concept/matrix") return {200, concept_matrix(parse_body(request.body))};
    if (post && p == "/api/concept/compare") return {200, concept_compare(parse_body(request.body))};
    if (get && p == "/api/concepts") return {200, concepts()};
    if (post && p == "/api/concepts") return {201, identify(parse_body(request.body))};
    const std::string prefix = "/api/concepts/";
    if (get && p.starts_with(prefix)) return {200, concept_by_id(p.substr(prefix.size()))};
    return error_response(404, "not_found", "no endpoint " + request.method + " " + p);
  } catch (const Error& e) {
    return error_response(status_for(e.code()), e.code(), e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

const SourceAnalysis& ApiService::source(const std::string& id) const {
  const auto* s = bundle_.find_source(id);
  if (!s) throw NotFound("unknown source '" + id + "'");
  return *s;
}

double ApiService::threshold(const ApiRequest& request) const {
  const double c = number_param<double>(request, "c").value_or(bundle_.config.c);
  const bool on_grid =
      std::any_of(bundle_.c_grid.begin(), bundle_.c_grid.end(), [&](double g) { return std::abs(g - c) <= 1e-9; });
  if (!on_grid) throw InvalidArgument("c must be one of the precomputed thresholds");
  return c;
}

nlohmann::json ApiService::schema() const {
  auto sources = nlohmann::json::array();
  for (const auto& s : bundle_.sources) sources.push_back({{"source", s.source_id}, {"window", s.window}});
  return {{"schema", bundle_.schema},
          {"segment_count", bundle_.schema.segment_count()},
          {"c_grid", bundle_.c_grid},
          {"c", bundle_.config.c},
          {"delta_t", bundle_.config.delta_t},
          {"warning_level", bundle_.config.warning_level},
          {"confirm_level", bundle_.config.confirm_level},
          {"bins", bundle_.config.bins},
          {"attribute_cap", bundle_.config.attribute_cap},
          {"sources", std::move(sources)},
          {"rejected_rows", bundle_.rejects.size()}};
}

nlohmann::json ApiService::timeline(const ApiRequest& request) const {
  const bool with_levels = param(request, "level").value_or("0") != "0";
  auto sources = nlohmann::json::array();
  for (const auto& s : bundle_.sources) {
    nlohmann::json row = {{"source", s.source_id},
                          {"confirmations", s.confirmation_segments()},
                          {"warnings", warning_segments(s)}};
    if (with_levels) {
      std::vector<double> levels;
      for (const auto& b : s.batches) levels.push_back(b.drift_level);
      row["levels"] = std::move(levels);
    }
    sources.push_back(std::move(row));
  }
  return {{"segment_count", bundle_.schema.segment_count()}, {"sources", std::move(sources)}};
}

nlohmann::json ApiService::accuracy(const ApiRequest& request) const {
  const auto segments = bundle_.schema.segment_count();
  const SegmentIndex from = std::max<SegmentIndex>(number_param<SegmentIndex>(request, "from").value_or(0), 0);
  const SegmentIndex to = std::min<SegmentIndex>(number_param<SegmentIndex>(request, "to").value_or(segments - 1), segments - 1);
  if (from > to) throw InvalidArgument("from must not exceed to");
  const auto max_points = number_param<std::size_t>(request, "max_points").value_or(0);
  const double c = bundle_.sources.size() >= 2 ? threshold(request) : bundle_.config.c;
  const auto* judged = bundle_.consistency_at(c);

  std::vector<const SourceAnalysis*> selected;
  if (const auto id = param(request, "source")) {
    selected.push_back(&source(*id));
  } else {
    for (const auto& s : bundle_.sources) selected.push_back(&s);
  }

  auto out = nlohmann::json::array();
  for (const auto* s : selected) {
    std::vector<std::pair<SegmentIndex, double>> points;
    for (SegmentIndex t = from; t <= to; ++t) {
      if (const auto& a = s->accuracy[static_cast<std::size_t>(t)]) points.emplace_back(t, *a);
    }

    // Stripe height: drop from the last accuracy before the run to the run's minimum.
    auto stripes = nlohmann::json::array();
    for (const auto& run : warning_runs(*s, bundle_.config.warning_level)) {
      if (run.end < from || run.start > to) continue;
      std::optional<double> before;
      for (SegmentIndex t = run.start - 1; t >= 0 && !before; --t) before = s->accuracy[static_cast<std::size_t>(t)];
      std::optional<double> lowest;
      for (SegmentIndex t = run.start; t <= run.end; ++t) {
        if (const auto& a = s->accuracy[static_cast<std::size_t>(t)]) lowest = lowest ? std::min(*lowest, *a) : *a;
      }
      const double drop = before && lowest ? std::max(0.0, *before - *lowest) : 0.0;
      stripes.push_back({{"start", run.start}, {"end", run.end}, {"drop", drop}});
    }

    const ConsistencyResult* verdicts = nullptr;
    if (judged) {
      for (const auto& r : judged->results) {
        if (r.source_id == s->source_id) verdicts = &r;
      }
    }
    auto events = nlohmann::json::array();
    for (const auto& e : s->events) {
      if (e.segment < from || e.segment > to) continue;
      nlohmann::json ev = {{"segment", e.segment}, {"kind", to_string(e.kind)}, {"level", e.level}, {"consistent", nullptr}};
      if (e.kind == DriftKind::kConfirmed && verdicts) {
        if (const auto v = verdict_at(verdicts->verdicts, e.segment)) ev["consistent"] = *v;
      }
      events.push_back(std::move(ev));
    }
    out.push_back({{"source", s->source_id},
                   {"series", downsample(points, max_points)},
                   {"stripes", std::move(stripes)},
                   {"events", std::move(events)}});
  }
  return {{"from", from}, {"to", to}, {"c", c}, {"sources", std::move(out)}};
}

nlohmann::json ApiService::trajectories(const ApiRequest& request) const {
  return trajectories_json(bundle_, number_param<SegmentIndex>(request, "from"), number_param<SegmentIndex>(request, "to"));
}

nlohmann::json ApiService::consistency(const ApiRequest& request) const {
  if (bundle_.sources.size() < 2) throw SingleSource("consistency is undefined for a single source");
  return consistency_json(bundle_, threshold(request));
}

nlohmann::json ApiService::recommend(const ApiRequest& request) const {
  const auto id = param(request, "source");
  if (!id) throw InvalidArgument("missing query parameter 'source'");
  const auto t = number_param<SegmentIndex>(request, "t");
  if (!t) throw InvalidArgument("missing query parameter 't'");
  const auto segments = bundle_.schema.segment_count();
  if (*t < 0 || *t >= segments) throw InvalidArgument("t lies outside the segment grid");

  const auto& s = source(*id);
  const auto confirmations = s.confirmation_segments();
  const auto range = recommend_segment(confirmations, *t, segments);
  std::size_t batches = 0;
  std::size_t records = 0;
  for (SegmentIndex k = range.first; k <= range.last; ++k) {
    const auto n = s.batches[static_cast<std::size_t>(k)].size();
    if (n > 0) ++batches;
    records += n;
  }
  nlohmann::json out = {{"source", s.source_id}, {"t", *t},          {"range", range},
                        {"batches", batches},    {"records", records}, {"consistent", nullptr}};
  if (bundle_.sources.size() >= 2) {
    if (const auto* judged = bundle_.consistency_at(threshold(request))) {
      for (const auto& r : judged->results) {
        if (r.source_id == s.source_id) out["consistent"] = !r.inconsistent();
      }
    }
  }
  return out;
}

nlohmann::json ApiService::batches(const ApiRequest& request) const {
  const auto id = param(request, "source");
  if (!id) throw InvalidArgument("missing query parameter 'source'");
  const auto& s = source(*id);
  auto out = nlohmann::json::array();
  for (std::size_t t = 0; t < s.batches.size(); ++t) {
    out.push_back({{"segment", s.batches[t].segment_index},
                   {"size", s.batches[t].size()},
                   {"drift_level", s.batches[t].drift_level},
                   {"accuracy", s.accuracy[t] ? nlohmann::json(*s.accuracy[t]) : nlohmann::json(nullptr)}});
  }
  return {{"source", s.source_id}, {"batches", std::move(out)}};
}

nlohmann::json ApiService::concept_matrix(const nlohmann::json& body) const {
  const auto context = field<ConceptContext>(body, "context");
  const auto bins = field_or<std::size_t>(body, "bins", bundle_.config.bins);
  const auto cap = field_or<std::size_t>(body, "attribute_cap", bundle_.config.attribute_cap);
  if (bins == 0 || cap == 0) throw InvalidArgument("bins and attribute_cap must be positive");
  context.validate(bundle_.schema);
  const auto ranking = rank_attributes(context, data_, bundle_.schema, cap);
  const auto matrix = build_matrix(context, data_, bundle_.schema, ranking, bins);
  nlohmann::json out = {{"ranking", ranking}, {"matrix", matrix}};
  if (field_or<bool>(body, "rebased", false)) out["rebased"] = rebase_colors(matrix, global_label_ratio(data_));
  return out;
}

nlohmann::json ApiService::concept_compare(const nlohmann::json& body) const {
  const auto id = field<std::uint64_t>(body, "concept_id");
  const auto stored = store_.get(id);
  if (!stored) throw NotFound("no concept with id " + std::to_string(id));
  const auto live = field<ConceptContext>(body, "context");
  live.validate(bundle_.schema);
  return {{"concept_id", id}, {"paired", compare(*stored, live, data_, bundle_.schema)}};
}

nlohmann::json ApiService::identify(const nlohmann::json& body) const {
  const auto context = field<ConceptContext>(body, "context");
  const auto note = field_or<std::string>(body, "note", "");
  const auto cap = field_or<std::size_t>(body, "attribute_cap", bundle_.config.attribute_cap);
  const auto bins = field_or<std::size_t>(body, "bins", bundle_.config.bins);
  if (bins == 0 || cap == 0) throw InvalidArgument("bins and attribute_cap must be positive");
  const auto now = std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch());
  const auto created_at = field_or<EpochSeconds>(body, "created_at", now.count());
  context.validate(bundle_.schema);
  auto ranking = rank_attributes(context, data_, bundle_.schema, cap);
  auto matrix = build_matrix(context, data_, bundle_.schema, ranking, bins);
  const auto id = store_.identify(context, std::move(ranking), std::move(matrix), note, created_at);
  return *store_.get(id);
}

nlohmann::json ApiService::concepts() const {
  auto out = nlohmann::json::array();
  for (const auto& r : store_.list()) {
    out.push_back({{"id", r.id}, {"created_at", r.created_at}, {"note", r.note}, {"context", r.context}});
  }
  return {{"concepts", std::move(out)}};
}

nlohmann::json ApiService::concept_by_id(const std::string& id) const {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(id.data(), id.data() + id.size(), value);
  if (ec != std::errc() || ptr != id.data() + id.size()) throw InvalidArgument("concept id must be an integer");
  const auto record = store_.get(value);
  if (!record) throw NotFound("no concept with id " + id);
  return *record;
}

struct HttpServer::Impl {
  const ApiService& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(const ApiService& s) : service(s) {
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
      ApiRequest request{req.method, req.path, {}, req.body};
      for (const auto& [k, v] : req.params) request.query.emplace(k, v);
      const auto response = service.handle(request);
      res.status = response.status;
      res.set_header("Access-Control-Allow-Origin", "*");
      res.set_content(response.body.dump(), "application/json");
    };
    server.Get(R"(/api/.*)", route);
    server.Post(R"(/api/.*)", route);
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", "*");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });
    server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
      spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
    });
  }
};

HttpServer::HttpServer(const ApiService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw InvalidArgument("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw InvalidArgument("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace driftscope
