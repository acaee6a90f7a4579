#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "driftscope/concept/store.hpp"
#include "driftscope/service/pipeline.hpp"

namespace driftscope {

struct ApiRequest {
  std::string method = "GET";
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// Transport-independent handler for the JSON API. Read endpoints are views
/// of the immutable bundle; concept endpoints compute per request. Errors are
/// returned as {"error": {"code", "message"}}.
class ApiService {
 public:
  ApiService(const AnalysisBundle& bundle, ConceptStore& store);

  ApiResponse handle(const ApiRequest& request) const;

  const std::vector<SourceBatches>& data() const noexcept { return data_; }

 private:
  nlohmann::json schema() const;
  nlohmann::json timeline(const ApiRequest& request) const;
  nlohmann::json accuracy(const ApiRequest& request) const;
  nlohmann::json trajectories(const ApiRequest& request) const;
  nlohmann::json consistency(const ApiRequest& request) const;
  nlohmann::json recommend(const ApiRequest& request) const;
  nlohmann::json batches(const ApiRequest& request) const;
  nlohmann::json concept_matrix(const nlohmann::json& body) const;
  nlohmann::json concept_compare(const nlohmann::json& body) const;
  nlohmann::json identify(const nlohmann::json& body) const;
  nlohmann::json concepts() const;
  nlohmann::json concept_by_id(const std::string& id) const;

  double threshold(const ApiRequest& request) const;
  const SourceAnalysis& source(const std::string& id) const;

  const AnalysisBundle& bundle_;
  ConceptStore& store_;
  std::vector<SourceBatches> data_;
};

/// HTTP front end for ApiService.
class HttpServer {
 public:
  explicit HttpServer(const ApiService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and serves on a background thread; port 0 picks a free port.
  /// Returns the bound port.
  int start(const std::string& host, int port);
  /// Binds and serves on the calling thread until stop() is called.
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace driftscope
