#pragma once

#include <stdexcept>
#include <string>

namespace driftscope {

/// Base for all engine errors. `code()` is a stable machine-readable tag
/// that the HTTP layer forwards verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define DRIFTSCOPE_DEFINE_ERROR(Name, tag)                              \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& message) : Error(tag, message) {} \
  }

DRIFTSCOPE_DEFINE_ERROR(MalformedHeader, "malformed_header");
DRIFTSCOPE_DEFINE_ERROR(IngestError, "ingest_error");
DRIFTSCOPE_DEFINE_ERROR(TimestampOutOfSpan, "timestamp_out_of_span");
DRIFTSCOPE_DEFINE_ERROR(DimensionMismatch, "dimension_mismatch");
DRIFTSCOPE_DEFINE_ERROR(EmptyBatch, "empty_batch");
DRIFTSCOPE_DEFINE_ERROR(SingleSource, "single_source");
DRIFTSCOPE_DEFINE_ERROR(InsufficientData, "insufficient_data");
DRIFTSCOPE_DEFINE_ERROR(EmptySelection, "empty_selection");
DRIFTSCOPE_DEFINE_ERROR(SchemaMismatch, "schema_mismatch");
DRIFTSCOPE_DEFINE_ERROR(StorageFailure, "storage_failure");
DRIFTSCOPE_DEFINE_ERROR(ConfigError, "config_error");
DRIFTSCOPE_DEFINE_ERROR(InvalidArgument, "invalid_argument");
DRIFTSCOPE_DEFINE_ERROR(NotFound, "not_found");

#undef DRIFTSCOPE_DEFINE_ERROR

/// Pipeline failure tagged with the stage and the source being processed.
/// Keeps the code of the underlying error.
class StageError : public Error {
 public:
  StageError(std::string stage, std::string source, const std::string& message, std::string code = "stage_error")
      : Error(std::move(code), "[" + stage + (source.empty() ? "" : "/" + source) + "] " + message),
        stage_(std::move(stage)),
        source_(std::move(source)) {}

  const std::string& stage() const noexcept { return stage_; }
  const std::string& source() const noexcept { return source_; }

 private:
  std::string stage_;
  std::string source_;
};

}  // namespace driftscope
