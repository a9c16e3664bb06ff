#pragma once

#include <stdexcept>
#include <string>

namespace sarnarrator {

// Single exception type carrying a stable machine-readable code next to the
// human-readable message. Codes are what tests and the CLI dispatch on.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

namespace errc {
inline constexpr const char* malformed_document = "MalformedDocument";
inline constexpr const char* dangling_reference = "DanglingReference";
inline constexpr const char* invalid_box = "InvalidBox";
inline constexpr const char* unreadable_image = "UnreadableImage";
inline constexpr const char* empty_image = "EmptyImage";
inline constexpr const char* too_small = "TooSmall";
inline constexpr const char* insufficient_examples = "InsufficientExamples";
inline constexpr const char* endpoint_error = "EndpointError";
inline constexpr const char* empty_completion = "EmptyCompletion";
inline constexpr const char* invalid_argument = "InvalidArgument";
inline constexpr const char* duplicate_id = "DuplicateId";
inline constexpr const char* empty_manifest = "EmptyManifest";
inline constexpr const char* degenerate_split = "DegenerateSplit";
inline constexpr const char* no_references = "NoReferences";
inline constexpr const char* alignment_mismatch = "AlignmentMismatch";
inline constexpr const char* k_out_of_range = "KOutOfRange";
inline constexpr const char* config_error = "ConfigError";
inline constexpr const char* io_error = "IoError";
}  // namespace errc

[[noreturn]] inline void raise(std::string code, const std::string& message) {
  throw Error(std::move(code), message);
}

}  // namespace sarnarrator
