#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vjspoof {

enum class Errc {
  file_not_found,
  malformed_format,
  unsupported_depth,
  io_error,
  dimension_mismatch,
  malformed_xml,
  unsupported_feature,
  schema_mismatch,
  image_too_small,
  empty_input,
  too_few_frames,
  degenerate_data,
  no_face_found,
  multiple_faces_found,
  post_replacement_detection_lost,
  initial_oracle_failure,
  invalid_config,
};

constexpr std::string_view errc_name(Errc e) noexcept {
  switch (e) {
    case Errc::file_not_found: return "file-not-found";
    case Errc::malformed_format: return "malformed-format";
    case Errc::unsupported_depth: return "unsupported-depth";
    case Errc::io_error: return "io-error";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::malformed_xml: return "malformed-xml";
    case Errc::unsupported_feature: return "unsupported-feature";
    case Errc::schema_mismatch: return "schema-mismatch";
    case Errc::image_too_small: return "image-too-small";
    case Errc::empty_input: return "empty-input";
    case Errc::too_few_frames: return "too-few-frames";
    case Errc::degenerate_data: return "degenerate-data";
    case Errc::no_face_found: return "no-face-found";
    case Errc::multiple_faces_found: return "multiple-faces-found";
    case Errc::post_replacement_detection_lost: return "post-replacement-detection-lost";
    case Errc::initial_oracle_failure: return "initial-oracle-failure";
    case Errc::invalid_config: return "invalid-config";
  }
  return "unknown";
}

/// Every failure in the library is reported as an Error carrying a stable
/// kebab-case code name plus the offending detail.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace vjspoof
