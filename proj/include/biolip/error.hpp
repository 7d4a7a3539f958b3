#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace biolip {

enum class Errc {
  malformed_header,
  missing_required_field,
  non_monotone_frame_index,
  degenerate_mouth_width,
  sequence_rejected,
  all_frames_invalid,
  sequence_too_short,
  invalid_config,
  shape_mismatch,
  non_finite_activation,
  stale_cache,
  non_finite_gradient,
  diverged_training,
  single_class_dataset,
  empty_video,
  single_class,
  zero_pooled_variance,
  zero_within_variance,
  series_too_short,
  degenerate_rate,
  io_failure,
  bad_checkpoint,
};

constexpr std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::malformed_header: return "MalformedHeader";
    case Errc::missing_required_field: return "MissingRequiredField";
    case Errc::non_monotone_frame_index: return "NonMonotoneFrameIndex";
    case Errc::degenerate_mouth_width: return "DegenerateMouthWidth";
    case Errc::sequence_rejected: return "SequenceRejected";
    case Errc::all_frames_invalid: return "AllFramesInvalid";
    case Errc::sequence_too_short: return "SequenceTooShort";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::non_finite_activation: return "NonFiniteActivation";
    case Errc::stale_cache: return "StaleCache";
    case Errc::non_finite_gradient: return "NonFiniteGradient";
    case Errc::diverged_training: return "DivergedTraining";
    case Errc::single_class_dataset: return "SingleClassDataset";
    case Errc::empty_video: return "EmptyVideo";
    case Errc::single_class: return "SingleClass";
    case Errc::zero_pooled_variance: return "ZeroPooledVariance";
    case Errc::zero_within_variance: return "ZeroWithinVariance";
    case Errc::series_too_short: return "SeriesTooShort";
    case Errc::degenerate_rate: return "DegenerateRate";
    case Errc::io_failure: return "IoFailure";
    case Errc::bad_checkpoint: return "BadCheckpoint";
  }
  return "Unknown";
}

/// Every domain failure in the library is reported as an Error carrying a code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace biolip
