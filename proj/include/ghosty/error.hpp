#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ghosty {

enum class ErrorCode {
  // collider
  CountOutOfRange,
  HomogeneousFragments,
  ChecklistIncomplete,
  UnknownFragment,
  DuplicateFragment,
  WrongPhase,
  DuplicatePair,
  UnknownPair,
  MissingRationale,
  IncompleteMatrix,
  UnknownCollision,
  NotElectric,
  RatingOutOfRange,
  UnknownVision,
  VisionNotAdvancing,
  EmptyKillConditions,
  MissingField,
  // precog
  TooManySignals,
  MissingConfidence,
  EmptyEvidence,
  DuplicateSignal,
  UnknownSignal,
  TooFewSignals,
  MissingOverestimationReason,
  BadProbability,
  MissingAnalogy,
  EmptyScenarios,
  MissingTrigger,
  MissingCost,
  IncompleteSession,
  // integration
  SelectionOutOfBounds,
  UnfinalizedSession,
  // ledger
  StorageFailure,
  DuplicateId,
  DuplicateKeyWithinSnapshot,
  UnknownPrediction,
  AlreadyEvaluated,
  BadRubric,
  // batch
  EmptyBatch,
  LengthMismatch,
  ZeroVariance,
  ProviderFailure,
  // interface
  Timeout,
  RemoteError,
  Unconfigured,
  UnknownSession,
  BadRequest,
  PortInUse,
};

constexpr std::string_view code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::CountOutOfRange: return "count_out_of_range";
    case ErrorCode::HomogeneousFragments: return "homogeneous_fragments";
    case ErrorCode::ChecklistIncomplete: return "checklist_incomplete";
    case ErrorCode::UnknownFragment: return "unknown_fragment";
    case ErrorCode::DuplicateFragment: return "duplicate_fragment";
    case ErrorCode::WrongPhase: return "wrong_phase";
    case ErrorCode::DuplicatePair: return "duplicate_pair";
    case ErrorCode::UnknownPair: return "unknown_pair";
    case ErrorCode::MissingRationale: return "missing_rationale";
    case ErrorCode::IncompleteMatrix: return "incomplete_matrix";
    case ErrorCode::UnknownCollision: return "unknown_collision";
    case ErrorCode::NotElectric: return "not_electric";
    case ErrorCode::RatingOutOfRange: return "rating_out_of_range";
    case ErrorCode::UnknownVision: return "unknown_vision";
    case ErrorCode::VisionNotAdvancing: return "vision_not_advancing";
    case ErrorCode::EmptyKillConditions: return "empty_kill_conditions";
    case ErrorCode::MissingField: return "missing_field";
    case ErrorCode::TooManySignals: return "too_many_signals";
    case ErrorCode::MissingConfidence: return "missing_confidence";
    case ErrorCode::EmptyEvidence: return "empty_evidence";
    case ErrorCode::DuplicateSignal: return "duplicate_signal";
    case ErrorCode::UnknownSignal: return "unknown_signal";
    case ErrorCode::TooFewSignals: return "too_few_signals";
    case ErrorCode::MissingOverestimationReason: return "missing_overestimation_reason";
    case ErrorCode::BadProbability: return "bad_probability";
    case ErrorCode::MissingAnalogy: return "missing_analogy";
    case ErrorCode::EmptyScenarios: return "empty_scenarios";
    case ErrorCode::MissingTrigger: return "missing_trigger";
    case ErrorCode::MissingCost: return "missing_cost";
    case ErrorCode::IncompleteSession: return "incomplete_session";
    case ErrorCode::SelectionOutOfBounds: return "selection_out_of_bounds";
    case ErrorCode::UnfinalizedSession: return "unfinalized_session";
    case ErrorCode::StorageFailure: return "storage_failure";
    case ErrorCode::DuplicateId: return "duplicate_id";
    case ErrorCode::DuplicateKeyWithinSnapshot: return "duplicate_key_within_snapshot";
    case ErrorCode::UnknownPrediction: return "unknown_prediction";
    case ErrorCode::AlreadyEvaluated: return "already_evaluated";
    case ErrorCode::BadRubric: return "bad_rubric";
    case ErrorCode::EmptyBatch: return "empty_batch";
    case ErrorCode::LengthMismatch: return "length_mismatch";
    case ErrorCode::ZeroVariance: return "zero_variance";
    case ErrorCode::ProviderFailure: return "provider_failure";
    case ErrorCode::Timeout: return "timeout";
    case ErrorCode::RemoteError: return "remote_error";
    case ErrorCode::Unconfigured: return "unconfigured";
    case ErrorCode::UnknownSession: return "unknown_session";
    case ErrorCode::BadRequest: return "bad_request";
    case ErrorCode::PortInUse: return "port_in_use";
  }
  return "unknown";
}

/// Every validation or state-machine failure raised by the engine. `field_path`
/// names the offending input field (dotted, with [i] for list elements) and is
/// empty when the failure is not tied to a single field.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string field_path = {})
      : std::runtime_error(std::move(message)), code_(code), field_path_(std::move(field_path)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& field_path() const noexcept { return field_path_; }

 private:
  ErrorCode code_;
  std::string field_path_;
};

/// Storage-layer failures are distinguished so the CLI can map them to exit 2.
inline bool is_storage_error(ErrorCode c) { return c == ErrorCode::StorageFailure || c == ErrorCode::PortInUse; }

}  // namespace ghosty
