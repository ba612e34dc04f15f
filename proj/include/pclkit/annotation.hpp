#pragma once

// Layered human annotation: sessions with two primary annotators per
// document and proofreader adjudication, plus Cohen's kappa agreement.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pclkit/corpus.hpp"

namespace pclkit {

enum class AnnotatorRole { PRIMARY, PROOFREADER };
template <>
struct EnumNames<AnnotatorRole> {
  static constexpr std::string_view kType = "AnnotatorRole";
  static constexpr auto kNames = std::to_array<std::string_view>({"PRIMARY", "PROOFREADER"});
};

enum class TaskStatus { PENDING, SUBMITTED };
template <>
struct EnumNames<TaskStatus> {
  static constexpr std::string_view kType = "TaskStatus";
  static constexpr auto kNames = std::to_array<std::string_view>({"PENDING", "SUBMITTED"});
};

struct Annotator {
  std::string id;
  AnnotatorRole role = AnnotatorRole::PRIMARY;

  bool operator==(const Annotator&) const = default;
};

/// Errors from session mutations, with a kind the service maps to a status.
class SessionError : public ValidationError {
 public:
  enum class Kind { UNKNOWN_ANNOTATOR, UNKNOWN_DOCUMENT, NOT_ASSIGNED, FORBIDDEN, LOCKED,
                    NOT_READY, INVALID_LABEL };

  SessionError(Kind kind, const std::string& message, std::vector<FieldError> fields = {})
      : ValidationError(message), kind_(kind), fields_(std::move(fields)) {}

  Kind kind() const { return kind_; }
  const std::vector<FieldError>& fields() const { return fields_; }

 private:
  Kind kind_;
  std::vector<FieldError> fields_;
};

/// Plain value state of a session. Readers work on copies; AnnotationSession
/// serializes mutations.
struct SessionState {
  std::string session_id;
  std::vector<Document> docs;
  std::vector<Annotator> annotators;
  /// doc id -> the two primary annotators
  std::map<std::string, std::array<std::string, 2>> assignment;
  /// (doc id, annotator id) -> submitted record
  std::map<std::pair<std::string, std::string>, LabelRecord> submissions;
  std::map<std::string, LabelRecord> final_labels;
  std::set<std::string> resolved;  // docs finalized by a proofreader
  bool locked = false;

  const Annotator* find_annotator(const std::string& id) const;
  bool is_assigned(const std::string& doc_id, const std::string& annotator_id) const;
  TaskStatus status(const std::string& doc_id, const std::string& annotator_id) const;
  std::size_t workload(const std::string& annotator_id) const;
  /// Both primary submissions, in assignment order, when both exist.
  std::optional<std::array<LabelRecord, 2>> pair_for(const std::string& doc_id) const;
  bool is_complete() const;

  bool operator==(const SessionState&) const = default;
};

/// Assigns each document to two primary annotators. Primaries are ordered by
/// a seeded key and dealt round-robin, so workloads differ by at most one.
SessionState create_session(std::string session_id, std::vector<Document> docs,
                            std::vector<Annotator> annotators, std::uint64_t seed);

/// First PENDING document (in session order) assigned to the annotator.
std::optional<std::string> next_task(const SessionState& state, const std::string& annotator_id);

/// Layered fields where two records differ: "pcl", "subcategories", "group",
/// "intensity".
std::vector<std::string> conflict_fields(const LabelRecord& a, const LabelRecord& b);

struct AdjudicationItem {
  std::string doc_id;
  std::array<LabelRecord, 2> submissions;
  std::vector<std::string> conflict_fields;
};

/// Unresolved documents whose two primary records disagree, in session order.
std::vector<AdjudicationItem> adjudication_queue(const SessionState& state);
void to_json(nlohmann::json& j, const AdjudicationItem& item);

/// Thread-safe wrapper. Every mutation is an atomic check-then-update.
class AnnotationSession {
 public:
  explicit AnnotationSession(SessionState state);

  SessionState snapshot() const;

  /// Stores a primary annotator's record. Resubmission overwrites until the
  /// document is resolved or the session is locked. Returns the stored record.
  LabelRecord submit(const std::string& annotator_id, LabelRecord record);

  /// Sets the final label of a document whose two submissions exist.
  LabelRecord resolve(const std::string& proofreader_id, LabelRecord record);

  void lock();

 private:
  mutable std::shared_mutex mutex_;
  SessionState state_;
};

void to_json(nlohmann::json& j, const SessionState& s);
SessionState session_from_json(const nlohmann::json& j);
void save_session(const SessionState& state, const std::filesystem::path& path);
SessionState load_session(const std::filesystem::path& path);

/// Every submission and final label, for export in the label line format.
std::vector<LabelRecord> export_labels(const SessionState& state);

// ---------------------------------------------------------------------------
// Agreement

/// (p_o - p_e) / (1 - p_e). Throws UndefinedResult when p_e = 1 and
/// ValidationError for empty or misaligned input.
double cohen_kappa(const std::vector<bool>& a, const std::vector<bool>& b);

using LabelPair = std::pair<LabelRecord, LabelRecord>;

struct WeakRemoved {
  double kappa = 0.0;
  std::size_t removed = 0;
  std::size_t remaining = 0;
};

/// Binary kappa after dropping items that either annotator marked MILD.
WeakRemoved kappa_weak_removed(const std::vector<LabelPair>& pairs);

/// One-vs-rest kappa per subcategory over the items both annotators marked
/// PCL. Undefined rows are empty.
std::map<Subcategory, std::optional<double>> kappa_per_subcategory(
    const std::vector<LabelPair>& pairs);

struct IAAReport {
  std::optional<double> kappa_all;
  /// Present only when some item carries a MILD label; empty inside when the
  /// value is undefined.
  std::optional<std::optional<double>> kappa_weak_removed;
  std::map<Subcategory, std::optional<double>> kappa_per_subcategory;
  std::size_t n_items = 0;
  std::size_t n_removed_weak = 0;
  std::size_t n_multiclass_items = 0;
};

/// Throws SessionError(NOT_READY) when there are no doubly annotated items.
IAAReport compute_iaa(const std::vector<LabelPair>& pairs);
IAAReport compute_iaa(const SessionState& state);
std::vector<LabelPair> label_pairs(const SessionState& state);
/// Pairs the two PRIMARY records of each document in a label file.
std::vector<LabelPair> label_pairs(const std::vector<LabelRecord>& labels);

void to_json(nlohmann::json& j, const IAAReport& r);
/// Machine-readable bytes (pretty JSON with trailing newline).
std::string iaa_summary(const IAAReport& report);
/// Binary rows then the five subcategory rows.
std::string render_iaa(const IAAReport& report);

}  // namespace pclkit
