#pragma once

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ghosty/precog.hpp"
#include "ghosty/serialize.hpp"

namespace ghosty::ledger {

enum class Protocol { Ghosty, Precog, Integration };

}  // namespace ghosty::ledger

namespace ghosty {
template <>
struct EnumNames<ledger::Protocol> {
  using P = ledger::Protocol;
  static constexpr std::array<std::pair<P, std::string_view>, 3> table{{
      {P::Ghosty, "ghosty"},
      {P::Precog, "precog"},
      {P::Integration, "integration"},
  }};
};
}  // namespace ghosty

namespace ghosty::ledger {

inline constexpr int kSchemaVersion = 1;

struct SessionRecord {
  std::string record_id;
  Protocol protocol = Protocol::Ghosty;
  std::string theme_key;
  Timestamp created_at{};
  int schema_version = kSchemaVersion;
  json payload;

  /// The canonical one-line encoding written to the store.
  std::string encode() const {
    json j = {{"record_id", record_id},
              {"protocol", to_string(protocol)},
              {"theme_key", theme_key},
              {"created_at", format_iso8601(created_at)},
              {"schema_version", schema_version},
              {"payload", payload}};
    return j.dump();
  }

  static SessionRecord decode(const std::string& line) {
    const json j = json::parse(line);
    SessionRecord r;
    r.record_id = io::str(j, "record_id", "");
    r.protocol = io::enumeration<Protocol>(j, "protocol", "");
    r.theme_key = io::str_or(j, "theme_key", "");
    const auto ts = parse_iso8601(io::str(j, "created_at", ""));
    if (!ts) throw Error(ErrorCode::StorageFailure, "bad created_at in record " + r.record_id, "created_at");
    r.created_at = *ts;
    r.schema_version = io::integer(j, "schema_version", "");
    r.payload = io::need(j, "payload", "");
    return r;
  }

  std::string payload_kind() const { return payload.is_object() ? payload.value("kind", "") : std::string{}; }
};

// ---------------------------------------------------------------------------
// Append-only store: one JSON record per line. A single process-wide writer is
// enforced with flock(LOCK_EX); readers take LOCK_SH and see a consistent
// prefix. A torn final line (no newline, or unparsable) is skipped on read and
// cut away before the next append.

class Store {
 public:
  explicit Store(std::string path, std::ostream* warnings = &std::cerr)
      : path_(std::move(path)), warn_(warnings) {
    fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) fail("open");
    std::lock_guard lk(mu_);
    FileLock fl(fd_, LOCK_SH);
    refresh_locked();
  }

  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;
  ~Store() {
    if (fd_ >= 0) ::close(fd_);
  }

  const std::string& path() const { return path_; }

  /// Appends one record and returns its id. Existing records are never touched.
  std::string append(const SessionRecord& rec) {
    const std::string line = rec.encode();
    std::lock_guard lk(mu_);
    FileLock fl(fd_, LOCK_EX);
    refresh_locked();
    if (rec.record_id.empty()) throw Error(ErrorCode::StorageFailure, "record_id must be set", "record_id");
    if (index_.contains(rec.record_id))
      throw Error(ErrorCode::DuplicateId, "record '" + rec.record_id + "' already exists", "record_id");
    if (torn_bytes_ > 0) {
      if (warn_) *warn_ << "ledger: discarding torn trailing record (" << torn_bytes_ << " bytes) in " << path_ << "\n";
      if (::ftruncate(fd_, static_cast<off_t>(offset_)) != 0) fail("truncate");
      torn_bytes_ = 0;
    }
    const std::string out = line + "\n";
    std::size_t written = 0;
    while (written < out.size()) {
      const ssize_t n = ::pwrite(fd_, out.data() + written, out.size() - written,
                                 static_cast<off_t>(offset_ + written));
      if (n < 0) {
        if (errno == EINTR) continue;
        fail("write");
      }
      written += static_cast<std::size_t>(n);
    }
    if (::fdatasync(fd_) != 0) fail("sync");
    offset_ += out.size();
    index_.emplace(rec.record_id, lines_.size());
    lines_.push_back(line);
    return rec.record_id;
  }

  /// Raw encoded lines of every complete record, in append order.
  std::vector<std::string> raw_lines() {
    std::lock_guard lk(mu_);
    FileLock fl(fd_, LOCK_SH);
    refresh_locked();
    return lines_;
  }

  std::vector<SessionRecord> records() {
    std::vector<SessionRecord> out;
    for (const auto& l : raw_lines()) out.push_back(SessionRecord::decode(l));
    return out;
  }

  std::optional<SessionRecord> find(const std::string& record_id) {
    std::lock_guard lk(mu_);
    FileLock fl(fd_, LOCK_SH);
    refresh_locked();
    auto it = index_.find(record_id);
    if (it == index_.end()) return std::nullopt;
    return SessionRecord::decode(lines_[it->second]);
  }

  std::size_t size() {
    std::lock_guard lk(mu_);
    FileLock fl(fd_, LOCK_SH);
    refresh_locked();
    return lines_.size();
  }

 private:
  struct FileLock {
    FileLock(int fd, int mode) : fd_(fd) {
      while (::flock(fd_, mode) != 0)
        if (errno != EINTR) throw Error(ErrorCode::StorageFailure, std::string("flock: ") + std::strerror(errno));
    }
    ~FileLock() { ::flock(fd_, LOCK_UN); }
    int fd_;
  };

  [[noreturn]] void fail(const char* what) const {
    throw Error(ErrorCode::StorageFailure, std::string("ledger ") + what + " failed for " + path_ + ": " +
                                               std::strerror(errno));
  }

  /// Reads whatever complete lines were appended since the last refresh.
  void refresh_locked() {
    struct stat st{};
    if (::fstat(fd_, &st) != 0) fail("stat");
    const auto size = static_cast<std::size_t>(st.st_size);
    if (size < offset_) throw Error(ErrorCode::StorageFailure, "ledger " + path_ + " shrank underneath the reader");
    if (size == offset_) {
      torn_bytes_ = 0;
      return;
    }
    std::string buf(size - offset_, '\0');
    std::size_t got = 0;
    while (got < buf.size()) {
      const ssize_t n = ::pread(fd_, buf.data() + got, buf.size() - got, static_cast<off_t>(offset_ + got));
      if (n < 0) {
        if (errno == EINTR) continue;
        fail("read");
      }
      if (n == 0) break;
      got += static_cast<std::size_t>(n);
    }
    buf.resize(got);
    std::size_t pos = 0;
    while (true) {
      const auto nl = buf.find('\n', pos);
      if (nl == std::string::npos) break;
      std::string line = buf.substr(pos, nl - pos);
      std::string id;
      try {
        id = SessionRecord::decode(line).record_id;
      } catch (const std::exception& e) {
        // A parse failure is only tolerable on the final line.
        if (buf.find('\n', nl + 1) == std::string::npos && nl + 1 == buf.size()) {
          torn_bytes_ = buf.size() - pos;
          warn_torn("corrupt trailing record");
          return;
        }
        throw Error(ErrorCode::StorageFailure,
                    "ledger " + path_ + ": corrupt record at byte " + std::to_string(offset_ + pos) + ": " + e.what());
      }
      index_.emplace(id, lines_.size());
      lines_.push_back(std::move(line));
      offset_ += nl + 1 - pos;
      pos = nl + 1;
    }
    torn_bytes_ = buf.size() - pos;
    if (torn_bytes_ > 0) warn_torn("partial trailing line");
  }

  void warn_torn(const char* what) {
    if (warned_at_ == offset_ + torn_bytes_) return;
    warned_at_ = offset_ + torn_bytes_;
    if (warn_) *warn_ << "ledger: ignoring " << what << " in " << path_ << "\n";
  }

  std::string path_;
  std::ostream* warn_;
  int fd_ = -1;
  std::mutex mu_;
  std::size_t offset_ = 0;      // bytes consumed as complete records
  std::size_t torn_bytes_ = 0;  // trailing bytes that do not form a record
  std::size_t warned_at_ = 0;
  std::vector<std::string> lines_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Signal history

enum class DeltaClass { Strengthened, Stable, Weakened, New, Dead };

struct SignalDelta {
  std::string signal_key;
  DeltaClass classification = DeltaClass::Stable;
  std::optional<precog::Strength> prev_strength;
  std::optional<precog::Strength> curr_strength;
  bool priority = false;

  bool operator==(const SignalDelta&) const = default;
};

}  // namespace ghosty::ledger

namespace ghosty {
template <>
struct EnumNames<ledger::DeltaClass> {
  using D = ledger::DeltaClass;
  static constexpr std::array<std::pair<D, std::string_view>, 5> table{{
      {D::Strengthened, "strengthened"},
      {D::Stable, "stable"},
      {D::Weakened, "weakened"},
      {D::New, "new"},
      {D::Dead, "dead"},
  }};
};
}  // namespace ghosty

namespace ghosty::ledger {

namespace detail {

inline std::map<std::string, const precog::Signal*> by_key(const std::vector<precog::Signal>& snapshot,
                                                            const char* which) {
  std::map<std::string, const precog::Signal*> out;
  for (std::size_t i = 0; i < snapshot.size(); ++i)
    if (!out.emplace(snapshot[i].key, &snapshot[i]).second)
      throw Error(ErrorCode::DuplicateKeyWithinSnapshot, "signal key '" + snapshot[i].key + "' repeated",
                  std::string(which) + "[" + std::to_string(i) + "].key");
  return out;
}

}  // namespace detail

/// Classifies every key of prev ∪ curr. Strength rank decides first
/// (Weak < Emerging < Strong); on a tie, a change in direction decides.
/// Output is ordered by key.
inline std::vector<SignalDelta> diff_signals(const std::vector<precog::Signal>& prev,
                                             const std::vector<precog::Signal>& curr) {
  const auto before = detail::by_key(prev, "prev");
  const auto after = detail::by_key(curr, "curr");
  std::set<std::string> keys;
  for (const auto& [k, _] : before) keys.insert(k);
  for (const auto& [k, _] : after) keys.insert(k);

  std::vector<SignalDelta> out;
  for (const auto& k : keys) {
    SignalDelta d;
    d.signal_key = k;
    auto b = before.find(k);
    auto a = after.find(k);
    if (b != before.end()) d.prev_strength = b->second->strength;
    if (a != after.end()) d.curr_strength = a->second->strength;
    if (b == before.end()) {
      d.classification = DeltaClass::New;
    } else if (a == after.end()) {
      d.classification = DeltaClass::Dead;
    } else {
      const int ds = static_cast<int>(a->second->strength) - static_cast<int>(b->second->strength);
      const int dd = static_cast<int>(a->second->direction) - static_cast<int>(b->second->direction);
      const int delta = ds != 0 ? ds : dd;
      d.classification = delta > 0 ? DeltaClass::Strengthened : delta < 0 ? DeltaClass::Weakened : DeltaClass::Stable;
    }
    d.priority = d.classification == DeltaClass::New || d.classification == DeltaClass::Dead;
    out.push_back(std::move(d));
  }
  return out;
}

inline void to_json(json& j, const SignalDelta& d) {
  j = {{"signal_key", d.signal_key},
       {"classification", to_string(d.classification)},
       {"prev_strength", d.prev_strength ? json(to_string(*d.prev_strength)) : json(nullptr)},
       {"curr_strength", d.curr_strength ? json(to_string(*d.curr_strength)) : json(nullptr)},
       {"priority", d.priority}};
}

// ---------------------------------------------------------------------------
// Prediction feedback loop

enum class Outcome { Hit, Miss, Partial };

}  // namespace ghosty::ledger

namespace ghosty {
template <>
struct EnumNames<ledger::Outcome> {
  using O = ledger::Outcome;
  static constexpr std::array<std::pair<O, std::string_view>, 3> table{{
      {O::Hit, "hit"},
      {O::Miss, "miss"},
      {O::Partial, "partial"},
  }};
};
}  // namespace ghosty

namespace ghosty::ledger {

struct PredictionRecord {
  std::string id;
  std::string theme_key;
  std::string statement;
  std::string horizon_start;
  std::string horizon_end;
  std::optional<Outcome> outcome;
  std::string timing_accuracy;
  std::string contrarian_value;

  bool operator==(const PredictionRecord&) const = default;
};

inline void to_json(json& j, const PredictionRecord& p) {
  j = {{"kind", "prediction"},
       {"id", p.id},
       {"theme_key", p.theme_key},
       {"statement", p.statement},
       {"horizon", {{"start", p.horizon_start}, {"end", p.horizon_end}}},
       {"outcome", p.outcome ? json(to_string(*p.outcome)) : json(nullptr)},
       {"timing_accuracy", p.timing_accuracy},
       {"contrarian_value", p.contrarian_value}};
}

struct AccuracySummary {
  int hit = 0;
  int miss = 0;
  int partial = 0;
  int pending = 0;
  bool operator==(const AccuracySummary&) const = default;
};

inline void to_json(json& j, const AccuracySummary& a) {
  j = {{"hit", a.hit}, {"miss", a.miss}, {"partial", a.partial}, {"pending", a.pending}};
}

}  // namespace ghosty::ledger

namespace ghosty {
template <>
inline ledger::PredictionRecord parse(const json& j, const std::string& path) {
  ledger::PredictionRecord p;
  p.id = io::str_or(j, "id", path);
  p.theme_key = io::str(j, "theme_key", path);
  p.statement = io::str(j, "statement", path);
  if (const json* h = io::find(j, "horizon")) {
    const std::string hp = io::join(path, "horizon");
    p.horizon_start = io::str_or(*h, "start", hp);
    p.horizon_end = io::str_or(*h, "end", hp);
  }
  p.outcome = io::optional_enum<ledger::Outcome>(j, "outcome", path);
  p.timing_accuracy = io::str_or(j, "timing_accuracy", path);
  p.contrarian_value = io::str_or(j, "contrarian_value", path);
  return p;
}
}  // namespace ghosty

namespace ghosty::ledger {

/// Latest snapshot of every prediction, keyed by prediction id.
inline std::map<std::string, PredictionRecord> predictions(Store& store) {
  std::map<std::string, PredictionRecord> out;
  for (const auto& r : store.records())
    if (r.payload_kind() == "prediction") {
      auto p = parse<PredictionRecord>(r.payload);
      out[p.id] = std::move(p);
    }
  return out;
}

inline std::string record_prediction(Store& store, PredictionRecord p, Timestamp now = now_utc()) {
  require_text(p.theme_key, "theme_key");
  require_text(p.statement, "statement");
  if (p.outcome) throw Error(ErrorCode::BadRequest, "a new prediction cannot carry an outcome", "outcome");
  auto existing = predictions(store);
  if (p.id.empty()) p.id = "p" + std::to_string(existing.size() + 1);
  if (existing.contains(p.id)) throw Error(ErrorCode::DuplicateId, "prediction '" + p.id + "' exists", "id");
  store.append({p.id + "@1", Protocol::Precog, p.theme_key, now, kSchemaVersion, json(p)});
  return p.id;
}

inline PredictionRecord evaluate_prediction(Store& store, const std::string& id, Outcome outcome,
                                            std::string timing_accuracy, std::string contrarian_value,
                                            Timestamp now = now_utc()) {
  auto all = predictions(store);
  auto it = all.find(id);
  if (it == all.end()) throw Error(ErrorCode::UnknownPrediction, "no prediction '" + id + "'", "id");
  if (it->second.outcome)
    throw Error(ErrorCode::AlreadyEvaluated, "prediction '" + id + "' already evaluated", "outcome");
  PredictionRecord p = it->second;
  p.outcome = outcome;
  p.timing_accuracy = std::move(timing_accuracy);
  p.contrarian_value = std::move(contrarian_value);
  store.append({p.id + "@2", Protocol::Precog, p.theme_key, now, kSchemaVersion, json(p)});
  return p;
}

inline AccuracySummary accuracy_summary(Store& store, const std::string& theme_key) {
  AccuracySummary s;
  for (const auto& [_, p] : predictions(store)) {
    if (p.theme_key != theme_key) continue;
    if (!p.outcome) {
      ++s.pending;
      continue;
    }
    switch (*p.outcome) {
      case Outcome::Hit: ++s.hit; break;
      case Outcome::Miss: ++s.miss; break;
      case Outcome::Partial: ++s.partial; break;
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Rubric

inline constexpr std::size_t kRubricDimensions = 8;
inline constexpr int kRubricMaxPerDimension = 10;

inline std::vector<std::string> default_rubric_labels() {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= kRubricDimensions; ++i) out.push_back("dimension_" + std::to_string(i));
  return out;
}

struct RubricScore {
  std::string target_ref;
  std::vector<int> dimension_scores;
  std::vector<std::string> dimension_labels;
  int total = 0;

  bool operator==(const RubricScore&) const = default;
};

inline RubricScore score_rubric(std::string target_ref, const std::vector<int>& scores,
                                std::vector<std::string> labels = default_rubric_labels()) {
  if (scores.size() != kRubricDimensions)
    throw Error(ErrorCode::BadRubric, "rubric needs exactly 8 scores, got " + std::to_string(scores.size()), "scores");
  if (labels.size() != kRubricDimensions)
    throw Error(ErrorCode::BadRubric, "rubric needs exactly 8 labels, got " + std::to_string(labels.size()), "labels");
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] < 0 || scores[i] > kRubricMaxPerDimension)
      throw Error(ErrorCode::BadRubric, "each score must be in 0..10", "scores[" + std::to_string(i) + "]");
  return {std::move(target_ref), scores, std::move(labels), std::accumulate(scores.begin(), scores.end(), 0)};
}

inline void to_json(json& j, const RubricScore& r) {
  j = {{"kind", "rubric"},
       {"target_ref", r.target_ref},
       {"dimension_scores", r.dimension_scores},
       {"dimension_labels", r.dimension_labels},
       {"total", r.total},
       {"max", static_cast<int>(kRubricDimensions) * kRubricMaxPerDimension}};
}

}  // namespace ghosty::ledger
