#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "ghosty/error.hpp"

namespace ghosty {

// ---------------------------------------------------------------------------
// Enum <-> wire-name mapping. Each enum specialises EnumNames with a table of
// canonical snake_case names; parsing is lenient about case, '-', '_' and ' '.

template <class E>
struct EnumNames;

namespace detail {

inline std::string squash(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '-' || c == '_' || c == ' ') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

}  // namespace detail

template <class E>
constexpr std::string_view to_string(E e) {
  for (const auto& [value, name] : EnumNames<E>::table)
    if (value == e) return name;
  return "?";
}

template <class E>
std::optional<E> try_parse_enum(std::string_view text) {
  const std::string want = detail::squash(text);
  for (const auto& [value, name] : EnumNames<E>::table)
    if (detail::squash(name) == want) return value;
  return std::nullopt;
}

template <class E>
E parse_enum(std::string_view text, const std::string& field_path, ErrorCode code = ErrorCode::BadRequest) {
  if (auto v = try_parse_enum<E>(text)) return *v;
  std::string allowed;
  for (const auto& [value, name] : EnumNames<E>::table) {
    if (!allowed.empty()) allowed += ", ";
    allowed += name;
  }
  throw Error(code, "invalid value '" + std::string(text) + "' (expected one of: " + allowed + ")",
              field_path);
}

// ---------------------------------------------------------------------------
// Evidence confidence, shared by PRECOG signals and fragments imported from them.

enum class Confidence { Verified, Reported, Speculative };

template <>
struct EnumNames<Confidence> {
  static constexpr std::array<std::pair<Confidence, std::string_view>, 3> table{{
      {Confidence::Verified, "verified"},
      {Confidence::Reported, "reported"},
      {Confidence::Speculative, "speculative"},
  }};
};

/// Verified > Reported > Speculative.
constexpr int confidence_rank(Confidence c) {
  switch (c) {
    case Confidence::Verified: return 2;
    case Confidence::Reported: return 1;
    case Confidence::Speculative: return 0;
  }
  return 0;
}

constexpr Confidence weakest(Confidence a, Confidence b) {
  return confidence_rank(a) <= confidence_rank(b) ? a : b;
}

// ---------------------------------------------------------------------------
// Wall-clock time. Sessions record whole-second UTC timestamps.

using Timestamp = std::chrono::sys_seconds;
using Clock = std::function<Timestamp()>;

inline Timestamp now_utc() {
  return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
}

inline std::string format_iso8601(Timestamp t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::optional<Timestamp> parse_iso8601(std::string_view text) {
  std::tm tm{};
  const std::string s(text);
  const char* end = strptime(s.c_str(), "%Y-%m-%dT%H:%M:%S", &tm);
  if (end == nullptr) return std::nullopt;
  if (*end == 'Z') ++end;
  if (*end != '\0') return std::nullopt;
  return std::chrono::time_point_cast<std::chrono::seconds>(
      std::chrono::system_clock::from_time_t(timegm(&tm)));
}

inline Clock system_clock() { return [] { return now_utc(); }; }

inline Clock fixed_clock(Timestamp t) {
  return [t] { return t; };
}

// ---------------------------------------------------------------------------
// Text helpers.

inline std::string trim(std::string_view s) {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

inline std::string casefold(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline bool blank(std::string_view s) { return trim(s).empty(); }

inline void require_text(std::string_view value, const std::string& field_path,
                         ErrorCode code = ErrorCode::MissingField) {
  if (blank(value)) throw Error(code, field_path + " must be non-empty", field_path);
}

}  // namespace ghosty
