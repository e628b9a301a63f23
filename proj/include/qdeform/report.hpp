#pragma once

// Flat verification report: one residual per row, so the JSON and CSV forms
// carry identical information.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace qdeform {

inline constexpr const char* kToolVersion = "0.3.0";

struct ReportEntry {
  std::string tag;    // equation tag, e.g. "2.4"
  std::string check;  // short name of the identity
  std::size_t block = 0;
  std::string norm = "max-abs";
  double value = 0.0;
  double threshold = 0.0;
  bool informational = false;  // reported, never gating
  bool lower_bound = false;    // pass when value > threshold instead of value < threshold

  bool passed() const {
    if (informational) return true;
    return lower_bound ? value > threshold : value < threshold;
  }
  std::string comparison() const { return informational ? "" : (lower_bound ? ">" : "<"); }
};

inline ReportEntry gate(std::string tag, std::string check, std::size_t block, double value, double threshold) {
  return ReportEntry{std::move(tag), std::move(check), block, "max-abs", value, threshold, false, false};
}

inline ReportEntry gate_above(std::string tag, std::string check, std::size_t block, double value, double threshold) {
  return ReportEntry{std::move(tag), std::move(check), block, "none", value, threshold, false, true};
}

inline ReportEntry info(std::string tag, std::string check, std::size_t block, double value) {
  return ReportEntry{std::move(tag), std::move(check), block, "max-abs", value, 0.0, true, false};
}

inline bool all_passed(const std::vector<ReportEntry>& entries) {
  for (const auto& e : entries)
    if (!e.passed()) return false;
  return true;
}

/// Tags an entry may carry.
inline const std::vector<std::string>& known_tags() {
  static const std::vector<std::string> tags = {"1.1", "2.1", "2.4",  "2.8",  "2.9", "3.1",
                                                "3.8", "3.10", "3.11", "3.12", "3.18", "3.25",
                                                "4.7", "4.9", "5.4–5.7", "§2-map"};
  return tags;
}

}  // namespace qdeform
