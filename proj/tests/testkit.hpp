/// @file testkit.hpp
/// @brief Minimal record/run test kit: one PASS/FAIL line per check, summary
///        at exit, process exit code = number of failures (clamped).

#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

namespace testkit {

inline int& failures() {
  static int f = 0;
  return f;
}

inline int& checks() {
  static int c = 0;
  return c;
}

inline void record(const std::string& name, bool ok, const std::string& note = "") {
  ++checks();
  if (!ok) ++failures();
  std::printf("%s  %s%s%s\n", ok ? "PASS" : "FAIL", name.c_str(),
              note.empty() ? "" : "  ", note.c_str());
  std::fflush(stdout);
}

inline std::string qoi(double value, double threshold) {
  std::ostringstream ss;
  ss.precision(3);
  ss << std::scientific << "(val=" << value << ", thr=" << threshold << ")";
  return ss.str();
}

inline bool close_abs(double a, double b, double tol) { return std::abs(a - b) <= tol; }

inline bool close_rel(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

template <typename E, typename Fn>
bool throws(Fn&& fn) {
  try {
    fn();
  } catch (const E&) {
    return true;
  } catch (...) {
    return false;
  }
  return false;
}

inline int run(const std::string& suite, const std::function<void()>& body) {
  std::printf("=== %s ===\n", suite.c_str());
  try {
    body();
  } catch (const std::exception& e) {
    record(std::string("suite aborted by exception: ") + e.what(), false);
  }
  std::printf("=== %s: %d checks, %d failures ===\n", suite.c_str(), checks(), failures());
  return failures() == 0 ? 0 : 1;
}

}  // namespace testkit
