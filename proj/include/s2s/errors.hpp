#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace s2s {

// Bad inputs: malformed config, out-of-range arguments, violated preconditions.
// The CLI maps these to exit code 1.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failures while doing otherwise-valid work (I/O, client failures, internal
// inconsistencies). The CLI maps these to exit code 2.
struct RuntimeError : std::runtime_error {
  explicit RuntimeError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
inline void append_all(std::ostringstream&) {}
template <typename T, typename... Rest>
void append_all(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  append_all(os, rest...);
}
}  // namespace detail

template <typename... Args>
std::string concat(const Args&... args) {
  std::ostringstream os;
  detail::append_all(os, args...);
  return os.str();
}

template <typename... Args>
void require(bool cond, const Args&... args) {
  if (!cond) throw ValidationError(concat(args...));
}

template <typename... Args>
void ensure(bool cond, const Args&... args) {
  if (!cond) throw RuntimeError(concat(args...));
}

}  // namespace s2s
