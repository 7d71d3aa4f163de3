#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace crowd {

// Thrown by every rejected precondition in the library. Callers that want a
// nonzero exit with a clean message (the CLI) catch this at the top level.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
inline void append(std::ostringstream&) {}
template <typename T, typename... Rest>
void append(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  append(os, rest...);
}
}  // namespace detail

template <typename... Args>
std::string msg(const Args&... args) {
  std::ostringstream os;
  detail::append(os, args...);
  return os.str();
}

template <typename... Args>
[[noreturn]] inline void fail(const Args&... args) {
  throw Error(msg(args...));
}

template <typename... Args>
inline void require(bool cond, const Args&... args) {
  if (!cond) fail(args...);
}

// splitmix64 step; used to derive independent seed streams.
std::uint64_t mix64(std::uint64_t a, std::uint64_t b);

// Round-trip decimal form (%.17g).
std::string fmt_double(double v);

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace crowd
