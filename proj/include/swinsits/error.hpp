/*
 * Copyright 2026 The swinsits Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef SWINSITS_ERROR_HPP
#define SWINSITS_ERROR_HPP

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace swinsits {

enum class ErrorKind {
  Dimension,
  Parameter,
  Config,
  Format,
  Range,
  Degenerate,
  Graph,
  Io,
  Palette,
  Unsupported,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; the kind maps onto C API status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& shape);

namespace detail {

template <typename... Args>
[[noreturn]] void raise(ErrorKind kind, const Args&... args) {
  std::ostringstream os;
  (os << ... << args);
  throw Error(kind, os.str());
}

}  // namespace detail

#define SWINSITS_CHECK(cond, kind, ...)                     \
  do {                                                      \
    if (!(cond)) ::swinsits::detail::raise(kind, __VA_ARGS__); \
  } while (0)

}  // namespace swinsits

#endif  // SWINSITS_ERROR_HPP
