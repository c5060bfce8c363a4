// Copyright 2026 The enkf-limit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ENKF__CSV_HPP_
#define ENKF__CSV_HPP_

#include <charconv>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

namespace enkf::csv
{

/// Locale-independent text with 17 significant digits; round-trips exactly.
inline std::string format_double(double v)
{
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  if (res.ec != std::errc{}) {
    return "nan";
  }
  return std::string(buf, res.ptr);
}

/// Shortest text that round-trips; used in messages.
inline std::string format_short(double v)
{
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc{}) {
    return "nan";
  }
  return std::string(buf, res.ptr);
}

/// Writes `text` as "# "-prefixed comment lines.
inline void write_comment_block(std::ostream & os, std::string_view text)
{
  std::istringstream is{std::string(text)};
  std::string line;
  while (std::getline(is, line)) {
    os << "# " << line << '\n';
  }
}

}  // namespace enkf::csv

#endif  // ENKF__CSV_HPP_
