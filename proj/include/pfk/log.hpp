#pragma once

#include <functional>
#include <iostream>
#include <string_view>
#include <utility>

namespace pfk {

using WarningSink = std::function<void(std::string_view)>;

namespace detail {
inline WarningSink& warning_sink_slot() {
  static WarningSink sink = [](std::string_view msg) { std::clog << "warning: " << msg << '\n'; };
  return sink;
}
}  // namespace detail

/// Replaces the process-wide warning sink and returns the previous one.
/// Not synchronized; install sinks before starting concurrent work.
inline WarningSink set_warning_sink(WarningSink sink) {
  return std::exchange(detail::warning_sink_slot(), std::move(sink));
}

inline void warn(std::string_view msg) {
  if (auto& sink = detail::warning_sink_slot()) sink(msg);
}

}  // namespace pfk
