// SPDX-License-Identifier: Apache-2.0
#include "fgvp/log.hpp"

#include <iostream>
#include <mutex>

namespace fgvp {

namespace {

std::mutex& sink_mutex() {
  static std::mutex mu;
  return mu;
}

WarningSink& sink() {
  static WarningSink s = [](std::string_view msg) { std::cerr << "fgvp: warning: " << msg << '\n'; };
  return s;
}

}  // namespace

WarningSink set_warning_sink(WarningSink s) {
  std::lock_guard lock(sink_mutex());
  WarningSink prev = std::move(sink());
  sink() = std::move(s);
  return prev;
}

void warn(std::string_view message) {
  std::lock_guard lock(sink_mutex());
  if (sink()) sink()(message);
}

}  // namespace fgvp
