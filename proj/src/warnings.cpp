#include "graphdpo/warnings.hpp"

#include <iostream>
#include <mutex>

namespace graphdpo {
namespace {

std::mutex& handler_mutex() {
  static std::mutex m;
  return m;
}

WarningHandler& current_handler() {
  static WarningHandler handler = [](const std::string& msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return handler;
}

}  // namespace

WarningHandler set_warning_handler(WarningHandler handler) {
  std::lock_guard lock(handler_mutex());
  WarningHandler previous = std::move(current_handler());
  current_handler() = std::move(handler);
  return previous;
}

void warn(const std::string& message) {
  std::lock_guard lock(handler_mutex());
  if (current_handler()) current_handler()(message);
}

ScopedWarningCapture::ScopedWarningCapture() {
  // The handler is invoked under handler_mutex, so appends are serialized.
  previous_ = set_warning_handler(
      [this](const std::string& msg) { messages_.push_back(msg); });
}

ScopedWarningCapture::~ScopedWarningCapture() {
  set_warning_handler(std::move(previous_));
}

}  // namespace graphdpo
