#pragma once

#include <functional>
#include <string>
#include <vector>

namespace graphdpo {

using WarningHandler = std::function<void(const std::string&)>;

// Installs a process-wide sink for non-fatal diagnostics and returns the
// previous one. The default sink writes "warning: <msg>" to stderr.
WarningHandler set_warning_handler(WarningHandler handler);

void warn(const std::string& message);

// Collects warnings for the lifetime of the object, restoring the previous
// handler on destruction. Intended for tests and CLI reporting.
class ScopedWarningCapture {
 public:
  ScopedWarningCapture();
  ~ScopedWarningCapture();
  ScopedWarningCapture(const ScopedWarningCapture&) = delete;
  ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }

 private:
  std::vector<std::string> messages_;
  WarningHandler previous_;
};

}  // namespace graphdpo
