#pragma once

#include <string>
#include <vector>

namespace eli {

/// Writes a warning to stderr and to the innermost active WarningCapture.
void warn(const std::string& message);

/// Also prints informational progress when verbose logging is enabled.
void info(const std::string& message);
void set_verbose(bool on);

/// Collects warnings raised on this thread while in scope.
class WarningCapture {
 public:
  WarningCapture();
  ~WarningCapture();
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }
  bool contains(const std::string& needle) const;

 private:
  friend void warn(const std::string&);
  std::vector<std::string> messages_;
  WarningCapture* previous_;
  bool silence_;
};

}  // namespace eli
