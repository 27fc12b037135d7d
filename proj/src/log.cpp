#include "eli/log.hpp"

#include <iostream>

namespace eli {
namespace {
thread_local WarningCapture* active_capture = nullptr;
bool verbose = false;
}  // namespace

void warn(const std::string& message) {
  if (active_capture != nullptr) {
    active_capture->messages_.push_back(message);
    if (active_capture->silence_) return;
  }
  std::cerr << "warning: " << message << '\n';
}

void info(const std::string& message) {
  if (verbose) std::cerr << message << '\n';
}

void set_verbose(bool on) { verbose = on; }

WarningCapture::WarningCapture() : previous_(active_capture), silence_(true) {
  active_capture = this;
}

WarningCapture::~WarningCapture() { active_capture = previous_; }

bool WarningCapture::contains(const std::string& needle) const {
  for (const auto& m : messages_) {
    if (m.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace eli
