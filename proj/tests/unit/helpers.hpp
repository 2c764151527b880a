#pragma once

#include <string>
#include <vector>

#include "egur/error.hpp"

namespace egur::testing {

// Collects warnings for the lifetime of the object.
class WarningCapture {
 public:
  WarningCapture() {
    messages().clear();
    set_warning_sink([](const std::string& m) { messages().push_back(m); });
  }
  ~WarningCapture() { set_warning_sink([](const std::string&) {}); }

  static std::vector<std::string>& messages() {
    static std::vector<std::string> m;
    return m;
  }
  bool any() const { return !messages().empty(); }
};

}  // namespace egur::testing
