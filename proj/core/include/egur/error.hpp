#pragma once

#include <stdexcept>
#include <string>

namespace egur {

// Raised for malformed or inconsistent input data (files, packs, manifests).
// Precondition violations by callers use std::invalid_argument instead.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Sink for non-fatal warnings. Defaults to stderr; tests may redirect it.
using WarningSink = void (*)(const std::string&);
void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace egur
