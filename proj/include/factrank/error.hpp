#pragma once

#include <stdexcept>
#include <string>

namespace factrank {

/// Raised for malformed inputs: corpus files, resources, model files and
/// configuration. Messages carry file/line context where available.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace factrank
