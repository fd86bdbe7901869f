#pragma once

#include <stdexcept>
#include <string>

namespace nhdp {

// Problems with user-supplied data files (as opposed to internal failures).
// The CLI maps these to their own exit code.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace nhdp
