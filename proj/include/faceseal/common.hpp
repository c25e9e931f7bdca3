#pragma once

#include <stdexcept>
#include <string>

namespace faceseal {

// Error taxonomy used across the library:
//   std::invalid_argument - caller passed a bad value (wrong shape, out of range)
//   io_error             - filesystem or codec failure
//   config_error         - inconsistent or unsupported configuration
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct format_error : io_error {
  using io_error::io_error;
};

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace faceseal
