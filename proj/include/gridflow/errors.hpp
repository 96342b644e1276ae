#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gridflow {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input data (non-finite coordinates, bad ranges).
struct ValidationError : Error {
  using Error::Error;
};

struct ParameterError : Error {
  using Error::Error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

// Degenerate least-squares configuration; callers may fall back to identity.
struct EstimationError : Error {
  using Error::Error;
};

struct NumericalError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace gridflow
