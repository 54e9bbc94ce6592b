#pragma once

#include <stdexcept>
#include <string>

namespace evonas {

// Base for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data: wrong genome length, malformed config, invalid graph.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// The worker pool can no longer make progress.
class PoolFailure : public Error {
 public:
  using Error::Error;
};

// Two different fitness values were stored for one genome.
class CacheConflict : public Error {
 public:
  using Error::Error;
};

// Checkpoint could not be read or written.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace evonas
