#include "evonas/rng.hpp"

#include <sstream>

#include "evonas/error.hpp"

namespace evonas {

std::string RngStream::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void RngStream::restore(const std::string& state) {
  std::istringstream is(state);
  std::mt19937_64 engine;
  is >> engine;
  if (is.fail()) throw CheckpointError("malformed rng state");
  engine_ = engine;
}

}  // namespace evonas
