#pragma once

#include <stdexcept>

namespace mdtc {

// Malformed configuration or user input. The CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Runtime failures. The CLI maps these (and any other exception) to exit code 1.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct VocabError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RoutingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mdtc
