#pragma once

#include <stdexcept>
#include <string>

namespace nestrisk {

struct ExpiredContract : std::domain_error {
  using std::domain_error::domain_error;
};

struct InvalidContract : std::domain_error {
  using std::domain_error::domain_error;
};

struct GenerationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidImportance : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DegenerateAllocation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct MissingPilot : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace nestrisk
