#pragma once

#include <stdexcept>
#include <string>

namespace gmsfem {

/// Invalid user input: bad counts, malformed files, unknown mode strings.
class ConfigError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// A solve or factorization did not meet its accuracy contract.
class NumericalError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

} // namespace gmsfem
