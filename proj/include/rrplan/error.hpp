#pragma once

#include <stdexcept>
#include <string>

namespace rrplan {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed maze text, index file or CSV input.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A maze or state violates a structural precondition (blocked endpoint,
/// out-of-bounds cell, wrong number of subgoals, ...).
class InvalidMaze : public Error {
 public:
  using Error::Error;
};

/// Target cannot be reached from the search start.
class Unreachable : public Error {
 public:
  using Error::Error;
};

}  // namespace rrplan
