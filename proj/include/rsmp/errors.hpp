#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rsmp {

// Base class for all toolkit errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input description is malformed or violates an invariant.
struct BadSpec : Error {
  using Error::Error;
};

// Materializing the noise tree would exceed the leaf budget.
struct TreeTooLarge : Error {
  using Error::Error;
};

struct StageOutOfRange : Error {
  using Error::Error;
};

struct ShapeMismatch : Error {
  using Error::Error;
};

// Control value violates its per-stage box at some node.
struct InadmissibleControl : Error {
  using Error::Error;
};

struct InadmissiblePerturbation : Error {
  using Error::Error;
};

struct EmptyAmbiguitySet : Error {
  using Error::Error;
};

struct EmptyActiveSet : Error {
  using Error::Error;
};

struct MeasureNotInSet : Error {
  using Error::Error;
};

struct UnsupportedFamily : Error {
  using Error::Error;
};

struct GridTooLarge : Error {
  using Error::Error;
};

struct SingularWeight : Error {
  using Error::Error;
};

struct BisectionStalled : Error {
  using Error::Error;
};

// Configuration file problems. ParseError carries the byte position message
// from the JSON reader; ValidationError aggregates every schema violation.
struct ParseError : Error {
  using Error::Error;
};

struct ValidationError : Error {
  explicit ValidationError(std::vector<std::string> issues_)
      : Error(join(issues_)), issues(std::move(issues_)) {}
  std::vector<std::string> issues;

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "configuration invalid:";
    for (const auto& s : v) {
      out += "\n  - " + s;
    }
    return out;
  }
};

}  // namespace rsmp
