#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace icpkit {

/// Base class for all recoverable toolkit errors. The what() string always
/// starts with the error case name so callers (and the CLI) can surface it.
class Error : public std::runtime_error {
 public:
  Error(const std::string& name, const std::string& detail)
      : std::runtime_error(detail.empty() ? name : name + ": " + detail),
        name_(name) {}

  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class EmptyCloudError : public Error {
 public:
  explicit EmptyCloudError(const std::string& detail = "")
      : Error("EmptyCloud", detail) {}
};

class NoCorrespondencesError : public Error {
 public:
  explicit NoCorrespondencesError(const std::string& detail = "")
      : Error("NoCorrespondences", detail) {}
};

class DegenerateGeometryError : public Error {
 public:
  explicit DegenerateGeometryError(const std::string& detail = "")
      : Error("DegenerateGeometry", detail) {}
};

class TooFewPairsError : public Error {
 public:
  explicit TooFewPairsError(const std::string& detail = "")
      : Error("TooFewPairs", detail) {}
};

class TooFewPointsError : public Error {
 public:
  explicit TooFewPointsError(const std::string& detail = "")
      : Error("TooFewPoints", detail) {}
};

class TooFewFramesError : public Error {
 public:
  explicit TooFewFramesError(const std::string& detail = "")
      : Error("TooFewFrames", detail) {}
};

class ZeroLikelihoodError : public Error {
 public:
  explicit ZeroLikelihoodError(const std::string& detail = "")
      : Error("ZeroLikelihood", detail) {}
};

class ParseError : public Error {
 public:
  // line 0 means the position is unknown (e.g. structural errors).
  ParseError(std::size_t line, const std::string& detail)
      : Error("ParseError",
              line == 0 ? detail
                        : "line " + std::to_string(line) + ": " + detail),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class UnsupportedPropertyError : public Error {
 public:
  explicit UnsupportedPropertyError(const std::string& detail = "")
      : Error("UnsupportedProperty", detail) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& detail = "") : Error("IoError", detail) {}
};

}  // namespace icpkit
