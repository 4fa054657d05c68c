#pragma once

#include <stdexcept>
#include <string>

namespace entichart {

/// Array dimensions disagree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition was violated by the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed external input (tree text, corpus lines, checkpoint bytes).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  explicit ParseError(const std::string& what)
      : std::runtime_error(what), offset_(std::string::npos) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace entichart
