#pragma once

#include <stdexcept>
#include <string>

namespace meshsal {

/// Bad user input: malformed files, invalid arguments, failed preconditions.
/// The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parse failure tied to a location in a text file.
class ParseError : public InputError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : InputError(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

/// An internal consistency check failed. The CLI maps this to exit code 3.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace meshsal
