#ifndef LAMBDAEHR_ERRORS_H_
#define LAMBDAEHR_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lambdaehr {

// Root of every error the toolkit raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data: malformed files, invalid logical forms, bad spans. The CLI
// maps these to exit status 2.
class DataError : public Error {
 public:
  using Error::Error;
};

class SyntaxError : public DataError {
 public:
  SyntaxError(std::size_t offset, std::string expected)
      : DataError("syntax error at offset " + std::to_string(offset) +
                  ": expected " + expected),
        offset_(offset),
        expected_(std::move(expected)) {}

  std::size_t offset() const { return offset_; }
  const std::string &expected() const { return expected_; }

 private:
  std::size_t offset_;
  std::string expected_;
};

class UnknownPredicate : public DataError {
 public:
  explicit UnknownPredicate(std::string name)
      : DataError("unknown predicate: " + name), name_(std::move(name)) {}
  const std::string &name() const { return name_; }

 private:
  std::string name_;
};

class ArityMismatch : public DataError {
 public:
  ArityMismatch(std::string name, std::size_t got, std::size_t want)
      : DataError("arity mismatch for " + name + ": got " +
                  std::to_string(got) + ", want " + std::to_string(want)),
        name_(std::move(name)),
        got_(got),
        want_(want) {}
  const std::string &name() const { return name_; }
  std::size_t got() const { return got_; }
  std::size_t want() const { return want_; }

 private:
  std::string name_;
  std::size_t got_;
  std::size_t want_;
};

class UnboundVariable : public DataError {
 public:
  explicit UnboundVariable(std::string name)
      : DataError("unbound variable: " + name), name_(std::move(name)) {}
  const std::string &name() const { return name_; }

 private:
  std::string name_;
};

// An argument of the wrong kind for the predicate signature (a literal where
// a concept identifier belongs, a stray placeholder, ...).
class TypeMismatch : public DataError {
 public:
  TypeMismatch(std::size_t position, const std::string &what)
      : DataError("type mismatch at position " + std::to_string(position) +
                  ": " + what),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

}  // namespace lambdaehr

#endif  // LAMBDAEHR_ERRORS_H_
