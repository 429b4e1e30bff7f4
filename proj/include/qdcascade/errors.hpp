#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qdc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InvalidField {
  std::string path;
  std::string reason;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<InvalidField> fields)
      : Error(format(fields)), fields_(std::move(fields)) {}

  const std::vector<InvalidField>& fields() const noexcept { return fields_; }

  bool has_path(const std::string& path) const {
    for (const auto& f : fields_)
      if (f.path == path) return true;
    return false;
  }

 private:
  static std::string format(const std::vector<InvalidField>& fields) {
    std::string msg = "invalid configuration:";
    for (const auto& f : fields) msg += "\n  " + f.path + ": " + f.reason;
    return msg;
  }

  std::vector<InvalidField> fields_;
};

// Negative eigenvalue beyond tolerance during propagation; the step is too coarse.
class StepUnstable : public Error {
 public:
  StepUnstable(double time, double min_eigenvalue)
      : Error("density matrix lost positivity at t = " + std::to_string(time) +
              " ps (min eigenvalue " + std::to_string(min_eigenvalue) + ")"),
        time_(time),
        min_eigenvalue_(min_eigenvalue) {}

  double time() const noexcept { return time_; }
  double min_eigenvalue() const noexcept { return min_eigenvalue_; }

 private:
  double time_;
  double min_eigenvalue_;
};

class GridMismatch : public Error {
 public:
  using Error::Error;
};

class ZeroEmission : public Error {
 public:
  using Error::Error;
};

class OutOfRange : public Error {
 public:
  OutOfRange(const std::string& what, double value)
      : Error(what + " out of range: " + std::to_string(value)), value_(value) {}
  double value() const noexcept { return value_; }

 private:
  double value_;
};

class DegenerateRidge : public Error {
 public:
  DegenerateRidge(const std::string& what, std::size_t row) : Error(what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class CorruptCheckpoint : public Error {
 public:
  CorruptCheckpoint(const std::string& what, long record)
      : Error("corrupt checkpoint (record " + std::to_string(record) + "): " + what),
        record_(record) {}
  // -1 when the header itself is bad.
  long record() const noexcept { return record_; }

 private:
  long record_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace qdc
