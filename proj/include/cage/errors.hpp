#pragma once

#include <stdexcept>
#include <string>

namespace cage {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor rank/dimension disagreement, including mid-network shape breaks.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A scalar argument outside its documented domain (rates, thresholds, ...).
class ValueError : public Error {
 public:
  using Error::Error;
};

/// Problems with datasets, manifests, logs or other on-disk inputs.
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required (e.g. training loss).
class NumericError : public Error {
 public:
  using Error::Error;
};

class WeightFormatError : public Error {
 public:
  enum class Kind { BadMagic, BadVersion, Truncated, UnknownTensor, DimMismatch };

  WeightFormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace cage
