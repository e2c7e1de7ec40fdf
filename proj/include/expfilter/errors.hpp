#pragma once

#include <stdexcept>
#include <string>

namespace ef {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Observation has zero probability under the model (belief normalizer is 0).
class ZeroLikelihood : public Error {
 public:
  using Error::Error;
};

class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidModel : public Error {
 public:
  using Error::Error;
};

/// A Dirichlet row with zero total mass cannot be normalised.
class DegenerateRow : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class EmptyLibrary : public EmptyInput {
 public:
  using EmptyInput::EmptyInput;
};

class EmptyResults : public EmptyInput {
 public:
  using EmptyInput::EmptyInput;
};

/// Test environment leaked into the training subset.
class InvalidSubset : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace ef
