#pragma once

#include <stdexcept>
#include <string>

namespace tstiefel {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class SizeGuardExceeded : public Error {
 public:
  using Error::Error;
};

/// idft produced an imaginary residue too large to discard.
class ConjugateSymmetryViolated : public Error {
 public:
  using Error::Error;
};

/// Carries the offending spectral slice index (0-based).
class SliceError : public Error {
 public:
  SliceError(const std::string& what, long slice)
      : Error(what + " (spectral slice " + std::to_string(slice) + ")"), slice_(slice) {}
  long slice() const { return slice_; }

 private:
  long slice_;
};

class SingularSlice : public SliceError {
 public:
  using SliceError::SliceError;
};

class RankDeficientSlice : public SliceError {
 public:
  using SliceError::SliceError;
};

class SingularPencil : public SliceError {
 public:
  using SliceError::SliceError;
};

class NotPositive : public SliceError {
 public:
  NotPositive(long slice, double lambda_min)
      : SliceError("eigenvalue " + std::to_string(lambda_min) + " violates positivity bound", slice),
        lambda_min_(lambda_min) {}
  double lambda_min() const { return lambda_min_; }

 private:
  double lambda_min_;
};

class InconsistentSystem : public Error {
 public:
  using Error::Error;
};

class NotOnManifold : public Error {
 public:
  using Error::Error;
};

class NotTangent : public Error {
 public:
  using Error::Error;
};

/// The line search shrank the step below alpha_min without acceptance.
class LineSearchStalled : public Error {
 public:
  using Error::Error;
};

}  // namespace tstiefel
