#pragma once

#include <stdexcept>
#include <string>

namespace s2c {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeMismatch : Error {
  using Error::Error;
};
struct ValueRange : Error {
  using Error::Error;
};
struct BatchTooSmall : Error {
  using Error::Error;
};
struct GridTooLarge : Error {
  using Error::Error;
};
struct SingularCovariance : Error {
  using Error::Error;
};
struct NoTargetMatched : Error {
  using Error::Error;
};
struct EmptyMaskInSet : Error {
  using Error::Error;
};
struct EmptyDataset : Error {
  using Error::Error;
};
struct BadMagic : Error {
  using Error::Error;
};
struct HeaderMismatch : Error {
  using Error::Error;
};
struct TruncatedPayload : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

}  // namespace s2c
