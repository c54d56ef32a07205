#pragma once

#include <stdexcept>
#include <string>

namespace screenleak {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A precondition on an argument was violated.
class ParamError : public Error {
 public:
  using Error::Error;
};

class EmptyDictionaryError : public Error {
 public:
  using Error::Error;
};

/// chunkify never found two consecutive chunks above the correlation threshold.
class NoMasterError : public Error {
 public:
  using Error::Error;
};

/// chunkify spent too long in sync mode; the trace is too noisy or too irregular.
class SyncBudgetError : public Error {
 public:
  using Error::Error;
};

class DegenerateSetError : public Error {
 public:
  using Error::Error;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

}  // namespace screenleak
