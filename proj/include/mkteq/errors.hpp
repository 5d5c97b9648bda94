#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mkteq {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An argument lies outside the domain of the operation (bad shape, bad range).
class DomainError : public Error {
 public:
  using Error::Error;
};

// The instance sits on a boundary where the equilibrium is not unique
// (alpha == 1/m, alpha == w_min). Carries the offending profile entry.
class DegenerateInstanceError : public Error {
 public:
  DegenerateInstanceError(const std::string& what, std::size_t entry)
      : Error(what), entry_(entry) {}
  std::size_t entry() const noexcept { return entry_; }

 private:
  std::size_t entry_;
};

// Requested problem size exceeds what exhaustive enumeration supports.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// The operation needs a smooth (c > 0) choice model.
class NonSmoothError : public Error {
 public:
  using Error::Error;
};

// A strategy of the wrong kind was supplied (e.g. tabular where linear is required).
class StrategyKindError : public Error {
 public:
  using Error::Error;
};

// A feature the file format or operation does not support.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  enum class Kind {
    kEmpty,
    kTruncated,
    kTrailingData,
    kBadMagic,
    kUnsupportedVersion,
    kBadHeader,
    kBadLabel,
    kParse,
    kRagged,
  };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mkteq
