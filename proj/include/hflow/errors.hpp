#pragma once

#include <stdexcept>
#include <string>

namespace hflow {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument shape or range (length mismatch, s > n, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// A value falls outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Operation called on the wrong kind of FactorState.
class ModelMismatch : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

// Called with inputs that violate a documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class LineSearchFailure : public Error {
 public:
  using Error::Error;
};

// A reference solution does not satisfy A z = y.
class InfeasibleReference : public Error {
 public:
  using Error::Error;
};

// The precondition of the l1 bound does not hold for the given Q and beta_1.
class PreconditionFailed : public Error {
 public:
  using Error::Error;
};

class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

class StepTooLarge : public Error {
 public:
  using Error::Error;
};

class TooLarge : public Error {
 public:
  using Error::Error;
};

class Infeasible : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace hflow
