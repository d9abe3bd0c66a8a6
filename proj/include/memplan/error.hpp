#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace memplan {

// Base for every error the library raises. Callers that only care about
// "something went wrong with the input" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NonFiniteInput : public Error {
 public:
  using Error::Error;
};

class CorruptPayload : public Error {
 public:
  using Error::Error;
};

class TooManyOutliers : public Error {
 public:
  TooManyOutliers(std::size_t flagged, std::size_t cols)
      : Error("outlier-separated compression flagged " + std::to_string(flagged) + " of " +
              std::to_string(cols) + " channels; fall back to symmetric quantization"),
        flagged_(flagged),
        cols_(cols) {}
  std::size_t flagged() const noexcept { return flagged_; }
  std::size_t cols() const noexcept { return cols_; }

 private:
  std::size_t flagged_;
  std::size_t cols_;
};

class NonBinaryMask : public Error {
 public:
  using Error::Error;
};

// No policy assignment fits the memory budget. min_total_bytes is the
// smallest footprint any assignment can reach.
class Infeasible : public Error {
 public:
  Infeasible(std::int64_t min_total_bytes, std::int64_t budget_bytes)
      : Error("no policy assignment fits the memory budget: minimum achievable " +
              std::to_string(min_total_bytes) + " bytes > budget " + std::to_string(budget_bytes) +
              " bytes"),
        min_total_bytes_(min_total_bytes),
        budget_bytes_(budget_bytes) {}
  std::int64_t min_total_bytes() const noexcept { return min_total_bytes_; }
  std::int64_t budget_bytes() const noexcept { return budget_bytes_; }

 private:
  std::int64_t min_total_bytes_;
  std::int64_t budget_bytes_;
};

class TooLarge : public Error {
 public:
  using Error::Error;
};

class InfeasiblePlan : public Error {
 public:
  InfeasiblePlan(std::int64_t total_bytes, std::int64_t budget_bytes, std::int64_t batch)
      : Error("plan needs " + std::to_string(total_bytes) + " bytes at batch " +
              std::to_string(batch) + " but the budget is " + std::to_string(budget_bytes)),
        total_bytes_(total_bytes),
        budget_bytes_(budget_bytes) {}
  std::int64_t total_bytes() const noexcept { return total_bytes_; }
  std::int64_t budget_bytes() const noexcept { return budget_bytes_; }

 private:
  std::int64_t total_bytes_;
  std::int64_t budget_bytes_;
};

class OutOfOrderIteration : public Error {
 public:
  using Error::Error;
};

}  // namespace memplan
