#pragma once

#include <stdexcept>
#include <string>

namespace sculpt {

// Shape or precondition violation on an argument.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnknownPromptError : public std::out_of_range {
 public:
  explicit UnknownPromptError(const std::string& prompt)
      : std::out_of_range("unknown prompt '" + prompt + "'"), prompt_(prompt) {}
  const std::string& prompt() const noexcept { return prompt_; }

 private:
  std::string prompt_;
};

class InsufficientCoverageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RankDeficiencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateObjectiveError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised by the optimizers when a loss term evaluates to NaN/inf.
class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(std::string term, int iteration)
      : std::runtime_error("non-finite value in loss term '" + term + "' at iteration " +
                           std::to_string(iteration)),
        term_(std::move(term)),
        iteration_(iteration) {}
  const std::string& term() const noexcept { return term_; }
  int iteration() const noexcept { return iteration_; }

 private:
  std::string term_;
  int iteration_;
};

}  // namespace sculpt
