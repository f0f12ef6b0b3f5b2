#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace vda {

/// Input tensor with the wrong shape or dimension.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Non-finite or otherwise invalid numeric values (NaN logits, rows that
/// are not probability distributions, missing labels).
struct ValueError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Scalar hyperparameter outside its domain.
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Structurally valid but unsupported configuration (e.g. moons with K != 2).
struct UnsupportedError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Degenerate data: empty classes, all-zero classifier rows, duplicate
/// prototypes.
struct DegenerateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss. Carries the offending step index
/// and the loss values seen at that step.
struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& what, long long step_index,
                  double d = std::nan(""), double g = std::nan(""))
      : std::runtime_error(what), step(step_index), d_loss(d), g_loss(g) {}
  long long step;
  double d_loss;
  double g_loss;
};

/// Malformed text input. `line` is 1-based when known.
struct ParseError : std::runtime_error {
  ParseError(const std::string& what, long long line_number = -1)
      : std::runtime_error(what), line(line_number) {}
  long long line;
};

/// Well-formed input whose contents violate the expected schema.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace vda
