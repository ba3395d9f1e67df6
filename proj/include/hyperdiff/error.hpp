#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hyperdiff {

enum class ErrorKind {
  IsolatedNode,
  EmptyHyperedge,
  NonpositiveWeight,
  DomainError,
  NonFiniteResult,
  ZeroNormalizer,
  EmptyTrainingSet,
  ClassOutOfRange,
  ShapeMismatch,
  EmptyEvalSet,
  NegativeFeature,
  EpsilonOutOfRange,
  MissingClassInTrain,
  ParseError,
  DimensionMismatch,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library. `kind` is stable and is what the CLI
// reports; `line` is set for parse errors, `index` for node/row positions.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<std::size_t> line = std::nullopt,
        std::optional<std::size_t> index = std::nullopt)
      : std::runtime_error(message), kind_(kind), line_(line), index_(index) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> line() const noexcept { return line_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> line_;
  std::optional<std::size_t> index_;
};

}  // namespace hyperdiff
