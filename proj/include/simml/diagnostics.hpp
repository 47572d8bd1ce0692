#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace simml {

/// 1-based line/column of a node in its source text. Column counts bytes.
struct SourcePos {
  int line = 0;
  int column = 0;

  // Positions are diagnostic metadata; they never take part in structural equality.
  friend bool operator==(const SourcePos&, const SourcePos&) { return true; }

  std::string str() const { return std::to_string(line) + ":" + std::to_string(column); }
};

enum class Severity { error, warning };

struct Diagnostic {
  Severity severity = Severity::error;
  std::string code;
  std::string message;
  SourcePos pos;

  std::string str() const;
};

using Diagnostics = std::vector<Diagnostic>;

std::string to_json(const Diagnostics& diagnostics);

/// Base for every exception the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace simml
