#pragma once

// Minimal non-validating XML reader/writer. Handles the subset simulation
// documents use: elements, attributes, character data, CDATA, comments,
// processing instructions and a DOCTYPE line (skipped, never fetched).

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "simml/diagnostics.hpp"

namespace simml::xml {

struct Attribute {
  std::string name;
  std::string value;
  SourcePos pos;
};

struct Element {
  std::string name;
  SourcePos pos;
  std::vector<Attribute> attributes;
  std::vector<Element> children;
  // Concatenated character data of this element (children's text excluded).
  std::string text;
  SourcePos text_pos;

  const Attribute* attribute(std::string_view key) const;
};

class ParseError : public Error {
 public:
  ParseError(SourcePos pos, const std::string& message)
      : Error(pos.str() + ": " + message), pos_(pos), message_(message) {}
  SourcePos pos() const { return pos_; }
  const std::string& message() const { return message_; }

 private:
  SourcePos pos_;
  std::string message_;
};

/// Parses a complete document and returns its root element.
Element parse(std::string_view text);

/// Escapes character data / attribute values.
std::string escape(std::string_view text);

/// Small indenting writer used by the document serializer.
class Writer {
 public:
  void open(std::string_view name, const std::vector<std::pair<std::string, std::string>>& attrs = {});
  void close(std::string_view name);
  void leaf(std::string_view name, std::string_view text,
            const std::vector<std::pair<std::string, std::string>>& attrs = {});
  void empty(std::string_view name, const std::vector<std::pair<std::string, std::string>>& attrs);
  std::string str() const { return out_; }

 private:
  void indent();
  static std::string attr_string(const std::vector<std::pair<std::string, std::string>>& attrs);

  std::string out_ = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  int depth_ = 0;
};

}  // namespace simml::xml
