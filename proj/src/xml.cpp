#include "simml/xml.hpp"

#include <cstdint>

namespace simml::xml {

const Attribute* Element::attribute(std::string_view key) const {
  for (const auto& a : attributes) {
    if (a.name == key) return &a;
  }
  return nullptr;
}

namespace {

bool is_name_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == ':' ||
         static_cast<unsigned char>(c) >= 0x80;
}

bool is_name_char(char c) {
  return is_name_start(c) || (c >= '0' && c <= '9') || c == '-' || c == '.';
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

class Reader {
 public:
  explicit Reader(std::string_view text) : s_(text) {
    if (s_.substr(0, 3) == "\xEF\xBB\xBF") advance(3);
  }

  Element document() {
    skip_misc(true);
    if (eof()) fail("unexpected end of input: no root element");
    if (peek() != '<') fail("expected '<' at start of root element");
    Element root = element();
    skip_misc(false);
    if (!eof()) fail("unexpected content after root element");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(here(), msg); }

  SourcePos here() const { return {line_, col_}; }
  bool eof() const { return i_ >= s_.size(); }
  char peek(std::size_t k = 0) const { return i_ + k < s_.size() ? s_[i_ + k] : '\0'; }
  bool starts(std::string_view p) const { return s_.substr(i_, p.size()) == p; }

  void advance(std::size_t n = 1) {
    for (std::size_t k = 0; k < n && i_ < s_.size(); ++k, ++i_) {
      if (s_[i_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
    }
  }

  void expect(std::string_view p, const char* what) {
    if (eof()) fail(std::string("unexpected end of input, expected ") + what);
    if (!starts(p)) fail(std::string("expected ") + what);
    advance(p.size());
  }

  void skip_space() {
    while (!eof() && is_space(peek())) advance();
  }

  void skip_until(std::string_view terminator, const char* what) {
    while (!eof() && !starts(terminator)) advance();
    if (eof()) fail(std::string("unexpected end of input inside ") + what);
    advance(terminator.size());
  }

  // Prolog/epilog: whitespace, comments, PIs, and (prolog only) DOCTYPE.
  void skip_misc(bool prolog) {
    for (;;) {
      skip_space();
      if (starts("<?")) {
        skip_until("?>", "processing instruction");
      } else if (starts("<!--")) {
        skip_until("-->", "comment");
      } else if (prolog && starts("<!DOCTYPE")) {
        skip_doctype();
      } else {
        return;
      }
    }
  }

  void skip_doctype() {
    advance(9);
    int bracket = 0;
    char quote = 0;
    while (!eof()) {
      char c = peek();
      if (quote) {
        if (c == quote) quote = 0;
      } else if (c == '"' || c == '\'') {
        quote = c;
      } else if (c == '[') {
        ++bracket;
      } else if (c == ']') {
        --bracket;
      } else if (c == '>' && bracket == 0) {
        advance();
        return;
      }
      advance();
    }
    fail("unexpected end of input inside DOCTYPE");
  }

  std::string name() {
    if (eof()) fail("unexpected end of input, expected a name");
    if (!is_name_start(peek())) fail("expected a name");
    std::size_t start = i_;
    while (!eof() && is_name_char(peek())) advance();
    return std::string(s_.substr(start, i_ - start));
  }

  void entity(std::string& out) {
    SourcePos at = here();
    advance();  // '&'
    std::size_t start = i_;
    while (!eof() && peek() != ';' && i_ - start < 12) advance();
    if (eof() || peek() != ';') throw ParseError(at, "unterminated entity reference");
    std::string_view ref = s_.substr(start, i_ - start);
    advance();
    if (ref == "lt") out += '<';
    else if (ref == "gt") out += '>';
    else if (ref == "amp") out += '&';
    else if (ref == "quot") out += '"';
    else if (ref == "apos") out += '\'';
    else if (!ref.empty() && ref[0] == '#') {
      std::uint32_t cp = 0;
      bool hex = ref.size() > 1 && (ref[1] == 'x' || ref[1] == 'X');
      std::string_view digits = ref.substr(hex ? 2 : 1);
      if (digits.empty()) throw ParseError(at, "malformed character reference");
      for (char c : digits) {
        int d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (hex && c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else if (hex && c >= 'A' && c <= 'F') d = c - 'A' + 10;
        else throw ParseError(at, "malformed character reference");
        cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(d);
        if (cp > 0x10FFFF) throw ParseError(at, "character reference out of range");
      }
      append_utf8(out, cp);
    } else {
      throw ParseError(at, "unknown entity '&" + std::string(ref) + ";'");
    }
  }

  std::string attribute_value() {
    if (eof()) fail("unexpected end of input, expected attribute value");
    char q = peek();
    if (q != '"' && q != '\'') fail("expected quoted attribute value");
    advance();
    std::string v;
    while (!eof() && peek() != q) {
      if (peek() == '<') fail("'<' not allowed in attribute value");
      if (peek() == '&') {
        entity(v);
      } else {
        v += peek();
        advance();
      }
    }
    if (eof()) fail("unexpected end of input inside attribute value");
    advance();
    return v;
  }

  Element element() {
    Element e;
    e.pos = here();
    advance();  // '<'
    e.name = name();
    for (;;) {
      bool had_space = !eof() && is_space(peek());
      skip_space();
      if (eof()) fail("unexpected end of input in start tag <" + e.name + ">");
      if (starts("/>")) {
        advance(2);
        return e;
      }
      if (peek() == '>') {
        advance();
        break;
      }
      if (!had_space) fail("expected whitespace before attribute");
      Attribute a;
      a.pos = here();
      a.name = name();
      skip_space();
      expect("=", "'=' after attribute name");
      skip_space();
      a.value = attribute_value();
      if (e.attribute(a.name)) throw ParseError(a.pos, "duplicate attribute '" + a.name + "'");
      e.attributes.push_back(std::move(a));
    }
    content(e);
    return e;
  }

  void content(Element& e) {
    bool text_started = false;
    auto note_text = [&] {
      if (!text_started && !is_space(peek())) {
        e.text_pos = here();
        text_started = true;
      }
    };
    for (;;) {
      if (eof()) fail("unexpected end of input, element <" + e.name + "> is not closed");
      if (starts("</")) {
        advance(2);
        SourcePos at = here();
        std::string closing = name();
        if (closing != e.name) {
          throw ParseError(at, "mismatched end tag: expected </" + e.name + ">, found </" + closing + ">");
        }
        skip_space();
        expect(">", "'>' to close end tag");
        return;
      }
      if (starts("<!--")) {
        skip_until("-->", "comment");
      } else if (starts("<![CDATA[")) {
        advance(9);
        note_text();
        std::size_t start = i_;
        while (!eof() && !starts("]]>")) advance();
        if (eof()) fail("unexpected end of input inside CDATA section");
        e.text.append(s_.substr(start, i_ - start));
        advance(3);
      } else if (starts("<?")) {
        skip_until("?>", "processing instruction");
      } else if (peek() == '<') {
        e.children.push_back(element());
      } else if (peek() == '&') {
        if (!text_started) {
          e.text_pos = here();
          text_started = true;
        }
        entity(e.text);
      } else {
        note_text();
        e.text += peek();
        advance();
      }
    }
  }

  std::string_view s_;
  std::size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;
};

}  // namespace

Element parse(std::string_view text) { return Reader(text).document(); }

std::string escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void Writer::indent() { out_.append(static_cast<std::size_t>(depth_) * 2, ' '); }

std::string Writer::attr_string(const std::vector<std::pair<std::string, std::string>>& attrs) {
  std::string s;
  for (const auto& [k, v] : attrs) s += " " + k + "=\"" + escape(v) + "\"";
  return s;
}

void Writer::open(std::string_view name, const std::vector<std::pair<std::string, std::string>>& attrs) {
  indent();
  out_ += "<" + std::string(name) + attr_string(attrs) + ">\n";
  ++depth_;
}

void Writer::close(std::string_view name) {
  --depth_;
  indent();
  out_ += "</" + std::string(name) + ">\n";
}

void Writer::leaf(std::string_view name, std::string_view text,
                  const std::vector<std::pair<std::string, std::string>>& attrs) {
  indent();
  out_ += "<" + std::string(name) + attr_string(attrs) + ">" + escape(text) + "</" + std::string(name) + ">\n";
}

void Writer::empty(std::string_view name, const std::vector<std::pair<std::string, std::string>>& attrs) {
  indent();
  out_ += "<" + std::string(name) + attr_string(attrs) + "/>\n";
}

}  // namespace simml::xml
