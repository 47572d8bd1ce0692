#include <functional>

#include "json.hpp"

#include "simml/document.hpp"

namespace simml {

namespace {

using TextVisitor = std::function<void(const std::string& key, LocalizedText& text)>;

// Visits every localized text of the document with a stable key naming it.
void walk(SimulationDoc& doc, const TextVisitor& fn) {
  fn("header.title", doc.header.title);
  for (std::size_t s = 0; s < doc.parameters.size(); ++s) {
    auto& section = doc.parameters[s];
    fn("section[" + std::to_string(s) + "].title", section.title);
    for (auto& item : section.items) {
      std::visit([&](auto& p) { fn(p.label + ".name", p.name); }, item);
    }
  }
  for (auto& item : doc.compute) {
    std::visit(
        [&](auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Domain1D>) {
            fn(v.interval.label + ".name", v.interval.name);
          } else if constexpr (std::is_same_v<T, Domain2D>) {
            fn(v.label + ".name", v.name);
            fn(v.x.label + ".name", v.x.name);
            fn(v.y.label + ".name", v.y.name);
          } else if constexpr (std::is_same_v<T, OdeDef>) {
            for (auto& st : v.states) fn(st.label + ".name", st.name);
            for (auto& o : v.outputs) fn(o.label + ".name", o.name);
          } else if constexpr (std::is_same_v<T, NonlinearSystemDef>) {
            fn(v.label + ".name", v.name);
            for (auto& u : v.unknowns) fn(u.label + ".name", u.name);
          } else {
            fn(v.label + ".name", v.name);
          }
        },
        item);
  }
  for (std::size_t w = 0; w < doc.display.size(); ++w) {
    fn("window[" + std::to_string(w) + "].title", doc.display[w].title);
  }
}

}  // namespace

std::set<std::string> SimulationDoc::languages() const {
  std::set<std::string> out;
  auto& self = const_cast<SimulationDoc&>(*this);
  walk(self, [&](const std::string&, LocalizedText& t) {
    for (const auto& [lang, text] : t.variants) {
      if (!lang.empty()) out.insert(lang);
    }
  });
  for (const auto& n : notes) {
    if (!n.lang.empty()) out.insert(n.lang);
  }
  return out;
}

LocalizedView resolve_language(const SimulationDoc& doc, const std::optional<std::string>& lang) {
  LocalizedView view{doc, lang.value_or(""), doc.languages(), {}};
  const std::string want = view.language;
  std::vector<std::string> missing;
  walk(view.doc, [&](const std::string& key, LocalizedText& t) {
    if (t.empty()) return;
    std::string chosen;
    if (auto it = t.variants.find(want); it != t.variants.end()) {
      chosen = it->second;
    } else {
      chosen = t.text();
      if (!want.empty()) missing.push_back(key);
    }
    t.variants = {{"", chosen}};
  });

  std::vector<LocalizedBlock> notes;
  for (const auto& n : doc.notes) {
    if (n.lang == want) notes.push_back(n);
  }
  if (notes.empty()) {
    for (const auto& n : doc.notes) {
      if (n.lang.empty()) notes.push_back(n);
    }
    if (!want.empty() && !doc.notes.empty()) missing.push_back("notes");
  }
  for (auto& n : notes) n.lang.clear();
  view.doc.notes = std::move(notes);

  if (!missing.empty()) {
    std::string msg = "language '" + want + "' missing for";
    for (std::size_t k = 0; k < missing.size(); ++k) msg += (k ? ", " : " ") + missing[k];
    msg += "; default text used";
    view.warnings.push_back(std::move(msg));
  }
  return view;
}

std::string to_json(const Diagnostics& diagnostics) {
  auto out = nlohmann::json::array();
  for (const auto& d : diagnostics) {
    out.push_back({{"severity", d.severity == Severity::error ? "error" : "warning"},
                   {"code", d.code},
                   {"message", d.message},
                   {"line", d.pos.line},
                   {"column", d.pos.column}});
  }
  return out.dump();
}

}  // namespace simml
