#include "agriflow/model/xml.hpp"

#include <expat.h>

#include <memory>

#include "agriflow/error.hpp"

namespace agriflow::xml {

const std::string* Element::attr(std::string_view local, std::string_view ns_uri) const {
  std::string key = ns_uri.empty() ? std::string(local) : std::string(ns_uri) + "|" + std::string(local);
  auto it = attributes.find(key);
  return it == attributes.end() ? nullptr : &it->second;
}

namespace {

constexpr char kSeparator = '|';

struct BuildState {
  XML_Parser parser = nullptr;
  std::vector<Element*> stack;
  Element root;
  bool have_root = false;
};

void split_name(const char* full, std::string& ns, std::string& local) {
  std::string_view s(full);
  auto bar = s.find(kSeparator);
  if (bar == std::string_view::npos) {
    ns.clear();
    local = std::string(s);
  } else {
    ns = std::string(s.substr(0, bar));
    local = std::string(s.substr(bar + 1));
  }
}

void XMLCALL on_start(void* user, const XML_Char* name, const XML_Char** attrs) {
  auto* st = static_cast<BuildState*>(user);
  Element el;
  split_name(name, el.ns, el.name);
  el.line = static_cast<int>(XML_GetCurrentLineNumber(st->parser));
  el.column = static_cast<int>(XML_GetCurrentColumnNumber(st->parser)) + 1;
  for (int i = 0; attrs[i] != nullptr; i += 2) el.attributes.emplace(attrs[i], attrs[i + 1]);
  if (st->stack.empty()) {
    st->root = std::move(el);
    st->have_root = true;
    st->stack.push_back(&st->root);
  } else {
    Element* parent = st->stack.back();
    parent->children.push_back(std::move(el));
    st->stack.push_back(&parent->children.back());
  }
}

void XMLCALL on_end(void* user, const XML_Char*) {
  static_cast<BuildState*>(user)->stack.pop_back();
}

void XMLCALL on_text(void* user, const XML_Char* s, int len) {
  auto* st = static_cast<BuildState*>(user);
  if (!st->stack.empty()) st->stack.back()->text.append(s, static_cast<std::size_t>(len));
}

}  // namespace

Element parse(std::string_view bytes) {
  std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(
      XML_ParserCreateNS("UTF-8", kSeparator), &XML_ParserFree);
  BuildState st;
  st.parser = parser.get();
  XML_SetUserData(parser.get(), &st);
  XML_SetElementHandler(parser.get(), on_start, on_end);
  XML_SetCharacterDataHandler(parser.get(), on_text);
  if (XML_Parse(parser.get(), bytes.data(), static_cast<int>(bytes.size()), XML_TRUE) == XML_STATUS_ERROR) {
    const auto line = XML_GetCurrentLineNumber(parser.get());
    const auto col = XML_GetCurrentColumnNumber(parser.get()) + 1;
    throw Error(ErrorCode::kSyntax,
                "XML syntax error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                    XML_ErrorString(XML_GetErrorCode(parser.get())),
                {"line " + std::to_string(line), "column " + std::to_string(col)});
  }
  if (!st.have_root) throw Error(ErrorCode::kSyntax, "XML syntax error at line 1, column 1: no root element");
  return std::move(st.root);
}

std::string escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

Writer::Writer() { out_ = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"; }

void Writer::start_tag(std::string_view qname, const std::vector<std::pair<std::string, std::string>>& attrs) {
  out_.append(static_cast<std::size_t>(depth_) * 2, ' ');
  out_ += '<';
  out_ += qname;
  for (const auto& [k, v] : attrs) {
    out_ += ' ';
    out_ += k;
    out_ += "=\"";
    out_ += escape(v);
    out_ += '"';
  }
}

void Writer::open(std::string_view qname, const std::vector<std::pair<std::string, std::string>>& attrs) {
  start_tag(qname, attrs);
  out_ += ">\n";
  ++depth_;
}

void Writer::leaf(std::string_view qname, const std::vector<std::pair<std::string, std::string>>& attrs) {
  start_tag(qname, attrs);
  out_ += "/>\n";
}

void Writer::text_element(std::string_view qname, std::string_view text,
                          const std::vector<std::pair<std::string, std::string>>& attrs) {
  start_tag(qname, attrs);
  out_ += '>';
  out_ += escape(text);
  out_ += "</";
  out_ += qname;
  out_ += ">\n";
}

void Writer::close(std::string_view qname) {
  --depth_;
  out_.append(static_cast<std::size_t>(depth_) * 2, ' ');
  out_ += "</";
  out_ += qname;
  out_ += ">\n";
}

}  // namespace agriflow::xml
