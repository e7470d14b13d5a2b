#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace agriflow::xml {

/// Namespace-resolved element tree. Attribute keys are "uri|local" for
/// qualified attributes and plain "local" otherwise.
struct Element {
  std::string ns;
  std::string name;
  std::map<std::string, std::string> attributes;
  std::vector<Element> children;
  std::string text;
  int line = 0;
  int column = 0;

  const std::string* attr(std::string_view local, std::string_view ns_uri = {}) const;
};

/// Throws Error(kSyntax) carrying line and column of the first malformation.
Element parse(std::string_view bytes);

std::string escape(std::string_view text);

/// Minimal pretty-printing writer for the serializer.
class Writer {
 public:
  Writer();

  void open(std::string_view qname, const std::vector<std::pair<std::string, std::string>>& attrs = {});
  void leaf(std::string_view qname, const std::vector<std::pair<std::string, std::string>>& attrs = {});
  void text_element(std::string_view qname, std::string_view text,
                    const std::vector<std::pair<std::string, std::string>>& attrs = {});
  void close(std::string_view qname);

  std::string str() const { return out_; }

 private:
  void start_tag(std::string_view qname, const std::vector<std::pair<std::string, std::string>>& attrs);

  std::string out_;
  int depth_ = 0;
};

}  // namespace agriflow::xml
