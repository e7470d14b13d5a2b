#pragma once

#include <fstream>
#include <sstream>
#include <string>

namespace agriflow::testkit {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string source_path(const std::string& relative) { return std::string(AGRIFLOW_SOURCE_DIR) + "/" + relative; }

inline std::string daily_xml() { return read_file(source_path("scenarios/vineyard_daily.bpmn")); }
inline std::string annual_xml() { return read_file(source_path("scenarios/vineyard_annual.bpmn")); }

/// Wraps process body XML in a definitions/process envelope.
inline std::string process_xml(const std::string& body, const std::string& id = "p") {
  return std::string(R"(<bpmn:definitions xmlns:bpmn="http://www.omg.org/spec/BPMN/20100524/MODEL" )") +
         R"(xmlns:agri="http://agriflow.dev/schema/bpmn/1.0"><bpmn:process id=")" + id + R"(" name=")" + id +
         R"(">)" + body + "</bpmn:process></bpmn:definitions>";
}

}  // namespace agriflow::testkit
