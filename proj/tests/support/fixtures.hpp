#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace gpfo::testing {

inline std::string data_path(const std::string& relative) {
  return std::string(GPFO_TEST_DATA_DIR) + "/" + relative;
}

inline std::string read_fixture(const std::string& relative) {
  std::ifstream in(data_path(relative), std::ios::binary);
  if (!in) throw std::runtime_error("missing fixture " + relative);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string wrap_thinking(const std::string& body) {
  return "<|thinking|>\n" + body + "\n<|/thinking|>\n";
}

}  // namespace gpfo::testing
