#include "poet/common.hpp"

#include <fstream>
#include <sstream>

namespace poet {

std::vector<std::string> utf8_split(const std::string& text) {
  std::vector<std::string> out;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    const unsigned char b = static_cast<unsigned char>(text[i]);
    size_t len;
    if (b < 0x80)
      len = 1;
    else if ((b & 0xE0) == 0xC0)
      len = 2;
    else if ((b & 0xF0) == 0xE0)
      len = 3;
    else if ((b & 0xF8) == 0xF0)
      len = 4;
    else
      throw Error("invalid UTF-8 lead byte at offset " + std::to_string(i));
    if (i + len > n) throw Error("truncated UTF-8 sequence at offset " + std::to_string(i));
    for (size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80)
        throw Error("invalid UTF-8 continuation byte at offset " + std::to_string(i + k));
    }
    out.push_back(text.substr(i, len));
    i += len;
  }
  return out;
}

uint32_t utf8_codepoint(const std::string& token) {
  if (token.empty()) throw Error("empty token");
  const unsigned char b0 = static_cast<unsigned char>(token[0]);
  if (b0 < 0x80) return b0;
  uint32_t cp = 0;
  size_t len = 0;
  if ((b0 & 0xE0) == 0xC0) {
    cp = b0 & 0x1F;
    len = 2;
  } else if ((b0 & 0xF0) == 0xE0) {
    cp = b0 & 0x0F;
    len = 3;
  } else if ((b0 & 0xF8) == 0xF0) {
    cp = b0 & 0x07;
    len = 4;
  } else {
    throw Error("invalid UTF-8 token");
  }
  if (token.size() < len) throw Error("truncated UTF-8 token");
  for (size_t k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(token[k]) & 0x3F);
  return cp;
}

size_t utf8_length(const std::string& text) { return utf8_split(text).size(); }

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path);
  out << content;
  if (!out) throw Error("write failed: " + path);
}

}  // namespace poet
