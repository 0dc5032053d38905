#include "scenefuse/text.hpp"

namespace scenefuse {

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

namespace {

bool is_word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

}  // namespace

bool contains_phrase(std::string_view text, std::string_view phrase) {
  if (phrase.empty()) return false;
  const std::string hay = to_lower_ascii(text);
  const std::string needle = to_lower_ascii(phrase);
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) {
    const bool left_ok = pos == 0 || !is_word_char(hay[pos - 1]);
    const std::size_t end = pos + needle.size();
    const bool right_ok = end == hay.size() || !is_word_char(hay[end]);
    if (left_ok && right_ok) return true;
  }
  return false;
}

}  // namespace scenefuse
