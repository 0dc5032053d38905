#pragma once

#include <string>
#include <string_view>

namespace scenefuse {

std::string to_lower_ascii(std::string_view s);

// Case-insensitive match of `phrase` in `text` where neither neighbour of the
// match is an ASCII letter or digit ("brake" matches "the brake." but not
// "unbraked").
bool contains_phrase(std::string_view text, std::string_view phrase);

}  // namespace scenefuse
