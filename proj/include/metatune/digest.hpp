#pragma once

#include <string>
#include <string_view>

namespace metatune {

// SHA-256 of `data`, as 64 lowercase hex characters.
std::string sha256_hex(std::string_view data);

// True iff `s` looks like a sha256_hex output.
bool is_hex_digest(std::string_view s);

}  // namespace metatune
