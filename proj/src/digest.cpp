#include "metatune/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cctype>

namespace metatune {

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int md_len = 0;
    EVP_Digest(data.data(), data.size(), md.data(), &md_len, EVP_sha256(), nullptr);

    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(md_len * 2);
    for (unsigned int i = 0; i < md_len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0x0f]);
    }
    return out;
}

bool is_hex_digest(std::string_view s) {
    if (s.size() != 64) return false;
    for (char c : s) {
        if (!std::isxdigit(static_cast<unsigned char>(c)) ||
            (std::isalpha(static_cast<unsigned char>(c)) && std::isupper(static_cast<unsigned char>(c)))) {
            return false;
        }
    }
    return true;
}

}  // namespace metatune
