#pragma once

// Key-hash helpers for the policy store. Keys are never persisted in
// cleartext: the SRM file carries sha256(consumer:target:key) and
// authentication compares digests in constant time.

#include <openssl/crypto.h>
#include <openssl/evp.h>

#include <array>
#include <stdexcept>
#include <string>

namespace tbac {

inline std::string sha256_hex(const std::string& data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> buf{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), buf.data(), &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 digest failed");
    static const char* hexd = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hexd[buf[i] >> 4]);
        out.push_back(hexd[buf[i] & 0xf]);
    }
    return out;
}

// Digest of a consumer key, salted with the rule's consumer id and target so
// equal keys across rules still hash differently.
inline std::string key_digest(const std::string& consumer, const std::string& target,
                              const std::string& key) {
    return sha256_hex(consumer + ":" + target + ":" + key);
}

inline bool constant_time_equal(const std::string& a, const std::string& b) {
    if (a.size() != b.size()) return false;
    return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

}  // namespace tbac
