#include "tmtcg/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

namespace tmtcg {

std::string sha256_hex(ByteView data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256: EVP_Digest failed");
    }
    return to_hex(ByteView(md.data(), len));
}

std::string sha256_hex(std::string_view data) {
    return sha256_hex(ByteView(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

}  // namespace tmtcg
