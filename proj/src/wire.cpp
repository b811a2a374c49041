#include <bit>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "forge/remote_oracle.hpp"
#include "json.hpp"

namespace forge::wire {

using nlohmann::json;

namespace {

std::string base64_encode(const std::vector<unsigned char>& bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
    if (text.size() % 4 != 0) throw GuidanceError("wire: base64 payload length is not a multiple of 4");
    std::vector<unsigned char> out(3 * (text.size() / 4));
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
    if (n < 0) throw GuidanceError("wire: invalid base64 payload");
    std::size_t pad = 0;
    if (!text.empty() && text.back() == '=') ++pad;
    if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

std::uint32_t to_le(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    return __builtin_bswap32(v);
}

}  // namespace

std::string encode_image(const Image& image) {
    std::vector<unsigned char> bytes(image.data.size() * 4);
    for (std::size_t i = 0; i < image.data.size(); ++i) {
        const std::uint32_t u = to_le(std::bit_cast<std::uint32_t>(static_cast<float>(image.data[i])));
        std::memcpy(&bytes[4 * i], &u, 4);
    }
    return base64_encode(bytes);
}

Image decode_image(const std::string& b64, int width, int height) {
    const std::vector<unsigned char> bytes = base64_decode(b64);
    Image image(width, height);
    if (bytes.size() != image.data.size() * 4)
        throw GuidanceError("wire: payload holds " + std::to_string(bytes.size()) + " bytes, expected " +
                            std::to_string(image.data.size() * 4));
    for (std::size_t i = 0; i < image.data.size(); ++i) {
        std::uint32_t u;
        std::memcpy(&u, &bytes[4 * i], 4);
        image.data[i] = std::bit_cast<float>(to_le(u));
    }
    return image;
}

std::string make_request(const Image& noised, int t, const std::string& condition_id) {
    json j = {{"shape", {noised.height, noised.width, Image::kChannels}},
              {"dtype", "f32"},
              {"data_b64", encode_image(noised)},
              {"timestep", t},
              {"condition_id", condition_id}};
    return j.dump();
}

std::string make_response(const Image& eps) { return json{{"data_b64", encode_image(eps)}}.dump(); }

std::string make_error(const std::string& message) { return json{{"error", message}}.dump(); }

Request parse_request(const std::string& body) {
    try {
        const json j = json::parse(body);
        if (j.at("dtype").get<std::string>() != "f32") throw GuidanceError("wire: unsupported dtype");
        const auto shape = j.at("shape").get<std::vector<int>>();
        if (shape.size() != 3 || shape[2] != Image::kChannels || shape[0] <= 0 || shape[1] <= 0)
            throw GuidanceError("wire: shape must be [H, W, 3]");
        Request r;
        r.noised = decode_image(j.at("data_b64").get<std::string>(), shape[1], shape[0]);
        r.timestep = j.at("timestep").get<int>();
        r.condition_id = j.value("condition_id", std::string());
        return r;
    } catch (const json::exception& e) {
        throw GuidanceError(std::string("wire: malformed request: ") + e.what());
    }
}

Image parse_response(const std::string& body, int width, int height) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw GuidanceError(std::string("wire: malformed response: ") + e.what());
    }
    if (j.contains("error")) throw GuidanceError("oracle server error: " + j["error"].dump());
    if (!j.contains("data_b64") || !j["data_b64"].is_string()) throw GuidanceError("wire: response lacks data_b64");
    Image eps = decode_image(j["data_b64"].get<std::string>(), width, height);
    for (double v : eps.data)
        if (!std::isfinite(v)) throw GuidanceError("wire: response contains non-finite values");
    return eps;
}

}  // namespace forge::wire
