#include "iotmon/mac.hpp"

#include <cstdio>

#include "iotmon/error.hpp"

namespace iotmon {

namespace {

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

std::optional<MacAddress> MacAddress::parse(std::string_view text) {
    if (text.size() != 17) return std::nullopt;
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < 6; ++i) {
        const std::size_t at = i * 3;
        const int hi = hex_value(text[at]);
        const int lo = hex_value(text[at + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        if (i < 5 && text[at + 2] != ':' && text[at + 2] != '-') return std::nullopt;
        bits = (bits << 8) | static_cast<std::uint64_t>(hi * 16 + lo);
    }
    return MacAddress(bits);
}

MacAddress MacAddress::from_string(std::string_view text) {
    if (auto mac = parse(text)) return *mac;
    throw Error("mac", "malformed MAC address '" + std::string(text) + "'");
}

std::string MacAddress::str() const {
    char buf[18];
    std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x",
                  static_cast<unsigned>((bits_ >> 40) & 0xff), static_cast<unsigned>((bits_ >> 32) & 0xff),
                  static_cast<unsigned>((bits_ >> 24) & 0xff), static_cast<unsigned>((bits_ >> 16) & 0xff),
                  static_cast<unsigned>((bits_ >> 8) & 0xff), static_cast<unsigned>(bits_ & 0xff));
    return buf;
}

}  // namespace iotmon
