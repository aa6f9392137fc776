#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace iotmon {

/// 48-bit Ethernet address, rendered as lower-case colon-hex.
class MacAddress {
public:
    constexpr MacAddress() = default;
    constexpr explicit MacAddress(std::uint64_t bits) : bits_(bits & 0xffffffffffffULL) {}

    /// Accepts "aa:bb:cc:dd:ee:ff" (either case, ':' or '-' separators).
    static std::optional<MacAddress> parse(std::string_view text);
    /// Like parse() but throws iotmon::Error on malformed input.
    static MacAddress from_string(std::string_view text);

    constexpr std::uint64_t bits() const noexcept { return bits_; }
    std::string str() const;

    friend constexpr auto operator<=>(MacAddress, MacAddress) = default;

private:
    std::uint64_t bits_ = 0;
};

}  // namespace iotmon

template <>
struct std::hash<iotmon::MacAddress> {
    std::size_t operator()(iotmon::MacAddress m) const noexcept {
        return std::hash<std::uint64_t>{}(m.bits());
    }
};
