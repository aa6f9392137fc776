#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace iotmon {

/// Byte-value histogram; folds over chunks and merges by addition.
class ByteHistogram {
public:
    void add(std::span<const std::uint8_t> bytes);
    void merge(const ByteHistogram& other);

    std::uint64_t total() const noexcept { return total_; }
    const std::array<std::uint64_t, 256>& counts() const noexcept { return counts_; }

    /// Bits per byte in [0, 8]; throws on an empty histogram.
    double entropy() const;
    /// Share of printable ASCII (0x20-0x7e) plus tab, LF and CR.
    double printable_fraction() const;

private:
    std::array<std::uint64_t, 256> counts_{};
    std::uint64_t total_ = 0;
};

double shannon_entropy(std::span<const std::uint8_t> bytes);

enum class StreamVerdict { Plaintext, Encoded, Encrypted };

std::string_view to_string(StreamVerdict v);

struct EntropyThresholds {
    double printable_fraction = 0.85;
    double encrypted_entropy = 7.2;
    std::uint64_t recommended_bytes = 100 * 1024;
    std::size_t chunk_bytes = 4096;
};

/// Plaintext-like at or above the printable cutoff, else encrypted-like at or
/// above the entropy cutoff, else encoded-like.
StreamVerdict classify(double entropy, double printable_fraction, const EntropyThresholds& t = {});

struct EntropyReport {
    std::uint64_t total_bytes = 0;
    double entropy = 0.0;
    double printable_fraction = 0.0;
    StreamVerdict verdict = StreamVerdict::Encoded;
    EntropyThresholds thresholds;
    std::array<std::uint64_t, 3> chunk_verdicts{};  // per chunk_bytes slice, indexed by StreamVerdict
    std::vector<std::string> notes;
};

/// Throws on empty input.
EntropyReport classify_stream(std::span<const std::uint8_t> bytes, const EntropyThresholds& t = {});
EntropyReport classify_file(const std::filesystem::path& path, const EntropyThresholds& t = {});

nlohmann::json to_json(const EntropyReport& report);

}  // namespace iotmon
