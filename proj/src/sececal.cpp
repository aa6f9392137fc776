#include "iotmon/sececal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "iotmon/error.hpp"

namespace iotmon {

void ByteHistogram::add(std::span<const std::uint8_t> bytes) {
    for (auto b : bytes) ++counts_[b];
    total_ += bytes.size();
}

void ByteHistogram::merge(const ByteHistogram& other) {
    for (std::size_t i = 0; i < 256; ++i) counts_[i] += other.counts_[i];
    total_ += other.total_;
}

double ByteHistogram::entropy() const {
    if (total_ == 0) throw Error("entropy", "empty input");
    const double n = static_cast<double>(total_);
    double h = 0.0;
    for (auto c : counts_)
        if (c) {
            const double p = static_cast<double>(c) / n;
            h -= p * std::log2(p);
        }
    return std::clamp(h, 0.0, 8.0);
}

double ByteHistogram::printable_fraction() const {
    if (total_ == 0) return 0.0;
    std::uint64_t printable = counts_['\t'] + counts_['\n'] + counts_['\r'];
    for (int b = 0x20; b <= 0x7e; ++b) printable += counts_[static_cast<std::size_t>(b)];
    return static_cast<double>(printable) / static_cast<double>(total_);
}

double shannon_entropy(std::span<const std::uint8_t> bytes) {
    ByteHistogram h;
    h.add(bytes);
    return h.entropy();
}

std::string_view to_string(StreamVerdict v) {
    switch (v) {
        case StreamVerdict::Plaintext: return "plaintext-like";
        case StreamVerdict::Encoded: return "encoded-like";
        case StreamVerdict::Encrypted: return "encrypted-like";
    }
    return "encoded-like";
}

StreamVerdict classify(double entropy, double printable_fraction, const EntropyThresholds& t) {
    if (printable_fraction >= t.printable_fraction) return StreamVerdict::Plaintext;
    if (entropy >= t.encrypted_entropy) return StreamVerdict::Encrypted;
    return StreamVerdict::Encoded;
}

namespace {

EntropyReport finish(const ByteHistogram& total, std::array<std::uint64_t, 3> chunks, const EntropyThresholds& t) {
    EntropyReport r;
    r.total_bytes = total.total();
    r.entropy = total.entropy();
    r.printable_fraction = total.printable_fraction();
    r.verdict = classify(r.entropy, r.printable_fraction, t);
    r.thresholds = t;
    r.chunk_verdicts = chunks;
    if (r.total_bytes < t.recommended_bytes)
        r.notes.push_back("only " + std::to_string(r.total_bytes) + " bytes; at least " +
                          std::to_string(t.recommended_bytes) + " are recommended for a stable estimate");
    if (r.verdict == StreamVerdict::Encrypted)
        r.notes.push_back("high entropy also arises from compressed media such as video, which may be unencrypted");
    const auto mixed = std::count_if(chunks.begin(), chunks.end(), [](auto c) { return c > 0; });
    if (mixed > 1) r.notes.push_back("chunk verdicts are mixed; the stream is partially of each kind");
    return r;
}

void validate(const EntropyThresholds& t) {
    if (!(t.printable_fraction >= 0.0 && t.printable_fraction <= 1.0))
        throw Error("entropy", "printable threshold must lie in [0, 1]");
    if (!(t.encrypted_entropy >= 0.0 && t.encrypted_entropy <= 8.0))
        throw Error("entropy", "entropy threshold must lie in [0, 8]");
    if (t.chunk_bytes == 0) throw Error("entropy", "chunk size must be positive");
}

}  // namespace

EntropyReport classify_stream(std::span<const std::uint8_t> bytes, const EntropyThresholds& t) {
    validate(t);
    if (bytes.empty()) throw Error("entropy", "empty input");
    ByteHistogram total;
    std::array<std::uint64_t, 3> chunks{};
    for (std::size_t off = 0; off < bytes.size(); off += t.chunk_bytes) {
        ByteHistogram h;
        h.add(bytes.subspan(off, std::min(t.chunk_bytes, bytes.size() - off)));
        ++chunks[static_cast<std::size_t>(classify(h.entropy(), h.printable_fraction(), t))];
        total.merge(h);
    }
    return finish(total, chunks, t);
}

EntropyReport classify_file(const std::filesystem::path& path, const EntropyThresholds& t) {
    validate(t);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("entropy", "cannot open '" + path.string() + "'");
    ByteHistogram total;
    std::array<std::uint64_t, 3> chunks{};
    std::vector<std::uint8_t> buf(t.chunk_bytes);
    while (in) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        const auto got = static_cast<std::size_t>(in.gcount());
        if (got == 0) break;
        ByteHistogram h;
        h.add(std::span(buf).first(got));
        ++chunks[static_cast<std::size_t>(classify(h.entropy(), h.printable_fraction(), t))];
        total.merge(h);
    }
    if (total.total() == 0) throw Error("entropy", "'" + path.string() + "' is empty");
    return finish(total, chunks, t);
}

nlohmann::json to_json(const EntropyReport& r) {
    return nlohmann::json{
        {"total_bytes", r.total_bytes},
        {"entropy", r.entropy},
        {"printable_fraction", r.printable_fraction},
        {"verdict", to_string(r.verdict)},
        {"thresholds",
         {{"printable_fraction", r.thresholds.printable_fraction},
          {"encrypted_entropy", r.thresholds.encrypted_entropy},
          {"chunk_bytes", r.thresholds.chunk_bytes}}},
        {"chunk_verdicts",
         {{"plaintext-like", r.chunk_verdicts[0]},
          {"encoded-like", r.chunk_verdicts[1]},
          {"encrypted-like", r.chunk_verdicts[2]}}},
        {"notes", r.notes},
    };
}

}  // namespace iotmon
