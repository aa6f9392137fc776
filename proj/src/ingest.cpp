#include "iotmon/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "iotmon/error.hpp"

namespace iotmon {

using nlohmann::json;

namespace {

std::optional<double> number_field(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_number()) return std::nullopt;
    const double v = it->get<double>();
    if (!std::isfinite(v)) return std::nullopt;
    return v;
}

// Integer field that must be integral-valued and inside [lo, hi].
std::optional<std::int64_t> int_field(const json& obj, const char* key, std::int64_t lo, std::int64_t hi) {
    auto it = obj.find(key);
    if (it == obj.end()) return std::nullopt;
    std::int64_t v = 0;
    if (it->is_number_integer()) {
        v = it->get<std::int64_t>();
    } else if (it->is_number_float()) {
        const double d = it->get<double>();
        if (!std::isfinite(d) || std::floor(d) != d) return std::nullopt;
        v = static_cast<std::int64_t>(d);
    } else {
        return std::nullopt;
    }
    if (v < lo || v > hi) return std::nullopt;
    return v;
}

std::optional<MacAddress> mac_field(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) return std::nullopt;
    return MacAddress::parse(it->get_ref<const std::string&>());
}

// Absent/null → engaged outer optional holding nullopt; wrong type → nullopt.
std::optional<std::optional<std::string>> optional_string(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::optional<std::string>{};
    if (!it->is_string()) return std::nullopt;
    return std::optional<std::string>{it->get<std::string>()};
}

double record_ts(const PacketRecord& r) { return r.ts; }
double record_ts(const EventRecord& r) { return r.ts; }

std::optional<PacketRecord> parse_line(std::string_view line, PacketRecord*) { return parse_packet_line(line); }
std::optional<EventRecord> parse_line(std::string_view line, EventRecord*) { return parse_event_line(line); }

bool is_blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

std::string_view to_string(EventKind kind) {
    switch (kind) {
        case EventKind::Domain: return "domain";
        case EventKind::RemotePort: return "remote_port";
        case EventKind::CipherSuite: return "cipher_suite";
    }
    return "?";
}

std::optional<EventKind> parse_event_kind(std::string_view text) {
    if (text == "domain") return EventKind::Domain;
    if (text == "remote_port") return EventKind::RemotePort;
    if (text == "cipher_suite") return EventKind::CipherSuite;
    return std::nullopt;
}

std::optional<PacketRecord> parse_packet_line(std::string_view line) {
    const json obj = json::parse(line.begin(), line.end(), nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) return std::nullopt;

    PacketRecord r;
    auto ts = number_field(obj, "ts");
    auto src = mac_field(obj, "src_mac");
    auto dst = mac_field(obj, "dst_mac");
    auto len = int_field(obj, "length", 0, 0xffffffffLL);
    if (!ts || !src || !dst || !len) return std::nullopt;
    r.ts = *ts;
    r.src_mac = *src;
    r.dst_mac = *dst;
    r.length = static_cast<std::uint32_t>(*len);

    if (obj.contains("proto")) {
        auto p = int_field(obj, "proto", 0, 255);
        if (!p) return std::nullopt;
        r.proto = static_cast<int>(*p);
    }
    auto src_ip = optional_string(obj, "src_ip");
    auto dst_ip = optional_string(obj, "dst_ip");
    if (!src_ip || !dst_ip) return std::nullopt;
    r.src_ip = std::move(*src_ip);
    r.dst_ip = std::move(*dst_ip);

    const bool has_ports = r.proto == proto::kTcp || r.proto == proto::kUdp;
    for (auto [key, slot] : {std::pair{"src_port", &r.src_port}, std::pair{"dst_port", &r.dst_port}}) {
        auto it = obj.find(key);
        if (it == obj.end() || it->is_null()) continue;
        if (!has_ports) return std::nullopt;
        auto port = int_field(obj, key, 0, 65535);
        if (!port) return std::nullopt;
        *slot = static_cast<std::uint16_t>(*port);
    }
    return r;
}

std::optional<EventRecord> parse_event_line(std::string_view line) {
    const json obj = json::parse(line.begin(), line.end(), nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) return std::nullopt;

    EventRecord r;
    auto ts = number_field(obj, "ts");
    auto device = mac_field(obj, "device");
    if (!ts || !device) return std::nullopt;
    auto kind_it = obj.find("kind");
    auto value_it = obj.find("value");
    if (kind_it == obj.end() || !kind_it->is_string()) return std::nullopt;
    if (value_it == obj.end() || !value_it->is_string()) return std::nullopt;
    auto kind = parse_event_kind(kind_it->get_ref<const std::string&>());
    if (!kind) return std::nullopt;
    r.ts = *ts;
    r.device = *device;
    r.kind = *kind;
    r.value = value_it->get<std::string>();
    if (r.value.empty()) return std::nullopt;
    if (obj.contains("count")) {
        auto count = int_field(obj, "count", 1, 0xffffffffLL);
        if (!count) return std::nullopt;
        r.count = static_cast<std::uint32_t>(*count);
    }
    return r;
}

std::string to_json_line(const PacketRecord& pkt) {
    json obj;
    obj["ts"] = pkt.ts;
    obj["src_mac"] = pkt.src_mac.str();
    obj["dst_mac"] = pkt.dst_mac.str();
    if (pkt.src_ip) obj["src_ip"] = *pkt.src_ip;
    if (pkt.dst_ip) obj["dst_ip"] = *pkt.dst_ip;
    obj["proto"] = pkt.proto;
    if (pkt.src_port) obj["src_port"] = *pkt.src_port;
    if (pkt.dst_port) obj["dst_port"] = *pkt.dst_port;
    obj["length"] = pkt.length;
    return obj.dump();
}

std::string to_json_line(const EventRecord& ev) {
    json obj;
    obj["ts"] = ev.ts;
    obj["device"] = ev.device.str();
    obj["kind"] = std::string(to_string(ev.kind));
    obj["value"] = ev.value;
    obj["count"] = ev.count;
    return obj.dump();
}

template <typename Record>
RecordReader<Record>::RecordReader(const std::filesystem::path& path, double reorder_window)
    : path_(path), in_(path), reorder_window_(reorder_window) {
    if (!in_) throw Error("ingest", "cannot open '" + path.string() + "'");
}

template <typename Record>
void RecordReader<Record>::mark_bad() {
    ++stats_.malformed;
    if (stats_.first_bad_lines.size() < 10) stats_.first_bad_lines.push_back(stats_.lines);
}

template <typename Record>
std::optional<Record> RecordReader<Record>::next() {
    std::string line;
    while (std::getline(in_, line)) {
        if (is_blank(line)) continue;
        ++stats_.lines;
        auto rec = parse_line(line, static_cast<Record*>(nullptr));
        if (!rec) {
            mark_bad();
            continue;
        }
        const double ts = record_ts(*rec);
        if (ts < newest_ts_ - reorder_window_) {
            ++stats_.skewed;
            mark_bad();
            continue;
        }
        newest_ts_ = std::max(newest_ts_, ts);
        ++stats_.records;
        return rec;
    }
    if (in_.bad()) throw Error("ingest", "read failure on '" + path_.string() + "'");
    return std::nullopt;
}

template <typename Record>
void RecordReader<Record>::finish() const {
    if (stats_.malformed_fraction() <= kMaxMalformedFraction) return;
    std::ostringstream msg;
    msg << "'" << path_.string() << "': " << stats_.malformed << " of " << stats_.lines
        << " lines malformed (>1%); first offending lines:";
    for (std::size_t n : stats_.first_bad_lines) msg << ' ' << n;
    throw Error("ingest", msg.str());
}

template class RecordReader<PacketRecord>;
template class RecordReader<EventRecord>;

namespace {

template <typename Record>
std::vector<Record> read_all(const std::filesystem::path& path, ReadStats* stats) {
    RecordReader<Record> reader(path);
    std::vector<Record> out;
    while (auto rec = reader.next()) out.push_back(std::move(*rec));
    if (stats) *stats = reader.stats();
    reader.finish();
    return out;
}

template <typename Record>
void write_all(std::span<const Record> records, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("ingest", "cannot write '" + path.string() + "'");
    for (const auto& r : records) out << to_json_line(r) << '\n';
    if (!out) throw Error("ingest", "write failure on '" + path.string() + "'");
}

}  // namespace

std::vector<PacketRecord> read_packets(const std::filesystem::path& path, ReadStats* stats) {
    return read_all<PacketRecord>(path, stats);
}

std::vector<EventRecord> read_events(const std::filesystem::path& path, ReadStats* stats) {
    return read_all<EventRecord>(path, stats);
}

void write_packets(std::span<const PacketRecord> packets, const std::filesystem::path& path) {
    write_all(packets, path);
}

void write_events(std::span<const EventRecord> events, const std::filesystem::path& path) {
    write_all(events, path);
}

// ---------------------------------------------------------------------------

AttributeSchema make_schema(std::vector<std::string> names) {
    return std::make_shared<const std::vector<std::string>>(std::move(names));
}

std::optional<double> AttributeInstance::get(std::string_view name) const {
    if (!schema) return std::nullopt;
    for (std::size_t i = 0; i < schema->size(); ++i)
        if ((*schema)[i] == name) return values[i];
    return std::nullopt;
}

bool operator==(const AttributeInstance& a, const AttributeInstance& b) {
    if (a.device != b.device || a.window_start != b.window_start || a.label != b.label) return false;
    if (a.values != b.values) return false;
    const bool a_empty = !a.schema || a.schema->empty();
    const bool b_empty = !b.schema || b.schema->empty();
    if (a_empty || b_empty) return a_empty == b_empty;
    return *a.schema == *b.schema;
}

std::string label_class(std::string_view label) {
    return std::string(label.substr(0, label.find(':')));
}

std::vector<std::string> common_attribute_names(std::span<const AttributeInstance> instances) {
    if (instances.empty()) return {};
    static const std::vector<std::string> kNone;
    const auto& first = instances.front().schema ? *instances.front().schema : kNone;
    for (const auto& inst : instances) {
        const auto& names = inst.schema ? *inst.schema : kNone;
        if (inst.values.size() != names.size())
            throw Error("instances", "value count does not match attribute-name count");
        if (inst.schema == instances.front().schema || names == first) continue;
        std::set<std::string> a(first.begin(), first.end());
        std::set<std::string> b(names.begin(), names.end());
        std::vector<std::string> diff;
        std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
        std::string msg = "heterogeneous attribute sets; symmetric difference:";
        if (diff.empty()) msg += " (same names, different order)";
        for (const auto& d : diff) msg += " " + d;
        throw Error("instances", msg);
    }
    return first;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_instances(std::span<const AttributeInstance> instances, std::ostream& out) {
    const auto names = common_attribute_names(instances);
    out << "device\twindow_start\tlabel";
    for (const auto& n : names) {
        if (n.find_first_of("\t\n") != std::string::npos)
            throw Error("instances", "attribute name contains a tab or newline");
        out << '\t' << n;
    }
    out << '\n';
    for (const auto& inst : instances) {
        out << inst.device.str() << '\t' << format_double(inst.window_start) << '\t';
        if (inst.label) {
            if (inst.label->empty() || inst.label->find_first_of("\t\n") != std::string::npos)
                throw Error("instances", "label must be non-empty and free of tabs/newlines");
            out << *inst.label;
        }
        for (double v : inst.values) {
            if (!std::isfinite(v)) throw Error("instances", "non-finite attribute value");
            out << '\t' << format_double(v);
        }
        out << '\n';
    }
}

void write_instances(std::span<const AttributeInstance> instances, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("instances", "cannot write '" + path.string() + "'");
    write_instances(instances, out);
    if (!out) throw Error("instances", "write failure on '" + path.string() + "'");
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t tab = line.find('\t', start);
        fields.push_back(line.substr(start, tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    return fields;
}

double parse_double(std::string_view s, std::size_t line_no) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v))
        throw Error("instances", "line " + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
    return v;
}

}  // namespace

std::vector<AttributeInstance> read_instances(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error("instances", "missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split_tabs(line);
    if (header.size() < 3 || header[0] != "device" || header[1] != "window_start" || header[2] != "label")
        throw Error("instances", "header must start with 'device\\twindow_start\\tlabel'");
    std::vector<std::string> names;
    for (std::size_t i = 3; i < header.size(); ++i) names.emplace_back(header[i]);
    auto schema = make_schema(std::move(names));

    std::vector<AttributeInstance> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        if (fields.size() != header.size())
            throw Error("instances", "line " + std::to_string(line_no) + ": expected " +
                                         std::to_string(header.size()) + " fields, got " +
                                         std::to_string(fields.size()));
        AttributeInstance inst;
        auto mac = MacAddress::parse(fields[0]);
        if (!mac) throw Error("instances", "line " + std::to_string(line_no) + ": bad device MAC");
        inst.device = *mac;
        inst.window_start = parse_double(fields[1], line_no);
        if (!fields[2].empty()) inst.label = std::string(fields[2]);
        inst.schema = schema;
        inst.values.reserve(schema->size());
        for (std::size_t i = 3; i < fields.size(); ++i) inst.values.push_back(parse_double(fields[i], line_no));
        out.push_back(std::move(inst));
    }
    return out;
}

std::vector<AttributeInstance> read_instances(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("instances", "cannot open '" + path.string() + "'");
    return read_instances(in);
}

}  // namespace iotmon
