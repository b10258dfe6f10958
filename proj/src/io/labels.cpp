#include "seld/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace seld::io {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line, const char* name) {
    field = trim(field);
    T value{};
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
        throw Error("line " + std::to_string(line) + ": cannot parse " + name + " from '" +
                    std::string(field) + "'");
    }
    return value;
}

void append_number(std::string& out, double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, ptr);
}

}  // namespace

std::vector<EventRecord> parse_labels(std::string_view text) {
    std::vector<EventRecord> events;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        auto nl = text.find('\n');
        auto line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (line.empty()) {
            continue;
        }
        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            auto comma = line.find(',', start);
            fields.push_back(line.substr(start, comma - start));
            if (comma == std::string_view::npos) {
                break;
            }
            start = comma + 1;
        }
        if (fields.size() != 6) {
            throw Error("line " + std::to_string(line_no) + ": expected 6 fields, got " +
                        std::to_string(fields.size()));
        }
        EventRecord e;
        e.frame = parse_number<int>(fields[0], line_no, "frame");
        e.class_index = parse_number<int>(fields[1], line_no, "class");
        e.source_id = parse_number<int>(fields[2], line_no, "source");
        e.azimuth_deg = parse_number<double>(fields[3], line_no, "azimuth");
        e.distance_m = parse_number<double>(fields[4], line_no, "distance");
        int on = parse_number<int>(fields[5], line_no, "onscreen");
        if (on != 0 && on != 1) {
            throw Error("line " + std::to_string(line_no) + ": onscreen must be 0 or 1");
        }
        e.onscreen = on == 1;
        try {
            validate_event(e);
        } catch (const Error& err) {
            throw Error("line " + std::to_string(line_no) + ": " + err.what());
        }
        events.push_back(e);
    }
    std::stable_sort(events.begin(), events.end(), event_order);
    return events;
}

std::vector<EventRecord> read_labels(const fs::path& path) {
    try {
        return parse_labels(read_file(path));
    } catch (const Error& err) {
        throw Error(path.string() + ": " + err.what());
    }
}

std::string format_labels(const std::vector<EventRecord>& events) {
    auto sorted = events;
    std::stable_sort(sorted.begin(), sorted.end(), event_order);
    std::string out;
    for (const auto& e : sorted) {
        validate_event(e);
        out += std::to_string(e.frame);
        out += ',';
        out += std::to_string(e.class_index);
        out += ',';
        out += std::to_string(e.source_id);
        out += ',';
        append_number(out, e.azimuth_deg);
        out += ',';
        append_number(out, e.distance_m);
        out += ',';
        out += e.onscreen ? '1' : '0';
        out += '\n';
    }
    return out;
}

void write_labels(const std::vector<EventRecord>& events, const fs::path& path) {
    write_file(path, format_labels(events));
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void write_file(const fs::path& path, std::string_view bytes) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error("write failed: " + path.string());
    }
}

}  // namespace seld::io
