#include "seld/io.hpp"

#include <json.hpp>

namespace seld::io {

namespace {

using nlohmann::json;

constexpr std::array<std::pair<const char*, std::optional<Keypoint> Person::*>, 5> kJoints = {{
    {"nose", &Person::nose},
    {"wrist_left", &Person::wrist_left},
    {"wrist_right", &Person::wrist_right},
    {"ankle_left", &Person::ankle_left},
    {"ankle_right", &Person::ankle_right},
}};

double unit_value(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || !obj.at(key).is_number()) {
        throw Error(where + ": missing numeric '" + key + "'");
    }
    double v = obj.at(key).get<double>();
    if (!(v >= 0.0 && v <= 1.0)) {
        throw Error(where + ": " + key + " = " + std::to_string(v) + " outside [0, 1]");
    }
    return v;
}

KeypointFrame frame_from_json(const json& obj, const std::string& where) {
    if (!obj.is_object()) {
        throw Error(where + ": expected a frame object");
    }
    if (!obj.contains("frame") || !obj.at("frame").is_number_integer()) {
        throw Error(where + ": missing integer 'frame'");
    }
    KeypointFrame frame;
    frame.frame = obj.at("frame").get<int>();
    if (frame.frame < 0) {
        throw Error(where + ": negative frame index");
    }
    if (!obj.contains("persons")) {
        return frame;
    }
    const auto& persons = obj.at("persons");
    if (!persons.is_array()) {
        throw Error(where + ": 'persons' must be an array");
    }
    for (const auto& p : persons) {
        if (!p.is_object()) {
            throw Error(where + ": person must be an object");
        }
        Person person;
        for (const auto& [name, member] : kJoints) {
            if (!p.contains(name) || p.at(name).is_null()) {
                continue;
            }
            const auto& kp = p.at(name);
            if (!kp.is_object()) {
                throw Error(where + ": keypoint '" + name + "' must be an object");
            }
            const std::string at = where + " " + name;
            person.*member = Keypoint{unit_value(kp, "u", at), unit_value(kp, "v", at),
                                      unit_value(kp, "conf", at)};
        }
        frame.persons.push_back(std::move(person));
    }
    return frame;
}

json frame_to_json(const KeypointFrame& frame) {
    json persons = json::array();
    for (const auto& person : frame.persons) {
        json p = json::object();
        for (const auto& [name, member] : kJoints) {
            if (const auto& kp = person.*member) {
                p[name] = {{"u", kp->u}, {"v", kp->v}, {"conf", kp->confidence}};
            }
        }
        persons.push_back(std::move(p));
    }
    return {{"frame", frame.frame}, {"persons", std::move(persons)}};
}

}  // namespace

std::vector<KeypointFrame> parse_keypoints(std::string_view text) {
    std::vector<KeypointFrame> frames;
    auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return frames;
    }
    try {
        if (text[first] == '[') {
            auto doc = json::parse(text);
            if (!doc.is_array()) {
                throw Error("keypoints: expected a JSON array");
            }
            for (std::size_t i = 0; i < doc.size(); ++i) {
                frames.push_back(frame_from_json(doc[i], "keypoints[" + std::to_string(i) + "]"));
            }
        } else {
            std::size_t line_no = 0;
            while (!text.empty()) {
                ++line_no;
                auto nl = text.find('\n');
                auto line = text.substr(0, nl);
                text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
                if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
                    continue;
                }
                frames.push_back(frame_from_json(json::parse(line), "line " + std::to_string(line_no)));
            }
        }
    } catch (const json::exception& e) {
        throw Error(std::string("keypoints: parse failure: ") + e.what());
    }
    return frames;
}

std::vector<KeypointFrame> read_keypoints(const fs::path& path) {
    try {
        return parse_keypoints(read_file(path));
    } catch (const Error& err) {
        throw Error(path.string() + ": " + err.what());
    }
}

std::string format_keypoints(const std::vector<KeypointFrame>& frames) {
    std::string out;
    for (const auto& f : frames) {
        out += frame_to_json(f).dump();
        out += '\n';
    }
    return out;
}

void write_keypoints(const std::vector<KeypointFrame>& frames, const fs::path& path) {
    write_file(path, format_keypoints(frames));
}

}  // namespace seld::io
