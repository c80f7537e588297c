// Copyright 2026 The tubescan Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tubescan/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace tubescan {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

std::vector<std::string> split_csv(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        auto cell = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r'))
            cell.remove_suffix(1);
        cells.emplace_back(cell);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

bool is_blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

// Reads CSV rows after checking the header; yields (line number, cells).
template <typename Fn>
void for_each_csv_row(std::istream& in, const std::string& source, const std::vector<std::string>& header,
                      Fn&& fn) {
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        auto cells = split_csv(line);
        if (!saw_header) {
            if (cells != header) {
                std::string expected;
                for (std::size_t i = 0; i < header.size(); ++i) expected += (i ? "," : "") + header[i];
                throw ParseError(source, line_no, "expected header '" + expected + "'");
            }
            saw_header = true;
            continue;
        }
        if (cells.size() != header.size()) {
            throw ParseError(source, line_no,
                             "expected " + std::to_string(header.size()) + " fields, got " +
                                 std::to_string(cells.size()));
        }
        fn(line_no, cells);
    }
}

double cell_double(const std::string& cell, const std::string& source, std::size_t line, const char* field) {
    try {
        return parse_double(cell);
    } catch (const ValidationError&) {
        throw ParseError(source, line, std::string("field '") + field + "': not a number: '" + cell + "'");
    }
}

std::int64_t cell_int(const std::string& cell, const std::string& source, std::size_t line, const char* field) {
    std::int64_t value = 0;
    const auto* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, value);
    if (ec != std::errc() || ptr != end || cell.empty()) {
        throw ParseError(source, line, std::string("field '") + field + "': not an integer: '" + cell + "'");
    }
    return value;
}

std::ifstream open_input(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open '" + path.string() + "'");
    }
    return in;
}

std::string join_row(std::initializer_list<std::string> cells) {
    std::string out;
    bool first = true;
    for (const auto& c : cells) {
        if (!first) out += ',';
        out += c;
        first = false;
    }
    out += '\n';
    return out;
}

std::string optional_cell(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}

ordered_json optional_json(const std::optional<double>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::optional<double> json_optional(const ordered_json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

ordered_json average_json(const AverageRow& row) {
    ordered_json j;
    j["precision"] = row.precision;
    j["recall"] = row.recall;
    j["f1"] = row.f1;
    j["support"] = row.support;
    return j;
}

AverageRow json_average(const ordered_json& j) {
    return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>(),
            j.at("support").get<std::int64_t>()};
}

}  // namespace

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : ValidationError(source + ":" + std::to_string(line) + ": " + what), source_(source), line_(line) {}

Point2 frame_pixel_to_world(const FrameMeta& frame, Point2 pixel) {
    if (!frame.has_geometry()) {
        throw ValidationError("frame " + std::to_string(frame.frame_id) + " has no pose/GSD");
    }
    const double gsd = *frame.gsd_m_per_px;
    const double u = (pixel.x - frame.width_px / 2.0) * gsd;
    const double v = (pixel.y - frame.height_px / 2.0) * gsd;
    const double c = std::cos(frame.pose->yaw_rad);
    const double s = std::sin(frame.pose->yaw_rad);
    return {frame.pose->world_x_m + c * u - s * v, frame.pose->world_y_m + s * u + c * v};
}

Point2 frame_world_to_pixel(const FrameMeta& frame, Point2 world) {
    if (!frame.has_geometry()) {
        throw ValidationError("frame " + std::to_string(frame.frame_id) + " has no pose/GSD");
    }
    const double gsd = *frame.gsd_m_per_px;
    const double dx = world.x - frame.pose->world_x_m;
    const double dy = world.y - frame.pose->world_y_m;
    const double c = std::cos(frame.pose->yaw_rad);
    const double s = std::sin(frame.pose->yaw_rad);
    return {(c * dx + s * dy) / gsd + frame.width_px / 2.0, (-s * dx + c * dy) / gsd + frame.height_px / 2.0};
}

const FrameMeta* RunDataset::find_frame(FrameId id) const {
    auto it = std::lower_bound(frames.begin(), frames.end(), id,
                               [](const FrameMeta& f, FrameId v) { return f.frame_id < v; });
    if (it == frames.end() || it->frame_id != id) return nullptr;
    return &*it;
}

std::string format_double(double value) {
    if (!std::isfinite(value)) {
        throw ValidationError("cannot serialize non-finite value");
    }
    if (value == 0.0) return "0";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) throw InvariantError("to_chars failed");
    return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = text.data() + text.size();
    if (begin != end && *begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || text.empty() || !std::isfinite(value)) {
        throw ValidationError("not a number: '" + std::string(text) + "'");
    }
    return value;
}

std::string read_text_file(const fs::path& path) {
    auto in = open_input(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file_atomic(const fs::path& path, std::string_view contents) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write '" + tmp.string() + "'");
        }
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) {
            throw std::runtime_error("write failed for '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw std::runtime_error("cannot rename into '" + path.string() + "': " + ec.message());
    }
}

// ---------------------------------------------------------------- vocabulary

ClassVocabulary parse_vocabulary(std::istream& in, const std::string& source) {
    std::vector<std::string> names;
    std::vector<bool> flags;
    for_each_csv_row(in, source, {"class", "is_target"}, [&](std::size_t line, const auto& cells) {
        if (cells[1] != "0" && cells[1] != "1") {
            throw ParseError(source, line, "is_target must be 0 or 1");
        }
        names.push_back(cells[0]);
        flags.push_back(cells[1] == "1");
    });
    try {
        return ClassVocabulary(std::move(names), std::move(flags));
    } catch (const ValidationError& e) {
        throw ValidationError(source + ": " + e.what());
    }
}

ClassVocabulary load_vocabulary(const fs::path& path) {
    auto in = open_input(path);
    return parse_vocabulary(in, path.string());
}

void write_vocabulary(const ClassVocabulary& vocabulary, const fs::path& path) {
    std::string out = "class,is_target\n";
    for (std::size_t i = 0; i < vocabulary.size(); ++i) {
        out += join_row({vocabulary.name(i), vocabulary.is_target(i) ? "1" : "0"});
    }
    write_text_file_atomic(path, out);
}

// ---------------------------------------------------------------- detections

std::vector<Detection> parse_detections(std::istream& in, const ClassVocabulary& vocabulary,
                                        const std::string& source) {
    std::vector<Detection> out;
    std::unordered_set<DetectionId> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(source, line_no, std::string("malformed record: ") + e.what());
        }
        Detection d;
        std::vector<double> box;
        std::vector<double> scores;
        try {
            d.frame_id = j.at("frame_id").get<FrameId>();
            d.detection_id = j.at("detection_id").get<DetectionId>();
            box = j.at("bbox").get<std::vector<double>>();
            scores = j.at("scores").get<std::vector<double>>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(source, line_no, std::string("malformed record: ") + e.what());
        }
        if (d.frame_id < 0) {
            throw ParseError(source, line_no, "negative frame_id");
        }
        if (box.size() != 4) {
            throw ParseError(source, line_no, "bbox must have 4 entries [x,y,w,h]");
        }
        d.bbox = {box[0], box[1], box[2], box[3]};
        if (!d.bbox.valid()) {
            throw ParseError(source, line_no, "bbox width and height must be positive and finite");
        }
        if (scores.size() != vocabulary.size()) {
            throw ParseError(source, line_no,
                             "score vector has " + std::to_string(scores.size()) + " entries, vocabulary has " +
                                 std::to_string(vocabulary.size()));
        }
        try {
            d.scores = ScoreVector(std::move(scores));
        } catch (const ValidationError& e) {
            throw ParseError(source, line_no, e.what());
        }
        if (!ids.insert(d.detection_id).second) {
            throw ParseError(source, line_no, "duplicate detection_id " + std::to_string(d.detection_id));
        }
        out.push_back(std::move(d));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Detection& a, const Detection& b) { return a.frame_id < b.frame_id; });
    return out;
}

std::vector<Detection> load_detections(const fs::path& path, const ClassVocabulary& vocabulary) {
    auto in = open_input(path);
    return parse_detections(in, vocabulary, path.string());
}

std::string serialize_detections(const std::vector<Detection>& detections) {
    std::string out;
    for (const auto& d : detections) {
        ordered_json j;
        j["frame_id"] = d.frame_id;
        j["detection_id"] = d.detection_id;
        j["bbox"] = {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h};
        j["scores"] = std::vector<double>(d.scores.values().begin(), d.scores.values().end());
        out += j.dump();
        out += '\n';
    }
    return out;
}

void write_detections(const std::vector<Detection>& detections, const fs::path& path) {
    write_text_file_atomic(path, serialize_detections(detections));
}

// -------------------------------------------------------------- ground truth

std::vector<GroundTruthObject> parse_ground_truth(std::istream& in, const ClassVocabulary& vocabulary,
                                                  const std::string& source) {
    std::vector<GroundTruthObject> out;
    std::set<ObjectId> ids;
    for_each_csv_row(in, source, {"object_id", "class", "world_x_m", "world_y_m"},
                     [&](std::size_t line, const auto& cells) {
                         GroundTruthObject o;
                         o.object_id = cell_int(cells[0], source, line, "object_id");
                         auto cls = vocabulary.index_of(cells[1]);
                         if (!cls) {
                             throw ParseError(source, line, "unknown class label '" + cells[1] + "'");
                         }
                         o.class_label = *cls;
                         o.world_position = {cell_double(cells[2], source, line, "world_x_m"),
                                             cell_double(cells[3], source, line, "world_y_m")};
                         if (!ids.insert(o.object_id).second) {
                             throw ParseError(source, line, "duplicate object_id " + cells[0]);
                         }
                         out.push_back(std::move(o));
                     });
    return out;
}

std::vector<GroundTruthObject> load_ground_truth(const fs::path& path, const ClassVocabulary& vocabulary) {
    auto in = open_input(path);
    return parse_ground_truth(in, vocabulary, path.string());
}

void load_pixel_annotations(const fs::path& path, std::vector<GroundTruthObject>& objects) {
    auto in = open_input(path);
    const std::string source = path.string();
    std::map<ObjectId, std::size_t> index;
    for (std::size_t i = 0; i < objects.size(); ++i) index[objects[i].object_id] = i;
    for_each_csv_row(in, source, {"object_id", "frame_id", "px", "py"}, [&](std::size_t line, const auto& cells) {
        const auto id = cell_int(cells[0], source, line, "object_id");
        auto it = index.find(id);
        if (it == index.end()) {
            throw ParseError(source, line, "annotation for unknown object_id " + cells[0]);
        }
        PixelAnnotation a{cell_int(cells[1], source, line, "frame_id"),
                          {cell_double(cells[2], source, line, "px"), cell_double(cells[3], source, line, "py")}};
        auto& obj = objects[it->second];
        if (obj.pixel_in(a.frame_id)) {
            throw ParseError(source, line, "duplicate annotation for object " + cells[0] + " in frame " + cells[1]);
        }
        obj.pixels.push_back(a);
    });
}

void write_ground_truth(const std::vector<GroundTruthObject>& objects, const ClassVocabulary& vocabulary,
                        const fs::path& path) {
    std::string out = "object_id,class,world_x_m,world_y_m\n";
    for (const auto& o : objects) {
        out += join_row({std::to_string(o.object_id), vocabulary.name(o.class_label),
                         format_double(o.world_position.x), format_double(o.world_position.y)});
    }
    write_text_file_atomic(path, out);
}

void write_pixel_annotations(const std::vector<GroundTruthObject>& objects, const fs::path& path) {
    std::string out = "object_id,frame_id,px,py\n";
    for (const auto& o : objects) {
        for (const auto& p : o.pixels) {
            out += join_row({std::to_string(o.object_id), std::to_string(p.frame_id), format_double(p.pixel.x),
                             format_double(p.pixel.y)});
        }
    }
    write_text_file_atomic(path, out);
}

// -------------------------------------------------------------------- frames

std::vector<FrameMeta> parse_frames(std::istream& in, const std::string& source) {
    std::vector<FrameMeta> out;
    for_each_csv_row(in, source,
                     {"frame_id", "timestamp_s", "width_px", "height_px", "gsd_m_per_px", "world_x_m", "world_y_m",
                      "altitude_m", "yaw_rad"},
                     [&](std::size_t line, const auto& cells) {
                         FrameMeta f;
                         f.frame_id = cell_int(cells[0], source, line, "frame_id");
                         f.timestamp_s = cell_double(cells[1], source, line, "timestamp_s");
                         f.width_px = static_cast<int>(cell_int(cells[2], source, line, "width_px"));
                         f.height_px = static_cast<int>(cell_int(cells[3], source, line, "height_px"));
                         if (f.frame_id < 0) throw ParseError(source, line, "negative frame_id");
                         if (f.width_px <= 0 || f.height_px <= 0) {
                             throw ParseError(source, line, "image size must be positive");
                         }
                         if (!cells[4].empty()) {
                             f.gsd_m_per_px = cell_double(cells[4], source, line, "gsd_m_per_px");
                             if (*f.gsd_m_per_px <= 0.0) throw ParseError(source, line, "gsd must be positive");
                         }
                         const int present = static_cast<int>(!cells[5].empty()) + !cells[6].empty() +
                                             !cells[7].empty() + !cells[8].empty();
                         if (present == 4) {
                             f.pose = CameraPose{cell_double(cells[5], source, line, "world_x_m"),
                                                 cell_double(cells[6], source, line, "world_y_m"),
                                                 cell_double(cells[7], source, line, "altitude_m"),
                                                 cell_double(cells[8], source, line, "yaw_rad")};
                             if (f.pose->altitude_m <= 0.0) {
                                 throw ParseError(source, line, "altitude must be positive");
                             }
                         } else if (present != 0) {
                             throw ParseError(source, line, "camera pose columns must be all set or all empty");
                         }
                         if (!out.empty()) {
                             if (f.frame_id <= out.back().frame_id) {
                                 throw ParseError(source, line, "frame_id must be strictly increasing");
                             }
                             if (f.timestamp_s <= out.back().timestamp_s) {
                                 throw ParseError(source, line, "timestamp must increase with frame_id");
                             }
                         }
                         out.push_back(f);
                     });
    return out;
}

std::vector<FrameMeta> load_frames(const fs::path& path) {
    auto in = open_input(path);
    return parse_frames(in, path.string());
}

void write_frames(const std::vector<FrameMeta>& frames, const fs::path& path) {
    std::string out = "frame_id,timestamp_s,width_px,height_px,gsd_m_per_px,world_x_m,world_y_m,altitude_m,yaw_rad\n";
    for (const auto& f : frames) {
        const bool p = f.pose.has_value();
        out += join_row({std::to_string(f.frame_id), format_double(f.timestamp_s), std::to_string(f.width_px),
                         std::to_string(f.height_px), optional_cell(f.gsd_m_per_px),
                         p ? format_double(f.pose->world_x_m) : "", p ? format_double(f.pose->world_y_m) : "",
                         p ? format_double(f.pose->altitude_m) : "", p ? format_double(f.pose->yaw_rad) : ""});
    }
    write_text_file_atomic(path, out);
}

// ------------------------------------------------------------------- dataset

void validate_dataset(const RunDataset& ds) {
    for (std::size_t i = 1; i < ds.frames.size(); ++i) {
        if (ds.frames[i].frame_id <= ds.frames[i - 1].frame_id) {
            throw ValidationError("frames are not strictly increasing at frame " +
                                  std::to_string(ds.frames[i].frame_id));
        }
    }
    std::unordered_set<DetectionId> ids;
    for (std::size_t i = 0; i < ds.detections.size(); ++i) {
        const auto& d = ds.detections[i];
        if (i > 0 && d.frame_id < ds.detections[i - 1].frame_id) {
            throw ValidationError("detections are not grouped in frame order");
        }
        if (!ds.find_frame(d.frame_id)) {
            throw ValidationError("detection " + std::to_string(d.detection_id) + " refers to unknown frame " +
                                  std::to_string(d.frame_id));
        }
        if (d.scores.size() != ds.vocabulary.size()) {
            throw ValidationError("detection " + std::to_string(d.detection_id) + " has " +
                                  std::to_string(d.scores.size()) + " scores, vocabulary has " +
                                  std::to_string(ds.vocabulary.size()));
        }
        if (!ids.insert(d.detection_id).second) {
            throw ValidationError("duplicate detection_id " + std::to_string(d.detection_id));
        }
    }
    if (ds.ground_truth) {
        std::set<ObjectId> oids;
        for (const auto& o : *ds.ground_truth) {
            if (o.class_label >= ds.vocabulary.size()) {
                throw ValidationError("ground-truth object " + std::to_string(o.object_id) + " has unknown class");
            }
            if (!oids.insert(o.object_id).second) {
                throw ValidationError("duplicate object_id " + std::to_string(o.object_id));
            }
        }
    }
    if (!(ds.area_m2 > 0.0) || !std::isfinite(ds.area_m2)) {
        throw ValidationError("survey area must be positive");
    }
}

RunDataset load_dataset(const fs::path& manifest_path) {
    const std::string text = read_text_file(manifest_path);
    ordered_json m;
    try {
        m = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(manifest_path.string() + ": malformed manifest: " + e.what());
    }
    const fs::path base = manifest_path.parent_path();
    auto member = [&](const char* key) -> std::optional<fs::path> {
        if (!m.contains(key) || m[key].is_null()) return std::nullopt;
        return base / m[key].get<std::string>();
    };
    try {
        auto vocab_path = member("vocabulary");
        auto frames_path = member("frames");
        auto det_path = member("detections");
        if (!vocab_path || !frames_path || !det_path || !m.contains("area_m2")) {
            throw ValidationError(manifest_path.string() +
                                  ": manifest needs vocabulary, frames, detections and area_m2");
        }
        RunDataset ds{load_vocabulary(*vocab_path), load_frames(*frames_path), {}, std::nullopt,
                      m.at("area_m2").get<double>()};
        ds.detections = load_detections(*det_path, ds.vocabulary);
        if (auto gt = member("ground_truth")) {
            ds.ground_truth = load_ground_truth(*gt, ds.vocabulary);
            if (auto px = member("pixel_annotations")) {
                load_pixel_annotations(*px, *ds.ground_truth);
            }
        }
        validate_dataset(ds);
        return ds;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(manifest_path.string() + ": " + e.what());
    }
}

void write_dataset(const RunDataset& ds, const fs::path& directory) {
    fs::create_directories(directory);
    ordered_json m;
    m["format"] = "tubescan-dataset/1";
    m["vocabulary"] = "vocabulary.csv";
    m["frames"] = "frames.csv";
    m["detections"] = "detections.jsonl";
    write_vocabulary(ds.vocabulary, directory / "vocabulary.csv");
    write_frames(ds.frames, directory / "frames.csv");
    write_detections(ds.detections, directory / "detections.jsonl");
    if (ds.ground_truth) {
        m["ground_truth"] = "ground_truth.csv";
        write_ground_truth(*ds.ground_truth, ds.vocabulary, directory / "ground_truth.csv");
        const bool any_pixels = std::any_of(ds.ground_truth->begin(), ds.ground_truth->end(),
                                            [](const GroundTruthObject& o) { return !o.pixels.empty(); });
        if (any_pixels) {
            m["pixel_annotations"] = "pixel_annotations.csv";
            write_pixel_annotations(*ds.ground_truth, directory / "pixel_annotations.csv");
        }
    }
    m["area_m2"] = ds.area_m2;
    write_text_file_atomic(directory / std::string(kManifestName), m.dump(2) + "\n");
}

// ------------------------------------------------------------------- reports

std::string serialize_report(const MetricsReport& r) {
    ordered_json j;
    j["threshold"] = r.threshold;
    j["n_true_detections"] = r.n_true_detections;
    j["n_targets"] = r.n_targets;
    j["n_false_detections"] = r.n_false_detections;
    j["n_correct_classifications"] = r.n_correct_classifications;
    j["area_m2"] = r.area_m2;
    j["p_d"] = optional_json(r.p_d);
    j["d_fa"] = r.d_fa;
    j["p_c"] = optional_json(r.p_c);
    j["labels"] = r.labels;
    j["confusion"] = r.confusion;
    ordered_json rows = ordered_json::array();
    for (const auto& row : r.per_class) {
        ordered_json jr;
        jr["class"] = row.name;
        jr["precision"] = row.precision;
        jr["recall"] = row.recall;
        jr["f1"] = row.f1;
        jr["support"] = row.support;
        rows.push_back(std::move(jr));
    }
    j["per_class"] = std::move(rows);
    j["accuracy"] = r.accuracy;
    j["macro_avg"] = average_json(r.macro_avg);
    j["weighted_avg"] = average_json(r.weighted_avg);
    return j.dump(2) + "\n";
}

MetricsReport parse_report(const std::string& text) {
    try {
        const auto j = ordered_json::parse(text);
        MetricsReport r;
        r.threshold = j.at("threshold").get<double>();
        r.n_true_detections = j.at("n_true_detections").get<std::int64_t>();
        r.n_targets = j.at("n_targets").get<std::int64_t>();
        r.n_false_detections = j.at("n_false_detections").get<std::int64_t>();
        r.n_correct_classifications = j.at("n_correct_classifications").get<std::int64_t>();
        r.area_m2 = j.at("area_m2").get<double>();
        r.p_d = json_optional(j.at("p_d"));
        r.d_fa = j.at("d_fa").get<double>();
        r.p_c = json_optional(j.at("p_c"));
        r.labels = j.at("labels").get<std::vector<std::string>>();
        r.confusion = j.at("confusion").get<std::vector<std::vector<std::int64_t>>>();
        for (const auto& jr : j.at("per_class")) {
            r.per_class.push_back({jr.at("class").get<std::string>(), jr.at("precision").get<double>(),
                                   jr.at("recall").get<double>(), jr.at("f1").get<double>(),
                                   jr.at("support").get<std::int64_t>()});
        }
        r.accuracy = j.at("accuracy").get<double>();
        r.macro_avg = json_average(j.at("macro_avg"));
        r.weighted_avg = json_average(j.at("weighted_avg"));
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed metrics report: ") + e.what());
    }
}

void write_report(const MetricsReport& report, const fs::path& path) {
    write_text_file_atomic(path, serialize_report(report));
}

MetricsReport read_report(const fs::path& path) {
    return parse_report(read_text_file(path));
}

std::string serialize_roc(const std::vector<RocPoint>& points) {
    std::string out = "threshold,p_d,d_fa,p_c\n";
    for (const auto& p : points) {
        out += join_row({format_double(p.threshold), optional_cell(p.p_d), format_double(p.d_fa), optional_cell(p.p_c)});
    }
    return out;
}

void write_roc(const std::vector<RocPoint>& points, const fs::path& path) {
    write_text_file_atomic(path, serialize_roc(points));
}

std::vector<RocPoint> read_roc(const fs::path& path) {
    auto in = open_input(path);
    const std::string source = path.string();
    std::vector<RocPoint> out;
    auto opt = [&](const std::string& cell, std::size_t line, const char* field) -> std::optional<double> {
        if (cell.empty()) return std::nullopt;
        return cell_double(cell, source, line, field);
    };
    for_each_csv_row(in, source, {"threshold", "p_d", "d_fa", "p_c"}, [&](std::size_t line, const auto& cells) {
        out.push_back({cell_double(cells[0], source, line, "threshold"), opt(cells[1], line, "p_d"),
                       cell_double(cells[2], source, line, "d_fa"), opt(cells[3], line, "p_c")});
    });
    return out;
}

}  // namespace tubescan
