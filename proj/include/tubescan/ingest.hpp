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

#ifndef TUBESCAN_INGEST_HPP
#define TUBESCAN_INGEST_HPP

#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tubescan/core.hpp"

namespace tubescan {

/// Nadir camera pose: world position of the image center, altitude, heading.
struct CameraPose {
    double world_x_m = 0.0;
    double world_y_m = 0.0;
    double altitude_m = 0.0;
    double yaw_rad = 0.0;

    friend bool operator==(const CameraPose&, const CameraPose&) = default;
};

struct FrameMeta {
    FrameId frame_id = 0;
    double timestamp_s = 0.0;
    std::optional<CameraPose> pose;
    int width_px = 0;
    int height_px = 0;
    std::optional<double> gsd_m_per_px;

    bool has_geometry() const { return pose.has_value() && gsd_m_per_px.has_value(); }

    friend bool operator==(const FrameMeta&, const FrameMeta&) = default;
};

// Nadir projection between image pixels and world meters:
//   world = pose + R(yaw) * ((u - W/2) * gsd, (v - H/2) * gsd)
// With yaw 0 image +x is world +x and image +y is world +y.
// Both throw ValidationError when the frame lacks pose or GSD.
Point2 frame_pixel_to_world(const FrameMeta& frame, Point2 pixel);
Point2 frame_world_to_pixel(const FrameMeta& frame, Point2 world);

struct RunDataset {
    ClassVocabulary vocabulary;
    std::vector<FrameMeta> frames;
    // Sorted by frame_id; file order is preserved within a frame.
    std::vector<Detection> detections;
    std::optional<std::vector<GroundTruthObject>> ground_truth;
    double area_m2 = 0.0;

    const FrameMeta* find_frame(FrameId id) const;

    friend bool operator==(const RunDataset&, const RunDataset&) = default;
};

// Thrown for malformed input files; carries the offending path and line.
class ParseError : public ValidationError {
  public:
    ParseError(const std::string& source, std::size_t line, const std::string& what);

    const std::string& source() const { return source_; }
    std::size_t line() const { return line_; }

  private:
    std::string source_;
    std::size_t line_;
};

// Vocabulary: CSV with header "class,is_target", one class per row, flag 0/1.
ClassVocabulary parse_vocabulary(std::istream& in, const std::string& source);
ClassVocabulary load_vocabulary(const std::filesystem::path& path);
void write_vocabulary(const ClassVocabulary& vocabulary, const std::filesystem::path& path);

// Detections: one JSON object per line,
//   {"frame_id":0,"detection_id":7,"bbox":[x,y,w,h],"scores":[...]}
// Blank lines are ignored.
std::vector<Detection> parse_detections(std::istream& in, const ClassVocabulary& vocabulary,
                                        const std::string& source);
std::vector<Detection> load_detections(const std::filesystem::path& path,
                                       const ClassVocabulary& vocabulary);
std::string serialize_detections(const std::vector<Detection>& detections);
void write_detections(const std::vector<Detection>& detections, const std::filesystem::path& path);

// Ground truth: CSV "object_id,class,world_x_m,world_y_m".
std::vector<GroundTruthObject> parse_ground_truth(std::istream& in, const ClassVocabulary& vocabulary,
                                                  const std::string& source);
std::vector<GroundTruthObject> load_ground_truth(const std::filesystem::path& path,
                                                 const ClassVocabulary& vocabulary);
// Optional per-frame pixel annotations: CSV "object_id,frame_id,px,py".
void load_pixel_annotations(const std::filesystem::path& path, std::vector<GroundTruthObject>& objects);
void write_ground_truth(const std::vector<GroundTruthObject>& objects, const ClassVocabulary& vocabulary,
                        const std::filesystem::path& path);
void write_pixel_annotations(const std::vector<GroundTruthObject>& objects,
                             const std::filesystem::path& path);

// Frames: CSV
//   "frame_id,timestamp_s,width_px,height_px,gsd_m_per_px,world_x_m,world_y_m,altitude_m,yaw_rad"
// gsd and the four pose columns may be empty; the pose is all-or-nothing.
std::vector<FrameMeta> parse_frames(std::istream& in, const std::string& source);
std::vector<FrameMeta> load_frames(const std::filesystem::path& path);
void write_frames(const std::vector<FrameMeta>& frames, const std::filesystem::path& path);

/// Cross-file checks: detection frames exist, score lengths, unique ids.
void validate_dataset(const RunDataset& dataset);

// Dataset manifest (JSON) naming the component files relative to itself.
RunDataset load_dataset(const std::filesystem::path& manifest_path);
void write_dataset(const RunDataset& dataset, const std::filesystem::path& directory);

inline constexpr std::string_view kManifestName = "manifest.json";

std::string serialize_report(const MetricsReport& report);
MetricsReport parse_report(const std::string& text);
void write_report(const MetricsReport& report, const std::filesystem::path& path);
MetricsReport read_report(const std::filesystem::path& path);

// ROC: CSV "threshold,p_d,d_fa,p_c"; absent ratios are empty cells.
std::string serialize_roc(const std::vector<RocPoint>& points);
void write_roc(const std::vector<RocPoint>& points, const std::filesystem::path& path);
std::vector<RocPoint> read_roc(const std::filesystem::path& path);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it into place.
void write_text_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace tubescan

#endif  // TUBESCAN_INGEST_HPP
