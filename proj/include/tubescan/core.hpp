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

#ifndef TUBESCAN_CORE_HPP
#define TUBESCAN_CORE_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tubescan {

using FrameId = std::int64_t;
using DetectionId = std::int64_t;
using ObjectId = std::int64_t;
using TubeletId = std::int64_t;

// Input that fails validation (bad file contents, inconsistent arguments).
class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// A violated internal invariant; indicates a bug rather than bad input.
class InvariantError : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

double distance(Point2 a, Point2 b);

/// Ordered class labels plus the subset flagged as targets.
class ClassVocabulary {
  public:
    ClassVocabulary(std::vector<std::string> names, std::vector<bool> is_target);

    std::size_t size() const { return names_.size(); }
    const std::string& name(std::size_t index) const { return names_.at(index); }
    bool is_target(std::size_t index) const { return is_target_.at(index); }
    const std::vector<std::string>& names() const { return names_; }
    const std::vector<bool>& target_flags() const { return is_target_; }

    std::optional<std::size_t> index_of(const std::string& name) const;

    friend bool operator==(const ClassVocabulary&, const ClassVocabulary&) = default;

  private:
    std::vector<std::string> names_;
    std::vector<bool> is_target_;
};

/// Axis-aligned box in continuous pixel coordinates, origin top-left, y down.
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    Point2 centroid() const { return {x + w / 2.0, y + h / 2.0}; }
    double area() const { return w * h; }
    bool valid() const;

    friend bool operator==(const BBox&, const BBox&) = default;
};

/// Per-class confidences. Entries are independent and need not sum to 1.
class ScoreVector {
  public:
    ScoreVector() = default;
    explicit ScoreVector(std::vector<double> scores);

    std::size_t size() const { return scores_.size(); }
    double operator[](std::size_t i) const { return scores_[i]; }
    std::span<const double> values() const { return scores_; }

    double confidence() const;
    // Argmax; ties go to the lowest index.
    std::size_t top_class() const;

    friend bool operator==(const ScoreVector&, const ScoreVector&) = default;

  private:
    std::vector<double> scores_;
};

double dot(const ScoreVector& a, const ScoreVector& b);

struct Detection {
    FrameId frame_id = 0;
    BBox bbox;
    ScoreVector scores;
    DetectionId detection_id = 0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

struct Tubelet {
    std::vector<Detection> detections;
    ScoreVector aggregate;
    TubeletId tubelet_id = 0;

    std::size_t length() const { return detections.size(); }
    FrameId first_frame() const { return detections.front().frame_id; }
    FrameId last_frame() const { return detections.back().frame_id; }
    const Detection& head() const { return detections.front(); }
    const Detection& tail() const { return detections.back(); }
    double confidence() const { return aggregate.confidence(); }
    std::size_t top_class() const { return aggregate.top_class(); }

    friend bool operator==(const Tubelet&, const Tubelet&) = default;
};

/// Entrywise running mean of the member score vectors. The running form is
/// exact when every member is already equal to the mean.
ScoreVector mean_scores(std::span<const Detection> detections);

/// Builds a tubelet from ordered members and fills in the aggregate score.
Tubelet make_tubelet(std::vector<Detection> detections, TubeletId id);

struct PixelAnnotation {
    FrameId frame_id = 0;
    Point2 pixel;

    friend bool operator==(const PixelAnnotation&, const PixelAnnotation&) = default;
};

struct GroundTruthObject {
    ObjectId object_id = 0;
    std::size_t class_label = 0;
    Point2 world_position;
    std::vector<PixelAnnotation> pixels;

    std::optional<Point2> pixel_in(FrameId frame) const;

    friend bool operator==(const GroundTruthObject&, const GroundTruthObject&) = default;
};

struct ClassRow {
    std::string name;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t support = 0;

    friend bool operator==(const ClassRow&, const ClassRow&) = default;
};

struct AverageRow {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t support = 0;

    friend bool operator==(const AverageRow&, const AverageRow&) = default;
};

/// Detection, false-alarm and classification metrics at one threshold.
///
/// The confusion matrix is (K+1)x(K+1): rows are true labels, columns are
/// predicted labels, and index K is "Not Detected" in both directions.
struct MetricsReport {
    double threshold = 0.0;
    std::int64_t n_true_detections = 0;
    std::int64_t n_targets = 0;
    std::int64_t n_false_detections = 0;
    std::int64_t n_correct_classifications = 0;
    double area_m2 = 0.0;

    std::optional<double> p_d;
    double d_fa = 0.0;
    std::optional<double> p_c;

    std::vector<std::string> labels;
    std::vector<std::vector<std::int64_t>> confusion;
    std::vector<ClassRow> per_class;
    double accuracy = 0.0;
    AverageRow macro_avg;
    AverageRow weighted_avg;

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// One point of a threshold sweep.
struct RocPoint {
    double threshold = 0.0;
    std::optional<double> p_d;
    double d_fa = 0.0;
    std::optional<double> p_c;

    friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

inline constexpr const char* kNotDetectedLabel = "Not Detected";

double iou(const BBox& a, const BBox& b);
double centroid_distance(const BBox& a, const BBox& b);

}  // namespace tubescan

#endif  // TUBESCAN_CORE_HPP
