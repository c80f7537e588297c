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

#ifndef TUBESCAN_SIMGEN_HPP
#define TUBESCAN_SIMGEN_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "tubescan/core.hpp"
#include "tubescan/ingest.hpp"

namespace tubescan {

/// Portable random stream.
///
/// Raw words come from std::mt19937_64, whose output sequence is fixed by the
/// C++ standard. Derived draws are defined here rather than through the
/// library distributions, which differ between implementations:
///   uniform()   = (word >> 11) * 2^-53                  in [0, 1)
///   normal()    = Box-Muller, sqrt(-2 ln(1 - u1)) cos(2 pi u2)
///   below(n)    = floor(uniform() * n)
///   poisson(l)  = Knuth product-of-uniforms method
class SurveyRng {
  public:
    explicit SurveyRng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    std::size_t below(std::size_t n);
    int poisson(double mean);

  private:
    std::mt19937_64 engine_;
};

struct ScenarioClass {
    std::string name;
    bool is_target = true;
};

struct ScenarioObject {
    std::string class_name;
    Point2 position;  // world meters, inside the field
};

struct ConfusionPair {
    std::string true_class;
    std::string confused_with;
    // Chance that a view of `true_class` leaks score mass to `confused_with`.
    double probability = 0.0;
    // Leaked share is drawn uniformly from [min_share, max_share].
    double min_share = 0.3;
    double max_share = 0.7;
};

struct FieldSpec {
    double width_m = 35.0;
    double length_m = 122.0;
};

/// Lawnmower flight: passes run along the field length at evenly spread
/// cross-track positions and alternate direction (yaw 0, then pi).
struct FlightSpec {
    double altitude_m = 9.0;
    double speed_m_s = 7.2;
    double frame_rate_hz = 10.0;
    double swath_spacing_m = 12.0;
    // -1 picks ceil(width / swath_spacing).
    int passes = -1;
};

struct CameraSpec {
    int width_px = 1280;
    int height_px = 720;
    double gsd_m_per_px = 0.01;
    double object_size_m = 0.3;
};

struct NoiseSpec {
    double miss_probability = 0.0;
    // Poisson mean of scattered false alarms per frame.
    double false_alarm_rate = 0.0;
    double bbox_jitter_px = 0.0;
    // Weight of the random vector mixed into a one-hot score vector.
    double score_mixing = 0.0;
    // Per-detection confidence scale is drawn from [confidence_floor, 1].
    double confidence_floor = 1.0;
    std::vector<ConfusionPair> confusions;
    // Ground spots that fire in every frame that views them.
    std::vector<Point2> false_alarm_sites;
    int random_false_alarm_sites = 0;
    double site_emission_probability = 1.0;
};

struct SurveyScenario {
    std::uint64_t seed = 1;
    FieldSpec field;
    std::vector<ScenarioClass> classes;
    std::vector<ScenarioObject> objects;
    // Extra objects placed uniformly at random over the target classes.
    int random_objects = 0;
    FlightSpec flight;
    CameraSpec camera;
    NoiseSpec noise;

    /// 35 m x 122 m field, the six UXO classes, 19 random objects.
    static SurveyScenario reference_survey(std::uint64_t seed = 1);

    /// Throws ValidationError naming the offending field.
    void validate() const;
};

SurveyScenario scenario_from_json(const nlohmann::json& json);
nlohmann::json scenario_to_json(const SurveyScenario& scenario);
SurveyScenario load_scenario(const std::filesystem::path& path);

enum class TruthKind {
    object_view,      // true detection of a ground-truth object
    scattered_false,  // random false alarm
    site_false,       // false alarm from a persistent site
};

struct DetectionTruth {
    DetectionId detection_id = 0;
    FrameId frame_id = 0;
    TruthKind kind = TruthKind::object_view;
    std::optional<ObjectId> object_id;
    std::optional<std::size_t> true_class;
    // argmax of the emitted scores equals the true class
    bool correct_class = false;
    std::optional<std::int64_t> site_id;
    Point2 true_pixel;  // exact image position before jitter

    bool is_true() const { return kind == TruthKind::object_view; }

    friend bool operator==(const DetectionTruth&, const DetectionTruth&) = default;
};

struct InjectionLog {
    std::int64_t frames = 0;
    std::int64_t objects = 0;
    std::int64_t object_views = 0;
    std::int64_t true_detections = 0;
    std::int64_t misses = 0;
    std::int64_t scattered_false_alarms = 0;
    std::int64_t site_false_alarms = 0;
    std::int64_t false_alarm_sites = 0;
    // Sites that emitted at least one detection.
    std::int64_t active_false_alarm_sites = 0;
    std::int64_t confused_views = 0;

    std::int64_t false_alarms() const { return scattered_false_alarms + site_false_alarms; }

    friend bool operator==(const InjectionLog&, const InjectionLog&) = default;
};

/// Hidden truth channel for a generated dataset.
struct TruthRecord {
    // Hash of the serialized detection stream this record belongs to.
    std::string fingerprint;
    std::vector<DetectionTruth> detections;
    std::vector<Point2> false_alarm_sites;
    InjectionLog log;

    friend bool operator==(const TruthRecord&, const TruthRecord&) = default;
};

struct GeneratedSurvey {
    RunDataset dataset;
    TruthRecord truth;
    std::vector<std::string> warnings;
};

/// Flies the scenario and emits detections, frame metadata, ground truth
/// (world positions plus per-frame true pixels) and the area.
GeneratedSurvey generate(const SurveyScenario& scenario);

/// FNV-1a 64 over the serialized detection stream, as 16 hex digits.
std::string dataset_fingerprint(const RunDataset& dataset);

/// Truth tags in detection order. Throws ValidationError when the record was
/// not produced for this dataset.
std::vector<DetectionTruth> oracle_labels(const RunDataset& dataset, const TruthRecord& truth);

inline constexpr const char* kTruthFileName = "truth.json";

std::string serialize_truth(const TruthRecord& truth);
TruthRecord parse_truth(const std::string& text);
void write_truth(const TruthRecord& truth, const std::filesystem::path& path);
TruthRecord read_truth(const std::filesystem::path& path);

/// write_dataset plus truth.json in the same directory.
void write_survey(const GeneratedSurvey& survey, const std::filesystem::path& directory);

}  // namespace tubescan

#endif  // TUBESCAN_SIMGEN_HPP
