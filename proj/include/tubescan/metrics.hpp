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

#ifndef TUBESCAN_METRICS_HPP
#define TUBESCAN_METRICS_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tubescan/core.hpp"
#include "tubescan/ingest.hpp"
#include "tubescan/tubelet.hpp"

namespace tubescan {

/// 0.00, 0.05, ..., 0.95.
std::vector<double> default_threshold_grid();

struct AssociationConfig {
    double match_radius_m = 1.0;
    // Used only for pixel-annotated ground truth on frames without GSD.
    double match_radius_px = 25.0;
    std::vector<double> threshold_grid = default_threshold_grid();

    void validate() const;
};

enum class Localization {
    world,  // tubelet position = mean of member centroids projected to the ground
    pixel,  // per-frame pixel annotations compared with member centroids
};

enum class Outcome {
    true_positive,
    false_alarm,
    non_target,  // argmax outside the target set; neither detection nor false alarm
};

struct TubeletAssignment {
    Outcome outcome = Outcome::non_target;
    std::optional<std::size_t> object_index;
    std::size_t predicted_class = 0;
    // World meters in world mode; mean member centroid (frame pixels) otherwise.
    Point2 location;
};

struct Assignment {
    Localization localization = Localization::world;
    std::vector<TubeletAssignment> tubelets;  // parallel to the input tubelets
    // Target objects only, in ground-truth order.
    std::vector<std::size_t> target_objects;   // index into the ground-truth list
    std::vector<std::size_t> target_classes;   // class of each target object
    std::vector<std::optional<std::size_t>> claimed_by;  // tubelet index per target object
};

/// Mean of the members' ground-projected centroids.
Point2 tubelet_world_location(const Tubelet& tubelet, const RunDataset& dataset);

/// Claims each target object for at most one target-class tubelet.
///
/// Pairs within the radius are accepted greedily by ascending distance (ties
/// by tubelet index, then object index). Unclaimed target-class tubelets are
/// false alarms. World mode needs pose and GSD on every frame that holds a
/// detection; otherwise pixel annotations are used, and if neither exists a
/// ValidationError is thrown.
Assignment associate(std::span<const Tubelet> tubelets, const std::vector<GroundTruthObject>& ground_truth,
                     const RunDataset& dataset, const AssociationConfig& config);

/// Metrics for an association computed at `threshold`.
MetricsReport compute_metrics(const Assignment& assignment, const ClassVocabulary& vocabulary, double area_m2,
                              double threshold);

/// Metrics straight from a (K+1)x(K+1) confusion matrix whose last label is
/// "Not Detected". False alarms are not part of the matrix and are supplied
/// separately.
MetricsReport metrics_from_confusion(const std::vector<std::vector<std::int64_t>>& confusion,
                                     const std::vector<std::string>& labels, double area_m2, double threshold,
                                     std::int64_t n_false_detections = 0);

/// Tubelets whose re-scored confidence is at least `threshold`.
std::vector<Tubelet> apply_threshold(std::span<const Tubelet> tubelets, double threshold);

/// Runs the pipeline once and evaluates every threshold of the grid, in
/// ascending order. Threshold points are independent and may run on
/// `threads` workers.
std::vector<MetricsReport> roc_sweep(const RunDataset& dataset, const PipelineConfig& pipeline,
                                     const AssociationConfig& config, int threads = 1);

/// Same, reusing tubelets that were already built.
std::vector<MetricsReport> roc_sweep(const RunDataset& dataset, std::span<const Tubelet> tubelets,
                                     const AssociationConfig& config, int threads = 1);

std::vector<RocPoint> to_roc_points(std::span<const MetricsReport> reports);

}  // namespace tubescan

#endif  // TUBESCAN_METRICS_HPP
