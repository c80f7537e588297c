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

#ifndef TUBESCAN_TUBELET_HPP
#define TUBESCAN_TUBELET_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tubescan/core.hpp"
#include "tubescan/ingest.hpp"

namespace tubescan {

enum class MatchMode {
    iou,                  // q = IoU * (s_a . s_b)
    reciprocal_distance,  // q = (1 / max(d, eps)) * (s_a . s_b)
};

std::string to_string(MatchMode mode);
MatchMode parse_match_mode(const std::string& text);

struct MatchConfig {
    MatchMode mode = MatchMode::reciprocal_distance;
    double q_min = 1e-3;
    double epsilon_px = 1.0;
    // Largest allowed frame step between linked tubelets; 1 disables linking.
    int kappa = 1;
    // 1 keeps every tubelet.
    int min_tubelet_length = 1;

    /// Defaults for a mode: q_min is 1e-6 for IoU and 1e-3 for reciprocal distance.
    static MatchConfig defaults(MatchMode mode);
    void validate() const;
};

double match_quality(const Detection& a, const Detection& b, const MatchConfig& config);

struct MatchPair {
    std::size_t index_a = 0;
    std::size_t index_b = 0;
    double quality = 0.0;

    friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

/// Greedy one-to-one matching between two adjacent frames.
///
/// Candidate pairs with q >= q_min are accepted in descending q; equal q is
/// resolved toward the lexicographically smaller (index_a, index_b). The
/// result is listed in acceptance order.
std::vector<MatchPair> match_frame_pair(std::span<const Detection> frame_a, std::span<const Detection> frame_b,
                                        const MatchConfig& config);

/// Chains adjacent-frame matches into gap-free tubelets.
///
/// Detections are taken in frame order; inside a frame they are put in
/// detection_id order before matching so the result does not depend on the
/// order they arrived in. Every detection lands in exactly one tubelet and
/// the aggregate holds the mean of the raw member scores. Tubelet ids follow
/// (first frame, head detection_id).
std::vector<Tubelet> build_tubelets(std::span<const Detection> detections, const MatchConfig& config,
                                    int threads = 1);
std::vector<Tubelet> build_tubelets(const RunDataset& dataset, const MatchConfig& config, int threads = 1);

/// Replaces every member score vector with the tubelet mean.
Tubelet rescore(Tubelet tubelet);

/// Merges tubelets separated by 1..kappa-1 empty frames when the tail/head
/// match quality reaches q_min. Single greedy sweep; every tubelet gets at
/// most one successor and one predecessor. Merged tubelets are re-scored and
/// keep the id of their first piece. kappa == 1 returns the input unchanged.
std::vector<Tubelet> link_tubelets(std::vector<Tubelet> tubelets, const MatchConfig& config);

std::vector<Tubelet> filter_short(std::vector<Tubelet> tubelets, const MatchConfig& config);

/// Each detection as its own length-1 tubelet (the per-frame baseline).
std::vector<Tubelet> singleton_tubelets(std::span<const Detection> detections);

struct PipelineConfig {
    MatchConfig match;
    // false evaluates raw per-frame detections with no tubelet processing.
    bool use_tubelets = true;
};

/// build -> rescore -> link -> filter, or singletons when use_tubelets is off.
std::vector<Tubelet> run_pipeline(const RunDataset& dataset, const PipelineConfig& config, int threads = 1);

}  // namespace tubescan

#endif  // TUBESCAN_TUBELET_HPP
