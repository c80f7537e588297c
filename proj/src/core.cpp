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

#include "tubescan/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace tubescan {

double distance(Point2 a, Point2 b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

ClassVocabulary::ClassVocabulary(std::vector<std::string> names, std::vector<bool> is_target)
    : names_(std::move(names)), is_target_(std::move(is_target)) {
    if (names_.empty()) {
        throw ValidationError("class vocabulary is empty");
    }
    if (names_.size() != is_target_.size()) {
        throw ValidationError("class vocabulary: " + std::to_string(names_.size()) + " names but " +
                              std::to_string(is_target_.size()) + " target flags");
    }
    std::set<std::string> seen;
    for (const auto& n : names_) {
        if (n.empty()) {
            throw ValidationError("class vocabulary contains an empty name");
        }
        if (!seen.insert(n).second) {
            throw ValidationError("class vocabulary contains duplicate name '" + n + "'");
        }
    }
}

std::optional<std::size_t> ClassVocabulary::index_of(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - names_.begin());
}

bool BBox::valid() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) && w > 0.0 &&
           h > 0.0;
}

ScoreVector::ScoreVector(std::vector<double> scores) : scores_(std::move(scores)) {
    for (double s : scores_) {
        if (!(s >= 0.0 && s <= 1.0)) {
            throw ValidationError("score " + std::to_string(s) + " outside [0, 1]");
        }
    }
}

double ScoreVector::confidence() const {
    if (scores_.empty()) {
        return 0.0;
    }
    return scores_[top_class()];
}

std::size_t ScoreVector::top_class() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores_.size(); ++i) {
        if (scores_[i] > scores_[best]) {
            best = i;
        }
    }
    return best;
}

double dot(const ScoreVector& a, const ScoreVector& b) {
    if (a.size() != b.size()) {
        throw ValidationError("score vector length mismatch: " + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sum += a[i] * b[i];
    }
    return sum;
}

ScoreVector mean_scores(std::span<const Detection> detections) {
    if (detections.empty()) {
        throw InvariantError("mean of an empty detection set");
    }
    const std::size_t k = detections.front().scores.size();
    std::vector<double> mean(k, 0.0);
    double count = 0.0;
    for (const auto& d : detections) {
        if (d.scores.size() != k) {
            throw ValidationError("score vector length mismatch inside tubelet");
        }
        count += 1.0;
        for (std::size_t c = 0; c < k; ++c) {
            mean[c] += (d.scores[c] - mean[c]) / count;
        }
    }
    // The running update cannot leave [0, 1] by more than rounding; clamp that away.
    for (double& m : mean) {
        m = std::clamp(m, 0.0, 1.0);
    }
    return ScoreVector(std::move(mean));
}

Tubelet make_tubelet(std::vector<Detection> detections, TubeletId id) {
    Tubelet t;
    t.aggregate = mean_scores(detections);
    t.detections = std::move(detections);
    t.tubelet_id = id;
    return t;
}

std::optional<Point2> GroundTruthObject::pixel_in(FrameId frame) const {
    for (const auto& p : pixels) {
        if (p.frame_id == frame) {
            return p.pixel;
        }
    }
    return std::nullopt;
}

double iou(const BBox& a, const BBox& b) {
    if (a == b) {
        return 1.0;
    }
    const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = ix * iy;
    if (inter <= 0.0) {
        return 0.0;
    }
    const double uni = a.area() + b.area() - inter;
    // Distinct boxes never reach exactly 1.
    return std::clamp(inter / uni, 0.0, std::nextafter(1.0, 0.0));
}

double centroid_distance(const BBox& a, const BBox& b) {
    return distance(a.centroid(), b.centroid());
}

}  // namespace tubescan
