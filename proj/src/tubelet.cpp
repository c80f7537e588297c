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

#include "tubescan/tubelet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <tuple>

#include "tubescan/parallel.hpp"

namespace tubescan {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

struct Candidate {
    double quality;
    std::size_t a;
    std::size_t b;
};

bool better(const Candidate& x, const Candidate& y) {
    if (x.quality != y.quality) return x.quality > y.quality;
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
}

// Greedy acceptance shared by frame matching and tubelet linking.
std::vector<Candidate> greedy_one_to_one(std::vector<Candidate> candidates, std::size_t n_a, std::size_t n_b) {
    std::sort(candidates.begin(), candidates.end(), better);
    std::vector<bool> used_a(n_a, false);
    std::vector<bool> used_b(n_b, false);
    std::vector<Candidate> accepted;
    for (const auto& c : candidates) {
        if (used_a[c.a] || used_b[c.b]) continue;
        used_a[c.a] = true;
        used_b[c.b] = true;
        accepted.push_back(c);
    }
    return accepted;
}

}  // namespace

std::string to_string(MatchMode mode) {
    switch (mode) {
        case MatchMode::iou:
            return "iou";
        case MatchMode::reciprocal_distance:
            return "reciprocal-distance";
    }
    return "unknown";
}

MatchMode parse_match_mode(const std::string& text) {
    if (text == "iou") return MatchMode::iou;
    if (text == "reciprocal-distance" || text == "reciprocal_distance") return MatchMode::reciprocal_distance;
    throw ValidationError("unknown match mode '" + text + "' (expected iou or reciprocal-distance)");
}

MatchConfig MatchConfig::defaults(MatchMode mode) {
    MatchConfig c;
    c.mode = mode;
    c.q_min = mode == MatchMode::iou ? 1e-6 : 1e-3;
    return c;
}

void MatchConfig::validate() const {
    if (!(q_min >= 0.0) || !std::isfinite(q_min)) throw ValidationError("q_min must be a finite value >= 0");
    if (!(epsilon_px > 0.0) || !std::isfinite(epsilon_px)) throw ValidationError("epsilon_px must be > 0");
    if (kappa < 1) throw ValidationError("kappa must be >= 1");
    if (min_tubelet_length < 1) throw ValidationError("min_tubelet_length must be >= 1");
}

double match_quality(const Detection& a, const Detection& b, const MatchConfig& config) {
    const double similarity = dot(a.scores, b.scores);
    switch (config.mode) {
        case MatchMode::iou:
            return iou(a.bbox, b.bbox) * similarity;
        case MatchMode::reciprocal_distance:
            return similarity / std::max(centroid_distance(a.bbox, b.bbox), config.epsilon_px);
    }
    throw InvariantError("unhandled match mode");
}

std::vector<MatchPair> match_frame_pair(std::span<const Detection> frame_a, std::span<const Detection> frame_b,
                                        const MatchConfig& config) {
    std::vector<Candidate> candidates;
    candidates.reserve(frame_a.size() * frame_b.size());
    for (std::size_t i = 0; i < frame_a.size(); ++i) {
        for (std::size_t j = 0; j < frame_b.size(); ++j) {
            const double q = match_quality(frame_a[i], frame_b[j], config);
            if (q >= config.q_min) candidates.push_back({q, i, j});
        }
    }
    std::vector<MatchPair> out;
    for (const auto& c : greedy_one_to_one(std::move(candidates), frame_a.size(), frame_b.size())) {
        out.push_back({c.a, c.b, c.quality});
    }
    return out;
}

std::vector<Tubelet> build_tubelets(std::span<const Detection> detections, const MatchConfig& config, int threads) {
    config.validate();

    std::vector<Detection> sorted(detections.begin(), detections.end());
    std::sort(sorted.begin(), sorted.end(), [](const Detection& a, const Detection& b) {
        return std::tie(a.frame_id, a.detection_id) < std::tie(b.frame_id, b.detection_id);
    });

    // Frame groups as [begin, end) ranges into `sorted`.
    std::vector<std::pair<std::size_t, std::size_t>> groups;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j].frame_id == sorted[i].frame_id) ++j;
        groups.emplace_back(i, j);
        i = j;
    }

    auto group_span = [&](std::size_t g) {
        return std::span<const Detection>(sorted).subspan(groups[g].first, groups[g].second - groups[g].first);
    };

    // next[k] is the index in `sorted` that follows detection k, if any.
    std::vector<std::vector<MatchPair>> pair_matches(groups.empty() ? 0 : groups.size() - 1);
    parallel_for(pair_matches.size(), threads, [&](std::size_t g) {
        const FrameId fa = sorted[groups[g].first].frame_id;
        const FrameId fb = sorted[groups[g + 1].first].frame_id;
        if (fb != fa + 1) return;
        pair_matches[g] = match_frame_pair(group_span(g), group_span(g + 1), config);
    });

    std::vector<std::size_t> next(sorted.size(), kNone);
    std::vector<bool> has_prev(sorted.size(), false);
    for (std::size_t g = 0; g < pair_matches.size(); ++g) {
        for (const auto& m : pair_matches[g]) {
            const std::size_t a = groups[g].first + m.index_a;
            const std::size_t b = groups[g + 1].first + m.index_b;
            next[a] = b;
            has_prev[b] = true;
        }
    }

    std::vector<Tubelet> tubelets;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        if (has_prev[k]) continue;
        std::vector<Detection> members;
        for (std::size_t cur = k; cur != kNone; cur = next[cur]) members.push_back(sorted[cur]);
        tubelets.push_back(make_tubelet(std::move(members), static_cast<TubeletId>(tubelets.size())));
    }
    return tubelets;
}

std::vector<Tubelet> build_tubelets(const RunDataset& dataset, const MatchConfig& config, int threads) {
    return build_tubelets(std::span<const Detection>(dataset.detections), config, threads);
}

Tubelet rescore(Tubelet tubelet) {
    tubelet.aggregate = mean_scores(tubelet.detections);
    for (auto& d : tubelet.detections) d.scores = tubelet.aggregate;
    return tubelet;
}

std::vector<Tubelet> link_tubelets(std::vector<Tubelet> tubelets, const MatchConfig& config) {
    config.validate();
    if (config.kappa == 1 || tubelets.size() < 2) return tubelets;

    const std::size_t n = tubelets.size();
    std::map<FrameId, std::vector<std::size_t>> by_first_frame;
    for (std::size_t j = 0; j < n; ++j) by_first_frame[tubelets[j].first_frame()].push_back(j);

    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < n; ++i) {
        const FrameId last = tubelets[i].last_frame();
        auto it = by_first_frame.lower_bound(last + 2);
        const auto end = by_first_frame.upper_bound(last + config.kappa);
        for (; it != end; ++it) {
            for (std::size_t j : it->second) {
                const double q = match_quality(tubelets[i].tail(), tubelets[j].head(), config);
                if (q >= config.q_min) candidates.push_back({q, i, j});
            }
        }
    }
    const auto links = greedy_one_to_one(std::move(candidates), n, n);
    if (links.empty()) return tubelets;

    std::vector<std::size_t> successor(n, kNone);
    std::vector<bool> has_prev(n, false);
    for (const auto& l : links) {
        successor[l.a] = l.b;
        has_prev[l.b] = true;
    }

    std::vector<Tubelet> out;
    out.reserve(n - links.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (has_prev[i]) continue;
        if (successor[i] == kNone) {
            out.push_back(std::move(tubelets[i]));
            continue;
        }
        Tubelet merged;
        merged.tubelet_id = tubelets[i].tubelet_id;
        for (std::size_t cur = i; cur != kNone; cur = successor[cur]) {
            auto& members = tubelets[cur].detections;
            merged.detections.insert(merged.detections.end(), std::make_move_iterator(members.begin()),
                                     std::make_move_iterator(members.end()));
        }
        out.push_back(rescore(std::move(merged)));
    }
    return out;
}

std::vector<Tubelet> filter_short(std::vector<Tubelet> tubelets, const MatchConfig& config) {
    config.validate();
    const auto min_len = static_cast<std::size_t>(config.min_tubelet_length);
    std::erase_if(tubelets, [&](const Tubelet& t) { return t.length() < min_len; });
    return tubelets;
}

std::vector<Tubelet> singleton_tubelets(std::span<const Detection> detections) {
    std::vector<Tubelet> out;
    out.reserve(detections.size());
    for (const auto& d : detections) {
        out.push_back(make_tubelet({d}, static_cast<TubeletId>(out.size())));
    }
    return out;
}

std::vector<Tubelet> run_pipeline(const RunDataset& dataset, const PipelineConfig& config, int threads) {
    if (!config.use_tubelets) return singleton_tubelets(dataset.detections);
    auto tubelets = build_tubelets(dataset, config.match, threads);
    for (auto& t : tubelets) t = rescore(std::move(t));
    tubelets = link_tubelets(std::move(tubelets), config.match);
    return filter_short(std::move(tubelets), config.match);
}

}  // namespace tubescan
