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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "field_trial.hpp"
#include "tubescan/metrics.hpp"

using namespace tubescan;

namespace {

// Flat 100x100 frames at 0.01 m/px centred on the world origin.
RunDataset flat_dataset(const ClassVocabulary& v, int frames) {
    std::vector<FrameMeta> fs;
    for (int i = 0; i < frames; ++i) {
        FrameMeta f;
        f.frame_id = i;
        f.timestamp_s = i;
        f.width_px = 100;
        f.height_px = 100;
        f.gsd_m_per_px = 0.01;
        f.pose = CameraPose{0, 0, 9, 0};
        fs.push_back(f);
    }
    return RunDataset{v, fs, {}, std::nullopt, 4270.0};
}

// Tubelet of one detection whose centroid lands on world point w.
Tubelet at_world(Point2 w, std::vector<double> scores, TubeletId id, FrameId frame = 0) {
    const Point2 px{w.x / 0.01 + 50, w.y / 0.01 + 50};
    Detection d{frame, {px.x - 5, px.y - 5, 10, 10}, ScoreVector(std::move(scores)), id};
    return make_tubelet({d}, id);
}

GroundTruthObject object(ObjectId id, std::size_t cls, Point2 w) {
    GroundTruthObject o;
    o.object_id = id;
    o.class_label = cls;
    o.world_position = w;
    return o;
}

}  // namespace

TEST_CASE("field-test confusion matrix: counts summed by hand") {
    std::int64_t total = 0, missed = 0, diag = 0;
    for (std::size_t r = 0; r < 6; ++r) {
        for (std::size_t c = 0; c < 7; ++c) total += field_trial::kCounts[r][c];
        missed += field_trial::kCounts[r][6];
        diag += field_trial::kCounts[r][r];
    }
    CHECK(total == 410);
    CHECK(missed == 18);
    CHECK(diag == 277);

    const auto r = metrics_from_confusion(field_trial::matrix(), field_trial::labels(), 4270.0, 0.1);
    CHECK(r.n_targets == 410);
    CHECK(r.n_true_detections == 392);
    CHECK(r.n_correct_classifications == 277);
    CHECK(*r.p_d == 392.0 / 410.0);
    CHECK(*r.p_c == 277.0 / 392.0);
    CHECK(r.d_fa == 0.0);
}

TEST_CASE("field-test confusion matrix reproduces the published classification table") {
    const auto r = metrics_from_confusion(field_trial::matrix(), field_trial::labels(), 4270.0, 0.1);
    REQUIRE(r.per_class.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        const auto& want = field_trial::kPublishedRows[i];
        CAPTURE(want.name);
        CHECK(r.per_class[i].name == want.name);
        CHECK(std::abs(r.per_class[i].precision - want.precision) <= 0.005);
        CHECK(std::abs(r.per_class[i].recall - want.recall) <= 0.005);
        CHECK(std::abs(r.per_class[i].f1 - want.f1) <= 0.005);
        CHECK(r.per_class[i].support == want.support);
    }
    CHECK(std::abs(r.accuracy - 0.68) <= 0.005);
    CHECK(std::abs(r.macro_avg.precision - 0.66) <= 0.005);
    CHECK(std::abs(r.macro_avg.recall - 0.57) <= 0.005);
    CHECK(std::abs(r.macro_avg.f1 - 0.58) <= 0.005);
    CHECK(std::abs(r.weighted_avg.precision - 0.75) <= 0.005);
    CHECK(std::abs(r.weighted_avg.recall - 0.68) <= 0.005);
    CHECK(std::abs(r.weighted_avg.f1 - 0.69) <= 0.005);
    CHECK(r.weighted_avg.support == 410);
}

TEST_CASE("per-class recall and precision follow the matrix") {
    const auto r = metrics_from_confusion(field_trial::matrix(), field_trial::labels(), 4270.0, 0.1);
    for (std::size_t i = 0; i < 6; ++i) {
        std::int64_t row = 0, col = 0;
        for (std::size_t j = 0; j < 7; ++j) row += field_trial::kCounts[i][j];
        for (std::size_t j = 0; j < 7; ++j) col += field_trial::kCounts[j][i];
        CHECK(r.per_class[i].recall == doctest::Approx(double(field_trial::kCounts[i][i]) / row).epsilon(1e-15));
        CHECK(r.per_class[i].precision == doctest::Approx(double(field_trial::kCounts[i][i]) / col).epsilon(1e-15));
    }
}

TEST_CASE("metrics_from_confusion input validation") {
    CHECK_THROWS_AS(metrics_from_confusion({{1}}, {"a"}, 1, 0), ValidationError);
    CHECK_THROWS_AS(metrics_from_confusion({{1, 0}, {0, 0}}, {"a", "b"}, 1, 0), ValidationError);
    CHECK_THROWS_AS(metrics_from_confusion({{1, 0}}, {"a", kNotDetectedLabel}, 1, 0), ValidationError);
    CHECK_THROWS_AS(metrics_from_confusion({{1, 0}, {0, 0}}, {"a", kNotDetectedLabel}, 0, 0), ValidationError);
    CHECK_THROWS_AS(metrics_from_confusion({{-1, 0}, {0, 0}}, {"a", kNotDetectedLabel}, 1, 0), ValidationError);
}

TEST_CASE("association: single tubelet on an object, and no objects") {
    const ClassVocabulary v({"a", "b"}, {true, true});
    auto ds = flat_dataset(v, 1);
    const std::vector<Tubelet> one{at_world({0.1, 0.2}, {0.9, 0.1}, 0)};
    const std::vector<GroundTruthObject> gt{object(0, 0, {0.1, 0.2})};
    const auto a = associate(one, gt, ds, AssociationConfig{});
    CHECK(a.localization == Localization::world);
    CHECK(a.tubelets[0].outcome == Outcome::true_positive);
    const auto r = compute_metrics(a, v, 4270.0, 0.0);
    CHECK(r.n_true_detections == 1);
    CHECK(r.n_false_detections == 0);
    CHECK(*r.p_d == 1.0);
    CHECK(*r.p_c == 1.0);

    const auto none = associate(one, {}, ds, AssociationConfig{});
    CHECK(none.tubelets[0].outcome == Outcome::false_alarm);
    const auto r2 = compute_metrics(none, v, 4270.0, 0.0);
    CHECK(r2.n_false_detections == 1);
    CHECK(r2.d_fa == 1.0 / 4270.0);
    CHECK_FALSE(r2.p_d.has_value());
}

TEST_CASE("zero detections against 10 targets") {
    const ClassVocabulary v({"a"}, {true});
    auto ds = flat_dataset(v, 1);
    std::vector<GroundTruthObject> gt;
    for (int i = 0; i < 10; ++i) gt.push_back(object(i, 0, {i * 0.1, 0}));
    const auto a = associate(std::vector<Tubelet>{}, gt, ds, AssociationConfig{});
    const auto r = compute_metrics(a, v, 4270.0, 0.5);
    CHECK(r.n_targets == 10);
    CHECK(*r.p_d == 0.0);
    CHECK(r.d_fa == 0.0);
    CHECK_FALSE(r.p_c.has_value());
}

TEST_CASE("non-target predictions and objects are left out") {
    const ClassVocabulary v({"a", "rock"}, {true, false});
    auto ds = flat_dataset(v, 1);
    const std::vector<Tubelet> ts{at_world({0, 0}, {0.1, 0.9}, 0), at_world({0.2, 0}, {0.9, 0.1}, 1)};
    const std::vector<GroundTruthObject> gt{object(0, 1, {0.2, 0}), object(1, 0, {0, 0})};
    const auto a = associate(ts, gt, ds, AssociationConfig{});
    CHECK(a.tubelets[0].outcome == Outcome::non_target);
    CHECK(a.tubelets[1].outcome == Outcome::true_positive);
    CHECK(a.target_objects == std::vector<std::size_t>{1});
    const auto r = compute_metrics(a, v, 1.0, 0.0);
    CHECK(r.n_targets == 1);
    CHECK(r.n_false_detections == 0);
}

TEST_CASE("3 tubelets near 2 objects: greedy equals the minimum-distance assignment") {
    const ClassVocabulary v({"a"}, {true});
    auto ds = flat_dataset(v, 1);
    const std::vector<Point2> tube_pos{{0.0, 0.0}, {0.3, 0.0}, {0.05, 0.4}};
    const std::vector<Point2> obj_pos{{0.02, 0.01}, {0.35, 0.05}};
    std::vector<Tubelet> ts;
    for (std::size_t i = 0; i < tube_pos.size(); ++i) ts.push_back(at_world(tube_pos[i], {1}, i));
    std::vector<GroundTruthObject> gt;
    for (std::size_t i = 0; i < obj_pos.size(); ++i) gt.push_back(object(i, 0, obj_pos[i]));
    const auto a = associate(ts, gt, ds, AssociationConfig{});

    // Brute force over injective maps object -> tubelet.
    double best = 1e300;
    std::pair<std::size_t, std::size_t> best_map;
    for (std::size_t t0 = 0; t0 < 3; ++t0) {
        for (std::size_t t1 = 0; t1 < 3; ++t1) {
            if (t0 == t1) continue;
            const double d = distance(tube_pos[t0], obj_pos[0]) + distance(tube_pos[t1], obj_pos[1]);
            if (d < best) {
                best = d;
                best_map = {t0, t1};
            }
        }
    }
    REQUIRE(a.claimed_by[0].has_value());
    REQUIRE(a.claimed_by[1].has_value());
    CHECK(*a.claimed_by[0] == best_map.first);
    CHECK(*a.claimed_by[1] == best_map.second);
    CHECK(a.tubelets[2].outcome == Outcome::false_alarm);
}

TEST_CASE("association on random instances agrees with a best-first oracle") {
    const ClassVocabulary v({"a", "b"}, {true, true});
    auto ds = flat_dataset(v, 1);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> pos(-0.45, 0.45);
    std::uniform_int_distribution<int> count(0, 4), cls(0, 1);
    AssociationConfig cfg;
    cfg.match_radius_m = 0.3;
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<Tubelet> ts;
        std::vector<GroundTruthObject> gt;
        const int nt = count(rng), no = count(rng);
        for (int i = 0; i < nt; ++i) ts.push_back(at_world({pos(rng), pos(rng)}, {0.9, 0.1}, i));
        for (int i = 0; i < no; ++i) gt.push_back(object(i, cls(rng), {pos(rng), pos(rng)}));
        const auto a = associate(ts, gt, ds, cfg);

        // Oracle: repeatedly take the globally closest free pair within the radius.
        std::vector<bool> t_used(nt), o_used(no);
        std::vector<std::optional<std::size_t>> want(no);
        while (true) {
            double best = 1e300;
            int bt = -1, bo = -1;
            for (int t = 0; t < nt; ++t) {
                for (int o = 0; o < no; ++o) {
                    if (t_used[t] || o_used[o]) continue;
                    const double d = distance(a.tubelets[t].location, gt[o].world_position);
                    if (d <= cfg.match_radius_m && d < best) {
                        best = d;
                        bt = t;
                        bo = o;
                    }
                }
            }
            if (bt < 0) break;
            t_used[bt] = o_used[bo] = true;
            want[bo] = bt;
        }
        CHECK(a.claimed_by == want);
        const auto r = compute_metrics(a, v, 2.0, 0.0);
        const auto claimed = std::count_if(want.begin(), want.end(), [](auto& x) { return x.has_value(); });
        CHECK(r.n_true_detections == claimed);
        CHECK(r.n_false_detections == nt - claimed);
        CHECK(r.n_true_detections + r.confusion[0][2] + r.confusion[1][2] == r.n_targets);
        if (r.n_targets > 0) CHECK(*r.p_d == double(r.n_true_detections) / double(r.n_targets));
        CHECK(r.d_fa == double(r.n_false_detections) / 2.0);
    }
}

TEST_CASE("pixel-mode association without frame geometry") {
    const ClassVocabulary v({"a"}, {true});
    FrameMeta f;
    f.frame_id = 0;
    f.width_px = 200;
    f.height_px = 200;
    RunDataset ds{v, {f}, {}, std::nullopt, 10.0};
    GroundTruthObject o = object(0, 0, {0, 0});
    const Detection d{0, {95, 95, 10, 10}, ScoreVector({1}), 0};
    const std::vector<Tubelet> ts{make_tubelet({d}, 0)};
    CHECK_THROWS_AS(associate(ts, {o}, ds, AssociationConfig{}), ValidationError);
    o.pixels = {{0, {110, 100}}};
    const auto a = associate(ts, {o}, ds, AssociationConfig{});
    CHECK(a.localization == Localization::pixel);
    CHECK(a.tubelets[0].outcome == Outcome::true_positive);
    o.pixels = {{0, {140, 100}}};
    CHECK(associate(ts, {o}, ds, AssociationConfig{}).tubelets[0].outcome == Outcome::false_alarm);
}

TEST_CASE("thresholding and ROC sweep") {
    const ClassVocabulary v({"a"}, {true});
    auto ds = flat_dataset(v, 3);
    ds.ground_truth = std::vector<GroundTruthObject>{object(0, 0, {0, 0}), object(1, 0, {0.3, 0.3})};
    ds.detections = {{0, {45, 45, 10, 10}, ScoreVector({0.9}), 0},
                     {1, {75, 75, 10, 10}, ScoreVector({0.3}), 1},
                     {2, {5, 5, 10, 10}, ScoreVector({0.6}), 2}};
    PipelineConfig pc;
    pc.use_tubelets = false;
    AssociationConfig cfg;
    const auto reports = roc_sweep(ds, pc, cfg, 2);
    REQUIRE(reports.size() == 20);
    CHECK(reports[0].n_true_detections == 2);
    CHECK(reports[0].n_false_detections == 1);
    for (std::size_t i = 1; i < reports.size(); ++i) {
        CHECK(reports[i].n_true_detections <= reports[i - 1].n_true_detections);
        CHECK(reports[i].n_false_detections <= reports[i - 1].n_false_detections);
    }
    CHECK(reports.back().n_true_detections == 0);
    const auto ts = singleton_tubelets(ds.detections);
    CHECK(apply_threshold(ts, 1.0).empty());
    CHECK(apply_threshold(ts, 0.0).size() == 3);
    CHECK(apply_threshold(ts, 0.6).size() == 2);
    const auto pts = to_roc_points(reports);
    CHECK(pts.size() == 20);
    CHECK(pts[0].threshold == 0.0);
    CHECK(roc_sweep(ds, pc, cfg, 1) == reports);

    auto no_truth = ds;
    no_truth.ground_truth.reset();
    CHECK_THROWS_AS(roc_sweep(no_truth, pc, cfg), ValidationError);
}

TEST_CASE("association config validation") {
    AssociationConfig c;
    c.match_radius_m = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = AssociationConfig{};
    c.threshold_grid = {0.5, 0.2};
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.threshold_grid = {0.5, 1.2};
    CHECK_THROWS_AS(c.validate(), ValidationError);
    CHECK(default_threshold_grid().size() == 20);
    CHECK(default_threshold_grid()[1] == 0.05);
}
