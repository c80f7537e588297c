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

// Acceptance runner: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "field_trial.hpp"
#include "oracles.hpp"
#include "scenarios.hpp"
#include "test_util.hpp"
#include "tubescan/cli.hpp"
#include "tubescan/metrics.hpp"
#include "tubescan/mosaic.hpp"
#include "tubescan/simgen.hpp"
#include "tubescan/tubelet.hpp"

using namespace tubescan;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) {
            pass = false;
            detail = what;
        }
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

PipelineConfig survey_pipeline() {
    PipelineConfig p;
    p.match.q_min = scenarios::kSurveyQMin;
    return p;
}

MetricsReport evaluate_at(const RunDataset& ds, const PipelineConfig& p, double threshold) {
    AssociationConfig a;
    a.threshold_grid = {threshold};
    return roc_sweep(ds, p, a).front();
}

// 1. Classification table from the field-test confusion matrix.
Verdict table_reproduction() {
    Verdict o;
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = metrics_from_confusion(field_trial::matrix(), field_trial::labels(), 4270.0, 0.1);
    const double elapsed = seconds_since(t0);
    auto near = [](double a, double b) { return std::abs(a - b) <= 0.005; };
    o.require(r.per_class.size() == 6, "expected six class rows");
    for (std::size_t i = 0; i < r.per_class.size() && i < 6; ++i) {
        const auto& want = field_trial::kPublishedRows[i];
        const auto& got = r.per_class[i];
        o.require(got.name == want.name && near(got.precision, want.precision) && near(got.recall, want.recall) &&
                      near(got.f1, want.f1) && got.support == want.support,
                  std::string("row ") + want.name + " differs");
    }
    o.require(near(r.weighted_avg.precision, 0.75), "weighted precision");
    o.require(near(r.weighted_avg.recall, 0.68), "weighted recall");
    o.require(near(r.weighted_avg.f1, 0.69), "weighted F1");
    o.require(near(r.accuracy, 0.68), "accuracy");
    o.require(elapsed < 1.0, "took " + fmt("%.3f s", elapsed));
    if (o.pass) {
        o.detail = "weighted P/R/F1 " + fmt("%.2f", r.weighted_avg.precision) + "/" +
                   fmt("%.2f", r.weighted_avg.recall) + "/" + fmt("%.2f", r.weighted_avg.f1) + ", accuracy " +
                   fmt("%.2f", r.accuracy) + ", " + fmt("%.4f s", elapsed);
    }
    return o;
}

// 2. Metric closure on generated surveys.
Verdict metric_closure() {
    Verdict o;
    const auto clean = generate(scenarios::tiled(2026));
    const auto r = evaluate_at(clean.dataset, survey_pipeline(), 0.1);
    o.require(r.n_targets == clean.truth.log.objects, "target count differs from the generator");
    o.require(r.p_d && *r.p_d == 1.0, "zero-noise P_d != 1");
    o.require(r.p_c && *r.p_c == 1.0, "zero-noise P_c != 1");
    o.require(r.d_fa == 0.0, "zero-noise D_FA != 0");

    // Detection-level count: every injected false alarm is one false detection.
    std::int64_t total_k = 0;
    PipelineConfig per_frame = survey_pipeline();
    per_frame.use_tubelets = false;
    for (std::uint64_t seed : {2026u, 2027u, 2028u}) {
        auto s = scenarios::tiled(seed);
        s.random_objects = 0;
        s.noise.false_alarm_rate = 0.05;
        const auto g = generate(s);
        const auto rf = evaluate_at(g.dataset, per_frame, 0.1);
        const std::int64_t k = g.truth.log.false_alarms();
        total_k += k;
        o.require(k > 0, "no false alarms were injected");
        o.require(rf.n_false_detections == k, "seed " + std::to_string(seed) + ": counted " +
                                                  std::to_string(rf.n_false_detections) + " of " +
                                                  std::to_string(k) + " injected false alarms");
        o.require(rf.area_m2 == 4270.0 && rf.d_fa == static_cast<double>(k) / 4270.0, "D_FA != K/4270");
    }

    // Tubelet level with objects present: false alarms equal the tubelets built
    // only from injected false detections.
    std::int64_t total_t = 0;
    for (std::uint64_t seed : {2026u, 2027u, 2028u}) {
        auto s = scenarios::tiled(seed);
        s.noise.false_alarm_rate = 0.02;
        const auto g = generate(s);
        const auto tubes = apply_threshold(run_pipeline(g.dataset, survey_pipeline()), 0.1);
        std::map<DetectionId, bool> is_false;
        for (const auto& t : g.truth.detections) is_false[t.detection_id] = !t.is_true();
        std::int64_t false_tubes = 0;
        for (const auto& t : tubes) {
            bool all_false = true;
            for (const auto& d : t.detections) all_false = all_false && is_false[d.detection_id];
            false_tubes += all_false;
        }
        total_t += false_tubes;
        const auto rf = evaluate_at(g.dataset, survey_pipeline(), 0.1);
        o.require(rf.n_false_detections == false_tubes, "seed " + std::to_string(seed) + ": tubelet false alarms " +
                                                            std::to_string(rf.n_false_detections) + " vs " +
                                                            std::to_string(false_tubes));
        o.require(rf.d_fa == static_cast<double>(false_tubes) / 4270.0, "tubelet D_FA != K/4270");
        o.require(rf.p_d && *rf.p_d == 1.0, "P_d != 1 with false alarms present");
    }
    if (o.pass) {
        o.detail = "zero noise P_d=P_c=1, D_FA=0; " + std::to_string(total_k) +
                   " injected false detections counted exactly; " + std::to_string(total_t) +
                   " false-only tubelets counted exactly";
    }
    return o;
}

// 3. Greedy matching equals the exhaustive oracle.
Verdict matching_equivalence() {
    Verdict o;
    std::mt19937_64 rng(3);
    int instances = 0;
    for (int i = 0; i < 2000 && o.pass; ++i) {
        std::uniform_int_distribution<int> frames(1, 5), per(1, 4), k(1, 4);
        const bool quantize = i % 2 == 0;
        const MatchMode mode = i % 4 < 2 ? MatchMode::iou : MatchMode::reciprocal_distance;
        auto cfg = MatchConfig::defaults(mode);
        if (mode == MatchMode::reciprocal_distance && i % 8 >= 4) cfg.q_min = 0.02;
        const auto dets = oracle::random_detections(rng, frames(rng), per(rng), k(rng), quantize);
        const auto got = build_tubelets(dets, cfg);
        const auto want = oracle::tubelets(dets, cfg);
        ++instances;
        o.require(got.size() == want.size(), "instance " + std::to_string(i) + ": tubelet count differs");
        for (std::size_t t = 0; t < got.size() && t < want.size(); ++t) {
            std::vector<DetectionId> ids;
            for (const auto& d : got[t].detections) ids.push_back(d.detection_id);
            o.require(ids == want[t].members, "instance " + std::to_string(i) + ": members differ");
            o.require(got[t].tubelet_id == static_cast<TubeletId>(t), "tubelet ids are not sequential");
            for (std::size_t c = 0; c < want[t].mean.size(); ++c) {
                o.require(std::abs(got[t].aggregate[c] - want[t].mean[c]) <= 1e-12, "aggregate differs");
            }
        }
    }
    if (o.pass) o.detail = std::to_string(instances) + " random instances, both modes, with and without ties";
    return o;
}

// 4. Re-scoring is the arithmetic mean and idempotent.
Verdict rescoring_exactness() {
    Verdict o;
    std::mt19937_64 rng(4);
    std::size_t checked = 0;
    double worst = 0.0;
    for (int i = 0; i < 300; ++i) {
        auto cfg = MatchConfig::defaults(MatchMode::reciprocal_distance);
        cfg.q_min = 1e-4;
        const auto dets = oracle::random_detections(rng, 12, 5, 6, false);
        for (const auto& t : build_tubelets(dets, cfg)) {
            const auto mean = oracle::mean_of(t.detections);
            for (std::size_t c = 0; c < mean.size(); ++c) worst = std::max(worst, std::abs(t.aggregate[c] - mean[c]));
            const Tubelet once = rescore(t);
            const Tubelet twice = rescore(once);
            o.require(once == twice, "rescore is not idempotent");
            for (const auto& d : once.detections) o.require(d.scores == once.aggregate, "member not replaced by mean");
            ++checked;
        }
    }
    o.require(worst <= 1e-12, "max deviation " + fmt("%.3g", worst));
    if (o.pass) o.detail = std::to_string(checked) + " tubelets, max deviation " + fmt("%.2g", worst);
    return o;
}

// 5. Linking with kappa = 1 is the identity; kappa = 2 bridges one empty frame.
Verdict linking() {
    Verdict o;
    std::mt19937_64 rng(5);
    for (int i = 0; i < 300; ++i) {
        auto cfg = MatchConfig::defaults(i % 2 ? MatchMode::iou : MatchMode::reciprocal_distance);
        const auto ts = build_tubelets(oracle::random_detections(rng, 6, 4, 3, i % 3 == 0), cfg);
        cfg.kappa = 1;
        o.require(link_tubelets(ts, cfg) == ts, "kappa = 1 changed the tubelets");
    }

    auto det = [](FrameId f, DetectionId id, double x, std::vector<double> s) {
        return Detection{f, {x, 100, 20, 20}, ScoreVector(std::move(s)), id};
    };
    const std::vector<Detection> dets{det(0, 0, 100, {0.9, 0.1}), det(1, 1, 102, {0.7, 0.3}),
                                      det(3, 2, 106, {0.6, 0.4}), det(4, 3, 108, {0.8, 0.2}),
                                      det(0, 4, 900, {0.1, 0.9})};
    auto cfg = MatchConfig::defaults(MatchMode::reciprocal_distance);
    const auto built = build_tubelets(dets, cfg);
    o.require(built.size() == 3, "expected three pieces before linking");
    cfg.kappa = 2;
    const auto linked = link_tubelets(built, cfg);
    o.require(linked.size() == 2, "gap-1 pair was not merged");
    if (linked.size() == 2) {
        const auto& m = linked[0];
        std::vector<DetectionId> ids;
        for (const auto& d : m.detections) ids.push_back(d.detection_id);
        o.require(m.tubelet_id == 0, "merged tubelet lost the first id");
        o.require(ids == std::vector<DetectionId>{0, 1, 2, 3}, "merged members out of order");
        const auto mean = oracle::mean_of({dets[0], dets[1], dets[2], dets[3]});
        for (std::size_t c = 0; c < 2; ++c) o.require(std::abs(m.aggregate[c] - mean[c]) <= 1e-12, "merged mean");
        o.require(linked[1].detections.front().detection_id == 4, "unrelated tubelet changed");
    }
    cfg.kappa = 1;
    o.require(link_tubelets(built, cfg) == built, "kappa = 1 merged the gap pair");
    if (o.pass) o.detail = "300 random sets unchanged at kappa=1; gap-1 pair merged into one tubelet at kappa=2";
    return o;
}

// 6. Pose-mode projection accuracy and homography recovery.
Verdict projection_accuracy() {
    Verdict o;
    auto s = scenarios::two_pass(6);
    s.objects.push_back({"BLU63", {10.2, 12.0}});
    s.objects.push_back({"155MM", {9.0, 3.0}});
    s.noise.false_alarm_sites.clear();
    const auto g = generate(s);
    const auto& frames = g.dataset.frames;
    const TransformTable table(register_from_poses(frames));
    std::map<ObjectId, std::vector<Point2>> projected;
    for (std::size_t i = 0; i < g.dataset.detections.size(); ++i) {
        const auto& tag = g.truth.detections[i];
        if (!tag.object_id) continue;
        const auto& d = g.dataset.detections[i];
        projected[*tag.object_id].push_back(project_detection(d, table.at(d.frame_id)).centroid);
    }
    double spread = 0.0, error = 0.0;
    for (const auto& obj : *g.dataset.ground_truth) {
        const auto& pts = projected[obj.object_id];
        o.require(!pts.empty(), "object never projected");
        const Point2 truth = world_to_mosaic(frames, obj.world_position);
        for (const auto& p : pts) {
            error = std::max(error, distance(p, truth));
            for (const auto& q : pts) spread = std::max(spread, distance(p, q));
        }
    }
    o.require(spread < 2.0, "spread " + fmt("%.3f px", spread));
    o.require(error < 0.5, "error " + fmt("%.3f px", error));

    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> small(-0.1, 0.1), off(-200, 200), persp(-2e-4, 2e-4);
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
        Eigen::Matrix3d h;
        h << 1 + small(rng), small(rng), off(rng), small(rng), 1 + small(rng), off(rng), persp(rng), persp(rng), 1;
        const std::vector<Point2> src{{0, 0}, {1280, 0}, {1280, 720}, {0, 720}};
        std::vector<Point2> dst;
        for (auto p : src) dst.push_back(apply_homography(h, p));
        worst = std::max(worst, (estimate_homography(src, dst) - h).cwiseAbs().maxCoeff());
    }
    o.require(worst < 1e-6, "homography deviation " + fmt("%.3g", worst));
    if (o.pass) {
        o.detail = "spread " + fmt("%.2g px", spread) + ", error " + fmt("%.2g px", error) +
                   ", homography deviation " + fmt("%.2g", worst);
    }
    return o;
}

// 7. KDE peak, additivity and amplitude scaling.
Verdict kde_contract() {
    Verdict o;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> pos(0, 100), size(2, 20), amp(0.05, 1.0), lambda(0.1, 3.0);
    double peak_err = 0.0, add_err = 0.0, scale_err = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        RasterSpec spec;
        spec.width = 60;
        spec.height = 50;
        spec.scale = 2.0;
        const double a = amp(rng);
        const std::vector<KernelSource> one{{{std::floor(pos(rng) / 2) * 2, std::floor(pos(rng) / 2) * 2}, size(rng),
                                             size(rng), a}};
        const auto r1 = render_kde(one, spec);
        const int i = static_cast<int>(one[0].center.x / 2), j = static_cast<int>(one[0].center.y / 2);
        peak_err = std::max({peak_err, std::abs(r1.at(i, j) - a), std::abs(r1.max_value() - a)});

        std::vector<KernelSource> all;
        for (int k = 0; k < 20; ++k) all.push_back({{pos(rng), pos(rng)}, size(rng), size(rng), amp(rng)});
        const std::vector<KernelSource> left(all.begin(), all.begin() + 9), right(all.begin() + 9, all.end());
        const auto rs = render_kde(all, spec), rl = render_kde(left, spec), rr = render_kde(right, spec);
        const double l = lambda(rng);
        auto scaled = all;
        for (auto& s : scaled) s.amplitude *= l;
        const auto rsc = render_kde(scaled, spec, 3);
        for (std::size_t k = 0; k < rs.values.size(); ++k) {
            add_err = std::max(add_err, std::abs(rs.values[k] - rl.values[k] - rr.values[k]));
            scale_err = std::max(scale_err, std::abs(rsc.values[k] - l * rs.values[k]));
        }
    }
    o.require(peak_err <= 1e-9, "peak error " + fmt("%.3g", peak_err));
    o.require(add_err <= 1e-6, "additivity error " + fmt("%.3g", add_err));
    o.require(scale_err <= 1e-9, "scaling error " + fmt("%.3g", scale_err));
    if (o.pass) {
        o.detail = "peak " + fmt("%.2g", peak_err) + ", additivity " + fmt("%.2g", add_err) + ", scaling " +
                   fmt("%.2g", scale_err);
    }
    return o;
}

// 8. Cross-pass false-alarm correction.
Verdict false_alarm_correction() {
    Verdict o;
    std::string detail;
    for (std::uint64_t seed : {8u, 9u, 10u}) {
        auto s = scenarios::two_pass(seed);
        s.noise.bbox_jitter_px = 1.0;
        s.noise.random_false_alarm_sites = 2;
        const auto g = generate(s);
        const auto tubes = run_pipeline(g.dataset, survey_pipeline());
        const auto a = associate(tubes, *g.dataset.ground_truth, g.dataset, AssociationConfig{});
        const TransformTable table(register_from_poses(g.dataset.frames));
        const double radius = AssociationConfig{}.match_radius_m / *g.dataset.frames.front().gsd_m_per_px;
        const auto c = correct_false_alarms(tubes, a, table, radius, g.dataset.area_m2);
        const auto unique = g.truth.log.active_false_alarm_sites;
        o.require(c.corrected_d_fa < c.naive_d_fa, "seed " + std::to_string(seed) + ": no reduction");
        o.require(c.deduplicated_count == unique, "seed " + std::to_string(seed) + ": " +
                                                      std::to_string(c.deduplicated_count) + " clusters vs " +
                                                      std::to_string(unique) + " sites");
        if (detail.empty()) {
            detail = "naive " + std::to_string(c.naive_count) + " -> " + std::to_string(c.deduplicated_count) +
                     " = generator sites";
        }
    }
    if (o.pass) o.detail = detail + " (3 seeds)";
    return o;
}

// 9. ROC monotonicity and the effect of re-scoring on P_c.
Verdict roc_behavior() {
    Verdict o;
    auto s = SurveyScenario::reference_survey(909);
    s.random_objects = 150;
    s.noise.miss_probability = 0.15;
    s.noise.false_alarm_rate = 0.05;
    s.noise.bbox_jitter_px = 3.0;
    s.noise.score_mixing = 0.5;
    s.noise.confidence_floor = 0.4;
    s.noise.confusions = {{"BLU97", "ROCKEYE", 0.35}, {"ROCKEYE", "BLU97", 0.3}, {"155MM", "PTAB2.5KO", 0.3},
                          {"BLU26", "BLU63", 0.2}};
    const auto g = generate(s);
    const PipelineConfig tubelet_mode;
    const auto reports = roc_sweep(g.dataset, tubelet_mode, AssociationConfig{});
    for (std::size_t i = 1; i < reports.size(); ++i) {
        const double pd_prev = reports[i - 1].p_d.value_or(0.0), pd = reports[i].p_d.value_or(0.0);
        o.require(pd <= pd_prev, "P_d rises at threshold " + fmt("%.2f", reports[i].threshold));
        o.require(reports[i].d_fa <= reports[i - 1].d_fa, "D_FA rises at threshold " + fmt("%.2f", reports[i].threshold));
    }
    PipelineConfig base = tubelet_mode;
    base.use_tubelets = false;
    const auto rescored = evaluate_at(g.dataset, tubelet_mode, 0.1);
    const auto baseline = evaluate_at(g.dataset, base, 0.1);
    const double pc_t = rescored.p_c.value_or(0.0), pc_b = baseline.p_c.value_or(0.0);
    o.require(pc_t >= pc_b, "re-scored P_c " + fmt("%.3f", pc_t) + " < baseline " + fmt("%.3f", pc_b));
    if (o.pass) {
        o.detail = std::to_string(reports.size()) + " thresholds monotone; P_c at 0.1 re-scored " +
                   fmt("%.3f", pc_t) + " vs baseline " + fmt("%.3f", pc_b);
    }
    return o;
}

// 10. End-to-end throughput and thread-count determinism.
Verdict performance() {
    Verdict o;
    const int n_frames = 1000, per_frame = 20;
    const ClassVocabulary vocab({"155MM", "BLU26", "BLU63", "BLU97", "PTAB2.5KO", "ROCKEYE"},
                                {true, true, true, true, true, true});
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0, 1), jitter(-2, 2);
    std::vector<FrameMeta> frames;
    std::vector<Detection> dets;
    std::vector<GroundTruthObject> gt;
    for (int k = 0; k < per_frame; ++k) {
        GroundTruthObject g;
        g.object_id = k;
        g.class_label = static_cast<std::size_t>(k % 6);
        g.world_position = {(60.0 + 60.0 * k - 640.0) * 0.01, 0.0};
        gt.push_back(g);
    }
    for (int f = 0; f < n_frames; ++f) {
        FrameMeta m;
        m.frame_id = f;
        m.timestamp_s = f * 0.1;
        m.width_px = 1280;
        m.height_px = 720;
        m.gsd_m_per_px = 0.01;
        m.pose = CameraPose{0, 0, 9, 0};
        frames.push_back(m);
        for (int k = 0; k < per_frame; ++k) {
            std::vector<double> s(6);
            for (auto& v : s) v = 0.4 * u(rng);
            s[static_cast<std::size_t>(k % 6)] += 0.6 * u(rng);
            const double x = 60.0 + 60.0 * k + jitter(rng) - 10, y = 360 + 40 * std::sin(f / 40.0 + k) - 10;
            dets.push_back({f, {x, y, 20, 20}, ScoreVector(std::move(s)),
                            static_cast<DetectionId>(f) * per_frame + (per_frame - 1 - k)});
        }
    }
    TempDir dir;
    write_dataset(RunDataset{vocab, frames, dets, gt, 4270.0}, dir / "data");
    const std::string manifest = (dir / "data" / kManifestName).string();

    auto run = [&](const std::string& threads, const std::string& out) {
        const std::vector<std::string> args{"tubescan", "--threads", threads, "--out", out, "run", "--dataset",
                                            manifest, "--dump-tubelets"};
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream sink_out, sink_err;
        return run_cli(static_cast<int>(argv.size()), argv.data(), sink_out, sink_err);
    };
    const auto t0 = std::chrono::steady_clock::now();
    const int code1 = run("1", (dir / "t1").string());
    const double elapsed = seconds_since(t0);
    const int code4 = run("4", (dir / "t4").string());
    o.require(code1 == kExitOk && code4 == kExitOk, "run failed");
    o.require(elapsed < 10.0, "single-threaded run took " + fmt("%.2f s", elapsed));
    std::size_t compared = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir / "t1")) {
        const auto name = entry.path().filename().string();
        o.require(slurp(entry.path()) == slurp(dir / "t4" / name), name + " differs between thread counts");
        ++compared;
    }
    o.require(compared > 2, "no outputs to compare");
    if (o.pass) {
        o.detail = std::to_string(n_frames) + " frames x " + std::to_string(per_frame) + " detections in " +
                   fmt("%.2f s", elapsed) + "; " + std::to_string(compared) + " outputs identical at 4 threads";
    }
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"classification table reproduction", table_reproduction},
        {"metric closure on generated surveys", metric_closure},
        {"matching equals the exhaustive oracle", matching_equivalence},
        {"re-scoring exactness", rescoring_exactness},
        {"linking identity and gap bridging", linking},
        {"mosaic projection accuracy", projection_accuracy},
        {"KDE contract", kde_contract},
        {"corrected false-alarm density", false_alarm_correction},
        {"ROC behavior", roc_behavior},
        {"performance and determinism", performance},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failures += !o.pass;
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << i + 1 << " " << criteria[i].first << ": " << o.detail
                  << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
