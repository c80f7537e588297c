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

#include "tubescan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "tubescan/parallel.hpp"

namespace tubescan {

namespace {

struct PairDistance {
    double distance;
    std::size_t tubelet;
    std::size_t object;
};

double safe_ratio(std::int64_t num, std::int64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double f1_score(double p, double r) {
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

const FrameMeta& frame_of(const RunDataset& dataset, FrameId id) {
    const FrameMeta* f = dataset.find_frame(id);
    if (!f) throw ValidationError("detection refers to unknown frame " + std::to_string(id));
    return *f;
}

bool all_frames_have_geometry(std::span<const Tubelet> tubelets, const RunDataset& dataset) {
    for (const auto& t : tubelets) {
        for (const auto& d : t.detections) {
            const FrameMeta* f = dataset.find_frame(d.frame_id);
            if (!f || !f->has_geometry()) return false;
        }
    }
    return true;
}

// Fills the classification table (per-class rows, accuracy, averages).
//
// Rows of the confusion matrix are true labels, columns predictions. Macro
// averages run over every label that occurs as truth or prediction, the
// "Not Detected" label included; 0/0 ratios count as 0.
void fill_classification_table(MetricsReport& report) {
    const auto& m = report.confusion;
    const std::size_t n = m.size();
    const std::size_t k = n - 1;
    std::vector<std::int64_t> row_sum(n, 0);
    std::vector<std::int64_t> col_sum(n, 0);
    std::int64_t total = 0;
    std::int64_t trace = 0;
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            row_sum[r] += m[r][c];
            col_sum[c] += m[r][c];
            total += m[r][c];
        }
        trace += m[r][r];
    }

    std::vector<ClassRow> rows;
    for (std::size_t i = 0; i < n; ++i) {
        ClassRow row;
        row.name = report.labels[i];
        row.precision = safe_ratio(m[i][i], col_sum[i]);
        row.recall = safe_ratio(m[i][i], row_sum[i]);
        row.f1 = f1_score(row.precision, row.recall);
        row.support = row_sum[i];
        rows.push_back(row);
    }

    report.accuracy = safe_ratio(trace, total);

    AverageRow macro;
    std::size_t present = 0;
    AverageRow weighted;
    for (std::size_t i = 0; i < n; ++i) {
        if (row_sum[i] > 0 || col_sum[i] > 0) {
            ++present;
            macro.precision += rows[i].precision;
            macro.recall += rows[i].recall;
            macro.f1 += rows[i].f1;
        }
        const auto w = static_cast<double>(rows[i].support);
        weighted.precision += w * rows[i].precision;
        weighted.recall += w * rows[i].recall;
        weighted.f1 += w * rows[i].f1;
    }
    if (present > 0) {
        macro.precision /= static_cast<double>(present);
        macro.recall /= static_cast<double>(present);
        macro.f1 /= static_cast<double>(present);
    }
    if (total > 0) {
        const auto t = static_cast<double>(total);
        weighted.precision /= t;
        weighted.recall /= t;
        weighted.f1 /= t;
    }
    macro.support = total;
    weighted.support = total;
    report.macro_avg = macro;
    report.weighted_avg = weighted;

    rows.resize(k);  // the "Not Detected" row is kept out of the per-class table
    report.per_class = std::move(rows);
}

void fill_ratios(MetricsReport& r) {
    r.p_d = r.n_targets > 0 ? std::optional<double>(static_cast<double>(r.n_true_detections) /
                                                    static_cast<double>(r.n_targets))
                            : std::nullopt;
    r.d_fa = static_cast<double>(r.n_false_detections) / r.area_m2;
    r.p_c = r.n_true_detections > 0
                ? std::optional<double>(static_cast<double>(r.n_correct_classifications) /
                                        static_cast<double>(r.n_true_detections))
                : std::nullopt;
}

}  // namespace

std::vector<double> default_threshold_grid() {
    std::vector<double> grid;
    for (int k = 0; k < 20; ++k) grid.push_back(k / 20.0);
    return grid;
}

void AssociationConfig::validate() const {
    if (!(match_radius_m > 0.0) || !std::isfinite(match_radius_m)) {
        throw ValidationError("match_radius_m must be > 0");
    }
    if (!(match_radius_px > 0.0) || !std::isfinite(match_radius_px)) {
        throw ValidationError("match_radius_px must be > 0");
    }
    for (std::size_t i = 0; i < threshold_grid.size(); ++i) {
        const double t = threshold_grid[i];
        if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("thresholds must lie in [0, 1]");
        if (i > 0 && t < threshold_grid[i - 1]) throw ValidationError("thresholds must be sorted ascending");
    }
}

Point2 tubelet_world_location(const Tubelet& tubelet, const RunDataset& dataset) {
    Point2 sum;
    for (const auto& d : tubelet.detections) {
        const Point2 w = frame_pixel_to_world(frame_of(dataset, d.frame_id), d.bbox.centroid());
        sum.x += w.x;
        sum.y += w.y;
    }
    const auto n = static_cast<double>(tubelet.length());
    return {sum.x / n, sum.y / n};
}

Assignment associate(std::span<const Tubelet> tubelets, const std::vector<GroundTruthObject>& ground_truth,
                     const RunDataset& dataset, const AssociationConfig& config) {
    config.validate();
    const auto& vocab = dataset.vocabulary;

    Assignment out;
    for (std::size_t i = 0; i < ground_truth.size(); ++i) {
        if (ground_truth[i].class_label >= vocab.size()) {
            throw ValidationError("ground-truth object " + std::to_string(ground_truth[i].object_id) +
                                  " has an unknown class");
        }
        if (vocab.is_target(ground_truth[i].class_label)) {
            out.target_objects.push_back(i);
            out.target_classes.push_back(ground_truth[i].class_label);
        }
    }
    out.claimed_by.assign(out.target_objects.size(), std::nullopt);

    const bool has_pixels = std::any_of(ground_truth.begin(), ground_truth.end(),
                                        [](const GroundTruthObject& o) { return !o.pixels.empty(); });
    if (all_frames_have_geometry(tubelets, dataset)) {
        out.localization = Localization::world;
    } else if (has_pixels) {
        out.localization = Localization::pixel;
    } else {
        throw ValidationError(
            "no localization available: frames lack pose/GSD and ground truth has no pixel annotations");
    }

    out.tubelets.resize(tubelets.size());
    for (std::size_t t = 0; t < tubelets.size(); ++t) {
        auto& a = out.tubelets[t];
        a.predicted_class = tubelets[t].top_class();
        if (a.predicted_class >= vocab.size()) {
            throw ValidationError("tubelet score vector does not match the vocabulary");
        }
        a.outcome = vocab.is_target(a.predicted_class) ? Outcome::false_alarm : Outcome::non_target;
        if (out.localization == Localization::world) {
            a.location = tubelet_world_location(tubelets[t], dataset);
        } else {
            Point2 sum;
            for (const auto& d : tubelets[t].detections) {
                sum.x += d.bbox.centroid().x;
                sum.y += d.bbox.centroid().y;
            }
            a.location = {sum.x / tubelets[t].length(), sum.y / tubelets[t].length()};
        }
    }

    std::vector<PairDistance> pairs;
    for (std::size_t t = 0; t < tubelets.size(); ++t) {
        if (out.tubelets[t].outcome == Outcome::non_target) continue;
        for (std::size_t o = 0; o < out.target_objects.size(); ++o) {
            const auto& obj = ground_truth[out.target_objects[o]];
            if (out.localization == Localization::world) {
                const double d = distance(out.tubelets[t].location, obj.world_position);
                if (d <= config.match_radius_m) pairs.push_back({d, t, o});
                continue;
            }
            // Pixel mode: best member that sees an annotated position, with the
            // distance expressed as a fraction of that frame's radius.
            double best = std::numeric_limits<double>::infinity();
            for (const auto& d : tubelets[t].detections) {
                auto px = obj.pixel_in(d.frame_id);
                if (!px) continue;
                const FrameMeta& f = frame_of(dataset, d.frame_id);
                const double radius_px =
                    f.gsd_m_per_px ? config.match_radius_m / *f.gsd_m_per_px : config.match_radius_px;
                best = std::min(best, distance(d.bbox.centroid(), *px) / radius_px);
            }
            if (best <= 1.0) pairs.push_back({best, t, o});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const PairDistance& a, const PairDistance& b) {
        return std::tie(a.distance, a.tubelet, a.object) < std::tie(b.distance, b.tubelet, b.object);
    });
    for (const auto& p : pairs) {
        auto& a = out.tubelets[p.tubelet];
        if (a.outcome == Outcome::true_positive || out.claimed_by[p.object]) continue;
        a.outcome = Outcome::true_positive;
        a.object_index = out.target_objects[p.object];
        out.claimed_by[p.object] = p.tubelet;
    }
    return out;
}

MetricsReport compute_metrics(const Assignment& assignment, const ClassVocabulary& vocabulary, double area_m2,
                              double threshold) {
    if (!(area_m2 > 0.0)) throw ValidationError("survey area must be positive");
    const std::size_t k = vocabulary.size();
    MetricsReport r;
    r.threshold = threshold;
    r.area_m2 = area_m2;
    r.labels = vocabulary.names();
    r.labels.emplace_back(kNotDetectedLabel);
    r.confusion.assign(k + 1, std::vector<std::int64_t>(k + 1, 0));

    r.n_targets = static_cast<std::int64_t>(assignment.target_objects.size());
    for (std::size_t o = 0; o < assignment.target_objects.size(); ++o) {
        const std::size_t truth = assignment.target_classes[o];
        if (const auto& t = assignment.claimed_by[o]) {
            const std::size_t predicted = assignment.tubelets[*t].predicted_class;
            ++r.confusion[truth][predicted];
            ++r.n_true_detections;
            if (predicted == truth) ++r.n_correct_classifications;
        } else {
            ++r.confusion[truth][k];
        }
    }
    for (const auto& t : assignment.tubelets) {
        if (t.outcome == Outcome::false_alarm) ++r.n_false_detections;
    }
    fill_ratios(r);
    fill_classification_table(r);
    return r;
}

MetricsReport metrics_from_confusion(const std::vector<std::vector<std::int64_t>>& confusion,
                                     const std::vector<std::string>& labels, double area_m2, double threshold,
                                     std::int64_t n_false_detections) {
    const std::size_t n = labels.size();
    if (n < 2) throw ValidationError("confusion matrix needs at least one class plus 'Not Detected'");
    if (labels.back() != kNotDetectedLabel) {
        throw ValidationError(std::string("last confusion label must be '") + kNotDetectedLabel + "'");
    }
    if (confusion.size() != n) throw ValidationError("confusion matrix row count does not match labels");
    for (const auto& row : confusion) {
        if (row.size() != n) throw ValidationError("confusion matrix is not square");
        for (auto v : row) {
            if (v < 0) throw ValidationError("confusion matrix has a negative count");
        }
    }
    if (!(area_m2 > 0.0)) throw ValidationError("survey area must be positive");
    if (n_false_detections < 0) throw ValidationError("false-alarm count must be >= 0");

    const std::size_t k = n - 1;
    MetricsReport r;
    r.threshold = threshold;
    r.area_m2 = area_m2;
    r.labels = labels;
    r.confusion = confusion;
    std::int64_t missed = 0;
    for (std::size_t t = 0; t < k; ++t) {
        for (std::size_t c = 0; c < n; ++c) r.n_targets += confusion[t][c];
        missed += confusion[t][k];
        r.n_correct_classifications += confusion[t][t];
    }
    r.n_true_detections = r.n_targets - missed;
    r.n_false_detections = n_false_detections;
    fill_ratios(r);
    fill_classification_table(r);
    return r;
}

std::vector<Tubelet> apply_threshold(std::span<const Tubelet> tubelets, double threshold) {
    std::vector<Tubelet> out;
    for (const auto& t : tubelets) {
        if (t.confidence() >= threshold) out.push_back(t);
    }
    return out;
}

std::vector<MetricsReport> roc_sweep(const RunDataset& dataset, std::span<const Tubelet> tubelets,
                                     const AssociationConfig& config, int threads) {
    config.validate();
    if (!dataset.ground_truth) throw ValidationError("threshold sweep needs ground truth");
    std::vector<MetricsReport> reports(config.threshold_grid.size());
    parallel_for(reports.size(), threads, [&](std::size_t i) {
        const double threshold = config.threshold_grid[i];
        const auto kept = apply_threshold(tubelets, threshold);
        const auto assignment = associate(kept, *dataset.ground_truth, dataset, config);
        reports[i] = compute_metrics(assignment, dataset.vocabulary, dataset.area_m2, threshold);
    });
    return reports;
}

std::vector<MetricsReport> roc_sweep(const RunDataset& dataset, const PipelineConfig& pipeline,
                                     const AssociationConfig& config, int threads) {
    const auto tubelets = run_pipeline(dataset, pipeline, threads);
    return roc_sweep(dataset, tubelets, config, threads);
}

std::vector<RocPoint> to_roc_points(std::span<const MetricsReport> reports) {
    std::vector<RocPoint> out;
    out.reserve(reports.size());
    for (const auto& r : reports) out.push_back({r.threshold, r.p_d, r.d_fa, r.p_c});
    return out;
}

}  // namespace tubescan
