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

#include "tubescan/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "json_reader.hpp"

namespace tubescan {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using detail::JsonReader;

// ------------------------------------------------------------------ config

void ToolConfig::validate() const {
    pipeline.match.validate();
    association.validate();
    if (threads < 1) throw ValidationError("threads must be >= 1");
    const auto& m = mosaic;
    if (m.dedupe_radius_px && !(*m.dedupe_radius_px > 0.0)) throw ValidationError("mosaic.dedupe_radius_px must be > 0");
    if (!(m.raster_scale > 0.0)) throw ValidationError("mosaic.raster_scale must be > 0");
    if (!(m.alpha > 0.0)) throw ValidationError("mosaic.alpha must be > 0");
    if (!(m.truncation_sigmas > 0.0)) throw ValidationError("mosaic.truncation_sigmas must be > 0");
    if (!(m.threshold >= 0.0 && m.threshold <= 1.0)) throw ValidationError("mosaic.threshold must be in [0, 1]");
    if (!(m.max_unregistered_fraction >= 0.0 && m.max_unregistered_fraction <= 1.0)) {
        throw ValidationError("mosaic.max_unregistered_fraction must be in [0, 1]");
    }
    if (m.correlation.max_shift_px < 1) throw ValidationError("mosaic.correlation.max_shift_px must be >= 1");
    scenario.validate();
}

ToolConfig config_from_json(const json& j) {
    ToolConfig c;
    JsonReader r(j, "config");
    if (const json* m = r.child("match")) {
        JsonReader mr(*m, r.sub("match"));
        std::string mode = to_string(c.pipeline.match.mode);
        mr.read("mode", mode);
        c.pipeline.match = MatchConfig::defaults(parse_match_mode(mode));
        mr.read("q_min", c.pipeline.match.q_min);
        mr.read("epsilon_px", c.pipeline.match.epsilon_px);
        mr.read("kappa", c.pipeline.match.kappa);
        mr.read("min_tubelet_length", c.pipeline.match.min_tubelet_length);
        mr.finish();
    }
    r.read("use_tubelets", c.pipeline.use_tubelets);
    if (const json* a = r.child("association")) {
        JsonReader ar(*a, r.sub("association"));
        ar.read("match_radius_m", c.association.match_radius_m);
        ar.read("match_radius_px", c.association.match_radius_px);
        ar.read("thresholds", c.association.threshold_grid);
        ar.finish();
    }
    if (const json* m = r.child("mosaic")) {
        JsonReader mr(*m, r.sub("mosaic"));
        if (const json* d = mr.child("dedupe_radius_px"); d && !d->is_null()) {
            if (!d->is_number()) throw ValidationError("config.mosaic.dedupe_radius_px: wrong type");
            c.mosaic.dedupe_radius_px = d->get<double>();
        }
        std::string mode = to_string(c.mosaic.heatmap_mode);
        mr.read("heatmap_mode", mode);
        c.mosaic.heatmap_mode = parse_heatmap_mode(mode);
        mr.read("raster_scale", c.mosaic.raster_scale);
        mr.read("alpha", c.mosaic.alpha);
        mr.read("truncation_sigmas", c.mosaic.truncation_sigmas);
        mr.read("threshold", c.mosaic.threshold);
        mr.read("max_unregistered_fraction", c.mosaic.max_unregistered_fraction);
        if (const json* cc = mr.child("correlation")) {
            JsonReader cr(*cc, mr.sub("correlation"));
            cr.read("max_shift_px", c.mosaic.correlation.max_shift_px);
            cr.read("min_overlap_fraction", c.mosaic.correlation.min_overlap_fraction);
            cr.read("confidence_floor", c.mosaic.correlation.confidence_floor);
            cr.finish();
        }
        mr.finish();
    }
    if (const json* s = r.child("scenario")) c.scenario = scenario_from_json(*s);
    r.read("threads", c.threads);
    r.finish();
    c.validate();
    return c;
}

json config_to_json(const ToolConfig& c) {
    ordered_json j;
    const auto& m = c.pipeline.match;
    j["match"] = {{"mode", to_string(m.mode)},
                  {"q_min", m.q_min},
                  {"epsilon_px", m.epsilon_px},
                  {"kappa", m.kappa},
                  {"min_tubelet_length", m.min_tubelet_length}};
    j["use_tubelets"] = c.pipeline.use_tubelets;
    j["association"] = {{"match_radius_m", c.association.match_radius_m},
                        {"match_radius_px", c.association.match_radius_px},
                        {"thresholds", c.association.threshold_grid}};
    ordered_json mo;
    mo["dedupe_radius_px"] = c.mosaic.dedupe_radius_px ? ordered_json(*c.mosaic.dedupe_radius_px) : ordered_json();
    mo["heatmap_mode"] = to_string(c.mosaic.heatmap_mode);
    mo["raster_scale"] = c.mosaic.raster_scale;
    mo["alpha"] = c.mosaic.alpha;
    mo["truncation_sigmas"] = c.mosaic.truncation_sigmas;
    mo["threshold"] = c.mosaic.threshold;
    mo["max_unregistered_fraction"] = c.mosaic.max_unregistered_fraction;
    mo["correlation"] = {{"max_shift_px", c.mosaic.correlation.max_shift_px},
                         {"min_overlap_fraction", c.mosaic.correlation.min_overlap_fraction},
                         {"confidence_floor", c.mosaic.correlation.confidence_floor}};
    j["mosaic"] = mo;
    j["scenario"] = scenario_to_json(c.scenario);
    j["threads"] = c.threads;
    return json::parse(j.dump());
}

// --------------------------------------------------------------- confusion

ConfusionTable parse_confusion_csv(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    ConfusionTable t;
    auto split = [](const std::string& l) {
        std::vector<std::string> cells;
        std::stringstream ss(l);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
            while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
            cells.push_back(cell);
        }
        return cells;
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = split(line);
        if (t.labels.empty()) {
            if (cells.size() < 2 || cells[0] != "label") {
                throw ParseError(source, line_no, "expected header 'label,<class>,...'");
            }
            t.labels.assign(cells.begin() + 1, cells.end());
            continue;
        }
        if (cells.size() != t.labels.size() + 1) {
            throw ParseError(source, line_no, "expected " + std::to_string(t.labels.size() + 1) + " fields");
        }
        const std::size_t row = t.counts.size();
        if (row >= t.labels.size() || cells[0] != t.labels[row]) {
            throw ParseError(source, line_no, "rows must follow the header label order");
        }
        std::vector<std::int64_t> counts;
        for (std::size_t i = 1; i < cells.size(); ++i) {
            try {
                std::size_t used = 0;
                const long long v = std::stoll(cells[i], &used);
                if (used != cells[i].size() || v < 0) throw std::invalid_argument("bad");
                counts.push_back(v);
            } catch (const std::exception&) {
                throw ParseError(source, line_no, "count '" + cells[i] + "' is not a non-negative integer");
            }
        }
        t.counts.push_back(std::move(counts));
    }
    if (t.labels.empty()) throw ParseError(source, line_no, "empty confusion matrix");
    if (t.counts.size() != t.labels.size()) {
        throw ParseError(source, line_no, "expected " + std::to_string(t.labels.size()) + " rows");
    }
    return t;
}

std::string format_classification_table(const MetricsReport& r) {
    std::size_t width = 12;
    for (const auto& row : r.per_class) width = std::max(width, row.name.size());
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%*s %9s %9s %9s %9s\n", static_cast<int>(width), "", "precision", "recall",
                  "f1-score", "support");
    out += buf;
    out += "\n";
    for (const auto& row : r.per_class) {
        std::snprintf(buf, sizeof buf, "%*s %9.2f %9.2f %9.2f %9lld\n", static_cast<int>(width), row.name.c_str(),
                      row.precision, row.recall, row.f1, static_cast<long long>(row.support));
        out += buf;
    }
    out += "\n";
    std::snprintf(buf, sizeof buf, "%*s %9s %9s %9.2f %9lld\n", static_cast<int>(width), "accuracy", "", "",
                  r.accuracy, static_cast<long long>(r.weighted_avg.support));
    out += buf;
    for (const auto& [name, avg] : {std::pair{"macro avg", r.macro_avg}, std::pair{"weighted avg", r.weighted_avg}}) {
        std::snprintf(buf, sizeof buf, "%*s %9.2f %9.2f %9.2f %9lld\n", static_cast<int>(width), name, avg.precision,
                      avg.recall, avg.f1, static_cast<long long>(avg.support));
        out += buf;
    }
    return out;
}

// ----------------------------------------------------------- subcommands

namespace {

struct InputPaths {
    std::string dataset;
    std::string detections;
    std::string frames;
    std::string vocab;
    std::string ground_truth;
    std::string pixel_annotations;
    std::optional<double> area_m2;
};

void add_input_options(CLI::App* cmd, InputPaths& in) {
    cmd->add_option("--dataset", in.dataset, "Dataset manifest (manifest.json)");
    cmd->add_option("--detections", in.detections, "Detections JSONL");
    cmd->add_option("--frames", in.frames, "Frame metadata CSV");
    cmd->add_option("--vocab", in.vocab, "Class vocabulary CSV");
    cmd->add_option("--ground-truth", in.ground_truth, "Ground-truth CSV");
    cmd->add_option("--pixel-annotations", in.pixel_annotations, "Per-frame ground-truth pixels CSV");
    cmd->add_option("--area", in.area_m2, "Surveyed area in square meters");
}

void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) throw ValidationError("missing " + what + " (pass --dataset or the individual file flags)");
    if (!fs::exists(path)) throw ValidationError(what + " not found: " + path);
}

RunDataset load_inputs(const InputPaths& in) {
    if (!in.dataset.empty()) {
        require_file(in.dataset, "dataset manifest");
        RunDataset ds = load_dataset(in.dataset);
        if (in.area_m2) ds.area_m2 = *in.area_m2;
        return ds;
    }
    require_file(in.vocab, "vocabulary file");
    require_file(in.frames, "frames file");
    require_file(in.detections, "detections file");
    ClassVocabulary vocab = load_vocabulary(in.vocab);
    RunDataset ds{vocab, load_frames(in.frames), load_detections(in.detections, vocab), std::nullopt, 0.0};
    if (!in.ground_truth.empty()) {
        require_file(in.ground_truth, "ground-truth file");
        auto gt = load_ground_truth(in.ground_truth, vocab);
        if (!in.pixel_annotations.empty()) {
            require_file(in.pixel_annotations, "pixel annotation file");
            load_pixel_annotations(in.pixel_annotations, gt);
        }
        ds.ground_truth = std::move(gt);
    }
    if (in.area_m2) ds.area_m2 = *in.area_m2;
    validate_dataset(ds);
    return ds;
}

std::string threshold_tag(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", t);
    return buf;
}

std::string optional_text(const std::optional<double>& v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return buf;
}

std::string tubelet_dump(const std::vector<Tubelet>& tubelets) {
    std::string out;
    for (const auto& t : tubelets) {
        ordered_json j;
        j["tubelet_id"] = t.tubelet_id;
        j["first_frame"] = t.first_frame();
        j["last_frame"] = t.last_frame();
        j["length"] = t.length();
        j["top_class"] = t.top_class();
        j["confidence"] = t.confidence();
        j["aggregate"] = std::vector<double>(t.aggregate.values().begin(), t.aggregate.values().end());
        std::vector<DetectionId> ids;
        for (const auto& d : t.detections) ids.push_back(d.detection_id);
        j["detection_ids"] = ids;
        out += j.dump() + "\n";
    }
    return out;
}

int cmd_run(const ToolConfig& cfg, const InputPaths& in, const fs::path& out_dir, bool dump_tubelets,
            std::ostream& out) {
    const RunDataset ds = load_inputs(in);
    if (!ds.ground_truth) throw ValidationError("run needs ground truth (--ground-truth or a manifest entry)");
    if (!(ds.area_m2 > 0.0)) throw ValidationError("run needs a positive surveyed area (--area or manifest area_m2)");
    const auto tubelets = run_pipeline(ds, cfg.pipeline, cfg.threads);
    const auto reports = roc_sweep(ds, tubelets, cfg.association, cfg.threads);
    fs::create_directories(out_dir);
    for (const auto& r : reports) write_report(r, out_dir / ("report_" + threshold_tag(r.threshold) + ".json"));
    write_roc(to_roc_points(reports), out_dir / "roc.csv");
    if (dump_tubelets) write_text_file_atomic(out_dir / "tubelets.jsonl", tubelet_dump(tubelets));
    out << "tubelets: " << tubelets.size() << " from " << ds.detections.size() << " detections\n";
    out << "threshold  P_d     D_FA(/m^2)  P_c\n";
    for (const auto& r : reports) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%-9s  %-6s  %-10.6f  %s\n", threshold_tag(r.threshold).c_str(),
                      optional_text(r.p_d).c_str(), r.d_fa, optional_text(r.p_c).c_str());
        out << buf;
    }
    out << "wrote " << reports.size() << " reports and roc.csv to " << out_dir.string() << "\n";
    return kExitOk;
}

std::vector<GrayImage> load_frame_images(const fs::path& dir, const std::vector<FrameMeta>& frames) {
    std::vector<GrayImage> images;
    for (const auto& f : frames) {
        const fs::path p = dir / (std::to_string(f.frame_id) + ".pgm");
        if (!fs::exists(p)) throw ValidationError("frame image not found: " + p.string());
        images.push_back(read_pgm(p));
    }
    return images;
}

int cmd_mosaic(const ToolConfig& cfg, const InputPaths& in, const std::string& correspondences_path,
               const std::string& images_dir, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
    const RunDataset ds = load_inputs(in);
    if (ds.frames.empty()) throw ValidationError("mosaic needs at least one frame");
    const bool any_pose = std::any_of(ds.frames.begin(), ds.frames.end(), [](const FrameMeta& f) { return f.has_geometry(); });
    std::map<FrameId, std::vector<Correspondence>> corr;
    if (!correspondences_path.empty()) {
        require_file(correspondences_path, "correspondence file");
        corr = load_correspondences(correspondences_path);
    }
    if (!any_pose && corr.empty() && images_dir.empty()) {
        throw ValidationError(
            "cannot register frames: no camera pose or GSD in the frame metadata and no correspondences; "
            "add pose columns to the frames file, pass --correspondences, or pass --images");
    }

    std::vector<RoughTranslation> rough;
    if (!images_dir.empty()) {
        std::vector<FrameId> ids;
        for (const auto& f : ds.frames) ids.push_back(f.frame_id);
        rough = rough_pass(load_frame_images(images_dir, ds.frames), ids, cfg.mosaic.correlation);
    } else if (any_pose) {
        rough = rough_pass(ds.frames);
        for (auto& [id, list] : pose_correspondences(ds.frames)) corr.try_emplace(id, std::move(list));
    } else {
        for (const auto& f : ds.frames) {
            RoughTranslation r;
            r.frame_id = f.frame_id;
            if (!corr.count(f.frame_id)) {
                r.registered = false;
                r.note = "no correspondences for this frame";
            }
            rough.push_back(r);
        }
    }
    std::vector<FrameTransform> transforms = refine_pass(rough, corr);

    std::int64_t unregistered = 0;
    ordered_json failures = ordered_json::array();
    for (const auto& t : transforms) {
        if (t.registered) continue;
        ++unregistered;
        failures.push_back({{"frame_id", t.frame_id}, {"reason", t.note}});
        err << "frame " << t.frame_id << " unregistered: " << t.note << "\n";
    }

    fs::create_directories(out_dir);
    write_transforms(transforms, out_dir / "transforms.csv");

    const TransformTable table(transforms);
    auto tubelets = apply_threshold(run_pipeline(ds, cfg.pipeline, cfg.threads), cfg.mosaic.threshold);

    std::vector<KernelSource> sources;
    for (const auto& t : tubelets) {
        for (const auto& d : t.detections) {
            if (!table.at(d.frame_id).registered) continue;
            sources.push_back(kernel_source(project_detection(d, table.at(d.frame_id))));
        }
    }
    RasterSpec spec = raster_covering(sources, cfg.mosaic.raster_scale, 0.0, cfg.mosaic.alpha);
    spec.truncation_sigmas = cfg.mosaic.truncation_sigmas;
    const HeatmapRaster raster = render_kde(sources, spec, cfg.threads);
    write_heatmap(raster, out_dir / "heatmap.pgm", cfg.mosaic.heatmap_mode);

    ordered_json report;
    report["frames"] = ds.frames.size();
    report["registered_frames"] = static_cast<std::int64_t>(ds.frames.size()) - unregistered;
    report["unregistered"] = failures;
    report["heatmap"] = {{"path", "heatmap.pgm"},
                         {"mode", to_string(cfg.mosaic.heatmap_mode)},
                         {"width", raster.width},
                         {"height", raster.height},
                         {"sources", sources.size()}};

    double radius = cfg.association.match_radius_px;
    if (cfg.mosaic.dedupe_radius_px) {
        radius = *cfg.mosaic.dedupe_radius_px;
    } else {
        auto ref = std::find_if(ds.frames.begin(), ds.frames.end(), [](const FrameMeta& f) { return f.gsd_m_per_px.has_value(); });
        if (ref != ds.frames.end()) radius = cfg.association.match_radius_m / *ref->gsd_m_per_px;
    }
    if (ds.ground_truth && ds.area_m2 > 0.0) {
        std::vector<Tubelet> placed;
        for (const auto& t : tubelets) {
            const bool ok = std::all_of(t.detections.begin(), t.detections.end(),
                                        [&](const Detection& d) { return table.at(d.frame_id).registered; });
            if (ok) placed.push_back(t);
        }
        const Assignment a = associate(placed, *ds.ground_truth, ds, cfg.association);
        const auto fa = correct_false_alarms(placed, a, table, radius, ds.area_m2);
        report["false_alarms"] = {{"dedupe_radius_px", radius},
                                  {"naive_count", fa.naive_count},
                                  {"deduplicated_count", fa.deduplicated_count},
                                  {"area_m2", fa.area_m2},
                                  {"naive_d_fa", fa.naive_d_fa},
                                  {"corrected_d_fa", fa.corrected_d_fa}};
        out << "false alarms: naive " << fa.naive_count << ", deduplicated " << fa.deduplicated_count << "\n";
    } else {
        report["false_alarms"] = nullptr;
        out << "false alarms: skipped (needs ground truth and area)\n";
    }
    write_text_file_atomic(out_dir / "mosaic_report.json", report.dump(2) + "\n");
    out << "registered " << (ds.frames.size() - static_cast<std::size_t>(unregistered)) << "/" << ds.frames.size()
        << " frames; heatmap " << raster.width << "x" << raster.height << " written to " << out_dir.string() << "\n";

    if (static_cast<double>(unregistered) > cfg.mosaic.max_unregistered_fraction * static_cast<double>(ds.frames.size())) {
        err << "error: " << unregistered << " of " << ds.frames.size() << " frames failed registration\n";
        return kExitRegistration;
    }
    return kExitOk;
}

int cmd_generate(const SurveyScenario& scenario, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
    const GeneratedSurvey s = generate(scenario);
    for (const auto& w : s.warnings) err << "warning: " << w << "\n";
    write_survey(s, out_dir);
    const auto& l = s.truth.log;
    out << "frames: " << l.frames << "\n"
        << "objects: " << l.objects << "\n"
        << "detections: " << s.dataset.detections.size() << " (" << l.true_detections << " true, " << l.misses
        << " missed views)\n"
        << "injected false alarms: " << l.false_alarms() << " (" << l.scattered_false_alarms << " scattered, "
        << l.site_false_alarms << " from " << l.active_false_alarm_sites << " sites)\n"
        << "area_m2: " << format_double(s.dataset.area_m2) << "\n"
        << "written to " << out_dir.string() << "\n";
    return kExitOk;
}

int cmd_eval_only(const std::string& confusion_path, double area, double threshold, std::int64_t n_false,
                  const fs::path& out_dir, bool write_out, std::ostream& out) {
    require_file(confusion_path, "confusion matrix file");
    const ConfusionTable t = parse_confusion_csv(read_text_file(confusion_path), confusion_path);
    const MetricsReport r = metrics_from_confusion(t.counts, t.labels, area, threshold, n_false);
    out << format_classification_table(r);
    out << "\nP_d " << optional_text(r.p_d) << "  P_c " << optional_text(r.p_c) << "  D_FA " << r.d_fa
        << " /m^2\n";
    if (write_out) {
        fs::create_directories(out_dir);
        write_report(r, out_dir / "report.json");
    }
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-frame detection post-processing, evaluation and mosaicking"};
    app.require_subcommand(0, 1);

    std::string config_path;
    std::optional<int> threads;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    bool show_config = false;
    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--threads", threads, "Worker threads");
    app.add_option("--seed", seed, "Random seed for the generator");
    app.add_option("--out", out_dir, "Output directory");
    app.add_flag("--show-config", show_config, "Print the effective configuration and exit");

    std::optional<std::string> mode;
    std::optional<double> q_min, epsilon, radius_m, radius_px, dedupe_radius, raster_scale, mosaic_threshold;
    std::optional<int> kappa, min_length;
    std::optional<std::string> heatmap_mode;
    std::vector<double> thresholds;
    bool baseline = false;

    InputPaths run_in;
    bool dump_tubelets = false;
    auto* run = app.add_subcommand("run", "Build tubelets, associate with ground truth, sweep thresholds");
    add_input_options(run, run_in);
    run->add_flag("--dump-tubelets", dump_tubelets, "Also write tubelets.jsonl");

    InputPaths mosaic_in;
    std::string correspondences, images_dir;
    auto* mosaic = app.add_subcommand("mosaic", "Register frames, render the heatmap, correct false alarms");
    add_input_options(mosaic, mosaic_in);
    mosaic->add_option("--correspondences", correspondences, "Correspondence CSV frame_id,x,y,mosaic_x,mosaic_y");
    mosaic->add_option("--images", images_dir, "Directory of <frame_id>.pgm frames for image registration");
    mosaic->add_option("--dedupe-radius-px", dedupe_radius, "Cross-pass dedupe radius in mosaic pixels");
    mosaic->add_option("--heatmap-mode", heatmap_mode, "grayscale or normalized");
    mosaic->add_option("--raster-scale", raster_scale, "Mosaic pixels per heatmap pixel");
    mosaic->add_option("--threshold", mosaic_threshold, "Minimum re-scored confidence");

    for (auto* cmd : {run, mosaic}) {
        cmd->add_option("--mode", mode, "Match quality: iou or reciprocal_distance");
        cmd->add_option("--q-min", q_min, "Minimum match quality");
        cmd->add_option("--epsilon", epsilon, "Centroid distance floor in pixels");
        cmd->add_option("--kappa", kappa, "Linking window (1 disables linking)");
        cmd->add_option("--min-length", min_length, "Drop tubelets shorter than this");
        cmd->add_option("--match-radius-m", radius_m, "Association radius in meters");
        cmd->add_option("--match-radius-px", radius_px, "Association radius in pixels");
        cmd->add_flag("--baseline", baseline, "Evaluate raw per-frame detections");
    }
    run->add_option("--thresholds", thresholds, "Confidence thresholds to evaluate")->delimiter(',');

    std::string scenario_path;
    auto* gen = app.add_subcommand("generate", "Write a synthetic survey dataset");
    gen->add_option("--scenario", scenario_path, "Scenario JSON file");

    std::string confusion_path;
    double eval_area = 1.0;
    double eval_threshold = 0.0;
    std::int64_t eval_false = 0;
    auto* eval = app.add_subcommand("eval-only", "Metrics from a confusion matrix CSV");
    eval->add_option("--confusion", confusion_path, "Confusion matrix CSV")->required();
    eval->add_option("--area", eval_area, "Surveyed area in square meters");
    eval->add_option("--confidence-threshold", eval_threshold, "Threshold recorded in the report");
    eval->add_option("--false-detections", eval_false, "False detections for D_FA");

    for (auto* cmd : {run, mosaic, gen, eval}) cmd->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        ToolConfig cfg;
        if (!config_path.empty()) {
            require_file(config_path, "config file");
            json j;
            try {
                j = json::parse(read_text_file(config_path));
            } catch (const json::parse_error& e) {
                throw ValidationError(config_path + ": " + e.what());
            }
            cfg = config_from_json(j);
        }
        if (*gen && !scenario_path.empty()) {
            require_file(scenario_path, "scenario file");
            cfg.scenario = load_scenario(scenario_path);
        }
        if (mode) {
            const MatchMode m = parse_match_mode(*mode);
            if (m != cfg.pipeline.match.mode) {
                const auto d = MatchConfig::defaults(m);
                cfg.pipeline.match.mode = m;
                cfg.pipeline.match.q_min = d.q_min;
            }
        }
        if (q_min) cfg.pipeline.match.q_min = *q_min;
        if (epsilon) cfg.pipeline.match.epsilon_px = *epsilon;
        if (kappa) cfg.pipeline.match.kappa = *kappa;
        if (min_length) cfg.pipeline.match.min_tubelet_length = *min_length;
        if (baseline) cfg.pipeline.use_tubelets = false;
        if (radius_m) cfg.association.match_radius_m = *radius_m;
        if (radius_px) cfg.association.match_radius_px = *radius_px;
        if (!thresholds.empty()) cfg.association.threshold_grid = thresholds;
        if (dedupe_radius) cfg.mosaic.dedupe_radius_px = *dedupe_radius;
        if (heatmap_mode) cfg.mosaic.heatmap_mode = parse_heatmap_mode(*heatmap_mode);
        if (raster_scale) cfg.mosaic.raster_scale = *raster_scale;
        if (mosaic_threshold) cfg.mosaic.threshold = *mosaic_threshold;
        if (threads) cfg.threads = *threads;
        if (seed) cfg.scenario.seed = *seed;
        cfg.validate();

        if (show_config) {
            out << config_to_json(cfg).dump(2) << "\n";
            return kExitOk;
        }
        if (*run) return cmd_run(cfg, run_in, out_dir, dump_tubelets, out);
        if (*mosaic) return cmd_mosaic(cfg, mosaic_in, correspondences, images_dir, out_dir, out, err);
        if (*gen) return cmd_generate(cfg.scenario, out_dir, out, err);
        if (*eval) {
            return cmd_eval_only(confusion_path, eval_area, eval_threshold, eval_false, out_dir,
                                 app.get_option("--out")->count() > 0, out);
        }
        out << app.help();
        return kExitInput;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const InvariantError& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    } catch (const std::runtime_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}

}  // namespace tubescan
