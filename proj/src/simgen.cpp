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

#include "tubescan/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

#include "json_reader.hpp"

namespace tubescan {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// ------------------------------------------------------------------ random

double SurveyRng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SurveyRng::normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t SurveyRng::below(std::size_t n) {
    if (n == 0) throw InvariantError("below(0)");
    return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
}

int SurveyRng::poisson(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    int k = 0;
    double p = uniform();
    while (p > limit) {
        ++k;
        p *= uniform();
    }
    return k;
}

// ---------------------------------------------------------------- scenario

SurveyScenario SurveyScenario::reference_survey(std::uint64_t seed) {
    SurveyScenario s;
    s.seed = seed;
    for (const char* name : {"155MM", "BLU26", "BLU63", "BLU97", "PTAB2.5KO", "ROCKEYE"}) {
        s.classes.push_back({name, true});
    }
    s.random_objects = 19;
    return s;
}

namespace {

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ValidationError("scenario." + field + ": " + what);
}

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

bool inside_field(const FieldSpec& f, Point2 p) {
    return p.x >= 0.0 && p.x <= f.width_m && p.y >= 0.0 && p.y <= f.length_m;
}

}  // namespace

void SurveyScenario::validate() const {
    require(std::isfinite(field.width_m) && field.width_m > 0.0, "field.width_m", "must be > 0");
    require(std::isfinite(field.length_m) && field.length_m > 0.0, "field.length_m", "must be > 0");
    require(!classes.empty(), "classes", "at least one class is required");
    std::set<std::string> names;
    bool any_target = false;
    for (const auto& c : classes) {
        require(!c.name.empty(), "classes", "class names must be non-empty");
        require(names.insert(c.name).second, "classes", "duplicate class '" + c.name + "'");
        any_target = any_target || c.is_target;
    }
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const std::string field_name = "objects[" + std::to_string(i) + "]";
        require(names.count(objects[i].class_name) == 1, field_name + ".class",
                "unknown class '" + objects[i].class_name + "'");
        require(inside_field(field, objects[i].position), field_name + ".position", "object lies outside the field");
    }
    require(random_objects >= 0, "random_objects", "must be >= 0");
    require(random_objects == 0 || any_target, "random_objects", "needs at least one target class");

    require(flight.altitude_m > 0.0 && flight.altitude_m <= 1000.0, "flight.altitude_m", "must be in (0, 1000]");
    require(std::isfinite(flight.speed_m_s) && flight.speed_m_s > 0.0, "flight.speed_m_s", "must be > 0");
    require(std::isfinite(flight.frame_rate_hz) && flight.frame_rate_hz > 0.0, "flight.frame_rate_hz",
            "must be > 0");
    require(std::isfinite(flight.swath_spacing_m) && flight.swath_spacing_m > 0.0, "flight.swath_spacing_m",
            "must be > 0");
    require(flight.passes >= -1, "flight.passes", "must be >= 0, or -1 for automatic");

    require(camera.width_px > 0, "camera.width_px", "must be > 0");
    require(camera.height_px > 0, "camera.height_px", "must be > 0");
    require(std::isfinite(camera.gsd_m_per_px) && camera.gsd_m_per_px > 0.0, "camera.gsd_m_per_px", "must be > 0");
    require(std::isfinite(camera.object_size_m) && camera.object_size_m > 0.0, "camera.object_size_m",
            "must be > 0");

    require(in_unit(noise.miss_probability), "noise.miss_probability", "must be in [0, 1]");
    require(noise.false_alarm_rate >= 0.0 && noise.false_alarm_rate <= 50.0, "noise.false_alarm_rate",
            "must be in [0, 50]");
    require(noise.false_alarm_rate == 0.0 || any_target, "noise.false_alarm_rate", "needs at least one target class");
    require(std::isfinite(noise.bbox_jitter_px) && noise.bbox_jitter_px >= 0.0, "noise.bbox_jitter_px",
            "must be >= 0");
    require(in_unit(noise.score_mixing), "noise.score_mixing", "must be in [0, 1]");
    require(in_unit(noise.confidence_floor), "noise.confidence_floor", "must be in [0, 1]");
    require(in_unit(noise.site_emission_probability), "noise.site_emission_probability", "must be in [0, 1]");
    require(noise.random_false_alarm_sites >= 0, "noise.random_false_alarm_sites", "must be >= 0");
    require((noise.false_alarm_sites.empty() && noise.random_false_alarm_sites == 0) || any_target,
            "noise.false_alarm_sites", "needs at least one target class");
    for (std::size_t i = 0; i < noise.false_alarm_sites.size(); ++i) {
        require(inside_field(field, noise.false_alarm_sites[i]),
                "noise.false_alarm_sites[" + std::to_string(i) + "]", "site lies outside the field");
    }
    std::map<std::string, double> leak_total;
    for (std::size_t i = 0; i < noise.confusions.size(); ++i) {
        const auto& c = noise.confusions[i];
        const std::string f = "noise.confusions[" + std::to_string(i) + "]";
        require(names.count(c.true_class) == 1, f + ".true_class", "unknown class '" + c.true_class + "'");
        require(names.count(c.confused_with) == 1, f + ".confused_with", "unknown class '" + c.confused_with + "'");
        require(c.true_class != c.confused_with, f, "a class cannot be confused with itself");
        require(in_unit(c.probability), f + ".probability", "must be in [0, 1]");
        require(in_unit(c.min_share) && in_unit(c.max_share) && c.min_share <= c.max_share, f,
                "shares must satisfy 0 <= min_share <= max_share <= 1");
        leak_total[c.true_class] += c.probability;
        require(leak_total[c.true_class] <= 1.0 + 1e-12, f + ".probability",
                "probabilities for one class sum above 1");
    }
}

namespace {

using detail::JsonReader;

Point2 read_point(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw ValidationError(path + ": expected [x, y]");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

ordered_json point_json(Point2 p) { return ordered_json::array({p.x, p.y}); }

}  // namespace

SurveyScenario scenario_from_json(const json& j) {
    SurveyScenario s;
    JsonReader r(j, "scenario");
    r.read("seed", s.seed);
    if (const json* f = r.child("field")) {
        JsonReader fr(*f, r.sub("field"));
        fr.read("width_m", s.field.width_m);
        fr.read("length_m", s.field.length_m);
        fr.finish();
    }
    if (const json* c = r.child("classes")) {
        if (!c->is_array()) throw ValidationError("scenario.classes: expected an array");
        for (std::size_t i = 0; i < c->size(); ++i) {
            JsonReader cr((*c)[i], r.sub("classes[" + std::to_string(i) + "]"));
            ScenarioClass sc;
            cr.read("name", sc.name);
            cr.read("is_target", sc.is_target);
            cr.finish();
            s.classes.push_back(std::move(sc));
        }
    }
    if (const json* o = r.child("objects")) {
        if (!o->is_array()) throw ValidationError("scenario.objects: expected an array");
        for (std::size_t i = 0; i < o->size(); ++i) {
            const std::string p = r.sub("objects[" + std::to_string(i) + "]");
            JsonReader orr((*o)[i], p);
            ScenarioObject so;
            orr.read("class", so.class_name);
            if (const json* pos = orr.child("position")) so.position = read_point(*pos, p + ".position");
            orr.finish();
            s.objects.push_back(std::move(so));
        }
    }
    r.read("random_objects", s.random_objects);
    if (const json* f = r.child("flight")) {
        JsonReader fr(*f, r.sub("flight"));
        fr.read("altitude_m", s.flight.altitude_m);
        fr.read("speed_m_s", s.flight.speed_m_s);
        fr.read("frame_rate_hz", s.flight.frame_rate_hz);
        fr.read("swath_spacing_m", s.flight.swath_spacing_m);
        fr.read("passes", s.flight.passes);
        fr.finish();
    }
    if (const json* c = r.child("camera")) {
        JsonReader cr(*c, r.sub("camera"));
        cr.read("width_px", s.camera.width_px);
        cr.read("height_px", s.camera.height_px);
        cr.read("gsd_m_per_px", s.camera.gsd_m_per_px);
        cr.read("object_size_m", s.camera.object_size_m);
        cr.finish();
    }
    if (const json* n = r.child("noise")) {
        JsonReader nr(*n, r.sub("noise"));
        nr.read("miss_probability", s.noise.miss_probability);
        nr.read("false_alarm_rate", s.noise.false_alarm_rate);
        nr.read("bbox_jitter_px", s.noise.bbox_jitter_px);
        nr.read("score_mixing", s.noise.score_mixing);
        nr.read("confidence_floor", s.noise.confidence_floor);
        nr.read("random_false_alarm_sites", s.noise.random_false_alarm_sites);
        nr.read("site_emission_probability", s.noise.site_emission_probability);
        if (const json* sites = nr.child("false_alarm_sites")) {
            if (!sites->is_array()) throw ValidationError("scenario.noise.false_alarm_sites: expected an array");
            for (std::size_t i = 0; i < sites->size(); ++i) {
                s.noise.false_alarm_sites.push_back(
                    read_point((*sites)[i], "scenario.noise.false_alarm_sites[" + std::to_string(i) + "]"));
            }
        }
        if (const json* conf = nr.child("confusions")) {
            if (!conf->is_array()) throw ValidationError("scenario.noise.confusions: expected an array");
            for (std::size_t i = 0; i < conf->size(); ++i) {
                JsonReader cr((*conf)[i], "scenario.noise.confusions[" + std::to_string(i) + "]");
                ConfusionPair cp;
                cr.read("true_class", cp.true_class);
                cr.read("confused_with", cp.confused_with);
                cr.read("probability", cp.probability);
                cr.read("min_share", cp.min_share);
                cr.read("max_share", cp.max_share);
                cr.finish();
                s.noise.confusions.push_back(std::move(cp));
            }
        }
        nr.finish();
    }
    r.finish();
    if (s.classes.empty()) s.classes = SurveyScenario::reference_survey().classes;
    s.validate();
    return s;
}

json scenario_to_json(const SurveyScenario& s) {
    ordered_json j;
    j["seed"] = s.seed;
    j["field"] = {{"width_m", s.field.width_m}, {"length_m", s.field.length_m}};
    j["classes"] = ordered_json::array();
    for (const auto& c : s.classes) j["classes"].push_back({{"name", c.name}, {"is_target", c.is_target}});
    j["objects"] = ordered_json::array();
    for (const auto& o : s.objects) j["objects"].push_back({{"class", o.class_name}, {"position", point_json(o.position)}});
    j["random_objects"] = s.random_objects;
    j["flight"] = {{"altitude_m", s.flight.altitude_m},
                   {"speed_m_s", s.flight.speed_m_s},
                   {"frame_rate_hz", s.flight.frame_rate_hz},
                   {"swath_spacing_m", s.flight.swath_spacing_m},
                   {"passes", s.flight.passes}};
    j["camera"] = {{"width_px", s.camera.width_px},
                   {"height_px", s.camera.height_px},
                   {"gsd_m_per_px", s.camera.gsd_m_per_px},
                   {"object_size_m", s.camera.object_size_m}};
    ordered_json n;
    n["miss_probability"] = s.noise.miss_probability;
    n["false_alarm_rate"] = s.noise.false_alarm_rate;
    n["bbox_jitter_px"] = s.noise.bbox_jitter_px;
    n["score_mixing"] = s.noise.score_mixing;
    n["confidence_floor"] = s.noise.confidence_floor;
    n["confusions"] = ordered_json::array();
    for (const auto& c : s.noise.confusions) {
        n["confusions"].push_back({{"true_class", c.true_class},
                                   {"confused_with", c.confused_with},
                                   {"probability", c.probability},
                                   {"min_share", c.min_share},
                                   {"max_share", c.max_share}});
    }
    n["false_alarm_sites"] = ordered_json::array();
    for (const auto& p : s.noise.false_alarm_sites) n["false_alarm_sites"].push_back(point_json(p));
    n["random_false_alarm_sites"] = s.noise.random_false_alarm_sites;
    n["site_emission_probability"] = s.noise.site_emission_probability;
    j["noise"] = n;
    return json::parse(j.dump());
}

SurveyScenario load_scenario(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return scenario_from_json(j);
}

// --------------------------------------------------------------- generation

namespace {

struct Site {
    Point2 position;
    std::size_t class_label = 0;
};

class Emitter {
  public:
    Emitter(const SurveyScenario& s, const ClassVocabulary& vocab, SurveyRng& rng)
        : s_(s), vocab_(vocab), rng_(rng), size_px_(s.camera.object_size_m / s.camera.gsd_m_per_px) {}

    // Always consumes the same number of draws regardless of the noise values.
    ScoreVector scores_for(std::size_t cls, bool& confused) {
        const std::size_t k = vocab_.size();
        std::vector<double> base(k, 0.0);
        base[cls] = 1.0;
        const double pick = rng_.uniform();
        const double share_u = rng_.uniform();
        confused = false;
        double acc = 0.0;
        for (const auto& c : s_.noise.confusions) {
            if (*vocab_.index_of(c.true_class) != cls) continue;
            acc += c.probability;
            if (pick < acc) {
                const double share = c.min_share + (c.max_share - c.min_share) * share_u;
                base[cls] = 1.0 - share;
                base[*vocab_.index_of(c.confused_with)] += share;
                confused = true;
                break;
            }
        }
        const double m = s_.noise.score_mixing;
        const double gamma = s_.noise.confidence_floor + (1.0 - s_.noise.confidence_floor) * rng_.uniform();
        std::vector<double> out(k);
        for (std::size_t i = 0; i < k; ++i) {
            const double r = rng_.uniform();
            out[i] = std::clamp(gamma * ((1.0 - m) * base[i] + m * r), 0.0, 1.0);
        }
        return ScoreVector(std::move(out));
    }

    BBox box_at(Point2 pixel) {
        const double jx = rng_.normal() * s_.noise.bbox_jitter_px;
        const double jy = rng_.normal() * s_.noise.bbox_jitter_px;
        return {pixel.x + jx - size_px_ / 2.0, pixel.y + jy - size_px_ / 2.0, size_px_, size_px_};
    }

  private:
    const SurveyScenario& s_;
    const ClassVocabulary& vocab_;
    SurveyRng& rng_;
    double size_px_;
};

bool in_image(const FrameMeta& f, Point2 p) {
    return p.x >= 0.0 && p.x < f.width_px && p.y >= 0.0 && p.y < f.height_px;
}

}  // namespace

GeneratedSurvey generate(const SurveyScenario& scenario) {
    scenario.validate();
    std::vector<std::string> warnings;
    SurveyRng rng(scenario.seed);

    std::vector<std::string> names;
    std::vector<bool> flags;
    std::vector<std::size_t> targets;
    for (std::size_t i = 0; i < scenario.classes.size(); ++i) {
        names.push_back(scenario.classes[i].name);
        flags.push_back(scenario.classes[i].is_target);
        if (scenario.classes[i].is_target) targets.push_back(i);
    }
    ClassVocabulary vocab(names, flags);
    const auto& field = scenario.field;
    const double margin = std::min({scenario.camera.object_size_m, field.width_m / 2.0, field.length_m / 2.0});

    std::vector<GroundTruthObject> objects;
    for (const auto& o : scenario.objects) {
        GroundTruthObject g;
        g.object_id = static_cast<ObjectId>(objects.size());
        g.class_label = *vocab.index_of(o.class_name);
        g.world_position = o.position;
        objects.push_back(std::move(g));
    }
    for (int i = 0; i < scenario.random_objects; ++i) {
        GroundTruthObject g;
        g.object_id = static_cast<ObjectId>(objects.size());
        g.class_label = targets[rng.below(targets.size())];
        g.world_position = {rng.uniform(margin, field.width_m - margin), rng.uniform(margin, field.length_m - margin)};
        objects.push_back(std::move(g));
    }
    std::vector<Site> sites;
    for (const auto& p : scenario.noise.false_alarm_sites) sites.push_back({p, targets[rng.below(targets.size())]});
    for (int i = 0; i < scenario.noise.random_false_alarm_sites; ++i) {
        Point2 p{rng.uniform(margin, field.width_m - margin), rng.uniform(margin, field.length_m - margin)};
        sites.push_back({p, targets[rng.below(targets.size())]});
    }

    const auto& cam = scenario.camera;
    const auto& fl = scenario.flight;
    const double footprint_w = cam.width_px * cam.gsd_m_per_px;
    const double footprint_h = cam.height_px * cam.gsd_m_per_px;
    if (footprint_w > field.width_m || footprint_h > field.length_m) {
        warnings.push_back("camera footprint (" + format_double(footprint_w) + " m x " +
                               format_double(footprint_h) + " m) is larger than the field");
    }
    const int passes =
        fl.passes >= 0 ? fl.passes : static_cast<int>(std::ceil(field.width_m / fl.swath_spacing_m - 1e-9));
    const double step = fl.speed_m_s / fl.frame_rate_hz;
    const auto frames_per_pass = static_cast<std::int64_t>(std::floor(field.length_m / step + 1e-9)) + 1;

    std::vector<FrameMeta> frames;
    for (int p = 0; p < passes; ++p) {
        const double x = (p + 0.5) * field.width_m / passes;
        const bool forward = p % 2 == 0;
        for (std::int64_t k = 0; k < frames_per_pass; ++k) {
            FrameMeta f;
            f.frame_id = static_cast<FrameId>(frames.size());
            f.timestamp_s = static_cast<double>(f.frame_id) / fl.frame_rate_hz;
            f.width_px = cam.width_px;
            f.height_px = cam.height_px;
            f.gsd_m_per_px = cam.gsd_m_per_px;
            const double y = forward ? k * step : field.length_m - k * step;
            f.pose = CameraPose{x, y, fl.altitude_m, forward ? 0.0 : std::numbers::pi};
            frames.push_back(f);
        }
    }
    if (frames.empty()) warnings.push_back("flight produces no frames; the dataset is empty");

    Emitter emit(scenario, vocab, rng);
    InjectionLog log;
    log.frames = static_cast<std::int64_t>(frames.size());
    log.objects = static_cast<std::int64_t>(objects.size());
    log.false_alarm_sites = static_cast<std::int64_t>(sites.size());
    std::vector<bool> site_active(sites.size(), false);
    std::vector<Detection> detections;
    std::vector<DetectionTruth> tags;
    DetectionId next_id = 0;

    auto push = [&](const FrameMeta& f, BBox box, ScoreVector scores, DetectionTruth tag) {
        Detection d;
        d.frame_id = f.frame_id;
        d.detection_id = next_id++;
        d.bbox = box;
        d.scores = std::move(scores);
        tag.detection_id = d.detection_id;
        tag.frame_id = f.frame_id;
        tag.correct_class = tag.true_class.has_value() && d.scores.top_class() == *tag.true_class;
        detections.push_back(std::move(d));
        tags.push_back(tag);
    };

    for (const auto& f : frames) {
        for (auto& o : objects) {
            const Point2 px = frame_world_to_pixel(f, o.world_position);
            if (!in_image(f, px)) continue;
            o.pixels.push_back({f.frame_id, px});
            ++log.object_views;
            const bool missed = rng.uniform() < scenario.noise.miss_probability;
            const BBox box = emit.box_at(px);
            bool confused = false;
            ScoreVector scores = emit.scores_for(o.class_label, confused);
            if (missed) {
                ++log.misses;
                continue;
            }
            if (confused) ++log.confused_views;
            DetectionTruth tag;
            tag.kind = TruthKind::object_view;
            tag.object_id = o.object_id;
            tag.true_class = o.class_label;
            tag.true_pixel = px;
            push(f, box, std::move(scores), tag);
            ++log.true_detections;
        }
        for (std::size_t s = 0; s < sites.size(); ++s) {
            const Point2 px = frame_world_to_pixel(f, sites[s].position);
            if (!in_image(f, px)) continue;
            const bool fires = rng.uniform() < scenario.noise.site_emission_probability;
            const BBox box = emit.box_at(px);
            bool confused = false;
            ScoreVector scores = emit.scores_for(sites[s].class_label, confused);
            if (!fires) continue;
            DetectionTruth tag;
            tag.kind = TruthKind::site_false;
            tag.site_id = static_cast<std::int64_t>(s);
            tag.true_pixel = px;
            push(f, box, std::move(scores), tag);
            site_active[s] = true;
            ++log.site_false_alarms;
        }
        const int scattered = rng.poisson(scenario.noise.false_alarm_rate);
        for (int i = 0; i < scattered; ++i) {
            const Point2 px{rng.uniform(0.0, f.width_px), rng.uniform(0.0, f.height_px)};
            const std::size_t cls = targets[rng.below(targets.size())];
            const BBox box = emit.box_at(px);
            bool confused = false;
            ScoreVector scores = emit.scores_for(cls, confused);
            DetectionTruth tag;
            tag.kind = TruthKind::scattered_false;
            tag.true_pixel = px;
            push(f, box, std::move(scores), tag);
            ++log.scattered_false_alarms;
        }
    }
    log.active_false_alarm_sites = std::count(site_active.begin(), site_active.end(), true);

    RunDataset dataset{vocab, std::move(frames), std::move(detections), std::move(objects),
                       field.width_m * field.length_m};
    validate_dataset(dataset);

    TruthRecord truth;
    truth.fingerprint = dataset_fingerprint(dataset);
    truth.detections = std::move(tags);
    for (const auto& s : sites) truth.false_alarm_sites.push_back(s.position);
    truth.log = log;
    return GeneratedSurvey{std::move(dataset), std::move(truth), std::move(warnings)};
}

// -------------------------------------------------------------- truth I/O

std::string dataset_fingerprint(const RunDataset& dataset) {
    const std::string text = serialize_detections(dataset.detections);
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<DetectionTruth> oracle_labels(const RunDataset& dataset, const TruthRecord& truth) {
    if (truth.fingerprint != dataset_fingerprint(dataset) || truth.detections.size() != dataset.detections.size()) {
        throw ValidationError("dataset was not produced by the generator (truth fingerprint mismatch)");
    }
    for (std::size_t i = 0; i < truth.detections.size(); ++i) {
        if (truth.detections[i].detection_id != dataset.detections[i].detection_id) {
            throw ValidationError("dataset was not produced by the generator (detection order differs)");
        }
    }
    return truth.detections;
}

namespace {

const char* kind_name(TruthKind k) {
    switch (k) {
        case TruthKind::object_view: return "object_view";
        case TruthKind::scattered_false: return "scattered_false";
        case TruthKind::site_false: return "site_false";
    }
    return "";
}

TruthKind parse_kind(const std::string& s) {
    if (s == "object_view") return TruthKind::object_view;
    if (s == "scattered_false") return TruthKind::scattered_false;
    if (s == "site_false") return TruthKind::site_false;
    throw ValidationError("truth: unknown detection kind '" + s + "'");
}

template <typename T>
ordered_json opt(const std::optional<T>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
}

template <typename T>
std::optional<T> opt_get(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<T>();
}

}  // namespace

std::string serialize_truth(const TruthRecord& t) {
    ordered_json j;
    j["format"] = "tubescan-truth/1";
    j["fingerprint"] = t.fingerprint;
    const auto& l = t.log;
    j["log"] = {{"frames", l.frames},
                {"objects", l.objects},
                {"object_views", l.object_views},
                {"true_detections", l.true_detections},
                {"misses", l.misses},
                {"scattered_false_alarms", l.scattered_false_alarms},
                {"site_false_alarms", l.site_false_alarms},
                {"false_alarm_sites", l.false_alarm_sites},
                {"active_false_alarm_sites", l.active_false_alarm_sites},
                {"confused_views", l.confused_views}};
    j["false_alarm_sites"] = ordered_json::array();
    for (const auto& p : t.false_alarm_sites) j["false_alarm_sites"].push_back(point_json(p));
    j["detections"] = ordered_json::array();
    for (const auto& d : t.detections) {
        ordered_json e;
        e["detection_id"] = d.detection_id;
        e["frame_id"] = d.frame_id;
        e["kind"] = kind_name(d.kind);
        e["object_id"] = opt(d.object_id);
        e["true_class"] = opt(d.true_class);
        e["correct_class"] = d.correct_class;
        e["site_id"] = opt(d.site_id);
        e["true_pixel"] = point_json(d.true_pixel);
        j["detections"].push_back(std::move(e));
    }
    return j.dump() + "\n";
}

TruthRecord parse_truth(const std::string& text) {
    TruthRecord t;
    try {
        const json j = json::parse(text);
        if (j.at("format") != "tubescan-truth/1") throw ValidationError("truth: unsupported format");
        t.fingerprint = j.at("fingerprint").get<std::string>();
        const json& l = j.at("log");
        t.log.frames = l.at("frames");
        t.log.objects = l.at("objects");
        t.log.object_views = l.at("object_views");
        t.log.true_detections = l.at("true_detections");
        t.log.misses = l.at("misses");
        t.log.scattered_false_alarms = l.at("scattered_false_alarms");
        t.log.site_false_alarms = l.at("site_false_alarms");
        t.log.false_alarm_sites = l.at("false_alarm_sites");
        t.log.active_false_alarm_sites = l.at("active_false_alarm_sites");
        t.log.confused_views = l.at("confused_views");
        for (const auto& p : j.at("false_alarm_sites")) t.false_alarm_sites.push_back(read_point(p, "truth.site"));
        for (const auto& e : j.at("detections")) {
            DetectionTruth d;
            d.detection_id = e.at("detection_id");
            d.frame_id = e.at("frame_id");
            d.kind = parse_kind(e.at("kind").get<std::string>());
            d.object_id = opt_get<ObjectId>(e.at("object_id"));
            d.true_class = opt_get<std::size_t>(e.at("true_class"));
            d.correct_class = e.at("correct_class");
            d.site_id = opt_get<std::int64_t>(e.at("site_id"));
            d.true_pixel = read_point(e.at("true_pixel"), "truth.true_pixel");
            t.detections.push_back(d);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("truth: ") + e.what());
    }
    return t;
}

void write_truth(const TruthRecord& truth, const fs::path& path) {
    write_text_file_atomic(path, serialize_truth(truth));
}

TruthRecord read_truth(const fs::path& path) {
    return parse_truth(read_text_file(path));
}

void write_survey(const GeneratedSurvey& survey, const fs::path& directory) {
    write_dataset(survey.dataset, directory);
    write_truth(survey.truth, directory / kTruthFileName);
}

}  // namespace tubescan
