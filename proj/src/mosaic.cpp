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

#include "tubescan/mosaic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "tubescan/parallel.hpp"

namespace tubescan {

namespace fs = std::filesystem;

namespace {

constexpr double kInfinityGuard = 1e-12;

// Translation + isotropic scaling taking the points to centroid 0 and mean
// distance sqrt(2).
Eigen::Matrix3d normalizing_transform(std::span<const Point2> pts) {
    double cx = 0.0;
    double cy = 0.0;
    for (const auto& p : pts) {
        cx += p.x;
        cy += p.y;
    }
    cx /= static_cast<double>(pts.size());
    cy /= static_cast<double>(pts.size());
    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += std::hypot(p.x - cx, p.y - cy);
    mean_dist /= static_cast<double>(pts.size());
    if (mean_dist <= 0.0) throw DegenerateError("correspondence points coincide");
    const double s = std::sqrt(2.0) / mean_dist;
    Eigen::Matrix3d t;
    t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
    return t;
}

double ncc_at(const GrayImage& prev, const GrayImage& next, int ox, int oy, double min_overlap, bool& ok) {
    const int x0 = std::max(0, -ox);
    const int x1 = std::min(next.width, prev.width - ox);
    const int y0 = std::max(0, -oy);
    const int y1 = std::min(next.height, prev.height - oy);
    ok = false;
    if (x1 <= x0 || y1 <= y0) return 0.0;
    const double count = static_cast<double>(x1 - x0) * (y1 - y0);
    if (count < min_overlap * next.width * next.height) return 0.0;
    double sa = 0.0, sb = 0.0;
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            sa += next.at(x, y);
            sb += prev.at(x + ox, y + oy);
        }
    }
    const double ma = sa / count;
    const double mb = sb / count;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            const double a = next.at(x, y) - ma;
            const double b = prev.at(x + ox, y + oy) - mb;
            sab += a * b;
            saa += a * a;
            sbb += b * b;
        }
    }
    ok = true;
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

double parabola_offset(double left, double center, double right) {
    const double denom = left - 2.0 * center + right;
    if (denom >= 0.0) return 0.0;
    return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

// Reads whitespace-separated PGM header tokens, skipping '#' comments.
std::string pgm_token(std::istream& in) {
    std::string tok;
    char c;
    while (in.get(c)) {
        if (c == '#') {
            std::string skip;
            std::getline(in, skip);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(c);
    }
    return tok;
}

struct PgmHeader {
    int width = 0;
    int height = 0;
    int maxval = 0;
};

PgmHeader read_pgm_header(std::istream& in, const fs::path& path) {
    if (pgm_token(in) != "P5") throw ValidationError(path.string() + ": not a binary PGM (P5)");
    PgmHeader h;
    try {
        h.width = std::stoi(pgm_token(in));
        h.height = std::stoi(pgm_token(in));
        h.maxval = std::stoi(pgm_token(in));
    } catch (const std::exception&) {
        throw ValidationError(path.string() + ": malformed PGM header");
    }
    if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 65535) {
        throw ValidationError(path.string() + ": malformed PGM header");
    }
    return h;
}

}  // namespace

Eigen::Matrix3d FrameTransform::composed() const {
    Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
    t(0, 2) = translation.x;
    t(1, 2) = translation.y;
    return homography * t;
}

Point2 apply_homography(const Eigen::Matrix3d& h, Point2 p) {
    const Eigen::Vector3d q = h * Eigen::Vector3d(p.x, p.y, 1.0);
    if (std::abs(q.z()) < kInfinityGuard) {
        throw ValidationError("point maps to infinity under the frame transform");
    }
    return {q.x() / q.z(), q.y() / q.z()};
}

Point2 FrameTransform::apply(Point2 frame_pixel) const {
    return apply_homography(homography, {frame_pixel.x + translation.x, frame_pixel.y + translation.y});
}

// ------------------------------------------------------------- rough pass

std::vector<RoughTranslation> rough_pass(std::span<const FrameMeta> frames) {
    auto ref = std::find_if(frames.begin(), frames.end(), [](const FrameMeta& f) { return f.has_geometry(); });
    if (ref == frames.end()) {
        throw ValidationError("pose-mode registration needs camera pose and GSD on at least one frame");
    }
    const double gsd0 = *ref->gsd_m_per_px;
    std::vector<RoughTranslation> out;
    out.reserve(frames.size());
    for (const auto& f : frames) {
        RoughTranslation r;
        r.frame_id = f.frame_id;
        if (!f.has_geometry()) {
            r.registered = false;
            r.peak = 0.0;
            r.note = "missing camera pose or GSD";
        } else {
            r.translation = {(f.pose->world_x_m - ref->pose->world_x_m) / gsd0,
                             (f.pose->world_y_m - ref->pose->world_y_m) / gsd0};
        }
        out.push_back(std::move(r));
    }
    return out;
}

ShiftEstimate estimate_shift(const GrayImage& previous, const GrayImage& next, const CorrelationConfig& config) {
    const int s = config.max_shift_px;
    const int side = 2 * s + 1;
    std::vector<double> score(static_cast<std::size_t>(side) * side, -2.0);
    ShiftEstimate best;
    best.peak = -2.0;
    int bx = 0, by = 0;
    for (int oy = -s; oy <= s; ++oy) {
        for (int ox = -s; ox <= s; ++ox) {
            bool ok = false;
            const double v = ncc_at(previous, next, ox, oy, config.min_overlap_fraction, ok);
            if (!ok) continue;
            score[static_cast<std::size_t>(oy + s) * side + (ox + s)] = v;
            if (v > best.peak) {
                best.peak = v;
                bx = ox;
                by = oy;
            }
        }
    }
    if (best.peak <= -2.0) {
        best.peak = 0.0;
        return best;
    }
    auto at = [&](int ox, int oy) -> std::optional<double> {
        if (ox < -s || ox > s || oy < -s || oy > s) return std::nullopt;
        const double v = score[static_cast<std::size_t>(oy + s) * side + (ox + s)];
        if (v <= -2.0) return std::nullopt;
        return v;
    };
    double dx = 0.0, dy = 0.0;
    if (auto l = at(bx - 1, by), r = at(bx + 1, by); l && r) dx = parabola_offset(*l, best.peak, *r);
    if (auto u = at(bx, by - 1), d = at(bx, by + 1); u && d) dy = parabola_offset(*u, best.peak, *d);
    best.shift = {bx + dx, by + dy};
    return best;
}

std::vector<RoughTranslation> rough_pass(std::span<const GrayImage> images, std::span<const FrameId> frame_ids,
                                         const CorrelationConfig& config) {
    if (images.size() != frame_ids.size()) throw ValidationError("one frame id per image is required");
    std::vector<RoughTranslation> out;
    out.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        RoughTranslation r;
        r.frame_id = frame_ids[i];
        if (i > 0) {
            const auto est = estimate_shift(images[i - 1], images[i], config);
            r.peak = est.peak;
            const Point2 prev = out.back().translation;
            if (est.peak < config.confidence_floor) {
                r.registered = false;
                r.translation = prev;
                r.note = "correlation peak " + std::to_string(est.peak) + " below floor";
            } else {
                r.translation = {prev.x + est.shift.x, prev.y + est.shift.y};
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

// ------------------------------------------------------------ refinement

Eigen::Matrix3d estimate_homography(std::span<const Point2> src, std::span<const Point2> dst) {
    if (src.size() != dst.size()) throw DegenerateError("correspondence lists differ in length");
    const std::size_t n = src.size();
    if (n < 4) throw DegenerateError("homography needs at least 4 correspondences, got " + std::to_string(n));

    const Eigen::Matrix3d ts = normalizing_transform(src);
    const Eigen::Matrix3d td = normalizing_transform(dst);

    // At least 9 rows so the SVD always yields 9 singular values.
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(std::max<Eigen::Index>(2 * n, 9), 9);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d p = ts * Eigen::Vector3d(src[i].x, src[i].y, 1.0);
        const Eigen::Vector3d q = td * Eigen::Vector3d(dst[i].x, dst[i].y, 1.0);
        const double x = p.x(), y = p.y(), u = q.x(), v = q.y();
        const auto r = static_cast<Eigen::Index>(2 * i);
        a.row(r) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
        a.row(r + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv(7) <= 1e-10 * sv(0)) {
        throw DegenerateError("correspondences are degenerate (collinear or repeated points)");
    }
    const Eigen::VectorXd h = svd.matrixV().col(8);
    Eigen::Matrix3d hn;
    hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    Eigen::Matrix3d out = td.inverse() * hn * ts;
    if (std::abs(out(2, 2)) < kInfinityGuard) throw DegenerateError("homography has h33 = 0");
    out /= out(2, 2);
    if (std::abs(out.determinant()) <= 1e-12) throw DegenerateError("homography is singular");
    return out;
}

std::vector<FrameTransform> refine_pass(std::span<const RoughTranslation> rough,
                                        const std::map<FrameId, std::vector<Correspondence>>& correspondences) {
    std::vector<FrameTransform> out;
    out.reserve(rough.size());
    for (const auto& r : rough) {
        FrameTransform t;
        t.frame_id = r.frame_id;
        t.translation = r.translation;
        t.registered = r.registered;
        t.note = r.note;
        auto it = correspondences.find(r.frame_id);
        if (it != correspondences.end() && !it->second.empty()) {
            std::vector<Point2> src, dst;
            for (const auto& c : it->second) {
                src.push_back({c.frame_px.x + r.translation.x, c.frame_px.y + r.translation.y});
                dst.push_back(c.mosaic_px);
            }
            try {
                t.homography = estimate_homography(src, dst);
                if (!r.registered && r.note == "missing camera pose or GSD") {
                    t.registered = true;
                    t.note.clear();
                }
            } catch (const DegenerateError& e) {
                t.homography = Eigen::Matrix3d::Identity();
                t.registered = false;
                t.note = e.what();
            }
        }
        out.push_back(std::move(t));
    }
    return out;
}

Point2 world_to_mosaic(std::span<const FrameMeta> frames, Point2 world) {
    auto ref = std::find_if(frames.begin(), frames.end(), [](const FrameMeta& f) { return f.has_geometry(); });
    if (ref == frames.end()) throw ValidationError("no frame carries camera pose and GSD");
    const double gsd0 = *ref->gsd_m_per_px;
    return {(world.x - ref->pose->world_x_m) / gsd0 + ref->width_px / 2.0,
            (world.y - ref->pose->world_y_m) / gsd0 + ref->height_px / 2.0};
}

std::map<FrameId, std::vector<Correspondence>> pose_correspondences(std::span<const FrameMeta> frames) {
    std::map<FrameId, std::vector<Correspondence>> out;
    for (const auto& f : frames) {
        if (!f.has_geometry()) continue;
        const double w = f.width_px;
        const double h = f.height_px;
        for (Point2 corner : {Point2{0, 0}, Point2{w, 0}, Point2{w, h}, Point2{0, h}}) {
            out[f.frame_id].push_back({corner, world_to_mosaic(frames, frame_pixel_to_world(f, corner))});
        }
    }
    return out;
}

std::vector<FrameTransform> register_from_poses(std::span<const FrameMeta> frames) {
    const auto rough = rough_pass(frames);
    return refine_pass(rough, pose_correspondences(frames));
}

// ------------------------------------------------------------ projection

ProjectedDetection project_detection(const Detection& detection, const FrameTransform& transform) {
    ProjectedDetection p;
    p.detection_id = detection.detection_id;
    p.frame_id = detection.frame_id;
    p.scores = detection.scores;
    p.centroid = transform.apply(detection.bbox.centroid());
    const BBox& b = detection.bbox;
    double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
    double max_x = -min_x, max_y = -min_x;
    for (Point2 c : {Point2{b.x, b.y}, Point2{b.x + b.w, b.y}, Point2{b.x + b.w, b.y + b.h}, Point2{b.x, b.y + b.h}}) {
        const Point2 m = transform.apply(c);
        min_x = std::min(min_x, m.x);
        min_y = std::min(min_y, m.y);
        max_x = std::max(max_x, m.x);
        max_y = std::max(max_y, m.y);
    }
    p.extent = {min_x, min_y, max_x - min_x, max_y - min_y};
    return p;
}

TransformTable::TransformTable(std::vector<FrameTransform> transforms) : transforms_(std::move(transforms)) {
    for (std::size_t i = 0; i < transforms_.size(); ++i) index_[transforms_[i].frame_id] = i;
}

const FrameTransform& TransformTable::at(FrameId frame) const {
    auto it = index_.find(frame);
    if (it == index_.end()) throw ValidationError("no transform for frame " + std::to_string(frame));
    return transforms_[it->second];
}

Point2 project_tubelet(const Tubelet& tubelet, const TransformTable& transforms) {
    Point2 sum;
    for (const auto& d : tubelet.detections) {
        const Point2 m = transforms.at(d.frame_id).apply(d.bbox.centroid());
        sum.x += m.x;
        sum.y += m.y;
    }
    const auto n = static_cast<double>(tubelet.length());
    return {sum.x / n, sum.y / n};
}

// -------------------------------------------------------------- dedupe

std::vector<Cluster> dedupe_cross_pass(std::span<const MosaicPoint> points, double radius_px) {
    if (!(radius_px > 0.0)) throw ValidationError("dedupe radius must be > 0");
    const std::size_t n = points.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    auto unite = [&](std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);
        parent[b] = a;
    };

    // Uniform grid with cell size = radius; neighbors live in the 3x3 block.
    auto cell_of = [&](Point2 p) {
        return std::pair<std::int64_t, std::int64_t>{static_cast<std::int64_t>(std::floor(p.x / radius_px)),
                                                      static_cast<std::int64_t>(std::floor(p.y / radius_px))};
    };
    struct PairHash {
        std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& k) const {
            return std::hash<std::int64_t>()(k.first * 73856093LL) ^ std::hash<std::int64_t>()(k.second * 19349663LL);
        }
    };
    std::unordered_map<std::pair<std::int64_t, std::int64_t>, std::vector<std::size_t>, PairHash> grid;
    for (std::size_t i = 0; i < n; ++i) grid[cell_of(points[i].position)].push_back(i);
    for (std::size_t i = 0; i < n; ++i) {
        const auto [cx, cy] = cell_of(points[i].position);
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
            for (std::int64_t dx = -1; dx <= 1; ++dx) {
                auto it = grid.find({cx + dx, cy + dy});
                if (it == grid.end()) continue;
                for (std::size_t j : it->second) {
                    if (j > i && distance(points[i].position, points[j].position) <= radius_px) unite(i, j);
                }
            }
        }
    }

    std::map<std::size_t, std::size_t> cluster_of_root;
    std::vector<Cluster> clusters;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t root = find(i);
        auto [it, inserted] = cluster_of_root.try_emplace(root, clusters.size());
        if (inserted) clusters.emplace_back();
        clusters[it->second].members.push_back(i);
    }
    for (auto& c : clusters) {
        std::vector<Detection> holders;
        Point2 sum;
        for (std::size_t i : c.members) {
            sum.x += points[i].position.x;
            sum.y += points[i].position.y;
            Detection d;
            d.scores = points[i].scores;
            holders.push_back(std::move(d));
        }
        const auto m = static_cast<double>(c.members.size());
        c.mean_position = {sum.x / m, sum.y / m};
        c.scores = mean_scores(holders);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i : c.members) {
            double total = 0.0;
            for (std::size_t j : c.members) total += distance(points[i].position, points[j].position);
            if (total < best) {
                best = total;
                c.representative = points[i].position;
            }
        }
    }
    return clusters;
}

FalseAlarmCorrection correct_false_alarms(std::span<const Tubelet> tubelets, const Assignment& assignment,
                                          const TransformTable& transforms, double radius_px, double area_m2) {
    if (assignment.tubelets.size() != tubelets.size()) {
        throw InvariantError("assignment does not match the tubelet list");
    }
    if (!(area_m2 > 0.0)) throw ValidationError("survey area must be positive");
    std::vector<MosaicPoint> points;
    for (std::size_t t = 0; t < tubelets.size(); ++t) {
        if (assignment.tubelets[t].outcome != Outcome::false_alarm) continue;
        points.push_back({project_tubelet(tubelets[t], transforms), tubelets[t].aggregate});
    }
    FalseAlarmCorrection out;
    out.naive_count = static_cast<std::int64_t>(points.size());
    out.clusters = dedupe_cross_pass(points, radius_px);
    out.deduplicated_count = static_cast<std::int64_t>(out.clusters.size());
    out.area_m2 = area_m2;
    out.naive_d_fa = static_cast<double>(out.naive_count) / area_m2;
    out.corrected_d_fa = static_cast<double>(out.deduplicated_count) / area_m2;
    return out;
}

// ----------------------------------------------------------------- KDE

double HeatmapRaster::max_value() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, v);
    return m;
}

KernelSource kernel_source(const ProjectedDetection& detection) {
    return {detection.centroid, detection.extent.w, detection.extent.h, detection.scores.confidence()};
}

HeatmapRaster render_kde(std::span<const KernelSource> sources, const RasterSpec& spec, int threads) {
    if (spec.width <= 0 || spec.height <= 0) throw ValidationError("raster dimensions must be positive");
    if (!(spec.scale > 0.0) || !(spec.alpha > 0.0) || !(spec.truncation_sigmas > 0.0)) {
        throw ValidationError("raster scale, alpha and truncation must be positive");
    }
    for (const auto& s : sources) {
        if (!(s.width > 0.0) || !(s.height > 0.0)) throw ValidationError("kernel extents must be positive");
        if (!(s.amplitude >= 0.0)) throw ValidationError("kernel amplitude must be non-negative");
    }
    HeatmapRaster r;
    r.width = spec.width;
    r.height = spec.height;
    r.origin = spec.origin;
    r.scale = spec.scale;
    r.values.assign(static_cast<std::size_t>(spec.width) * spec.height, 0.0);

    struct Footprint {
        int x0, x1, y0, y1;  // inclusive pixel range
        double sx, sy;
    };
    std::vector<Footprint> fp(sources.size());
    for (std::size_t k = 0; k < sources.size(); ++k) {
        const auto& s = sources[k];
        const double sx = spec.alpha * s.width;
        const double sy = spec.alpha * s.height;
        const double rx = spec.truncation_sigmas * sx;
        const double ry = spec.truncation_sigmas * sy;
        auto lo = [&](double v, double o) { return static_cast<int>(std::ceil((v - o) / spec.scale)); };
        auto hi = [&](double v, double o) { return static_cast<int>(std::floor((v - o) / spec.scale)); };
        Footprint f{std::max(0, lo(s.center.x - rx, spec.origin.x)),
                    std::min(spec.width - 1, hi(s.center.x + rx, spec.origin.x)),
                    std::max(0, lo(s.center.y - ry, spec.origin.y)),
                    std::min(spec.height - 1, hi(s.center.y + ry, spec.origin.y)), sx, sy};
        fp[k] = f;
    }

    const int bands = std::max(1, threads);
    const int rows_per_band = (spec.height + bands - 1) / bands;
    parallel_for(static_cast<std::size_t>(bands), threads, [&](std::size_t band) {
        const int row_begin = static_cast<int>(band) * rows_per_band;
        const int row_end = std::min(spec.height, row_begin + rows_per_band);
        std::vector<double> gx;
        for (std::size_t k = 0; k < sources.size(); ++k) {
            const auto& f = fp[k];
            const int y0 = std::max(f.y0, row_begin);
            const int y1 = std::min(f.y1, row_end - 1);
            if (f.x1 < f.x0 || y1 < y0) continue;
            const auto& s = sources[k];
            gx.resize(static_cast<std::size_t>(f.x1 - f.x0 + 1));
            for (int x = f.x0; x <= f.x1; ++x) {
                const double dx = spec.origin.x + x * spec.scale - s.center.x;
                gx[static_cast<std::size_t>(x - f.x0)] = std::exp(-(dx * dx) / (2.0 * f.sx * f.sx));
            }
            for (int y = y0; y <= y1; ++y) {
                const double dy = spec.origin.y + y * spec.scale - s.center.y;
                const double gy = s.amplitude * std::exp(-(dy * dy) / (2.0 * f.sy * f.sy));
                double* row = r.values.data() + static_cast<std::size_t>(y) * spec.width;
                for (int x = f.x0; x <= f.x1; ++x) row[x] += gy * gx[static_cast<std::size_t>(x - f.x0)];
            }
        }
    });
    return r;
}

RasterSpec raster_covering(std::span<const KernelSource> sources, double scale, double margin, double alpha) {
    RasterSpec spec;
    spec.scale = scale;
    spec.alpha = alpha;
    if (sources.empty()) {
        spec.width = 1;
        spec.height = 1;
        return spec;
    }
    double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
    double max_x = -min_x, max_y = -min_x;
    for (const auto& s : sources) {
        const double rx = spec.truncation_sigmas * alpha * s.width;
        const double ry = spec.truncation_sigmas * alpha * s.height;
        min_x = std::min(min_x, s.center.x - rx);
        max_x = std::max(max_x, s.center.x + rx);
        min_y = std::min(min_y, s.center.y - ry);
        max_y = std::max(max_y, s.center.y + ry);
    }
    spec.origin = {std::floor(min_x - margin), std::floor(min_y - margin)};
    spec.width = static_cast<int>(std::ceil((max_x + margin - spec.origin.x) / scale)) + 1;
    spec.height = static_cast<int>(std::ceil((max_y + margin - spec.origin.y) / scale)) + 1;
    return spec;
}

std::string to_string(HeatmapMode mode) {
    return mode == HeatmapMode::grayscale ? "grayscale" : "normalized";
}

HeatmapMode parse_heatmap_mode(const std::string& text) {
    if (text == "grayscale") return HeatmapMode::grayscale;
    if (text == "normalized") return HeatmapMode::normalized;
    throw ValidationError("unknown heatmap mode '" + text + "' (expected grayscale or normalized)");
}

void write_heatmap(const HeatmapRaster& raster, const fs::path& path, HeatmapMode mode) {
    if (raster.width <= 0 || raster.height <= 0) throw ValidationError("raster dimensions must be positive");
    double factor = kGrayscaleFactor;
    if (mode == HeatmapMode::normalized) {
        const double m = raster.max_value();
        factor = m > 0.0 ? 65535.0 / m : 1.0;
    }
    std::string out = "P5\n" + std::to_string(raster.width) + " " + std::to_string(raster.height) + "\n65535\n";
    std::int64_t clipped = 0;
    out.reserve(out.size() + raster.values.size() * 2);
    for (double v : raster.values) {
        double q = std::round(v * factor);
        if (q > 65535.0) {
            q = 65535.0;
            ++clipped;
        }
        const auto sample = static_cast<std::uint16_t>(std::max(0.0, q));
        out.push_back(static_cast<char>(sample >> 8));
        out.push_back(static_cast<char>(sample & 0xff));
    }
    write_text_file_atomic(path, out);

    std::string side;
    side += "mode " + to_string(mode) + "\n";
    side += "scale_factor " + format_double(factor) + "\n";
    side += "origin_x " + format_double(raster.origin.x) + "\n";
    side += "origin_y " + format_double(raster.origin.y) + "\n";
    side += "pixel_size " + format_double(raster.scale) + "\n";
    side += "clipped " + std::to_string(clipped) + "\n";
    fs::path side_path = path;
    side_path += ".scale";
    write_text_file_atomic(side_path, side);
}

HeatmapRaster read_heatmap(const fs::path& path) {
    fs::path side_path = path;
    side_path += ".scale";
    std::map<std::string, std::string> kv;
    {
        std::istringstream side(read_text_file(side_path));
        std::string key, value;
        while (side >> key >> value) kv[key] = value;
    }
    for (const char* key : {"scale_factor", "origin_x", "origin_y", "pixel_size"}) {
        if (!kv.count(key)) throw ValidationError(side_path.string() + ": missing '" + key + "'");
    }
    const double factor = parse_double(kv["scale_factor"]);
    const GrayImage img = read_pgm(path);
    HeatmapRaster r;
    r.width = img.width;
    r.height = img.height;
    r.origin = {parse_double(kv["origin_x"]), parse_double(kv["origin_y"])};
    r.scale = parse_double(kv["pixel_size"]);
    r.values.reserve(img.pixels.size());
    for (float v : img.pixels) r.values.push_back(static_cast<double>(v) / factor);
    return r;
}

GrayImage read_pgm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    const PgmHeader h = read_pgm_header(in, path);
    GrayImage img;
    img.width = h.width;
    img.height = h.height;
    const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
    const std::size_t bytes = h.maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(n * bytes);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
        throw ValidationError(path.string() + ": truncated PGM payload");
    }
    img.pixels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        img.pixels[i] = bytes == 2 ? static_cast<float>((raw[2 * i] << 8) | raw[2 * i + 1]) : raw[i];
    }
    return img;
}

void write_transforms(std::span<const FrameTransform> transforms, const fs::path& path) {
    std::string out = "frame_id,tx,ty,h11,h12,h13,h21,h22,h23,h31,h32,h33\n";
    for (const auto& t : transforms) {
        out += std::to_string(t.frame_id) + "," + format_double(t.translation.x) + "," +
               format_double(t.translation.y);
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) out += "," + format_double(t.homography(r, c));
        }
        out += "\n";
    }
    write_text_file_atomic(path, out);
}

std::vector<FrameTransform> read_transforms(const fs::path& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    std::vector<FrameTransform> out;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 12) throw ParseError(path.string(), line_no, "expected 12 fields");
        try {
            FrameTransform t;
            t.frame_id = std::stoll(cells[0]);
            t.translation = {parse_double(cells[1]), parse_double(cells[2])};
            for (int k = 0; k < 9; ++k) t.homography(k / 3, k % 3) = parse_double(cells[3 + k]);
            out.push_back(std::move(t));
        } catch (const std::exception& e) {
            throw ParseError(path.string(), line_no, e.what());
        }
    }
    return out;
}

std::map<FrameId, std::vector<Correspondence>> load_correspondences(const fs::path& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    std::map<FrameId, std::vector<Correspondence>> out;
    std::size_t line_no = 0;
    bool header = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (header) {
            if (cells != std::vector<std::string>{"frame_id", "x", "y", "mosaic_x", "mosaic_y"}) {
                throw ParseError(path.string(), line_no, "expected header 'frame_id,x,y,mosaic_x,mosaic_y'");
            }
            header = false;
            continue;
        }
        if (cells.size() != 5) throw ParseError(path.string(), line_no, "expected 5 fields");
        try {
            out[std::stoll(cells[0])].push_back(
                {{parse_double(cells[1]), parse_double(cells[2])}, {parse_double(cells[3]), parse_double(cells[4])}});
        } catch (const std::exception& e) {
            throw ParseError(path.string(), line_no, e.what());
        }
    }
    return out;
}

}  // namespace tubescan
