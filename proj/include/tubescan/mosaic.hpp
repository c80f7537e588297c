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

#ifndef TUBESCAN_MOSAIC_HPP
#define TUBESCAN_MOSAIC_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tubescan/core.hpp"
#include "tubescan/ingest.hpp"
#include "tubescan/metrics.hpp"

namespace tubescan {

// Thrown when a homography cannot be estimated from the given points.
class DegenerateError : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

/// Frame-to-mosaic mapping: mosaic = H * (p + translation), homogeneous.
struct FrameTransform {
    FrameId frame_id = 0;
    Point2 translation;
    Eigen::Matrix3d homography = Eigen::Matrix3d::Identity();
    bool registered = true;
    std::string note;

    Eigen::Matrix3d composed() const;
    /// Throws ValidationError when the point maps to infinity.
    Point2 apply(Point2 frame_pixel) const;
};

Point2 apply_homography(const Eigen::Matrix3d& h, Point2 p);

struct RoughTranslation {
    FrameId frame_id = 0;
    Point2 translation;
    bool registered = true;
    double peak = 1.0;  // NCC peak in image mode; 1 in pose mode
    std::string note;
};

// ------------------------------------------------------------- rough pass

/// Pose mode. The mosaic plane is frame 0's pixel grid extended over the
/// ground: translation = (pose - pose_0) / gsd_0. Frames without pose or GSD
/// are flagged unregistered; if no frame has them a ValidationError is thrown.
std::vector<RoughTranslation> rough_pass(std::span<const FrameMeta> frames);

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<float> pixels;  // row-major

    float at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

struct CorrelationConfig {
    int max_shift_px = 32;
    double min_overlap_fraction = 0.25;
    // Peaks below this mark the frame unregistered.
    double confidence_floor = 0.5;
};

struct ShiftEstimate {
    Point2 shift;  // pixel p of `next` sits at p + shift in `previous`
    double peak = 0.0;
};

/// Normalized cross-correlation search over integer shifts followed by a
/// parabolic sub-pixel fit around the peak.
ShiftEstimate estimate_shift(const GrayImage& previous, const GrayImage& next, const CorrelationConfig& config);

/// Image mode: chains consecutive shifts. An unregistered frame keeps the
/// previous translation.
std::vector<RoughTranslation> rough_pass(std::span<const GrayImage> images, std::span<const FrameId> frame_ids,
                                         const CorrelationConfig& config);

// ------------------------------------------------------------ refinement

struct Correspondence {
    Point2 frame_px;
    Point2 mosaic_px;
};

/// Least-squares homography dst ~ H src from >= 4 point pairs using the DLT
/// with isotropic (Hartley) normalization; h33 is scaled to 1. Throws
/// DegenerateError for fewer than 4 pairs or a rank-deficient system.
Eigen::Matrix3d estimate_homography(std::span<const Point2> src, std::span<const Point2> dst);

/// Second pass. For every frame with correspondences, fits H so that
/// H * (frame_px + translation) ~ mosaic_px. Frames without correspondences
/// keep the identity; degenerate sets keep the identity and are flagged.
std::vector<FrameTransform> refine_pass(std::span<const RoughTranslation> rough,
                                        const std::map<FrameId, std::vector<Correspondence>>& correspondences);

/// Image-corner correspondences implied by the camera poses.
std::map<FrameId, std::vector<Correspondence>> pose_correspondences(std::span<const FrameMeta> frames);

/// Rough pass + pose correspondences + refinement.
std::vector<FrameTransform> register_from_poses(std::span<const FrameMeta> frames);

/// Pose-mode mosaic coordinates of a ground point.
Point2 world_to_mosaic(std::span<const FrameMeta> frames, Point2 world);

// ------------------------------------------------------------ projection

struct ProjectedDetection {
    DetectionId detection_id = 0;
    FrameId frame_id = 0;
    Point2 centroid;
    BBox extent;  // axis-aligned hull of the four projected corners
    ScoreVector scores;
};

ProjectedDetection project_detection(const Detection& detection, const FrameTransform& transform);

/// Looks transforms up by frame id; throws when a frame has none.
class TransformTable {
  public:
    explicit TransformTable(std::vector<FrameTransform> transforms);

    const FrameTransform& at(FrameId frame) const;
    const std::vector<FrameTransform>& all() const { return transforms_; }

  private:
    std::vector<FrameTransform> transforms_;
    std::map<FrameId, std::size_t> index_;
};

/// Mean of the members' projected centroids.
Point2 project_tubelet(const Tubelet& tubelet, const TransformTable& transforms);

// -------------------------------------------------------------- dedupe

struct MosaicPoint {
    Point2 position;
    ScoreVector scores;
};

struct Cluster {
    std::vector<std::size_t> members;  // ascending input indices
    Point2 representative;             // position of the medoid member
    Point2 mean_position;
    ScoreVector scores;                // mean of member score vectors
};

/// Single-linkage clustering: points closer than or equal to radius_px share
/// a cluster. Clusters are ordered by their smallest member index.
std::vector<Cluster> dedupe_cross_pass(std::span<const MosaicPoint> points, double radius_px);

struct FalseAlarmCorrection {
    std::int64_t naive_count = 0;
    std::int64_t deduplicated_count = 0;
    double area_m2 = 0.0;
    double naive_d_fa = 0.0;
    double corrected_d_fa = 0.0;
    std::vector<Cluster> clusters;
};

/// Collapses false-alarm tubelets that land on the same mosaic location.
FalseAlarmCorrection correct_false_alarms(std::span<const Tubelet> tubelets, const Assignment& assignment,
                                          const TransformTable& transforms, double radius_px, double area_m2);

// ----------------------------------------------------------------- KDE

struct RasterSpec {
    int width = 0;
    int height = 0;
    Point2 origin;       // mosaic coordinates of pixel (0, 0)
    double scale = 1.0;  // mosaic units per raster pixel
    double alpha = 0.5;  // sigma = alpha * box extent
    double truncation_sigmas = 4.0;
};

struct KernelSource {
    Point2 center;  // mosaic units
    double width = 0.0;
    double height = 0.0;
    double amplitude = 0.0;
};

struct HeatmapRaster {
    int width = 0;
    int height = 0;
    Point2 origin;
    double scale = 1.0;
    std::vector<double> values;  // row-major

    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    double max_value() const;
};

KernelSource kernel_source(const ProjectedDetection& detection);

/// Sum of unnormalized anisotropic Gaussians sampled at
/// origin + (i, j) * scale:
///   amp * exp(-(dx^2 / (2 sx^2) + dy^2 / (2 sy^2))), sx = alpha w, sy = alpha h,
/// cut off outside +-truncation_sigmas. Rows are split across threads; every
/// pixel accumulates sources in input order so the result does not depend on
/// the thread count.
HeatmapRaster render_kde(std::span<const KernelSource> sources, const RasterSpec& spec, int threads = 1);

/// Raster covering all sources plus a margin.
RasterSpec raster_covering(std::span<const KernelSource> sources, double scale, double margin, double alpha = 0.5);

enum class HeatmapMode {
    grayscale,   // fixed factor kGrayscaleFactor, values above 65535/factor clip
    normalized,  // maximum maps to 65535
};

inline constexpr double kGrayscaleFactor = 4096.0;

std::string to_string(HeatmapMode mode);
HeatmapMode parse_heatmap_mode(const std::string& text);

/// Binary 16-bit PGM (P5, big-endian samples), sample = round(value * factor).
/// The factor and raster placement go to "<path>.scale" as key/value lines.
void write_heatmap(const HeatmapRaster& raster, const std::filesystem::path& path, HeatmapMode mode);
HeatmapRaster read_heatmap(const std::filesystem::path& path);

/// 8- or 16-bit binary PGM.
GrayImage read_pgm(const std::filesystem::path& path);

// Transform chain: CSV "frame_id,tx,ty,h11,h12,h13,h21,h22,h23,h31,h32,h33".
void write_transforms(std::span<const FrameTransform> transforms, const std::filesystem::path& path);
std::vector<FrameTransform> read_transforms(const std::filesystem::path& path);

// Correspondences: CSV "frame_id,x,y,mosaic_x,mosaic_y".
std::map<FrameId, std::vector<Correspondence>> load_correspondences(const std::filesystem::path& path);

}  // namespace tubescan

#endif  // TUBESCAN_MOSAIC_HPP
