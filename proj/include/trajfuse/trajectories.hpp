#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "trajfuse/flow.hpp"
#include "trajfuse/media.hpp"

namespace trajfuse {

struct DtConfig {
    int sample_stride = 5;        // px between dense sample grid nodes
    int track_length = 15;        // L; a trajectory has L+1 points
    int volume_size = 32;         // px; spatial extent of the descriptor tube
    int cells_spatial = 2;        // per axis
    int cells_temporal = 3;
    int hog_bins = 8;
    int hof_bins = 9;             // includes one zero-motion bin
    int mbh_bins = 8;
    double static_disp_threshold = 1.0;     // min total path length
    double erratic_disp_threshold = 22.4;   // 0.7 * volume_size
    double camera_residual_threshold = 0.5; // mean residual vs affine model
    double cornerness_quality = 0.001;      // fraction of max min-eigenvalue
    double hof_zero_threshold = 0.4;        // flow magnitude for the zero bin
    int median_radius = 1;
    int border_margin = 8;  // flow accuracy is only contracted this far in;
                            // sampling and advection stay out of the band
    FlowConfig flow;

    int traj_dim() const { return 2 * track_length; }
    int hog_dim() const { return cells_spatial * cells_spatial * cells_temporal * hog_bins; }
    int hof_dim() const { return cells_spatial * cells_spatial * cells_temporal * hof_bins; }
    int mbh_dim() const { return 2 * cells_spatial * cells_spatial * cells_temporal * mbh_bins; }
};

struct Trajectory {
    int start_frame = 0;
    std::vector<Vec2> points;  // length L+1, subpixel, inside frame bounds

    std::vector<Vec2> displacements() const {
        std::vector<Vec2> d;
        d.reserve(points.size() - 1);
        for (size_t i = 0; i + 1 < points.size(); ++i) d.push_back(points[i + 1] - points[i]);
        return d;
    }
    double path_length() const {
        double s = 0;
        for (size_t i = 0; i + 1 < points.size(); ++i) s += (points[i + 1] - points[i]).norm();
        return s;
    }
    Vec2 mean_point() const {
        Vec2 m;
        for (const auto& p : points) m += p;
        return m / static_cast<double>(points.size());
    }
};

struct DescriptorSet {
    std::vector<float> traj;  // 2L, L1-normalized by total displacement magnitude
    std::vector<float> hog;   // cells * hog_bins, per-cell L2-normalized
    std::vector<float> hof;   // cells * hof_bins, per-cell L2-normalized
    std::vector<float> mbh;   // x half then y half, per-cell L2-normalized
};

// Per-pair flow products shared by tracking, pruning and descriptors.
struct ClipFlows {
    std::vector<FlowField> median;       // median-filtered flow per frame pair
    std::vector<GlobalMotion> global_motion;  // affine fit per frame pair
};

ClipFlows compute_clip_flows(const VideoClip& clip, const DtConfig& cfg = {});

// Grid points at the stride that clear a min-eigenvalue cornerness gate and
// are not within stride/2 of an existing tracked point.
std::vector<Vec2> sample_dense_points(const Frame& frame, const DtConfig& cfg,
                                      const std::vector<Vec2>& existing);

// Advects sampled points through the median-filtered flow; emits a trajectory
// exactly when it survives track_length steps in bounds.
std::vector<Trajectory> track_points(const VideoClip& clip, const DtConfig& cfg,
                                     const ClipFlows* flows = nullptr);

// Removes static, erratic and camera-consistent trajectories.
std::vector<Trajectory> prune_trajectories(const std::vector<Trajectory>& trajs,
                                           const std::vector<GlobalMotion>& global,
                                           const DtConfig& cfg);

DescriptorSet compute_descriptors(const Trajectory& traj, const VideoClip& clip,
                                  const std::vector<FlowField>& flows, const DtConfig& cfg);

// --- feature dump ---
// f32 records [start_frame, mean_x, mean_y, traj, hog, hof, mbh] plus a JSON
// sidecar (<file>.json) carrying config hash, dims and counts.

struct DtFeatureFile {
    std::vector<Trajectory> trajectories;
    std::vector<DescriptorSet> descriptors;
};

void write_dt_features(const std::vector<Trajectory>& trajs,
                       const std::vector<DescriptorSet>& descs, const DtConfig& cfg,
                       const std::string& clip_id, const std::filesystem::path& file,
                       const std::string& config_hash = "");

struct DtFeatureRecord {
    float start_frame, mean_x, mean_y;
    std::vector<float> traj, hog, hof, mbh;
};
std::vector<DtFeatureRecord> read_dt_features(const std::filesystem::path& file);

// Full holistic extraction for one clip: track, prune, describe.
struct DtExtraction {
    std::vector<Trajectory> raw;     // all emitted tracks
    std::vector<Trajectory> pruned;  // survivors
    std::vector<DescriptorSet> descriptors;  // aligned with pruned
    ClipFlows flows;
};
DtExtraction extract_dense_trajectories(const VideoClip& clip, const DtConfig& cfg = {});

}  // namespace trajfuse
