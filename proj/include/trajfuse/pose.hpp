#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "trajfuse/media.hpp"
#include "trajfuse/trajectories.hpp"

namespace trajfuse {

enum class JointId : int {
    Head = 0, Neck,
    LShoulder, RShoulder, LElbow, RElbow, LWrist, RWrist,
    LHip, RHip, LKnee, RKnee, LAnkle, RAnkle,
};
inline constexpr int kNumJoints = 14;
extern const std::array<const char*, kNumJoints> kJointNames;
std::optional<JointId> joint_from_name(const std::string& name);

struct TorsoRotation {
    double yaw = 0, pitch = 0, roll = 0;  // degrees
};

// The ten limbs plus the head link; the torso (neck to hip midpoint) is
// handled separately since the hip midpoint is not a joint.
struct BodyPart {
    JointId a, b;
    const char* name;
};
extern const std::array<BodyPart, 11> kBodyParts;

// Which pipeline produced a set of joint locations.
enum class PoseSource { GT, GT_T, PS_T, PS_M };
const char* pose_source_name(PoseSource s);
std::optional<PoseSource> pose_source_from_name(const std::string& s);

struct PoseAnnotation {
    int frame = 0;
    int person_id = 0;
    int activity_label = 0;
    std::optional<TorsoRotation> torso_rotation;
    PoseSource source = PoseSource::GT;
    std::array<std::optional<Vec2>, kNumJoints> joints;  // absent = truncated
    std::array<bool, kNumJoints> occluded{};             // occluded joints stay localized

    int truncation_count() const {
        int n = 0;
        for (const auto& j : joints) n += !j.has_value();
        return n;
    }
    int occlusion_count() const {
        int n = 0;
        for (int i = 0; i < kNumJoints; ++i) n += joints[static_cast<size_t>(i)].has_value() && occluded[static_cast<size_t>(i)];
        return n;
    }
};

// JSON-lines: one record per (frame, person). Optional width/height fields
// enable joint bounds validation at load.
std::vector<PoseAnnotation> load_annotations(const std::filesystem::path& path);
void save_annotations(const std::vector<PoseAnnotation>& anns, const std::filesystem::path& path,
                      int width = 0, int height = 0);

inline constexpr int kPoseWindow = 7;   // frames per joint track
inline constexpr int kPoseStep = 3;     // start offset between windows

struct JointTrack {
    int start_frame = 0;  // window covers [start_frame, start_frame + 7)
    PoseSource source = PoseSource::GT;
    int person_id = 0;
    int activity_label = 0;
    // per joint: 7 positions, or absent for the whole window
    std::array<std::optional<std::array<Vec2, kPoseWindow>>, kNumJoints> joints;
};

// Window start frames {0, 3, 6, ...} for an n-frame clip.
std::vector<int> pose_window_starts(int n_frames);

struct PatchTrackConfig {
    int patch = 15;        // odd patch size for correlation
    int search_radius = 8; // px per step
};

// Tracks each present joint forward/backward from the key frame by maximizing
// zero-mean NCC of a patch within the search region per step, with parabolic
// subpixel refinement. Absent joints stay absent across the window.
JointTrack track_joints(const VideoClip& clip, const PoseAnnotation& init,
                        int window = kPoseWindow, const PatchTrackConfig& cfg = {});

// Builds a window track directly from per-frame annotations (PS-M style);
// a joint must be present in every covered frame to be present in the track.
JointTrack joint_track_from_annotations(const std::vector<const PoseAnnotation*>& frames,
                                        int start_frame);

// Replicates a single key pose across the window (GT single-pose features).
JointTrack replicate_pose(const PoseAnnotation& key, int start_frame);

struct PoseDescriptors {
    // one vector per present joint (except the neck): (joint - neck) / torso
    // length, concatenated over the 7 frames -> 14 dims
    std::vector<std::vector<float>> relative_positions;
    // one vector per limb triple present: inner angle at the middle joint in
    // degrees, one entry per frame -> 7 dims
    std::vector<std::vector<float>> joint_angles;
    // one vector per present joint: torso-normalized per-step displacement,
    // interleaved x,y -> 12 dims
    std::vector<std::vector<float>> temporal_diffs;
};

inline constexpr int kRelPosDim = 2 * kPoseWindow;
inline constexpr int kAngleDim = kPoseWindow;
inline constexpr int kTemporalDim = 2 * (kPoseWindow - 1);

PoseDescriptors compute_pose_descriptors(const JointTrack& track);

// Binary per-frame mask over [first_frame, first_frame + masks.size()).
struct BodyMask {
    int first_frame = 0;
    int width = 0;
    int height = 0;
    std::vector<std::vector<uint8_t>> masks;

    bool covers(int frame) const {
        return frame >= first_frame && frame < first_frame + static_cast<int>(masks.size());
    }
    bool at(int frame, int x, int y) const {
        return masks[static_cast<size_t>(frame - first_frame)]
                    [static_cast<size_t>(y) * width + x] != 0;
    }
    double density(int frame) const;

    static BodyMask full(int first_frame, int n_frames, int w, int h);
    static BodyMask empty(int first_frame, int n_frames, int w, int h);
};

void save_mask_frames(const BodyMask& mask, const std::filesystem::path& dir);

// Union of axis-aligned rectangles around the 10 limbs plus head and torso,
// inflated to part_width_frac * torso length. Annotations are grouped per
// frame; every covered frame needs at least one localized joint.
BodyMask build_body_mask(const std::vector<PoseAnnotation>& annotations, int width, int height,
                         double part_width_frac = 0.35);

// Keeps a trajectory iff every point lies in the mask of its frame.
std::vector<Trajectory> filter_trajectories_by_mask(const std::vector<Trajectory>& trajs,
                                                    const BodyMask& mask);

// Gaussian joint jitter plus dropout; used to derive PS-style annotations
// from ground truth for noisy-estimation experiments.
std::vector<PoseAnnotation> inject_pose_noise(const std::vector<PoseAnnotation>& anns,
                                              double sigma_px, double dropout_prob,
                                              uint64_t seed, PoseSource relabel,
                                              int width, int height);

}  // namespace trajfuse
