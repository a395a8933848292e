#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trajfuse/pose.hpp"
#include "trajfuse/trajectories.hpp"

namespace trajfuse {

// Torso-normalized reference statistics computed once over the training split.
struct PoseStatistics {
    std::array<std::optional<Vec2>, kNumJoints> mean_pose;  // neck-origin, torso-normalized
    std::map<std::string, double> mean_part_lengths;        // torso-normalized, per part name
};

PoseStatistics compute_pose_statistics(const std::vector<PoseAnnotation>& training_annotations);

struct StaticComplexity {
    double pose_dev = 0;             // RMS joint distance to the mean pose
    int occlusion_count = 0;
    std::optional<double> viewpoint_dev;  // degrees from frontal, [0, 180]
    double part_length_dev = 0;      // RMS relative part-length deviation
    int truncation_count = 0;
};

StaticComplexity compute_static_complexity(const PoseAnnotation& ann, const PoseStatistics& ref);

struct MotionComplexity {
    int n_dt = 0;
    std::optional<int> n_dt_body;
    double ms = 0;                   // mean per-step displacement magnitude
    std::optional<double> ms_body;
    int n_people = 0;
};

MotionComplexity compute_motion_complexity(const std::vector<Trajectory>& trajs,
                                           const BodyMask* mask, int n_people);

// The ten per-clip complexity measures; body measures absent without a mask.
struct ComplexityProfile {
    std::string clip_id;
    int class_id = 0;
    StaticComplexity pose;
    MotionComplexity motion;
};

extern const std::vector<std::string> kPoseMeasures;    // ranked in increasing order
extern const std::vector<std::string> kMotionMeasures;  // ranked in decreasing order

struct ClassComplexity {
    int class_id = 0;
    int n_clips = 0;
    std::map<std::string, double> means;  // measure name -> class mean (absent if no data)
};

std::vector<ClassComplexity> aggregate_complexity(const std::vector<ComplexityProfile>& profiles);

// VOC-2007 11-point interpolated average precision. Ties in score keep input
// order (stable ranking).
double average_precision(const std::vector<double>& scores, const std::vector<int>& labels);

struct EvalReport {
    std::vector<int> class_ids;         // evaluated classes, ascending
    std::vector<double> per_class_ap;
    std::vector<int> excluded_classes;  // zero test positives
    double map = 0.0;
    int slice_n = 0;                    // size of the class subset requested
};

EvalReport mean_average_precision(const std::map<int, std::vector<double>>& per_class_scores,
                                  const std::map<int, std::vector<int>>& per_class_labels,
                                  const std::vector<int>& class_subset);

enum class RankDirection { Increasing, Decreasing };

// Stable sort of classes by a measure mean; pose measures default increasing,
// motion measures decreasing; ties resolved by class id.
std::vector<int> rank_classes(const std::vector<ClassComplexity>& cc, const std::string& measure,
                              std::optional<RankDirection> direction = std::nullopt);

// The n classes with the largest training-set sizes; ties by class id.
std::vector<int> top_n_by_train_size(const std::vector<std::pair<int, int>>& class_train_counts,
                                     int n);

// --- report emission ---

struct MethodCurve {
    std::string method;
    std::map<int, double> per_class_ap;
};

// per-class CSV: class, ap per method, train size, complexity means
void write_class_report_csv(const std::filesystem::path& file,
                            const std::vector<ClassComplexity>& cc,
                            const std::vector<std::pair<int, int>>& train_sizes,
                            const std::vector<MethodCurve>& methods);

// curve CSV for one ranking: rank, class, cumulative mAP per method
void write_curve_csv(const std::filesystem::path& file, const std::vector<int>& ranked_classes,
                     const std::vector<MethodCurve>& methods);

// SVG line plot: cumulative mAP over the ranked prefix, one series per method
void write_curve_svg(const std::filesystem::path& file, const std::string& title,
                     const std::vector<int>& ranked_classes,
                     const std::vector<MethodCurve>& methods);

}  // namespace trajfuse
