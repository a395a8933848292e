#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "trajfuse/analysis.hpp"
#include "trajfuse/encoding.hpp"
#include "trajfuse/learning.hpp"
#include "trajfuse/synthetic.hpp"

namespace trajfuse {

enum class Method {
    DT,
    GT,
    GT_T,
    PS_T,
    PS_M,
    PSM_DT_FEATURES,
    PSM_DT_CLASSIFIERS,
    PSM_FILTER_DT,
};
const char* method_name(Method m);
std::optional<Method> method_from_name(const std::string& s);
extern const std::array<Method, 8> kAllMethods;

bool method_uses_dt(Method m);
bool method_uses_pose(Method m);
// pose source consumed by a pose-using method
PoseSource method_pose_source(Method m);

// Declarative run description; stages derive everything from it plus the
// dataset index, and stamp artifacts with config_hash so downstream stages
// can refuse stale inputs.
struct RunManifest {
    std::filesystem::path dataset_root;
    Method method = Method::DT;
    uint64_t seed = 1;
    std::filesystem::path out_dir;

    // synthetic dataset recipe (synth-gen only)
    struct SuiteClass {
        int class_id = 0;
        Motif motif = Motif::StaticTextured;
        int train = 0;
        int test = 0;
        std::map<std::string, double> params;
    };
    std::vector<SuiteClass> suite;
    int clip_width = 64;
    int clip_height = 64;
    int clip_frames = 45;

    // stage configuration
    DtConfig dt;
    int codebook_k = 4000;      // words per holistic descriptor type;
                                // desk-scale runs override this way down
    int pose_codebook_k = 20;   // words per pose descriptor type
    KmeansConfig kmeans;
    TrainConfig train;
    double noise_sigma = 1.5;   // PS annotation jitter
    double noise_dropout = 0.05;
    int key_frame = -1;         // -1: middle frame
    bool allow_short = false;   // admit clips below 41 frames

    static RunManifest load(const std::filesystem::path& file);
    std::string canonical_config_text() const;  // hashed into config_hash
    std::string config_hash() const;
};

struct ClipEntry {
    std::string id;
    int class_id = 0;
    std::string split;  // "train" | "test"
    std::string motif;
    int n_people = 0;
    bool fully_visible = false;
    std::filesystem::path dir;                      // frame directory
    std::optional<std::filesystem::path> gt_annotations;
    std::optional<std::filesystem::path> ps_annotations;
};

struct DatasetIndex {
    std::vector<ClipEntry> clips;
    int width = 0, height = 0, frames = 0;

    static DatasetIndex load(const std::filesystem::path& root);
    void save(const std::filesystem::path& root) const;
    std::vector<std::pair<int, int>> train_sizes() const;  // (class, #train clips)
};

// --- stages ---

// Expands the synthetic suite deterministically (per-clip seeds and motion
// parameter jitter derive from the manifest seed) and writes PGM frames,
// GT/PS annotation files and the dataset index.
DatasetIndex cmd_synth_gen(const RunManifest& m);

void cmd_extract(const RunManifest& m);
void cmd_train_codebook(const RunManifest& m);
void cmd_encode(const RunManifest& m);
void cmd_train(const RunManifest& m);
void cmd_predict(const RunManifest& m);

struct EvalOptions {
    int top_n = 0;               // 0: all classes
    std::string subset = "all";  // "all" | "single-fully-visible"
};
EvalReport cmd_eval(const RunManifest& m, const EvalOptions& opts = {});

void cmd_analyze(const RunManifest& m);
void cmd_report(const RunManifest& m);

// Paths of stage artifacts under the manifest's out dir.
struct RunPaths {
    std::filesystem::path features_dir, codebook_dir, bow_dir, model_file, predictions_file,
        eval_file, analysis_dir, report_dir;
    static RunPaths for_run(const RunManifest& m);
};

// Per-clip pose descriptor dump (JSON): three descriptor lists plus hash.
struct PoseFeatureFile {
    std::vector<std::vector<float>> rel, ang, tmp;
};
void save_pose_features(const PoseFeatureFile& f, const std::string& clip_id,
                        const std::string& config_hash, const std::filesystem::path& file);
PoseFeatureFile load_pose_features(const std::filesystem::path& file,
                                   const std::string& expect_hash);

// Extraction helpers shared by extract/analyze.
PoseFeatureFile extract_pose_windows(const VideoClip& clip,
                                     const std::vector<PoseAnnotation>& anns, Method method,
                                     int key_frame);
std::optional<BodyMask> body_mask_from_annotations(const std::vector<PoseAnnotation>& anns,
                                                   int width, int height);

}  // namespace trajfuse
