#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "trajfuse/common.hpp"

namespace trajfuse {

// k-means codebook with hard nearest-centroid assignment.
struct Codebook {
    int k = 0;
    int dim = 0;
    std::string descriptor_type;
    uint64_t seed = 0;
    std::vector<float> centroids;  // row-major k x dim
    double distortion = 0.0;       // final mean squared assignment distance
    std::vector<double> distortion_history;  // per assignment pass

    const float* centroid(int i) const { return centroids.data() + static_cast<size_t>(i) * dim; }
};

struct KmeansConfig {
    int max_iters = 100;
    size_t sample_cap = 100000;  // seeded uniform subsample above this; 0 = unlimited
};

// k-means++ init, Lloyd iterations to an assignment fixpoint or max_iters,
// empty clusters reseeded to the farthest point.
Codebook train_codebook(const std::vector<std::vector<float>>& samples, int k, uint64_t seed,
                        const KmeansConfig& cfg = {}, const std::string& descriptor_type = "");

// Index of the nearest centroid, ties resolved to the lowest index.
int assign_to_codebook(const Codebook& cb, const float* vec, size_t dim);

struct BowHistogram {
    std::string descriptor_type;
    std::vector<float> bins;  // L2-normalized; all-zero iff no descriptors
};

BowHistogram encode_histogram(const std::vector<std::vector<float>>& descs, const Codebook& cb);

struct ClipFeature {
    std::string clip_id;
    std::vector<float> values;
    std::vector<std::pair<std::string, int>> blocks;  // (descriptor_type, length) in order

    size_t dim() const { return values.size(); }
};

// Concatenation in the declared order; blocks stay individually normalized.
ClipFeature stack_features(const std::vector<BowHistogram>& hists,
                           const std::vector<std::string>& declared_order,
                           const std::string& clip_id = "");

// --- file formats ---
// Codebook: 8-byte magic "TFCBK001", u32 version, u32 k, u32 d, 16-byte
// descriptor-type tag, u64 seed, then k*d f32 centroids (little endian).
void save_codebook(const Codebook& cb, const std::filesystem::path& file);
Codebook load_codebook(const std::filesystem::path& file);

// ClipFeature: <file> is raw f32; <file>.json carries the block manifest.
void save_clip_feature(const ClipFeature& f, const std::filesystem::path& file);
ClipFeature load_clip_feature(const std::filesystem::path& file);

}  // namespace trajfuse
