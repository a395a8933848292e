#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "trajfuse/encoding.hpp"

namespace trajfuse {

// Explicit feature map whose inner product approximates the additive chi^2
// kernel k(x,y) = sum_i 2 x_i y_i / (x_i + y_i). Each input dimension expands
// to 2n+1 components
//   sqrt(w_0 x), sqrt(w_j x) cos(jL log x), sqrt(w_j x) sin(jL log x)
// so <map(x), map(y)> = sum_i sqrt(x_i y_i) * K~(log(y_i/x_i)) with
// K~(l) = w_0 + sum_j w_j cos(jL l). The plain rectangular quadrature of the
// spectral density sech(pi w) undershoots the true signature sech(l/2) at
// small n, so the weights are refitted by constrained least squares on a
// fixed grid (sum w_j = 1 keeps k(x,x) = sum x_i exact); the fit is weighted
// by (2 cosh l)^-2, the xy-weighted log-ratio density of i.i.d. nonnegative
// entries, which minimizes the expected squared kernel error per dimension.
struct FeatureMapParams {
    enum class Kind { Chi2, Identity };
    Kind kind = Kind::Chi2;
    int order_n = 1;
    double sampling_period = 0.6;

    int mapped_dim(int input_dim) const {
        return kind == Kind::Identity ? input_dim : (2 * order_n + 1) * input_dim;
    }
    static FeatureMapParams identity() { return {Kind::Identity, 0, 0.0}; }
};

// Fitted cosine weights for the map above; exposed for tests.
std::vector<double> chi2_map_weights(int order_n, double sampling_period);

std::vector<float> chi2_feature_map(const std::vector<float>& x, const FeatureMapParams& p);

// Applies p (chi2 expansion or identity pass-through).
std::vector<float> apply_feature_map(const std::vector<float>& x, const FeatureMapParams& p);

struct TrainConfig {
    int epochs = 100;
    double lambda = 1e-5;
    uint64_t seed = 1;
    bool use_bias = true;  // disable for exact scale covariance
    FeatureMapParams map;
};

struct ClassifierBank {
    std::vector<int> class_ids;            // sorted ascending
    int input_dim = 0;                     // raw feature dimension
    FeatureMapParams map;
    std::vector<std::vector<float>> weights;  // per class, mapped_dim entries
    std::vector<float> biases;
    TrainConfig config;
    // full-dataset regularized hinge objective after each epoch, per class
    std::vector<std::vector<double>> epoch_objectives;
};

// One-vs-all linear SVMs over mapped features, trained by SGD with step
// 1/(lambda t) and tail-averaged iterates (the returned weights average the
// final 50% of updates). Positives are reweighted by #neg/#pos per class.
ClassifierBank train_one_vs_all(const std::vector<ClipFeature>& features,
                                const std::vector<int>& labels, const TrainConfig& cfg);

struct ScoreVector {
    std::vector<int> class_ids;
    std::vector<double> scores;
};

ScoreVector predict_scores(const ClassifierBank& bank, const ClipFeature& feature);

// Feature-level fusion: DT blocks then pose blocks, same clip.
ClipFeature fuse_features(const ClipFeature& dt, const ClipFeature& pose);

// Classifier-level fusion: the concatenated 2C-dim score vector, used as the
// feature of a second-stage one-vs-all SVM with the identity map.
ClipFeature fuse_classifier_scores(const ScoreVector& dt_scores, const ScoreVector& pose_scores,
                                   const std::string& clip_id = "");

// Model file: <file>.json manifest + raw f32 rows [weights..., bias].
void save_classifier_bank(const ClassifierBank& bank, const std::filesystem::path& file);
ClassifierBank load_classifier_bank(const std::filesystem::path& file);

}  // namespace trajfuse
