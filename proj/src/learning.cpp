#include "trajfuse/learning.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

namespace trajfuse {

namespace {

// Solve a small symmetric system with one linear equality constraint
// (sum w = 1) via the KKT form; Gaussian elimination with partial pivoting.
std::vector<double> solve_kkt(std::vector<std::vector<double>> a, std::vector<double> b) {
    const size_t n = a.size();
    for (size_t col = 0; col < n; ++col) {
        size_t piv = col;
        for (size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        std::swap(b[col], b[piv]);
        for (size_t r = 0; r < n; ++r) {
            if (r == col || std::abs(a[col][col]) < 1e-300) continue;
            double f = a[r][col] / a[col][col];
            for (size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (size_t i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
    return x;
}

}  // namespace

std::vector<double> chi2_map_weights(int order_n, double sampling_period) {
    if (order_n < 1 || sampling_period <= 0)
        throw InvalidSpec("chi2 map needs order >= 1 and positive sampling period");
    const int m = order_n + 1;
    const double L = sampling_period;

    // weighted least squares of sech(l/2) over the cosine basis on a fixed
    // grid, with the sum-to-one constraint appended as a KKT row
    std::vector<std::vector<double>> a(static_cast<size_t>(m + 1),
                                       std::vector<double>(static_cast<size_t>(m + 1), 0.0));
    std::vector<double> b(static_cast<size_t>(m + 1), 0.0);
    for (double l = 0.0; l <= 12.0; l += 0.005) {
        double rho = std::pow(2.0 * std::cosh(l), -2.0);
        double target = 1.0 / std::cosh(l / 2.0);
        std::vector<double> basis(static_cast<size_t>(m));
        for (int j = 0; j < m; ++j) basis[static_cast<size_t>(j)] = std::cos(j * L * l);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j)
                a[static_cast<size_t>(i)][static_cast<size_t>(j)] +=
                    rho * basis[static_cast<size_t>(i)] * basis[static_cast<size_t>(j)];
            b[static_cast<size_t>(i)] += rho * basis[static_cast<size_t>(i)] * target;
        }
    }
    for (int i = 0; i < m; ++i) {
        a[static_cast<size_t>(i)][static_cast<size_t>(m)] = 1.0;
        a[static_cast<size_t>(m)][static_cast<size_t>(i)] = 1.0;
    }
    b[static_cast<size_t>(m)] = 1.0;
    auto sol = solve_kkt(std::move(a), std::move(b));
    sol.resize(static_cast<size_t>(m));
    return sol;
}

std::vector<float> chi2_feature_map(const std::vector<float>& x, const FeatureMapParams& p) {
    for (float v : x)
        if (v < 0.0f) throw NegativeInput("chi2_feature_map: negative entry");
    const int n = p.order_n;
    const double L = p.sampling_period;
    static thread_local std::map<std::pair<int, double>, std::vector<double>> cache;
    auto key = std::make_pair(n, L);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, chi2_map_weights(n, L)).first;
    const std::vector<double>& w = it->second;

    std::vector<float> out(static_cast<size_t>(p.mapped_dim(static_cast<int>(x.size()))), 0.0f);
    const size_t stride = static_cast<size_t>(2 * n + 1);
    for (size_t i = 0; i < x.size(); ++i) {
        double v = x[i];
        if (v <= 0.0) continue;  // zero entries map to zero components
        double lg = std::log(v);
        size_t base = i * stride;
        out[base] = static_cast<float>(std::sqrt(w[0] * v));
        for (int j = 1; j <= n; ++j) {
            double amp = std::sqrt(0.5 * w[static_cast<size_t>(j)] * v);  // split over cos+sin
            out[base + static_cast<size_t>(2 * j - 1)] =
                static_cast<float>(std::sqrt(2.0) * amp * std::cos(j * L * lg));
            out[base + static_cast<size_t>(2 * j)] =
                static_cast<float>(std::sqrt(2.0) * amp * std::sin(j * L * lg));
        }
    }
    return out;
}

std::vector<float> apply_feature_map(const std::vector<float>& x, const FeatureMapParams& p) {
    if (p.kind == FeatureMapParams::Kind::Identity) return x;
    return chi2_feature_map(x, p);
}

namespace {

double dot_f(const std::vector<float>& a, const std::vector<float>& b) {
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

double full_objective(const std::vector<std::vector<float>>& mapped, const std::vector<int>& y,
                      double pos_weight, const std::vector<double>& w, double bias,
                      double lambda) {
    double reg = 0;
    for (double v : w) reg += v * v;
    double loss = 0;
    for (size_t i = 0; i < mapped.size(); ++i) {
        double margin = bias;
        const auto& x = mapped[i];
        for (size_t j = 0; j < x.size(); ++j) margin += w[j] * x[j];
        double hinge = std::max(0.0, 1.0 - y[i] * margin);
        loss += (y[i] > 0 ? pos_weight : 1.0) * hinge;
    }
    return 0.5 * lambda * reg + loss / static_cast<double>(mapped.size());
}

}  // namespace

ClassifierBank train_one_vs_all(const std::vector<ClipFeature>& features,
                                const std::vector<int>& labels, const TrainConfig& cfg) {
    if (features.empty()) throw EmptyFeatures("train_one_vs_all: no features");
    if (features.size() != labels.size())
        throw InvariantViolation("train_one_vs_all: feature/label count mismatch");
    const size_t dim = features[0].dim();
    for (const auto& f : features)
        if (f.dim() != dim) throw DimensionMismatch("train_one_vs_all: ragged feature dims");

    std::vector<int> class_ids = labels;
    std::sort(class_ids.begin(), class_ids.end());
    class_ids.erase(std::unique(class_ids.begin(), class_ids.end()), class_ids.end());
    if (class_ids.size() < 2) throw SingleClass("train_one_vs_all: need at least 2 classes");

    ClassifierBank bank;
    bank.class_ids = class_ids;
    bank.input_dim = static_cast<int>(dim);
    bank.map = cfg.map;
    bank.config = cfg;

    std::vector<std::vector<float>> mapped(features.size());
    parallel_for(features.size(), [&](size_t lo, size_t hi) {
        for (size_t i = lo; i < hi; ++i) mapped[i] = apply_feature_map(features[i].values, cfg.map);
    }, 8);
    const size_t mdim = mapped[0].size();
    const size_t n = mapped.size();

    bank.weights.assign(class_ids.size(), {});
    bank.biases.assign(class_ids.size(), 0.0f);
    bank.epoch_objectives.assign(class_ids.size(), {});

    parallel_for(class_ids.size(), [&](size_t c_lo, size_t c_hi) {
        for (size_t ci = c_lo; ci < c_hi; ++ci) {
            int cls = class_ids[ci];
            std::vector<int> y(n);
            size_t pos = 0;
            for (size_t i = 0; i < n; ++i) {
                y[i] = labels[i] == cls ? 1 : -1;
                pos += y[i] > 0;
            }
            double pos_weight = pos ? static_cast<double>(n - pos) / static_cast<double>(pos) : 1.0;

            std::vector<double> w(mdim, 0.0), wavg(mdim, 0.0);
            double bias = 0.0, bias_avg = 0.0;
            size_t avg_count = 0;
            const size_t total_updates = static_cast<size_t>(cfg.epochs) * n;
            const size_t avg_from = total_updates / 2;  // tail average: last 50%

            std::vector<size_t> order(n);
            for (size_t i = 0; i < n; ++i) order[i] = i;
            Rng rng(cfg.seed * 0x9e3779b9ull + static_cast<uint64_t>(cls) + 1);

            size_t t = 0;
            std::vector<double>& objectives = bank.epoch_objectives[ci];
            for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
                rng.shuffle(order);
                for (size_t oi = 0; oi < n; ++oi) {
                    ++t;
                    double eta = 1.0 / (cfg.lambda * static_cast<double>(t));
                    const auto& x = mapped[order[oi]];
                    int yy = y[order[oi]];
                    double margin = bias;
                    for (size_t j = 0; j < mdim; ++j) margin += w[j] * x[j];
                    double scale = 1.0 - eta * cfg.lambda;  // shrink from the L2 term
                    double cw = yy > 0 ? pos_weight : 1.0;
                    if (yy * margin < 1.0) {
                        double step = eta * cw * yy;
                        for (size_t j = 0; j < mdim; ++j) w[j] = scale * w[j] + step * x[j];
                        if (cfg.use_bias) bias += step;
                    } else {
                        for (size_t j = 0; j < mdim; ++j) w[j] *= scale;
                    }
                    if (t > avg_from) {
                        for (size_t j = 0; j < mdim; ++j) wavg[j] += w[j];
                        bias_avg += bias;
                        ++avg_count;
                    }
                }
                objectives.push_back(full_objective(mapped, y, pos_weight, w, bias, cfg.lambda));
            }
            std::vector<float> wf(mdim);
            for (size_t j = 0; j < mdim; ++j)
                wf[j] = static_cast<float>(avg_count ? wavg[j] / static_cast<double>(avg_count)
                                                     : w[j]);
            bank.weights[ci] = std::move(wf);
            bank.biases[ci] =
                static_cast<float>(avg_count ? bias_avg / static_cast<double>(avg_count) : bias);
        }
    }, 1);
    return bank;
}

ScoreVector predict_scores(const ClassifierBank& bank, const ClipFeature& feature) {
    if (static_cast<int>(feature.dim()) != bank.input_dim)
        throw DimensionMismatch("predict_scores: feature dim " + std::to_string(feature.dim()) +
                                " vs bank dim " + std::to_string(bank.input_dim));
    std::vector<float> mapped = apply_feature_map(feature.values, bank.map);
    ScoreVector out;
    out.class_ids = bank.class_ids;
    out.scores.resize(bank.class_ids.size());
    for (size_t c = 0; c < bank.class_ids.size(); ++c)
        out.scores[c] = dot_f(bank.weights[c], mapped) + bank.biases[c];
    return out;
}

ClipFeature fuse_features(const ClipFeature& dt, const ClipFeature& pose) {
    if (!dt.clip_id.empty() && !pose.clip_id.empty() && dt.clip_id != pose.clip_id)
        throw ClipMismatch("fuse_features: '" + dt.clip_id + "' vs '" + pose.clip_id + "'");
    ClipFeature out;
    out.clip_id = dt.clip_id.empty() ? pose.clip_id : dt.clip_id;
    out.values = dt.values;
    out.values.insert(out.values.end(), pose.values.begin(), pose.values.end());
    out.blocks = dt.blocks;
    out.blocks.insert(out.blocks.end(), pose.blocks.begin(), pose.blocks.end());
    return out;
}

ClipFeature fuse_classifier_scores(const ScoreVector& dt_scores, const ScoreVector& pose_scores,
                                   const std::string& clip_id) {
    if (dt_scores.class_ids != pose_scores.class_ids)
        throw ClassUniverseMismatch("fuse_classifier_scores: class universes differ");
    ClipFeature out;
    out.clip_id = clip_id;
    out.values.reserve(dt_scores.scores.size() * 2);
    for (double s : dt_scores.scores) out.values.push_back(static_cast<float>(s));
    for (double s : pose_scores.scores) out.values.push_back(static_cast<float>(s));
    out.blocks = {{"dt_scores", static_cast<int>(dt_scores.scores.size())},
                  {"pose_scores", static_cast<int>(pose_scores.scores.size())}};
    return out;
}

void save_classifier_bank(const ClassifierBank& bank, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot write " + file.string());
    for (size_t c = 0; c < bank.weights.size(); ++c) {
        out.write(reinterpret_cast<const char*>(bank.weights[c].data()),
                  static_cast<std::streamsize>(bank.weights[c].size() * sizeof(float)));
        float b = bank.biases[c];
        out.write(reinterpret_cast<const char*>(&b), sizeof(b));
    }
    nlohmann::json j = {
        {"class_ids", bank.class_ids},
        {"input_dim", bank.input_dim},
        {"map", {{"kind", bank.map.kind == FeatureMapParams::Kind::Identity ? "identity" : "chi2"},
                 {"order_n", bank.map.order_n},
                 {"sampling_period", bank.map.sampling_period}}},
        {"train", {{"epochs", bank.config.epochs},
                   {"lambda", bank.config.lambda},
                   {"seed", bank.config.seed}}},
    };
    std::ofstream sj(file.string() + ".json");
    sj << j.dump(2) << "\n";
}

ClassifierBank load_classifier_bank(const std::filesystem::path& file) {
    std::ifstream sj(file.string() + ".json");
    if (!sj) throw IoError("missing manifest for " + file.string());
    nlohmann::json j = nlohmann::json::parse(sj);
    ClassifierBank bank;
    bank.class_ids = j.at("class_ids").get<std::vector<int>>();
    bank.input_dim = j.at("input_dim").get<int>();
    bank.map.kind = j.at("map").at("kind").get<std::string>() == "identity"
                        ? FeatureMapParams::Kind::Identity
                        : FeatureMapParams::Kind::Chi2;
    bank.map.order_n = j.at("map").at("order_n").get<int>();
    bank.map.sampling_period = j.at("map").at("sampling_period").get<double>();
    bank.config.epochs = j.at("train").at("epochs").get<int>();
    bank.config.lambda = j.at("train").at("lambda").get<double>();
    bank.config.seed = j.at("train").at("seed").get<uint64_t>();
    bank.config.map = bank.map;

    size_t mdim = static_cast<size_t>(bank.map.mapped_dim(bank.input_dim));
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open " + file.string());
    bank.weights.assign(bank.class_ids.size(), std::vector<float>(mdim));
    bank.biases.assign(bank.class_ids.size(), 0.0f);
    for (size_t c = 0; c < bank.class_ids.size(); ++c) {
        in.read(reinterpret_cast<char*>(bank.weights[c].data()),
                static_cast<std::streamsize>(mdim * sizeof(float)));
        in.read(reinterpret_cast<char*>(&bank.biases[c]), sizeof(float));
    }
    if (!in) throw ParseError("truncated model file " + file.string());
    return bank;
}

}  // namespace trajfuse
