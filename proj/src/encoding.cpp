#include "trajfuse/encoding.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace trajfuse {

namespace {

double sq_dist(const float* a, const float* b, int d) {
    double s = 0;
    for (int i = 0; i < d; ++i) {
        double diff = static_cast<double>(a[i]) - b[i];
        s += diff * diff;
    }
    return s;
}

}  // namespace

Codebook train_codebook(const std::vector<std::vector<float>>& samples_in, int k, uint64_t seed,
                        const KmeansConfig& cfg, const std::string& descriptor_type) {
    if (k < 1) throw InvalidSpec("train_codebook: k must be >= 1");
    if (samples_in.size() < static_cast<size_t>(k))
        throw TooFewSamples("train_codebook: " + std::to_string(samples_in.size()) +
                            " samples for k=" + std::to_string(k));
    const int d = static_cast<int>(samples_in[0].size());
    for (const auto& s : samples_in)
        if (static_cast<int>(s.size()) != d)
            throw DimensionMismatch("train_codebook: ragged sample dimensions");

    Rng rng(seed);

    // seeded uniform subsample (without replacement) above the cap
    std::vector<const float*> data;
    data.reserve(samples_in.size());
    for (const auto& s : samples_in) data.push_back(s.data());
    if (cfg.sample_cap > 0 && data.size() > cfg.sample_cap) {
        std::vector<size_t> idx(data.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        rng.shuffle(idx);
        idx.resize(cfg.sample_cap);
        std::sort(idx.begin(), idx.end());
        std::vector<const float*> sub;
        sub.reserve(idx.size());
        for (size_t i : idx) sub.push_back(data[i]);
        data = std::move(sub);
    }
    const size_t n = data.size();

    Codebook cb;
    cb.k = k;
    cb.dim = d;
    cb.seed = seed;
    cb.descriptor_type = descriptor_type;
    cb.centroids.resize(static_cast<size_t>(k) * d);

    // k-means++ seeding
    std::vector<double> min_d2(n, std::numeric_limits<double>::max());
    size_t first = rng.next_below(n);
    std::memcpy(cb.centroids.data(), data[first], sizeof(float) * static_cast<size_t>(d));
    for (int c = 1; c < k; ++c) {
        const float* prev = cb.centroid(c - 1);
        double total = 0;
        for (size_t i = 0; i < n; ++i) {
            min_d2[i] = std::min(min_d2[i], sq_dist(data[i], prev, d));
            total += min_d2[i];
        }
        size_t pick = 0;
        if (total > 0) {
            double target = rng.next_double() * total;
            double acc = 0;
            for (size_t i = 0; i < n; ++i) {
                acc += min_d2[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.next_below(n);
        }
        std::memcpy(cb.centroids.data() + static_cast<size_t>(c) * d, data[pick],
                    sizeof(float) * static_cast<size_t>(d));
    }

    std::vector<int> assign(n, -1);
    std::vector<double> dist(n, 0.0);
    std::vector<double> sums(static_cast<size_t>(k) * d);
    std::vector<size_t> counts(static_cast<size_t>(k));

    auto assignment_pass = [&]() {
        std::atomic<bool> changed{false};
        double total = 0;
        // per-sample outputs; the distortion reduce runs sequentially after
        parallel_for(n, [&](size_t lo, size_t hi) {
            for (size_t i = lo; i < hi; ++i) {
                int best = 0;
                double bd = sq_dist(data[i], cb.centroid(0), d);
                for (int c = 1; c < k; ++c) {
                    double dd = sq_dist(data[i], cb.centroid(c), d);
                    if (dd < bd) {  // strict: ties keep the lowest index
                        bd = dd;
                        best = c;
                    }
                }
                if (assign[i] != best) {
                    assign[i] = best;
                    changed.store(true, std::memory_order_relaxed);
                }
                dist[i] = bd;
            }
        }, 256);
        for (size_t i = 0; i < n; ++i) total += dist[i];
        cb.distortion = total / static_cast<double>(n);
        cb.distortion_history.push_back(cb.distortion);
        return changed.load();
    };

    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        bool changed = assignment_pass();
        if (!changed && iter > 0) break;

        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), size_t{0});
        for (size_t i = 0; i < n; ++i) {
            double* row = sums.data() + static_cast<size_t>(assign[i]) * d;
            for (int j = 0; j < d; ++j) row[j] += data[i][static_cast<size_t>(j)];
            ++counts[static_cast<size_t>(assign[i])];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<size_t>(c)] == 0) {
                // reseed an empty cluster to the current farthest point
                size_t far = 0;
                for (size_t i = 1; i < n; ++i)
                    if (dist[i] > dist[far]) far = i;
                std::memcpy(cb.centroids.data() + static_cast<size_t>(c) * d, data[far],
                            sizeof(float) * static_cast<size_t>(d));
                dist[far] = 0.0;
            } else {
                float* row = cb.centroids.data() + static_cast<size_t>(c) * d;
                for (int j = 0; j < d; ++j)
                    row[j] = static_cast<float>(sums[static_cast<size_t>(c) * d + j] /
                                                static_cast<double>(counts[static_cast<size_t>(c)]));
            }
        }
    }
    assignment_pass();  // final distortion against the last centroid update
    return cb;
}

int assign_to_codebook(const Codebook& cb, const float* vec, size_t dim) {
    if (static_cast<int>(dim) != cb.dim)
        throw DimensionMismatch("assign_to_codebook: descriptor dim " + std::to_string(dim) +
                                " vs codebook dim " + std::to_string(cb.dim));
    int best = 0;
    double bd = sq_dist(vec, cb.centroid(0), cb.dim);
    for (int c = 1; c < cb.k; ++c) {
        double d = sq_dist(vec, cb.centroid(c), cb.dim);
        if (d < bd) {
            bd = d;
            best = c;
        }
    }
    return best;
}

BowHistogram encode_histogram(const std::vector<std::vector<float>>& descs, const Codebook& cb) {
    BowHistogram h;
    h.descriptor_type = cb.descriptor_type;
    h.bins.assign(static_cast<size_t>(cb.k), 0.0f);
    if (descs.empty()) return h;  // all-zero histogram by contract
    for (const auto& v : descs)
        h.bins[static_cast<size_t>(assign_to_codebook(cb, v.data(), v.size()))] += 1.0f;
    double norm2 = 0;
    for (float b : h.bins) norm2 += static_cast<double>(b) * b;
    double inv = 1.0 / std::sqrt(norm2);
    for (float& b : h.bins) b = static_cast<float>(b * inv);
    return h;
}

ClipFeature stack_features(const std::vector<BowHistogram>& hists,
                           const std::vector<std::string>& declared_order,
                           const std::string& clip_id) {
    if (hists.size() != declared_order.size())
        throw OrderMismatch("stack_features: " + std::to_string(hists.size()) +
                            " histograms vs " + std::to_string(declared_order.size()) +
                            " declared blocks");
    for (size_t i = 0; i < hists.size(); ++i)
        if (hists[i].descriptor_type != declared_order[i])
            throw OrderMismatch("stack_features: block " + std::to_string(i) + " is '" +
                                hists[i].descriptor_type + "', manifest declares '" +
                                declared_order[i] + "'");
    ClipFeature f;
    f.clip_id = clip_id;
    for (const auto& h : hists) {
        f.blocks.emplace_back(h.descriptor_type, static_cast<int>(h.bins.size()));
        f.values.insert(f.values.end(), h.bins.begin(), h.bins.end());
    }
    return f;
}

void save_codebook(const Codebook& cb, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot write " + file.string());
    const char magic[8] = {'T', 'F', 'C', 'B', 'K', '0', '0', '1'};
    out.write(magic, 8);
    uint32_t head[3] = {1u, static_cast<uint32_t>(cb.k), static_cast<uint32_t>(cb.dim)};
    out.write(reinterpret_cast<const char*>(head), sizeof(head));
    char tag[16] = {};
    std::strncpy(tag, cb.descriptor_type.c_str(), sizeof(tag) - 1);
    out.write(tag, sizeof(tag));
    uint64_t seed = cb.seed;
    out.write(reinterpret_cast<const char*>(&seed), sizeof(seed));
    out.write(reinterpret_cast<const char*>(cb.centroids.data()),
              static_cast<std::streamsize>(cb.centroids.size() * sizeof(float)));
}

Codebook load_codebook(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open " + file.string());
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, "TFCBK001", 8) != 0) throw ParseError("bad codebook magic");
    uint32_t head[3];
    in.read(reinterpret_cast<char*>(head), sizeof(head));
    char tag[17] = {};
    in.read(tag, 16);
    uint64_t seed = 0;
    in.read(reinterpret_cast<char*>(&seed), sizeof(seed));
    Codebook cb;
    cb.k = static_cast<int>(head[1]);
    cb.dim = static_cast<int>(head[2]);
    cb.descriptor_type = tag;
    cb.seed = seed;
    cb.centroids.resize(static_cast<size_t>(cb.k) * cb.dim);
    in.read(reinterpret_cast<char*>(cb.centroids.data()),
            static_cast<std::streamsize>(cb.centroids.size() * sizeof(float)));
    if (!in) throw ParseError("truncated codebook " + file.string());
    return cb;
}

void save_clip_feature(const ClipFeature& f, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot write " + file.string());
    out.write(reinterpret_cast<const char*>(f.values.data()),
              static_cast<std::streamsize>(f.values.size() * sizeof(float)));
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& [type, len] : f.blocks) blocks.push_back({{"type", type}, {"len", len}});
    nlohmann::json j = {{"clip_id", f.clip_id}, {"blocks", blocks}, {"dim", f.values.size()}};
    std::ofstream sj(file.string() + ".json");
    sj << j.dump(2) << "\n";
}

ClipFeature load_clip_feature(const std::filesystem::path& file) {
    std::ifstream sj(file.string() + ".json");
    if (!sj) throw IoError("missing sidecar for " + file.string());
    nlohmann::json j = nlohmann::json::parse(sj);
    ClipFeature f;
    f.clip_id = j.value("clip_id", "");
    size_t dim = j.at("dim").get<size_t>();
    for (const auto& b : j.at("blocks"))
        f.blocks.emplace_back(b.at("type").get<std::string>(), b.at("len").get<int>());
    f.values.resize(dim);
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open " + file.string());
    in.read(reinterpret_cast<char*>(f.values.data()),
            static_cast<std::streamsize>(dim * sizeof(float)));
    if (!in) throw ParseError("truncated feature file " + file.string());
    return f;
}

}  // namespace trajfuse
