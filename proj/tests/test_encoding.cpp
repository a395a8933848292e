#include <doctest.h>

#include <filesystem>

#include "trajfuse/encoding.hpp"

using namespace trajfuse;

namespace {

std::vector<std::vector<float>> gaussian_blob(Rng& rng, size_t n, const std::vector<float>& mean,
                                              double sigma) {
    std::vector<std::vector<float>> out;
    for (size_t i = 0; i < n; ++i) {
        std::vector<float> v(mean.size());
        for (size_t d = 0; d < mean.size(); ++d)
            v[d] = mean[d] + static_cast<float>(sigma * rng.next_gaussian());
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace

TEST_CASE("k distinct points recover exactly with zero distortion") {
    std::vector<std::vector<float>> pts = {{0, 0}, {10, 0}, {0, 10}, {10, 10}};
    Codebook cb = train_codebook(pts, 4, 5);
    CHECK(cb.distortion == doctest::Approx(0.0));
    // every input point must be one of the centroids
    for (const auto& p : pts) {
        bool found = false;
        for (int c = 0; c < cb.k; ++c)
            if (cb.centroid(c)[0] == p[0] && cb.centroid(c)[1] == p[1]) found = true;
        CHECK(found);
    }
}

TEST_CASE("distortion never increases across iterations") {
    Rng rng(42);
    for (int run = 0; run < 20; ++run) {
        std::vector<std::vector<float>> pts;
        size_t n = 40 + rng.next_below(80);
        for (size_t i = 0; i < n; ++i)
            pts.push_back({static_cast<float>(rng.uniform(0, 10)),
                           static_cast<float>(rng.uniform(0, 10)),
                           static_cast<float>(rng.uniform(0, 10))});
        Codebook cb = train_codebook(pts, 5, 1000 + static_cast<uint64_t>(run));
        REQUIRE(cb.distortion_history.size() >= 2);
        for (size_t i = 1; i < cb.distortion_history.size(); ++i)
            CHECK(cb.distortion_history[i] <= cb.distortion_history[i - 1] + 1e-12);
    }
}

TEST_CASE("two separated blobs recover their means") {
    // oracle: per-blob sample means
    Rng rng(7);
    auto a = gaussian_blob(rng, 200, {0, 0, 0}, 0.5);
    auto b = gaussian_blob(rng, 200, {20, 20, 20}, 0.5);
    std::vector<float> mean_a(3, 0), mean_b(3, 0);
    for (const auto& v : a)
        for (int d = 0; d < 3; ++d) mean_a[static_cast<size_t>(d)] += v[static_cast<size_t>(d)] / 200;
    for (const auto& v : b)
        for (int d = 0; d < 3; ++d) mean_b[static_cast<size_t>(d)] += v[static_cast<size_t>(d)] / 200;

    std::vector<std::vector<float>> all = a;
    all.insert(all.end(), b.begin(), b.end());
    Codebook cb = train_codebook(all, 2, 3);

    // match centroids to blobs by proximity
    const float* c0 = cb.centroid(0);
    const float* ca = c0[0] < 10 ? cb.centroid(0) : cb.centroid(1);
    const float* cbp = c0[0] < 10 ? cb.centroid(1) : cb.centroid(0);
    double tol = 3 * 0.5 / std::sqrt(200.0);
    for (int d = 0; d < 3; ++d) {
        CHECK(std::abs(ca[d] - mean_a[static_cast<size_t>(d)]) <= 3 * tol);
        CHECK(std::abs(cbp[d] - mean_b[static_cast<size_t>(d)]) <= 3 * tol);
    }
}

TEST_CASE("training is deterministic in the seed") {
    Rng rng(11);
    auto pts = gaussian_blob(rng, 300, {0, 0, 0, 0}, 2.0);
    Codebook a = train_codebook(pts, 8, 99);
    Codebook b = train_codebook(pts, 8, 99);
    CHECK(a.centroids == b.centroids);
    Codebook c = train_codebook(pts, 8, 100);
    CHECK(a.centroids != c.centroids);
}

TEST_CASE("sample cap subsamples deterministically") {
    Rng rng(13);
    auto pts = gaussian_blob(rng, 500, {0, 0}, 3.0);
    KmeansConfig cfg;
    cfg.sample_cap = 100;
    Codebook a = train_codebook(pts, 4, 5, cfg);
    Codebook b = train_codebook(pts, 4, 5, cfg);
    CHECK(a.centroids == b.centroids);
}

TEST_CASE("too few samples and ragged dims raise") {
    std::vector<std::vector<float>> pts = {{0, 0}, {1, 1}};
    CHECK_THROWS_AS(train_codebook(pts, 3, 1), TooFewSamples);
    std::vector<std::vector<float>> ragged = {{0, 0}, {1, 1, 1}};
    CHECK_THROWS_AS(train_codebook(ragged, 2, 1), DimensionMismatch);
}

TEST_CASE("single descriptor gives a one-hot histogram") {
    std::vector<std::vector<float>> pts = {{0, 0}, {10, 0}, {0, 10}, {10, 10}};
    Codebook cb = train_codebook(pts, 4, 5);
    BowHistogram h = encode_histogram({{0.1f, 0.1f}}, cb);
    double norm2 = 0;
    int nonzero = 0;
    for (float b : h.bins) {
        norm2 += static_cast<double>(b) * b;
        nonzero += b > 0;
    }
    CHECK(nonzero == 1);
    CHECK(norm2 == doctest::Approx(1.0));
}

TEST_CASE("empty descriptor lists give the zero histogram") {
    std::vector<std::vector<float>> pts = {{0, 0}, {10, 0}};
    Codebook cb = train_codebook(pts, 2, 5);
    BowHistogram h = encode_histogram({}, cb);
    for (float b : h.bins) CHECK(b == 0.0f);
}

TEST_CASE("counts normalize as expected on a constructed assignment") {
    // oracle: direct nearest-centroid counting gives (2,1,0,0)/sqrt(5)
    Codebook cb;
    cb.k = 4;
    cb.dim = 2;
    cb.centroids = {0, 0, 10, 0, 0, 10, 10, 10};
    std::vector<std::vector<float>> descs = {{0.2f, 0.1f}, {0.1f, 0.4f}, {9.8f, 0.1f}};
    BowHistogram h = encode_histogram(descs, cb);
    double s5 = std::sqrt(5.0);
    CHECK(h.bins[0] == doctest::Approx(2.0 / s5));
    CHECK(h.bins[1] == doctest::Approx(1.0 / s5));
    CHECK(h.bins[2] == doctest::Approx(0.0));
    CHECK(h.bins[3] == doctest::Approx(0.0));
}

TEST_CASE("nearest-centroid ties break to the lowest index") {
    Codebook cb;
    cb.k = 3;
    cb.dim = 1;
    cb.centroids = {-1, 1, 3};
    // 0 is equidistant from -1 and 1; the lower index wins
    CHECK(assign_to_codebook(cb, std::vector<float>{0.0f}.data(), 1) == 0);
    CHECK(assign_to_codebook(cb, std::vector<float>{2.0f}.data(), 1) == 1);
}

TEST_CASE("histogram encoding is permutation invariant") {
    Rng rng(17);
    auto pts = gaussian_blob(rng, 64, {0, 0, 0}, 2.0);
    Codebook cb = train_codebook(pts, 6, 3);
    auto descs = gaussian_blob(rng, 40, {0, 0, 0}, 2.0);
    BowHistogram a = encode_histogram(descs, cb);
    std::vector<std::vector<float>> shuffled = descs;
    rng.shuffle(shuffled);
    BowHistogram b = encode_histogram(shuffled, cb);
    CHECK(a.bins == b.bins);
}

TEST_CASE("dimension mismatches at encode raise") {
    Codebook cb;
    cb.k = 2;
    cb.dim = 3;
    cb.centroids = {0, 0, 0, 1, 1, 1};
    CHECK_THROWS_AS(encode_histogram({{1.0f, 2.0f}}, cb), DimensionMismatch);
}

TEST_CASE("stacking concatenates in declared order") {
    BowHistogram h1{"traj", {1, 0, 0}};
    BowHistogram h2{"hog", {0, 1}};
    ClipFeature f = stack_features({h1, h2}, {"traj", "hog"}, "clip7");
    CHECK(f.dim() == 5);
    CHECK(f.values == std::vector<float>{1, 0, 0, 0, 1});
    REQUIRE(f.blocks.size() == 2);
    CHECK(f.blocks[0].first == "traj");
    CHECK(f.blocks[1].second == 2);

    CHECK_THROWS_AS(stack_features({h1, h2}, {"hog", "traj"}, ""), OrderMismatch);
    CHECK_THROWS_AS(stack_features({h1}, {"traj", "hog"}, ""), OrderMismatch);
}

TEST_CASE("single histogram stacks to itself") {
    BowHistogram h{"hof", {0.5f, 0.5f, 0.5f, 0.5f}};
    ClipFeature f = stack_features({h}, {"hof"});
    CHECK(f.values == h.bins);
}

TEST_CASE("block-length sums give the fused dimension") {
    // oracle: sum of block lengths (4 x 4000 DT + 3 x 20 pose)
    std::vector<BowHistogram> hists;
    std::vector<std::string> order;
    for (const char* t : {"traj", "hog", "hof", "mbh"}) {
        hists.push_back({t, std::vector<float>(4000, 0.0f)});
        order.push_back(t);
    }
    for (const char* t : {"pose_rel", "pose_ang", "pose_tmp"}) {
        hists.push_back({t, std::vector<float>(20, 0.0f)});
        order.push_back(t);
    }
    ClipFeature f = stack_features(hists, order);
    CHECK(f.dim() == 16060);
    ClipFeature dt_only = stack_features({hists[0], hists[1], hists[2], hists[3]},
                                         {"traj", "hog", "hof", "mbh"});
    CHECK(dt_only.dim() == 16000);
}

TEST_CASE("codebook files round-trip") {
    Rng rng(23);
    auto pts = gaussian_blob(rng, 50, {1, 2, 3}, 1.0);
    Codebook cb = train_codebook(pts, 4, 9, {}, "hog");
    auto path = std::filesystem::temp_directory_path() / "trajfuse_cb.bin";
    save_codebook(cb, path);
    Codebook back = load_codebook(path);
    CHECK(back.k == cb.k);
    CHECK(back.dim == cb.dim);
    CHECK(back.seed == cb.seed);
    CHECK(back.descriptor_type == "hog");
    CHECK(back.centroids == cb.centroids);
}

TEST_CASE("clip feature files round-trip") {
    ClipFeature f;
    f.clip_id = "clip3";
    f.values = {0.1f, 0.2f, 0.3f, 0.4f};
    f.blocks = {{"traj", 3}, {"hog", 1}};
    auto path = std::filesystem::temp_directory_path() / "trajfuse_feat.bin";
    save_clip_feature(f, path);
    ClipFeature back = load_clip_feature(path);
    CHECK(back.clip_id == f.clip_id);
    CHECK(back.values == f.values);
    CHECK(back.blocks == f.blocks);
}
