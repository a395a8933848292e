#include <doctest.h>

#include <filesystem>

#include "trajfuse/flow.hpp"
#include "trajfuse/synthetic.hpp"

using namespace trajfuse;

namespace {

// A shifted pair sampled from one master texture: content moves by (sx, sy).
std::pair<Frame, Frame> shifted_pair(uint64_t seed, int w, int h, double sx, double sy) {
    SyntheticSpec spec;
    spec.motif = Motif::TranslatingBlob;
    spec.seed = seed;
    spec.width = w;
    spec.height = h;
    spec.frames = 2;
    spec.params["vx"] = sx;
    spec.params["vy"] = sy;
    spec.params["blob_radius"] = 0.0;  // plain textured pan
    SyntheticClip sc = generate_synthetic_clip(spec);
    return {sc.clip.frame(0), sc.clip.frame(1)};
}

double interior_mean_epe(const FlowField& f, double sx, double sy, int margin = 8) {
    double sum = 0;
    size_t n = 0;
    for (int y = margin; y < f.height() - margin; ++y)
        for (int x = margin; x < f.width() - margin; ++x) {
            sum += std::hypot(f.u(x, y) - sx, f.v(x, y) - sy);
            ++n;
        }
    return sum / static_cast<double>(n);
}

double interior_max_component(const FlowField& f, int margin = 8) {
    double m = 0;
    for (int y = margin; y < f.height() - margin; ++y)
        for (int x = margin; x < f.width() - margin; ++x)
            m = std::max({m, std::abs(static_cast<double>(f.u(x, y))),
                          std::abs(static_cast<double>(f.v(x, y)))});
    return m;
}

}  // namespace

TEST_CASE("identical frames give near-zero flow") {
    auto [a, b] = shifted_pair(7, 64, 64, 0, 0);
    FlowField f = compute_flow(a, a);
    CHECK(interior_max_component(f) <= 0.05);
}

TEST_CASE("global shifts are recovered within a quarter pixel") {
    // oracle: the generator's known shift
    for (auto [sx, sy] : {std::pair{2.0, 1.0}, {-3.0, 0.0}, {0.0, 4.0}}) {
        auto [a, b] = shifted_pair(7, 64, 64, sx, sy);
        FlowField f = compute_flow(a, b);
        CHECK(interior_mean_epe(f, sx, sy) <= 0.25);
    }
}

TEST_CASE("flow scales with the shift") {
    auto [a1, b1] = shifted_pair(3, 64, 64, 1.0, 0.5);
    auto [a2, b2] = shifted_pair(3, 64, 64, 2.0, 1.0);
    FlowField f1 = compute_flow(a1, b1);
    FlowField f2 = compute_flow(a2, b2);
    double m1 = 0, m2 = 0;
    size_t n = 0;
    for (int y = 8; y < 56; ++y)
        for (int x = 8; x < 56; ++x) {
            m1 += std::hypot(f1.u(x, y), f1.v(x, y));
            m2 += std::hypot(f2.u(x, y), f2.v(x, y));
            ++n;
        }
    double ratio = m2 / m1;
    CHECK(ratio >= 1.8);
    CHECK(ratio <= 2.2);
}

TEST_CASE("dimension mismatch is rejected") {
    Frame a(32, 32), b(16, 16);
    CHECK_THROWS_AS(compute_flow(a, b), DimensionMismatch);
}

TEST_CASE("median filter leaves constant fields unchanged and is idempotent") {
    FlowField f(20, 20);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x) {
            f.u(x, y) = 2.0f;
            f.v(x, y) = 1.0f;
        }
    FlowField g = median_filter_flow(f, 1);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x) {
            CHECK(g.u(x, y) == 2.0f);
            CHECK(g.v(x, y) == 1.0f);
        }
    FlowField gg = median_filter_flow(g, 1);
    CHECK(gg.u_plane() == g.u_plane());
    CHECK(gg.v_plane() == g.v_plane());
}

TEST_CASE("median filter is idempotent on piecewise-constant fields") {
    FlowField f(20, 20);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x) {
            f.u(x, y) = x < 10 ? 3.0f : -1.0f;
            f.v(x, y) = y < 8 ? 0.5f : 2.0f;
        }
    FlowField once = median_filter_flow(f, 1);
    FlowField twice = median_filter_flow(once, 1);
    CHECK(twice.u_plane() == once.u_plane());
    CHECK(twice.v_plane() == once.v_plane());
}

TEST_CASE("median filter rejects single-pixel outliers") {
    FlowField f(9, 9);
    f.u(4, 4) = 100.0f;
    f.v(4, 4) = 100.0f;
    FlowField g = median_filter_flow(f, 1);
    CHECK(g.u(4, 4) == 0.0f);
    CHECK(g.v(4, 4) == 0.0f);
}

TEST_CASE("median matches a direct sort of the neighborhood") {
    // oracle: sort the 9 neighborhood values directly
    FlowField f(3, 3);
    float vals[9] = {1, 2, 9, 4, 7, 3, 6, 5, 8};
    int k = 0;
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) {
            f.u(x, y) = vals[k];
            f.v(x, y) = -vals[k];
            ++k;
        }
    std::vector<float> sorted(vals, vals + 9);
    std::sort(sorted.begin(), sorted.end());
    FlowField g = median_filter_flow(f, 1);
    CHECK(g.u(1, 1) == sorted[4]);
    CHECK(g.v(1, 1) == -sorted[4]);
}

TEST_CASE("affine estimation recovers constant translation exactly") {
    FlowField f(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            f.u(x, y) = 2.0f;
            f.v(x, y) = 1.0f;
        }
    GlobalMotion g = estimate_global_motion(f);
    CHECK(g.m[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(g.m[1] == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(g.m[2] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(g.m[3] == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(g.m[4] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(g.m[5] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("affine estimation recovers a small rotation") {
    // oracle: the closed-form affine of a rotation about the center
    const double ang = 0.01;
    const double cx = 15.5, cy = 15.5;
    FlowField f(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            double dx = x - cx, dy = y - cy;
            f.u(x, y) = static_cast<float>(std::cos(ang) * dx - std::sin(ang) * dy - dx);
            f.v(x, y) = static_cast<float>(std::sin(ang) * dx + std::cos(ang) * dy - dy);
        }
    GlobalMotion g = estimate_global_motion(f);
    CHECK(std::abs(g.m[0] - std::cos(ang)) <= 1e-3);
    CHECK(std::abs(g.m[1] + std::sin(ang)) <= 1e-3);
    CHECK(std::abs(g.m[3] - std::sin(ang)) <= 1e-3);
    CHECK(std::abs(g.m[4] - std::cos(ang)) <= 1e-3);
}

TEST_CASE("zero field estimates the identity model") {
    FlowField f(16, 16);
    GlobalMotion g = estimate_global_motion(f);
    GlobalMotion id = GlobalMotion::identity();
    for (int i = 0; i < 6; ++i) CHECK(std::abs(g.m[i] - id.m[i]) <= 1e-9);
}

TEST_CASE("affine fit on synthesized affine fields recovers coefficients") {
    Rng rng(99);
    for (int trial = 0; trial < 5; ++trial) {
        GlobalMotion truth;
        truth.m = {1.0 + rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02),
                   rng.uniform(-3, 3),             rng.uniform(-0.02, 0.02),
                   1.0 + rng.uniform(-0.02, 0.02), rng.uniform(-3, 3)};
        FlowField f(40, 40);
        for (int y = 0; y < 40; ++y)
            for (int x = 0; x < 40; ++x) {
                Vec2 d = truth.displacement(x, y);
                f.u(x, y) = static_cast<float>(d.x);
                f.v(x, y) = static_cast<float>(d.y);
            }
        GlobalMotion g = estimate_global_motion(f);
        for (int i = 0; i < 6; ++i) CHECK(std::abs(g.m[i] - truth.m[i]) <= 1e-3);
    }
}

TEST_CASE("degenerate sample geometry raises") {
    FlowField f(1, 8);  // all sample points collinear
    CHECK_THROWS_AS(estimate_global_motion(f), DegenerateFit);
}

TEST_CASE("flow dump round-trips") {
    auto [a, b] = shifted_pair(5, 32, 32, 1, 0);
    FlowField f = compute_flow(a, b);
    auto path = std::filesystem::temp_directory_path() / "trajfuse_flow.bin";
    write_flow_dump(f, path);
    FlowField g = read_flow_dump(path);
    CHECK(g.width() == f.width());
    CHECK(g.height() == f.height());
    CHECK(g.u_plane() == f.u_plane());
    CHECK(g.v_plane() == f.v_plane());
}
