#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "trajfuse/media.hpp"

namespace trajfuse {

// Dense per-pixel displacement field mapping frame a toward frame b.
class FlowField {
public:
    FlowField() = default;
    FlowField(int width, int height)
        : width_(width), height_(height),
          u_(static_cast<size_t>(width) * height, 0.0f),
          v_(static_cast<size_t>(width) * height, 0.0f) {}

    int width() const { return width_; }
    int height() const { return height_; }

    float u(int x, int y) const { return u_[static_cast<size_t>(y) * width_ + x]; }
    float v(int x, int y) const { return v_[static_cast<size_t>(y) * width_ + x]; }
    float& u(int x, int y) { return u_[static_cast<size_t>(y) * width_ + x]; }
    float& v(int x, int y) { return v_[static_cast<size_t>(y) * width_ + x]; }

    const std::vector<float>& u_plane() const { return u_; }
    const std::vector<float>& v_plane() const { return v_; }

    // Bilinear flow sample at a subpixel position (clamped to bounds).
    Vec2 sample(double x, double y) const;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<float> u_;
    std::vector<float> v_;
};

struct FlowConfig {
    int pyramid_levels = 3;
    int window = 15;       // odd
    int max_iters = 10;
    double epsilon = 0.005;  // stop when |delta| falls below
};

// Affine model mapping pixel coordinates of frame t to frame t+1:
//   x' = m[0]*x + m[1]*y + m[2],  y' = m[3]*x + m[4]*y + m[5]
struct GlobalMotion {
    std::array<double, 6> m{1, 0, 0, 0, 1, 0};

    static GlobalMotion identity() { return {}; }

    Vec2 apply(double x, double y) const {
        return {m[0] * x + m[1] * y + m[2], m[3] * x + m[4] * y + m[5]};
    }
    Vec2 displacement(double x, double y) const {
        Vec2 p = apply(x, y);
        return {p.x - x, p.y - y};
    }
};

// Pyramidal Lucas-Kanade, densified at every pixel. Window samples that fall
// outside the gradient-valid interior of a, or whose warped position leaves b,
// are dropped from both the normal matrix and the residual.
FlowField compute_flow(const Frame& a, const Frame& b, const FlowConfig& cfg = {});

// Componentwise median over the (2r+1)^2 edge-clamped neighborhood.
FlowField median_filter_flow(const FlowField& f, int radius = 1);

// Least-squares affine fit over a uniform pixel subsample, with one re-fit
// pass after discarding residuals above 2x the median residual.
GlobalMotion estimate_global_motion(const FlowField& f);

// Debug dump: 16-byte header (8-byte magic "TFFLOW01", u32 width, u32 height,
// little endian) followed by the u plane then the v plane as f32.
void write_flow_dump(const FlowField& f, const std::filesystem::path& file);
FlowField read_flow_dump(const std::filesystem::path& file);

}  // namespace trajfuse
