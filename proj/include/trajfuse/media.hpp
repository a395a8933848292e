#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "trajfuse/common.hpp"

namespace trajfuse {

// Grayscale frame, row-major luminance in [0,1].
class Frame {
public:
    Frame() = default;
    Frame(int width, int height, float fill = 0.0f)
        : width_(width), height_(height), pixels_(static_cast<size_t>(width) * height, fill) {}

    int width() const { return width_; }
    int height() const { return height_; }

    float at(int x, int y) const { return pixels_[static_cast<size_t>(y) * width_ + x]; }
    float& at(int x, int y) { return pixels_[static_cast<size_t>(y) * width_ + x]; }

    const std::vector<float>& pixels() const { return pixels_; }
    std::vector<float>& pixels() { return pixels_; }

    bool in_bounds(double x, double y) const {
        return x >= 0.0 && y >= 0.0 && x <= width_ - 1.0 && y <= height_ - 1.0;
    }

    // Bilinear sample; caller guarantees (x,y) within [0,w-1]x[0,h-1].
    float sample(double x, double y) const;

    bool operator==(const Frame& o) const {
        return width_ == o.width_ && height_ == o.height_ && pixels_ == o.pixels_;
    }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<float> pixels_;
};

// Minimum clip length admitted to the pipeline; short snippets are rejected
// at load unless explicitly overridden.
inline constexpr int kMinClipFrames = 41;

class VideoClip {
public:
    VideoClip() = default;
    explicit VideoClip(std::vector<Frame> frames);

    int width() const { return width_; }
    int height() const { return height_; }
    int frame_count() const { return static_cast<int>(frames_.size()); }

    const Frame& frame(int i) const { return frames_[static_cast<size_t>(i)]; }
    const std::vector<Frame>& frames() const { return frames_; }

    bool operator==(const VideoClip& o) const { return frames_ == o.frames_; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<Frame> frames_;
};

// --- frame image io ---

Frame load_pgm(const std::filesystem::path& file);
void save_pgm(const Frame& f, const std::filesystem::path& file);
Frame load_png(const std::filesystem::path& file);
void save_png(const Frame& f, const std::filesystem::path& file);

// Loads frame_%05d.(pgm|png) style sequences. `pattern` is a filename glob
// with a single numeric field, e.g. "frame_*.pgm". Frames must form a
// contiguous index range; gaps raise MissingFrames.
VideoClip load_frame_sequence(const std::filesystem::path& dir, const std::string& pattern,
                              bool allow_short = false);

// Writes clip frames as frame_%05d.pgm under dir (created if needed).
void save_frame_sequence(const VideoClip& clip, const std::filesystem::path& dir);

}  // namespace trajfuse
