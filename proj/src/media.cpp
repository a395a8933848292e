#include "trajfuse/media.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>

namespace fs = std::filesystem;

namespace trajfuse {

float Frame::sample(double x, double y) const {
    if (x < 0) x = 0;
    if (y < 0) y = 0;
    if (x > width_ - 1.0) x = width_ - 1.0;
    if (y > height_ - 1.0) y = height_ - 1.0;
    int x0 = static_cast<int>(x);
    int y0 = static_cast<int>(y);
    int x1 = std::min(x0 + 1, width_ - 1);
    int y1 = std::min(y0 + 1, height_ - 1);
    double tx = x - x0;
    double ty = y - y0;
    double v0 = at(x0, y0) * (1.0 - tx) + at(x1, y0) * tx;
    double v1 = at(x0, y1) * (1.0 - tx) + at(x1, y1) * tx;
    return static_cast<float>(v0 * (1.0 - ty) + v1 * ty);
}

VideoClip::VideoClip(std::vector<Frame> frames) : frames_(std::move(frames)) {
    if (frames_.empty()) throw MissingFrames("clip has no frames");
    width_ = frames_[0].width();
    height_ = frames_[0].height();
    for (size_t i = 0; i < frames_.size(); ++i) {
        if (frames_[i].width() != width_ || frames_[i].height() != height_)
            throw DimensionMismatch("frame " + std::to_string(i) + " differs in size");
        for (float v : frames_[i].pixels()) {
            if (!std::isfinite(v) || v < 0.0f || v > 1.0f)
                throw InvariantViolation("pixel outside [0,1] in frame " + std::to_string(i));
        }
    }
}

Frame load_pgm(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open " + file.string());
    std::string magic;
    in >> magic;
    if (magic != "P5") throw ParseError("not a binary PGM: " + file.string());
    auto next_int = [&in, &file]() {
        // skip whitespace and '#' comments
        for (;;) {
            int c = in.peek();
            if (c == '#') {
                std::string line;
                std::getline(in, line);
            } else if (std::isspace(c)) {
                in.get();
            } else {
                break;
            }
        }
        long v = -1;
        in >> v;
        if (!in || v < 0) throw ParseError("bad PGM header in " + file.string());
        return static_cast<int>(v);
    };
    int w = next_int();
    int h = next_int();
    int maxval = next_int();
    if (maxval != 255) throw ParseError("only 8-bit PGM supported: " + file.string());
    in.get();  // single whitespace after header
    std::vector<unsigned char> raw(static_cast<size_t>(w) * h);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw ParseError("truncated PGM payload: " + file.string());
    Frame f(w, h);
    for (size_t i = 0; i < raw.size(); ++i) f.pixels()[i] = static_cast<float>(raw[i]) / 255.0f;
    return f;
}

void save_pgm(const Frame& f, const fs::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot write " + file.string());
    out << "P5\n" << f.width() << " " << f.height() << "\n255\n";
    std::vector<unsigned char> raw(f.pixels().size());
    for (size_t i = 0; i < raw.size(); ++i) {
        float v = f.pixels()[i];
        int b = static_cast<int>(std::lround(v * 255.0f));
        raw[i] = static_cast<unsigned char>(std::clamp(b, 0, 255));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

Frame load_png(const fs::path& file) {
    FILE* fp = std::fopen(file.string().c_str(), "rb");
    if (!fp) throw IoError("cannot open " + file.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw ParseError("corrupt PNG: " + file.string());
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int bit_depth = png_get_bit_depth(png, info);
    int color = png_get_color_type(png, info);

    // normalize everything to 8-bit gray (RGB inputs are luma-converted)
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (bit_depth == 16) png_set_strip_16(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
        color == PNG_COLOR_TYPE_PALETTE)
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    png_read_update_info(png, info);

    std::vector<unsigned char> row(png_get_rowbytes(png, info));
    Frame f(static_cast<int>(w), static_cast<int>(h));
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x)
            f.at(static_cast<int>(x), static_cast<int>(y)) = static_cast<float>(row[x]) / 255.0f;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return f;
}

void save_png(const Frame& f, const fs::path& file) {
    FILE* fp = std::fopen(file.string().c_str(), "wb");
    if (!fp) throw IoError("cannot write " + file.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("png write failed: " + file.string());
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(f.width()),
                 static_cast<png_uint_32>(f.height()), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<unsigned char> row(static_cast<size_t>(f.width()));
    for (int y = 0; y < f.height(); ++y) {
        for (int x = 0; x < f.width(); ++x) {
            int b = static_cast<int>(std::lround(f.at(x, y) * 255.0f));
            row[static_cast<size_t>(x)] = static_cast<unsigned char>(std::clamp(b, 0, 255));
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

namespace {

// Match a filename against a glob with one '*' capturing the frame index.
bool glob_index(const std::string& name, const std::string& pattern, long& index) {
    auto star = pattern.find('*');
    if (star == std::string::npos) return false;
    std::string prefix = pattern.substr(0, star);
    std::string suffix = pattern.substr(star + 1);
    if (name.size() < prefix.size() + suffix.size()) return false;
    if (name.compare(0, prefix.size(), prefix) != 0) return false;
    if (name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) return false;
    std::string mid = name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
    if (mid.empty() || !std::all_of(mid.begin(), mid.end(), [](char c) { return std::isdigit(c); }))
        return false;
    index = std::stol(mid);
    return true;
}

}  // namespace

VideoClip load_frame_sequence(const fs::path& dir, const std::string& pattern, bool allow_short) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::map<long, fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        long idx = 0;
        if (glob_index(e.path().filename().string(), pattern, idx)) {
            if (!files.emplace(idx, e.path()).second)
                throw ParseError("duplicate frame index " + std::to_string(idx));
        }
    }
    if (files.empty()) throw MissingFrames("no frames matching '" + pattern + "' in " + dir.string());
    long expect = files.begin()->first;
    std::vector<Frame> frames;
    frames.reserve(files.size());
    for (const auto& [idx, path] : files) {
        if (idx != expect)
            throw MissingFrames("gap in frame sequence: expected index " + std::to_string(expect) +
                                ", found " + std::to_string(idx));
        ++expect;
        std::string ext = path.extension().string();
        Frame f = (ext == ".png" || ext == ".PNG") ? load_png(path) : load_pgm(path);
        if (!frames.empty() &&
            (f.width() != frames[0].width() || f.height() != frames[0].height()))
            throw DimensionMismatch("frame " + path.filename().string() + " differs in size");
        frames.push_back(std::move(f));
    }
    if (!allow_short && frames.size() < static_cast<size_t>(kMinClipFrames))
        throw TooShort("clip has " + std::to_string(frames.size()) + " frames; minimum is " +
                       std::to_string(kMinClipFrames));
    return VideoClip(std::move(frames));
}

void save_frame_sequence(const VideoClip& clip, const fs::path& dir) {
    fs::create_directories(dir);
    char name[32];
    for (int i = 0; i < clip.frame_count(); ++i) {
        std::snprintf(name, sizeof(name), "frame_%05d.pgm", i);
        save_pgm(clip.frame(i), dir / name);
    }
}

}  // namespace trajfuse
