#include "trajfuse/flow.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace trajfuse {

Vec2 FlowField::sample(double x, double y) const {
    if (x < 0) x = 0;
    if (y < 0) y = 0;
    if (x > width_ - 1.0) x = width_ - 1.0;
    if (y > height_ - 1.0) y = height_ - 1.0;
    int x0 = static_cast<int>(x);
    int y0 = static_cast<int>(y);
    int x1 = std::min(x0 + 1, width_ - 1);
    int y1 = std::min(y0 + 1, height_ - 1);
    double tx = x - x0, ty = y - y0;
    auto lerp2 = [&](const std::vector<float>& p) {
        double v0 = p[static_cast<size_t>(y0) * width_ + x0] * (1 - tx) +
                    p[static_cast<size_t>(y0) * width_ + x1] * tx;
        double v1 = p[static_cast<size_t>(y1) * width_ + x0] * (1 - tx) +
                    p[static_cast<size_t>(y1) * width_ + x1] * tx;
        return v0 * (1 - ty) + v1 * ty;
    };
    return {lerp2(u_), lerp2(v_)};
}

namespace {

// 5-tap gaussian (sigma ~0.9), reflect borders, then 2x2 mean decimation.
Frame downsample(const Frame& in) {
    const int w = in.width(), h = in.height();
    static const float k[5] = {0.0702f, 0.2449f, 0.3698f, 0.2449f, 0.0702f};
    auto reflect = [](int i, int n) {
        if (i < 0) return -i;
        if (i >= n) return 2 * n - 2 - i;
        return i;
    };
    Frame tmp(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float s = 0;
            for (int t = -2; t <= 2; ++t) s += k[t + 2] * in.at(reflect(x + t, w), y);
            tmp.at(x, y) = s;
        }
    Frame sm(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float s = 0;
            for (int t = -2; t <= 2; ++t) s += k[t + 2] * tmp.at(x, reflect(y + t, h));
            sm.at(x, y) = s;
        }
    int w2 = w / 2, h2 = h / 2;
    Frame out(w2, h2);
    for (int y = 0; y < h2; ++y)
        for (int x = 0; x < w2; ++x)
            out.at(x, y) = 0.25f * (sm.at(2 * x, 2 * y) + sm.at(2 * x + 1, 2 * y) +
                                    sm.at(2 * x, 2 * y + 1) + sm.at(2 * x + 1, 2 * y + 1));
    return out;
}

struct Gradients {
    std::vector<float> gx, gy;
    int w = 0, h = 0;
    float gx_at(int x, int y) const { return gx[static_cast<size_t>(y) * w + x]; }
    float gy_at(int x, int y) const { return gy[static_cast<size_t>(y) * w + x]; }
};

Gradients gradients(const Frame& f) {
    const int w = f.width(), h = f.height();
    Gradients g;
    g.w = w;
    g.h = h;
    g.gx.resize(static_cast<size_t>(w) * h);
    g.gy.resize(static_cast<size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
            int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
            float sx = (xp - xm) == 2 ? 0.5f : 1.0f;
            float sy = (yp - ym) == 2 ? 0.5f : 1.0f;
            g.gx[static_cast<size_t>(y) * w + x] = sx * (f.at(xp, y) - f.at(xm, y));
            g.gy[static_cast<size_t>(y) * w + x] = sy * (f.at(x, yp) - f.at(x, ym));
        }
    return g;
}

// Summed-area table for O(1) window sums of the structure tensor entries.
struct Integral {
    std::vector<double> s;
    int w = 0, h = 0;
    void build(const std::vector<float>& a, const std::vector<float>& b, int w_, int h_) {
        w = w_;
        h = h_;
        s.assign(static_cast<size_t>(w + 1) * (h + 1), 0.0);
        for (int y = 0; y < h; ++y) {
            double row = 0;
            for (int x = 0; x < w; ++x) {
                row += static_cast<double>(a[static_cast<size_t>(y) * w + x]) *
                       b[static_cast<size_t>(y) * w + x];
                s[static_cast<size_t>(y + 1) * (w + 1) + x + 1] =
                    s[static_cast<size_t>(y) * (w + 1) + x + 1] + row;
            }
        }
    }
    double sum(int x0, int y0, int x1, int y1) const {  // inclusive box
        return s[static_cast<size_t>(y1 + 1) * (w + 1) + x1 + 1] -
               s[static_cast<size_t>(y0) * (w + 1) + x1 + 1] -
               s[static_cast<size_t>(y1 + 1) * (w + 1) + x0] +
               s[static_cast<size_t>(y0) * (w + 1) + x0];
    }
};

FlowField upsample2x(const FlowField& coarse, int w, int h) {
    FlowField out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            Vec2 g = coarse.sample(x * 0.5, y * 0.5);
            out.u(x, y) = static_cast<float>(2.0 * g.x);
            out.v(x, y) = static_cast<float>(2.0 * g.y);
        }
    return out;
}

void lk_level(const Frame& A, const Frame& B, const FlowConfig& cfg, FlowField& flow) {
    const int w = A.width(), h = A.height();
    const int r = cfg.window / 2;
    Gradients g = gradients(A);
    Integral ixx, ixy, iyy;
    ixx.build(g.gx, g.gx, w, h);
    ixy.build(g.gx, g.gy, w, h);
    iyy.build(g.gy, g.gy, w, h);

    parallel_for(static_cast<size_t>(h), [&](size_t y_lo, size_t y_hi) {
        for (size_t yy = y_lo; yy < y_hi; ++yy) {
            int y = static_cast<int>(yy);
            for (int x = 0; x < w; ++x) {
                double gu = flow.u(x, y), gv = flow.v(x, y);
                for (int iter = 0; iter < cfg.max_iters; ++iter) {
                    int qx0 = x - r, qx1 = x + r, qy0 = y - r, qy1 = y + r;
                    // fast path: window inside the gradient-valid interior of A
                    // and fully in-bounds in B after warping
                    bool fast = qx0 >= 1 && qy0 >= 1 && qx1 <= w - 2 && qy1 <= h - 2 &&
                                qx0 + gu >= 0.0 && qy0 + gv >= 0.0 &&
                                qx1 + gu <= w - 1.0 && qy1 + gv <= h - 1.0;
                    double sxx, sxy, syy, sxt = 0, syt = 0;
                    if (fast) {
                        sxx = ixx.sum(qx0, qy0, qx1, qy1);
                        sxy = ixy.sum(qx0, qy0, qx1, qy1);
                        syy = iyy.sum(qx0, qy0, qx1, qy1);
                        for (int qy = qy0; qy <= qy1; ++qy)
                            for (int qx = qx0; qx <= qx1; ++qx) {
                                double it = B.sample(qx + gu, qy + gv) - A.at(qx, qy);
                                sxt += g.gx_at(qx, qy) * it;
                                syt += g.gy_at(qx, qy) * it;
                            }
                    } else {
                        sxx = sxy = syy = 0;
                        for (int qy = std::max(qy0, 1); qy <= std::min(qy1, h - 2); ++qy)
                            for (int qx = std::max(qx0, 1); qx <= std::min(qx1, w - 2); ++qx) {
                                double wx = qx + gu, wy = qy + gv;
                                if (wx < 0.0 || wy < 0.0 || wx > w - 1.0 || wy > h - 1.0) continue;
                                double dx = g.gx_at(qx, qy), dy = g.gy_at(qx, qy);
                                double it = B.sample(wx, wy) - A.at(qx, qy);
                                sxx += dx * dx;
                                sxy += dx * dy;
                                syy += dy * dy;
                                sxt += dx * it;
                                syt += dy * it;
                            }
                    }
                    double det = sxx * syy - sxy * sxy;
                    if (det <= 1e-12) break;
                    double du = -(syy * sxt - sxy * syt) / det;
                    double dv = -(sxx * syt - sxy * sxt) / det;
                    gu += du;
                    gv += dv;
                    if (du * du + dv * dv < cfg.epsilon * cfg.epsilon) break;
                }
                flow.u(x, y) = static_cast<float>(gu);
                flow.v(x, y) = static_cast<float>(gv);
            }
        }
    }, 8);
}

}  // namespace

FlowField compute_flow(const Frame& a, const Frame& b, const FlowConfig& cfg) {
    if (a.width() != b.width() || a.height() != b.height())
        throw DimensionMismatch("compute_flow: frame sizes differ");

    int levels = cfg.pyramid_levels;
    while (levels > 1 && (std::min(a.width(), a.height()) >> (levels - 1)) < 2 * cfg.window / 3)
        --levels;

    std::vector<Frame> pyr_a{a}, pyr_b{b};
    for (int l = 1; l < levels; ++l) {
        pyr_a.push_back(downsample(pyr_a.back()));
        pyr_b.push_back(downsample(pyr_b.back()));
    }

    FlowField flow(pyr_a.back().width(), pyr_a.back().height());
    for (int l = levels - 1; l >= 0; --l) {
        if (flow.width() != pyr_a[static_cast<size_t>(l)].width())
            flow = upsample2x(flow, pyr_a[static_cast<size_t>(l)].width(),
                              pyr_a[static_cast<size_t>(l)].height());
        lk_level(pyr_a[static_cast<size_t>(l)], pyr_b[static_cast<size_t>(l)], cfg, flow);
    }
    return flow;
}

FlowField median_filter_flow(const FlowField& f, int radius) {
    if (radius < 1) throw InvalidSpec("median_filter_flow: radius must be >= 1");
    const int w = f.width(), h = f.height();
    const int n = (2 * radius + 1) * (2 * radius + 1);
    FlowField out(w, h);
    parallel_for(static_cast<size_t>(h), [&](size_t y_lo, size_t y_hi) {
        std::vector<float> bu(static_cast<size_t>(n)), bv(static_cast<size_t>(n));
        for (size_t yy = y_lo; yy < y_hi; ++yy) {
            int y = static_cast<int>(yy);
            for (int x = 0; x < w; ++x) {
                int k = 0;
                for (int dy = -radius; dy <= radius; ++dy)
                    for (int dx = -radius; dx <= radius; ++dx) {
                        int cx = std::clamp(x + dx, 0, w - 1);
                        int cy = std::clamp(y + dy, 0, h - 1);
                        bu[static_cast<size_t>(k)] = f.u(cx, cy);
                        bv[static_cast<size_t>(k)] = f.v(cx, cy);
                        ++k;
                    }
                auto mid = static_cast<size_t>(n / 2);
                std::nth_element(bu.begin(), bu.begin() + static_cast<long>(mid), bu.end());
                std::nth_element(bv.begin(), bv.begin() + static_cast<long>(mid), bv.end());
                out.u(x, y) = bu[mid];
                out.v(x, y) = bv[mid];
            }
        }
    }, 16);
    return out;
}

namespace {

// Solve the 3x3 normal system by Gaussian elimination with partial pivoting.
std::array<double, 3> solve3(std::array<std::array<double, 4>, 3> m) {
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(m[static_cast<size_t>(r)][static_cast<size_t>(col)]) >
                std::abs(m[static_cast<size_t>(piv)][static_cast<size_t>(col)]))
                piv = r;
        if (std::abs(m[static_cast<size_t>(piv)][static_cast<size_t>(col)]) < 1e-9)
            throw DegenerateFit("estimate_global_motion: sample points are collinear");
        std::swap(m[static_cast<size_t>(col)], m[static_cast<size_t>(piv)]);
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            double f = m[static_cast<size_t>(r)][static_cast<size_t>(col)] /
                       m[static_cast<size_t>(col)][static_cast<size_t>(col)];
            for (int c = col; c < 4; ++c)
                m[static_cast<size_t>(r)][static_cast<size_t>(c)] -=
                    f * m[static_cast<size_t>(col)][static_cast<size_t>(c)];
        }
    }
    return {m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]};
}

GlobalMotion fit_affine(const FlowField& f, const std::vector<std::pair<int, int>>& pts) {
    std::array<std::array<double, 4>, 3> mx{}, my{};
    for (auto [x, y] : pts) {
        double row[3] = {static_cast<double>(x), static_cast<double>(y), 1.0};
        double tx = x + f.u(x, y);
        double ty = y + f.v(x, y);
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                mx[static_cast<size_t>(i)][static_cast<size_t>(j)] += row[i] * row[j];
                my[static_cast<size_t>(i)][static_cast<size_t>(j)] += row[i] * row[j];
            }
            mx[static_cast<size_t>(i)][3] += row[i] * tx;
            my[static_cast<size_t>(i)][3] += row[i] * ty;
        }
    }
    auto rx = solve3(mx);
    auto ry = solve3(my);
    GlobalMotion gm;
    gm.m = {rx[0], rx[1], rx[2], ry[0], ry[1], ry[2]};
    return gm;
}

}  // namespace

GlobalMotion estimate_global_motion(const FlowField& f) {
    if (f.width() < 1 || f.height() < 1)
        throw DegenerateFit("estimate_global_motion: empty field");
    std::vector<std::pair<int, int>> pts;
    int stride = std::max(1, std::min(f.width(), f.height()) / 32);
    for (int y = 0; y < f.height(); y += stride)
        for (int x = 0; x < f.width(); x += stride) pts.emplace_back(x, y);

    GlobalMotion gm = fit_affine(f, pts);

    std::vector<double> res(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
        auto [x, y] = pts[i];
        Vec2 pred = gm.apply(x, y);
        res[i] = std::hypot(pred.x - (x + f.u(x, y)), pred.y - (y + f.v(x, y)));
    }
    std::vector<double> sorted = res;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(sorted.size() / 2),
                     sorted.end());
    double med = sorted[sorted.size() / 2];

    std::vector<std::pair<int, int>> inliers;
    for (size_t i = 0; i < pts.size(); ++i)
        if (res[i] <= 2.0 * med + 1e-12) inliers.push_back(pts[i]);
    if (inliers.size() >= 3) {
        try {
            gm = fit_affine(f, inliers);
        } catch (const DegenerateFit&) {
            // inlier set degenerate; keep the full fit
        }
    }
    return gm;
}

void write_flow_dump(const FlowField& f, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot write " + file.string());
    const char magic[8] = {'T', 'F', 'F', 'L', 'O', 'W', '0', '1'};
    out.write(magic, 8);
    uint32_t wh[2] = {static_cast<uint32_t>(f.width()), static_cast<uint32_t>(f.height())};
    out.write(reinterpret_cast<const char*>(wh), 8);
    out.write(reinterpret_cast<const char*>(f.u_plane().data()),
              static_cast<std::streamsize>(f.u_plane().size() * sizeof(float)));
    out.write(reinterpret_cast<const char*>(f.v_plane().data()),
              static_cast<std::streamsize>(f.v_plane().size() * sizeof(float)));
}

FlowField read_flow_dump(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open " + file.string());
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, "TFFLOW01", 8) != 0) throw ParseError("bad flow dump magic");
    uint32_t wh[2];
    in.read(reinterpret_cast<char*>(wh), 8);
    FlowField f(static_cast<int>(wh[0]), static_cast<int>(wh[1]));
    size_t n = static_cast<size_t>(wh[0]) * wh[1];
    std::vector<float> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(float)));
    for (int y = 0, k = 0; y < f.height(); ++y)
        for (int x = 0; x < f.width(); ++x, ++k) f.u(x, y) = buf[static_cast<size_t>(k)];
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) throw ParseError("truncated flow dump");
    for (int y = 0, k = 0; y < f.height(); ++y)
        for (int x = 0; x < f.width(); ++x, ++k) f.v(x, y) = buf[static_cast<size_t>(k)];
    return f;
}

}  // namespace trajfuse
