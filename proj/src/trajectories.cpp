#include "trajfuse/trajectories.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace trajfuse {

namespace {

constexpr double kTwoPi = 6.283185307179586;

// min eigenvalue of the 3x3-window structure tensor at (x, y)
double min_eig_at(const Frame& f, int x, int y) {
    double sxx = 0, sxy = 0, syy = 0;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
            int px = x + dx, py = y + dy;
            double gx = 0.5 * (f.at(std::min(px + 1, f.width() - 1), py) -
                               f.at(std::max(px - 1, 0), py));
            double gy = 0.5 * (f.at(px, std::min(py + 1, f.height() - 1)) -
                               f.at(px, std::max(py - 1, 0)));
            sxx += gx * gx;
            sxy += gx * gy;
            syy += gy * gy;
        }
    double tr = sxx + syy;
    double disc = std::sqrt(std::max((sxx - syy) * (sxx - syy) + 4.0 * sxy * sxy, 0.0));
    return 0.5 * (tr - disc);
}

}  // namespace

ClipFlows compute_clip_flows(const VideoClip& clip, const DtConfig& cfg) {
    int pairs = clip.frame_count() - 1;
    ClipFlows out;
    out.median.resize(static_cast<size_t>(pairs));
    out.global_motion.resize(static_cast<size_t>(pairs));
    parallel_for(static_cast<size_t>(pairs), [&](size_t lo, size_t hi) {
        for (size_t i = lo; i < hi; ++i) {
            FlowField raw = compute_flow(clip.frame(static_cast<int>(i)),
                                         clip.frame(static_cast<int>(i) + 1), cfg.flow);
            out.median[i] = median_filter_flow(raw, cfg.median_radius);
            out.global_motion[i] = estimate_global_motion(out.median[i]);
        }
    }, 1);
    return out;
}

std::vector<Vec2> sample_dense_points(const Frame& frame, const DtConfig& cfg,
                                      const std::vector<Vec2>& existing) {
    const int margin = std::max(3, cfg.border_margin);
    const int stride = cfg.sample_stride;
    const double min_dist = stride / 2.0;

    // cornerness gate relative to the strongest response in the frame
    double max_eig = 0.0;
    for (int y = margin; y < frame.height() - margin; ++y)
        for (int x = margin; x < frame.width() - margin; ++x)
            max_eig = std::max(max_eig, min_eig_at(frame, x, y));
    double thresh = std::max(cfg.cornerness_quality * max_eig, 1e-9);

    std::vector<Vec2> out;
    for (int y = 0; y < frame.height(); y += stride) {
        if (y < margin || y >= frame.height() - margin) continue;
        for (int x = 0; x < frame.width(); x += stride) {
            if (x < margin || x >= frame.width() - margin) continue;
            bool covered = false;
            for (const auto& p : existing) {
                if (std::hypot(p.x - x, p.y - y) < min_dist) {
                    covered = true;
                    break;
                }
            }
            if (covered) continue;
            if (min_eig_at(frame, x, y) > thresh)
                out.emplace_back(static_cast<double>(x), static_cast<double>(y));
        }
    }
    return out;
}

std::vector<Trajectory> track_points(const VideoClip& clip, const DtConfig& cfg,
                                     const ClipFlows* flows) {
    const int L = cfg.track_length;
    if (clip.frame_count() < L + 1)
        throw ClipTooShort("track_points: need at least " + std::to_string(L + 1) + " frames");

    ClipFlows local;
    if (!flows) {
        local = compute_clip_flows(clip, cfg);
        flows = &local;
    }

    struct Active {
        int start_frame;
        std::vector<Vec2> points;
    };
    std::vector<Active> active;
    std::vector<Trajectory> done;
    std::vector<Vec2> heads;

    auto sample_new = [&](int frame_idx) {
        // points sampled here must be able to survive L steps before clip end
        if (frame_idx + L > clip.frame_count() - 1) return;
        heads.clear();
        for (const auto& a : active) heads.push_back(a.points.back());
        for (const auto& p : sample_dense_points(clip.frame(frame_idx), cfg, heads))
            active.push_back({frame_idx, {p}});
    };

    sample_new(0);
    for (int t = 0; t + 1 < clip.frame_count(); ++t) {
        const FlowField& fl = flows->median[static_cast<size_t>(t)];
        std::vector<Active> next;
        next.reserve(active.size());
        for (auto& a : active) {
            if (a.start_frame + static_cast<int>(a.points.size()) - 1 != t) {
                // not yet reached this frame (cannot happen with per-frame advection)
                next.push_back(std::move(a));
                continue;
            }
            const Vec2& p = a.points.back();
            Vec2 d = fl.sample(p.x, p.y);
            Vec2 q = p + d;
            const double margin = cfg.border_margin;
            if (q.x < margin || q.y < margin || q.x > clip.width() - 1.0 - margin ||
                q.y > clip.height() - 1.0 - margin)
                continue;  // entered the border band where flow is untrusted
            a.points.push_back(q);
            if (static_cast<int>(a.points.size()) == L + 1)
                done.push_back({a.start_frame, std::move(a.points)});
            else
                next.push_back(std::move(a));
        }
        active = std::move(next);
        sample_new(t + 1);
    }
    return done;
}

std::vector<Trajectory> prune_trajectories(const std::vector<Trajectory>& trajs,
                                           const std::vector<GlobalMotion>& global,
                                           const DtConfig& cfg) {
    std::vector<Trajectory> keep;
    keep.reserve(trajs.size());
    for (const auto& t : trajs) {
        size_t steps = t.points.size() - 1;
        if (static_cast<size_t>(t.start_frame) + steps > global.size())
            throw InvariantViolation("prune_trajectories: global motion missing for spanned pair");

        if (t.path_length() < cfg.static_disp_threshold) continue;  // static

        bool erratic = false;
        double residual = 0.0;
        for (size_t i = 0; i < steps; ++i) {
            Vec2 d = t.points[i + 1] - t.points[i];
            if (d.norm() > cfg.erratic_disp_threshold) {
                erratic = true;
                break;
            }
            Vec2 pred = global[static_cast<size_t>(t.start_frame) + i].displacement(
                t.points[i].x, t.points[i].y);
            residual += (d - pred).norm();
        }
        if (erratic) continue;
        if (residual / static_cast<double>(steps) < cfg.camera_residual_threshold)
            continue;  // consistent with camera motion
        keep.push_back(t);
    }
    return keep;
}

namespace {

// Accumulate an orientation histogram vote with linear interpolation between
// the two adjacent bins.
void vote(std::vector<double>& hist, size_t base, int nbins, double angle, double mag) {
    double fbin = angle / (kTwoPi / nbins);
    int b0 = static_cast<int>(fbin) % nbins;
    int b1 = (b0 + 1) % nbins;
    double w1 = fbin - std::floor(fbin);
    hist[base + static_cast<size_t>(b0)] += mag * (1.0 - w1);
    hist[base + static_cast<size_t>(b1)] += mag * w1;
}

// Per-cell L2 normalization; all-zero cells fall back to a uniform histogram
// (1/sqrt(nbins) per bin) so every block has unit L2 norm.
std::vector<float> normalize_cells(const std::vector<double>& hist, int ncells, int nbins) {
    std::vector<float> out(hist.size());
    for (int c = 0; c < ncells; ++c) {
        size_t base = static_cast<size_t>(c) * nbins;
        double norm2 = 0;
        for (int b = 0; b < nbins; ++b) norm2 += hist[base + b] * hist[base + b];
        if (norm2 < 1e-24) {
            float fill = static_cast<float>(1.0 / std::sqrt(static_cast<double>(nbins)));
            for (int b = 0; b < nbins; ++b) out[base + b] = fill;
        } else {
            double inv = 1.0 / std::sqrt(norm2);
            for (int b = 0; b < nbins; ++b) out[base + b] = static_cast<float>(hist[base + b] * inv);
        }
    }
    return out;
}

}  // namespace

DescriptorSet compute_descriptors(const Trajectory& traj, const VideoClip& clip,
                                  const std::vector<FlowField>& flows, const DtConfig& cfg) {
    const int L = static_cast<int>(traj.points.size()) - 1;
    const int vol = cfg.volume_size;
    const int cs = cfg.cells_spatial, ct = cfg.cells_temporal;
    const int ncells = cs * cs * ct;
    const int w = clip.width(), h = clip.height();

    if (w < vol || h < vol)
        throw OutOfBounds("compute_descriptors: frame smaller than descriptor volume");
    if (traj.start_frame < 0 || traj.start_frame + L > clip.frame_count() - 1 ||
        static_cast<size_t>(traj.start_frame + L) > flows.size())
        throw OutOfBounds("compute_descriptors: trajectory span not covered");
    for (const auto& p : traj.points)
        if (p.x < 0 || p.y < 0 || p.x > w - 1.0 || p.y > h - 1.0)
            throw OutOfBounds("compute_descriptors: point outside frame");

    std::vector<double> hog(static_cast<size_t>(ncells) * cfg.hog_bins, 0.0);
    std::vector<double> hof(static_cast<size_t>(ncells) * cfg.hof_bins, 0.0);
    std::vector<double> mbhx(static_cast<size_t>(ncells) * cfg.mbh_bins, 0.0);
    std::vector<double> mbhy(static_cast<size_t>(ncells) * cfg.mbh_bins, 0.0);

    const int cell_px = vol / cs;
    for (int i = 0; i < L; ++i) {
        const Vec2& c = traj.points[static_cast<size_t>(i)];
        const Frame& img = clip.frame(traj.start_frame + i);
        const FlowField& fl = flows[static_cast<size_t>(traj.start_frame + i)];
        int ox = std::clamp(static_cast<int>(std::lround(c.x)) - vol / 2, 0, w - vol);
        int oy = std::clamp(static_cast<int>(std::lround(c.y)) - vol / 2, 0, h - vol);
        int tcell = std::min(i * ct / L, ct - 1);

        for (int qy = oy; qy < oy + vol; ++qy) {
            int cy = std::min((qy - oy) / cell_px, cs - 1);
            for (int qx = ox; qx < ox + vol; ++qx) {
                int cx = std::min((qx - ox) / cell_px, cs - 1);
                size_t cell = static_cast<size_t>((tcell * cs + cy) * cs + cx);

                // HOG: image gradient
                double gx = 0.5 * (img.at(std::min(qx + 1, w - 1), qy) -
                                   img.at(std::max(qx - 1, 0), qy));
                double gy = 0.5 * (img.at(qx, std::min(qy + 1, h - 1)) -
                                   img.at(qx, std::max(qy - 1, 0)));
                double gmag = std::hypot(gx, gy);
                if (gmag > 1e-12)
                    vote(hog, cell * cfg.hog_bins, cfg.hog_bins,
                         std::atan2(gy, gx) + (std::atan2(gy, gx) < 0 ? kTwoPi : 0.0), gmag);

                // HOF: flow orientation with a zero-motion bin (last index)
                double fu = fl.u(qx, qy), fv = fl.v(qx, qy);
                double fmag = std::hypot(fu, fv);
                if (fmag <= cfg.hof_zero_threshold) {
                    hof[cell * cfg.hof_bins + static_cast<size_t>(cfg.hof_bins - 1)] += 1.0;
                } else {
                    double a = std::atan2(fv, fu);
                    if (a < 0) a += kTwoPi;
                    vote(hof, cell * cfg.hof_bins, cfg.hof_bins - 1, a, fmag);
                }

                // MBH: spatial derivatives of each flow component
                double dux = 0.5 * (fl.u(std::min(qx + 1, w - 1), qy) - fl.u(std::max(qx - 1, 0), qy));
                double duy = 0.5 * (fl.u(qx, std::min(qy + 1, h - 1)) - fl.u(qx, std::max(qy - 1, 0)));
                double dvx = 0.5 * (fl.v(std::min(qx + 1, w - 1), qy) - fl.v(std::max(qx - 1, 0), qy));
                double dvy = 0.5 * (fl.v(qx, std::min(qy + 1, h - 1)) - fl.v(qx, std::max(qy - 1, 0)));
                double mx = std::hypot(dux, duy);
                if (mx > 1e-7) {
                    double a = std::atan2(duy, dux);
                    if (a < 0) a += kTwoPi;
                    vote(mbhx, cell * cfg.mbh_bins, cfg.mbh_bins, a, mx);
                }
                double my = std::hypot(dvx, dvy);
                if (my > 1e-7) {
                    double a = std::atan2(dvy, dvx);
                    if (a < 0) a += kTwoPi;
                    vote(mbhy, cell * cfg.mbh_bins, cfg.mbh_bins, a, my);
                }
            }
        }
    }

    DescriptorSet out;
    out.hog = normalize_cells(hog, ncells, cfg.hog_bins);
    out.hof = normalize_cells(hof, ncells, cfg.hof_bins);
    std::vector<float> mx = normalize_cells(mbhx, ncells, cfg.mbh_bins);
    std::vector<float> my = normalize_cells(mbhy, ncells, cfg.mbh_bins);
    out.mbh = std::move(mx);
    out.mbh.insert(out.mbh.end(), my.begin(), my.end());

    out.traj.resize(static_cast<size_t>(2 * L));
    double total = traj.path_length();
    if (total > 1e-12) {
        for (int i = 0; i < L; ++i) {
            Vec2 d = traj.points[static_cast<size_t>(i) + 1] - traj.points[static_cast<size_t>(i)];
            out.traj[static_cast<size_t>(2 * i)] = static_cast<float>(d.x / total);
            out.traj[static_cast<size_t>(2 * i + 1)] = static_cast<float>(d.y / total);
        }
    }
    return out;
}

DtExtraction extract_dense_trajectories(const VideoClip& clip, const DtConfig& cfg) {
    DtExtraction out;
    out.flows = compute_clip_flows(clip, cfg);
    out.raw = track_points(clip, cfg, &out.flows);
    out.pruned = prune_trajectories(out.raw, out.flows.global_motion, cfg);
    out.descriptors.resize(out.pruned.size());
    parallel_for(out.pruned.size(), [&](size_t lo, size_t hi) {
        for (size_t i = lo; i < hi; ++i)
            out.descriptors[i] = compute_descriptors(out.pruned[i], clip, out.flows.median, cfg);
    }, 16);
    return out;
}

void write_dt_features(const std::vector<Trajectory>& trajs,
                       const std::vector<DescriptorSet>& descs, const DtConfig& cfg,
                       const std::string& clip_id, const std::filesystem::path& file,
                       const std::string& config_hash) {
    if (trajs.size() != descs.size())
        throw InvariantViolation("write_dt_features: trajectory/descriptor count mismatch");
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot write " + file.string());
    for (size_t i = 0; i < trajs.size(); ++i) {
        Vec2 m = trajs[i].mean_point();
        float head[3] = {static_cast<float>(trajs[i].start_frame), static_cast<float>(m.x),
                         static_cast<float>(m.y)};
        out.write(reinterpret_cast<const char*>(head), sizeof(head));
        auto put = [&out](const std::vector<float>& v) {
            out.write(reinterpret_cast<const char*>(v.data()),
                      static_cast<std::streamsize>(v.size() * sizeof(float)));
        };
        put(descs[i].traj);
        put(descs[i].hog);
        put(descs[i].hof);
        put(descs[i].mbh);
    }
    nlohmann::json side = {
        {"clip_id", clip_id},
        {"config_hash", config_hash},
        {"count", trajs.size()},
        {"dims", {{"traj", cfg.traj_dim()}, {"hog", cfg.hog_dim()}, {"hof", cfg.hof_dim()},
                  {"mbh", cfg.mbh_dim()}}},
        {"config", {{"sample_stride", cfg.sample_stride},
                    {"track_length", cfg.track_length},
                    {"volume_size", cfg.volume_size},
                    {"cells_spatial", cfg.cells_spatial},
                    {"cells_temporal", cfg.cells_temporal}}},
    };
    std::ofstream sj(file.string() + ".json");
    sj << side.dump(2) << "\n";
}

std::vector<DtFeatureRecord> read_dt_features(const std::filesystem::path& file) {
    std::ifstream sj(file.string() + ".json");
    if (!sj) throw IoError("missing sidecar for " + file.string());
    nlohmann::json side = nlohmann::json::parse(sj);
    size_t count = side.at("count").get<size_t>();
    size_t dt = side.at("dims").at("traj").get<size_t>();
    size_t dg = side.at("dims").at("hog").get<size_t>();
    size_t df = side.at("dims").at("hof").get<size_t>();
    size_t dm = side.at("dims").at("mbh").get<size_t>();

    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open " + file.string());
    std::vector<DtFeatureRecord> recs(count);
    for (auto& r : recs) {
        float head[3];
        in.read(reinterpret_cast<char*>(head), sizeof(head));
        r.start_frame = head[0];
        r.mean_x = head[1];
        r.mean_y = head[2];
        auto get = [&in](std::vector<float>& v, size_t n) {
            v.resize(n);
            in.read(reinterpret_cast<char*>(v.data()),
                    static_cast<std::streamsize>(n * sizeof(float)));
        };
        get(r.traj, dt);
        get(r.hog, dg);
        get(r.hof, df);
        get(r.mbh, dm);
        if (!in) throw ParseError("truncated feature file " + file.string());
    }
    return recs;
}

}  // namespace trajfuse
