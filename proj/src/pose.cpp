#include "trajfuse/pose.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

namespace trajfuse {

const std::array<const char*, kNumJoints> kJointNames = {
    "head",       "neck",       "l_shoulder", "r_shoulder", "l_elbow", "r_elbow", "l_wrist",
    "r_wrist",    "l_hip",      "r_hip",      "l_knee",     "r_knee",  "l_ankle", "r_ankle",
};

std::optional<JointId> joint_from_name(const std::string& name) {
    for (int i = 0; i < kNumJoints; ++i)
        if (name == kJointNames[static_cast<size_t>(i)]) return static_cast<JointId>(i);
    return std::nullopt;
}

const std::array<BodyPart, 11> kBodyParts = {{
    {JointId::Head, JointId::Neck, "head"},
    {JointId::Neck, JointId::LShoulder, "l_clavicle"},
    {JointId::Neck, JointId::RShoulder, "r_clavicle"},
    {JointId::LShoulder, JointId::LElbow, "l_upper_arm"},
    {JointId::RShoulder, JointId::RElbow, "r_upper_arm"},
    {JointId::LElbow, JointId::LWrist, "l_forearm"},
    {JointId::RElbow, JointId::RWrist, "r_forearm"},
    {JointId::LHip, JointId::LKnee, "l_thigh"},
    {JointId::RHip, JointId::RKnee, "r_thigh"},
    {JointId::LKnee, JointId::LAnkle, "l_shin"},
    {JointId::RKnee, JointId::RAnkle, "r_shin"},
}};

const char* pose_source_name(PoseSource s) {
    switch (s) {
        case PoseSource::GT: return "GT";
        case PoseSource::GT_T: return "GT-T";
        case PoseSource::PS_T: return "PS-T";
        case PoseSource::PS_M: return "PS-M";
    }
    return "GT";
}

std::optional<PoseSource> pose_source_from_name(const std::string& s) {
    if (s == "GT") return PoseSource::GT;
    if (s == "GT-T") return PoseSource::GT_T;
    if (s == "PS-T") return PoseSource::PS_T;
    if (s == "PS-M") return PoseSource::PS_M;
    return std::nullopt;
}

std::vector<PoseAnnotation> load_annotations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<PoseAnnotation> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        PoseAnnotation a;
        try {
            a.frame = j.at("frame").get<int>();
            a.person_id = j.value("person_id", 0);
            a.activity_label = j.value("activity", 0);
            if (j.contains("source") && !j["source"].is_null()) {
                auto s = pose_source_from_name(j["source"].get<std::string>());
                if (!s) throw ParseError("unknown pose source");
                a.source = *s;
            }
            if (j.contains("torso_rotation") && !j["torso_rotation"].is_null()) {
                TorsoRotation r;
                r.yaw = j["torso_rotation"].value("yaw", 0.0);
                r.pitch = j["torso_rotation"].value("pitch", 0.0);
                r.roll = j["torso_rotation"].value("roll", 0.0);
                a.torso_rotation = r;
            }
            double w = j.value("width", 0.0), h = j.value("height", 0.0);
            const auto& joints = j.at("joints");
            for (int i = 0; i < kNumJoints; ++i) {
                const char* name = kJointNames[static_cast<size_t>(i)];
                if (!joints.contains(name) || joints[name].is_null()) continue;
                const auto& jj = joints[name];
                double x = jj.at("x").get<double>();
                double y = jj.at("y").get<double>();
                if (!std::isfinite(x) || !std::isfinite(y))
                    throw ParseError("non-finite joint coordinate");
                if (w > 0 && h > 0 && (x < 0 || y < 0 || x > w - 1 || y > h - 1))
                    throw InvariantViolation("joint '" + std::string(name) +
                                             "' outside frame bounds at line " +
                                             std::to_string(lineno));
                a.joints[static_cast<size_t>(i)] = Vec2{x, y};
                a.occluded[static_cast<size_t>(i)] = jj.value("occluded", false);
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        out.push_back(std::move(a));
    }
    return out;
}

void save_annotations(const std::vector<PoseAnnotation>& anns, const std::filesystem::path& path,
                      int width, int height) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& a : anns) {
        nlohmann::json joints = nlohmann::json::object();
        for (int i = 0; i < kNumJoints; ++i) {
            if (a.joints[static_cast<size_t>(i)]) {
                joints[kJointNames[static_cast<size_t>(i)]] = {
                    {"x", a.joints[static_cast<size_t>(i)]->x},
                    {"y", a.joints[static_cast<size_t>(i)]->y},
                    {"occluded", a.occluded[static_cast<size_t>(i)]}};
            } else {
                joints[kJointNames[static_cast<size_t>(i)]] = nullptr;
            }
        }
        nlohmann::json j = {
            {"frame", a.frame},       {"person_id", a.person_id}, {"activity", a.activity_label},
            {"source", pose_source_name(a.source)}, {"joints", joints},
        };
        if (a.torso_rotation)
            j["torso_rotation"] = {{"yaw", a.torso_rotation->yaw},
                                   {"pitch", a.torso_rotation->pitch},
                                   {"roll", a.torso_rotation->roll}};
        else
            j["torso_rotation"] = nullptr;
        if (width > 0 && height > 0) {
            j["width"] = width;
            j["height"] = height;
        }
        out << j.dump() << "\n";
    }
}

std::vector<int> pose_window_starts(int n_frames) {
    std::vector<int> out;
    for (int s = 0; s + kPoseWindow <= n_frames; s += kPoseStep) out.push_back(s);
    return out;
}

namespace {

// One zero-mean NCC tracking step: integer search then parabolic refinement.
Vec2 ncc_step(const Frame& prev, const Frame& next, const Vec2& pos,
              const PatchTrackConfig& cfg) {
    const int r = cfg.patch / 2;
    const int sr = cfg.search_radius;
    const int n = cfg.patch * cfg.patch;

    std::vector<double> ref(static_cast<size_t>(n));
    double ref_mean = 0;
    int k = 0;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx, ++k) {
            ref[static_cast<size_t>(k)] = prev.sample(pos.x + dx, pos.y + dy);
            ref_mean += ref[static_cast<size_t>(k)];
        }
    ref_mean /= n;
    double ref_var = 0;
    for (auto& v : ref) {
        v -= ref_mean;
        ref_var += v * v;
    }
    if (ref_var < 1e-12) return pos;  // flat patch, nothing to lock onto

    const int side = 2 * sr + 1;
    std::vector<double> score(static_cast<size_t>(side) * side,
                              -std::numeric_limits<double>::infinity());
    int best_dx = 0, best_dy = 0;
    double best = -2.0;
    std::vector<double> cand(static_cast<size_t>(n));
    for (int oy = -sr; oy <= sr; ++oy)
        for (int ox = -sr; ox <= sr; ++ox) {
            double mean = 0;
            k = 0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx, ++k) {
                    cand[static_cast<size_t>(k)] = next.sample(pos.x + ox + dx, pos.y + oy + dy);
                    mean += cand[static_cast<size_t>(k)];
                }
            mean /= n;
            double cross = 0, var = 0;
            for (int i = 0; i < n; ++i) {
                double c = cand[static_cast<size_t>(i)] - mean;
                cross += ref[static_cast<size_t>(i)] * c;
                var += c * c;
            }
            double s = var < 1e-12 ? 0.0 : cross / std::sqrt(ref_var * var);
            score[static_cast<size_t>((oy + sr) * side + (ox + sr))] = s;
            if (s > best) {
                best = s;
                best_dx = ox;
                best_dy = oy;
            }
        }

    auto sc = [&](int ox, int oy) {
        return score[static_cast<size_t>((oy + sr) * side + (ox + sr))];
    };
    auto refine = [](double sm, double s0, double sp) {
        double den = sm - 2.0 * s0 + sp;
        if (std::abs(den) < 1e-12) return 0.0;
        return std::clamp(0.5 * (sm - sp) / den, -0.5, 0.5);
    };
    double fx = best_dx, fy = best_dy;
    if (best_dx > -sr && best_dx < sr)
        fx += refine(sc(best_dx - 1, best_dy), sc(best_dx, best_dy), sc(best_dx + 1, best_dy));
    if (best_dy > -sr && best_dy < sr)
        fy += refine(sc(best_dx, best_dy - 1), sc(best_dx, best_dy), sc(best_dx, best_dy + 1));

    Vec2 out{pos.x + fx, pos.y + fy};
    out.x = std::clamp(out.x, 0.0, static_cast<double>(prev.width() - 1));
    out.y = std::clamp(out.y, 0.0, static_cast<double>(prev.height() - 1));
    return out;
}

}  // namespace

JointTrack track_joints(const VideoClip& clip, const PoseAnnotation& init, int window,
                        const PatchTrackConfig& cfg) {
    if (init.frame < 0 || init.frame >= clip.frame_count())
        throw KeyFrameOutOfRange("key frame " + std::to_string(init.frame) + " outside clip");
    if (window > clip.frame_count())
        throw KeyFrameOutOfRange("window longer than clip");

    int start = std::clamp(init.frame - window / 2, 0, clip.frame_count() - window);
    int key_rel = init.frame - start;

    JointTrack track;
    track.start_frame = start;
    track.source = init.source;
    track.person_id = init.person_id;
    track.activity_label = init.activity_label;

    for (int j = 0; j < kNumJoints; ++j) {
        if (!init.joints[static_cast<size_t>(j)]) continue;  // absent joints stay absent
        std::array<Vec2, kPoseWindow> path{};
        path[static_cast<size_t>(key_rel)] = *init.joints[static_cast<size_t>(j)];
        for (int t = key_rel + 1; t < window; ++t)
            path[static_cast<size_t>(t)] =
                ncc_step(clip.frame(start + t - 1), clip.frame(start + t),
                         path[static_cast<size_t>(t - 1)], cfg);
        for (int t = key_rel - 1; t >= 0; --t)
            path[static_cast<size_t>(t)] =
                ncc_step(clip.frame(start + t + 1), clip.frame(start + t),
                         path[static_cast<size_t>(t + 1)], cfg);
        track.joints[static_cast<size_t>(j)] = path;
    }
    return track;
}

JointTrack joint_track_from_annotations(const std::vector<const PoseAnnotation*>& frames,
                                        int start_frame) {
    if (frames.size() != static_cast<size_t>(kPoseWindow))
        throw InvariantViolation("joint_track_from_annotations: need exactly 7 frames");
    JointTrack track;
    track.start_frame = start_frame;
    track.source = frames[0]->source;
    track.person_id = frames[0]->person_id;
    track.activity_label = frames[0]->activity_label;
    for (int j = 0; j < kNumJoints; ++j) {
        std::array<Vec2, kPoseWindow> path{};
        bool all = true;
        for (int t = 0; t < kPoseWindow; ++t) {
            const auto& jnt = frames[static_cast<size_t>(t)]->joints[static_cast<size_t>(j)];
            if (!jnt) {
                all = false;
                break;
            }
            path[static_cast<size_t>(t)] = *jnt;
        }
        if (all) track.joints[static_cast<size_t>(j)] = path;
    }
    return track;
}

JointTrack replicate_pose(const PoseAnnotation& key, int start_frame) {
    JointTrack track;
    track.start_frame = start_frame;
    track.source = key.source;
    track.person_id = key.person_id;
    track.activity_label = key.activity_label;
    for (int j = 0; j < kNumJoints; ++j) {
        if (!key.joints[static_cast<size_t>(j)]) continue;
        std::array<Vec2, kPoseWindow> path{};
        path.fill(*key.joints[static_cast<size_t>(j)]);
        track.joints[static_cast<size_t>(j)] = path;
    }
    return track;
}

namespace {

std::optional<Vec2> hip_mid_at(const JointTrack& t, int frame) {
    const auto& lh = t.joints[static_cast<size_t>(JointId::LHip)];
    const auto& rh = t.joints[static_cast<size_t>(JointId::RHip)];
    if (lh && rh) return midpoint((*lh)[static_cast<size_t>(frame)], (*rh)[static_cast<size_t>(frame)]);
    if (lh) return (*lh)[static_cast<size_t>(frame)];
    if (rh) return (*rh)[static_cast<size_t>(frame)];
    return std::nullopt;
}

}  // namespace

PoseDescriptors compute_pose_descriptors(const JointTrack& track) {
    const auto& neck = track.joints[static_cast<size_t>(JointId::Neck)];
    if (!neck) throw DegenerateTorso("neck absent; torso length undefined");

    double torso_len = 0;
    for (int t = 0; t < kPoseWindow; ++t) {
        auto hm = hip_mid_at(track, t);
        if (!hm) throw DegenerateTorso("both hips absent; torso length undefined");
        torso_len += ((*neck)[static_cast<size_t>(t)] - *hm).norm();
    }
    torso_len /= kPoseWindow;
    if (torso_len < 1.0) throw DegenerateTorso("torso length below 1 px");

    PoseDescriptors out;

    for (int j = 0; j < kNumJoints; ++j) {
        if (j == static_cast<int>(JointId::Neck)) continue;
        const auto& joint = track.joints[static_cast<size_t>(j)];
        if (!joint) continue;
        std::vector<float> rel(static_cast<size_t>(kRelPosDim));
        std::vector<float> diff(static_cast<size_t>(kTemporalDim));
        for (int t = 0; t < kPoseWindow; ++t) {
            Vec2 d = ((*joint)[static_cast<size_t>(t)] - (*neck)[static_cast<size_t>(t)]) / torso_len;
            rel[static_cast<size_t>(2 * t)] = static_cast<float>(d.x);
            rel[static_cast<size_t>(2 * t + 1)] = static_cast<float>(d.y);
        }
        for (int t = 0; t + 1 < kPoseWindow; ++t) {
            Vec2 d = ((*joint)[static_cast<size_t>(t + 1)] - (*joint)[static_cast<size_t>(t)]) / torso_len;
            diff[static_cast<size_t>(2 * t)] = static_cast<float>(d.x);
            diff[static_cast<size_t>(2 * t + 1)] = static_cast<float>(d.y);
        }
        out.relative_positions.push_back(std::move(rel));
        out.temporal_diffs.push_back(std::move(diff));
    }

    // inner angle of (a, mid, b) limb triples, torso-neck last
    struct Triple {
        JointId a, mid, b;
    };
    static const Triple kTriples[4] = {
        {JointId::LShoulder, JointId::LElbow, JointId::LWrist},
        {JointId::RShoulder, JointId::RElbow, JointId::RWrist},
        {JointId::LHip, JointId::LKnee, JointId::LAnkle},
        {JointId::RHip, JointId::RKnee, JointId::RAnkle},
    };
    auto inner_angle = [](const Vec2& a, const Vec2& mid, const Vec2& b) -> std::optional<double> {
        Vec2 u = a - mid, v = b - mid;
        double nu = u.norm(), nv = v.norm();
        if (nu < 1e-9 || nv < 1e-9) return std::nullopt;  // zero-length limb
        double c = std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
        return std::acos(c) * 180.0 / 3.141592653589793;
    };
    for (const auto& tr : kTriples) {
        const auto& ja = track.joints[static_cast<size_t>(tr.a)];
        const auto& jm = track.joints[static_cast<size_t>(tr.mid)];
        const auto& jb = track.joints[static_cast<size_t>(tr.b)];
        if (!ja || !jm || !jb) continue;
        std::vector<float> ang(static_cast<size_t>(kAngleDim));
        bool ok = true;
        for (int t = 0; t < kPoseWindow && ok; ++t) {
            auto a = inner_angle((*ja)[static_cast<size_t>(t)], (*jm)[static_cast<size_t>(t)],
                                 (*jb)[static_cast<size_t>(t)]);
            if (!a)
                ok = false;
            else
                ang[static_cast<size_t>(t)] = static_cast<float>(*a);
        }
        if (ok) out.joint_angles.push_back(std::move(ang));
    }
    // torso-neck: angle at the neck between the hip midpoint and the head
    const auto& head = track.joints[static_cast<size_t>(JointId::Head)];
    if (head) {
        std::vector<float> ang(static_cast<size_t>(kAngleDim));
        bool ok = true;
        for (int t = 0; t < kPoseWindow && ok; ++t) {
            auto hm = hip_mid_at(track, t);
            auto a = inner_angle(*hm, (*neck)[static_cast<size_t>(t)], (*head)[static_cast<size_t>(t)]);
            if (!a)
                ok = false;
            else
                ang[static_cast<size_t>(t)] = static_cast<float>(*a);
        }
        if (ok) out.joint_angles.push_back(std::move(ang));
    }
    return out;
}

double BodyMask::density(int frame) const {
    const auto& m = masks[static_cast<size_t>(frame - first_frame)];
    size_t on = 0;
    for (uint8_t b : m) on += b != 0;
    return m.empty() ? 0.0 : static_cast<double>(on) / static_cast<double>(m.size());
}

BodyMask BodyMask::full(int first_frame, int n_frames, int w, int h) {
    BodyMask out;
    out.first_frame = first_frame;
    out.width = w;
    out.height = h;
    out.masks.assign(static_cast<size_t>(n_frames),
                     std::vector<uint8_t>(static_cast<size_t>(w) * h, 1));
    return out;
}

BodyMask BodyMask::empty(int first_frame, int n_frames, int w, int h) {
    BodyMask out = full(first_frame, n_frames, w, h);
    for (auto& m : out.masks) std::fill(m.begin(), m.end(), uint8_t{0});
    return out;
}

void save_mask_frames(const BodyMask& mask, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    char name[32];
    for (size_t i = 0; i < mask.masks.size(); ++i) {
        Frame f(mask.width, mask.height);
        for (size_t k = 0; k < mask.masks[i].size(); ++k)
            f.pixels()[k] = mask.masks[i][k] ? 1.0f : 0.0f;
        std::snprintf(name, sizeof(name), "mask_%05d.pgm", static_cast<int>(i) + mask.first_frame);
        save_pgm(f, dir / name);
    }
}

namespace {

void rasterize_rect(std::vector<uint8_t>& mask, int w, int h, double x0, double y0, double x1,
                    double y1) {
    int ix0 = std::max(0, static_cast<int>(std::floor(x0)));
    int iy0 = std::max(0, static_cast<int>(std::floor(y0)));
    int ix1 = std::min(w - 1, static_cast<int>(std::ceil(x1)));
    int iy1 = std::min(h - 1, static_cast<int>(std::ceil(y1)));
    for (int y = iy0; y <= iy1; ++y)
        for (int x = ix0; x <= ix1; ++x)
            if (x >= x0 - 0.5 && x <= x1 + 0.5 && y >= y0 - 0.5 && y <= y1 + 0.5)
                mask[static_cast<size_t>(y) * w + x] = 1;
}

}  // namespace

BodyMask build_body_mask(const std::vector<PoseAnnotation>& annotations, int width, int height,
                         double part_width_frac) {
    if (annotations.empty()) throw NoJoints("no annotations supplied");
    int lo = annotations[0].frame, hi = annotations[0].frame;
    for (const auto& a : annotations) {
        lo = std::min(lo, a.frame);
        hi = std::max(hi, a.frame);
    }
    BodyMask out = BodyMask::empty(lo, hi - lo + 1, width, height);
    std::vector<bool> any(static_cast<size_t>(hi - lo + 1), false);

    for (const auto& a : annotations) {
        auto& mask = out.masks[static_cast<size_t>(a.frame - lo)];
        auto has = [&](JointId j) { return a.joints[static_cast<size_t>(j)].has_value(); };
        auto at = [&](JointId j) { return *a.joints[static_cast<size_t>(j)]; };

        std::optional<Vec2> hipmid;
        if (has(JointId::LHip) && has(JointId::RHip))
            hipmid = midpoint(at(JointId::LHip), at(JointId::RHip));
        else if (has(JointId::LHip))
            hipmid = at(JointId::LHip);
        else if (has(JointId::RHip))
            hipmid = at(JointId::RHip);

        // thickness from the torso; fall back to present part lengths
        double torso_len = 0;
        if (has(JointId::Neck) && hipmid) torso_len = (at(JointId::Neck) - *hipmid).norm();
        if (torso_len <= 0) {
            double sum = 0;
            int n = 0;
            for (const auto& p : kBodyParts)
                if (has(p.a) && has(p.b)) {
                    sum += (at(p.a) - at(p.b)).norm();
                    ++n;
                }
            torso_len = n ? 2.0 * sum / n : 8.0 / part_width_frac;
        }
        double t = std::max(2.0, part_width_frac * torso_len);

        bool drew = false;
        auto draw_segment = [&](const Vec2& p, const Vec2& q) {
            rasterize_rect(mask, width, height, std::min(p.x, q.x) - t / 2,
                           std::min(p.y, q.y) - t / 2, std::max(p.x, q.x) + t / 2,
                           std::max(p.y, q.y) + t / 2);
            drew = true;
        };
        std::array<bool, kNumJoints> used{};
        for (const auto& p : kBodyParts)
            if (has(p.a) && has(p.b)) {
                draw_segment(at(p.a), at(p.b));
                used[static_cast<size_t>(p.a)] = used[static_cast<size_t>(p.b)] = true;
            }
        if (has(JointId::Neck) && hipmid) {
            draw_segment(at(JointId::Neck), *hipmid);
            used[static_cast<size_t>(JointId::Neck)] = true;
            used[static_cast<size_t>(JointId::LHip)] = used[static_cast<size_t>(JointId::RHip)] = true;
        }
        // isolated present joints still contribute a square patch
        for (int j = 0; j < kNumJoints; ++j)
            if (a.joints[static_cast<size_t>(j)] && !used[static_cast<size_t>(j)]) {
                Vec2 p = *a.joints[static_cast<size_t>(j)];
                rasterize_rect(mask, width, height, p.x - t / 2, p.y - t / 2, p.x + t / 2,
                               p.y + t / 2);
                drew = true;
            }
        if (drew) any[static_cast<size_t>(a.frame - lo)] = true;
    }

    for (size_t i = 0; i < any.size(); ++i)
        if (!any[i])
            throw NoJoints("frame " + std::to_string(lo + static_cast<int>(i)) +
                           " has no localized joint");
    return out;
}

std::vector<Trajectory> filter_trajectories_by_mask(const std::vector<Trajectory>& trajs,
                                                    const BodyMask& mask) {
    std::vector<Trajectory> keep;
    keep.reserve(trajs.size());
    for (const auto& t : trajs) {
        int last = t.start_frame + static_cast<int>(t.points.size()) - 1;
        if (!mask.covers(t.start_frame) || !mask.covers(last))
            throw OutOfBounds("filter_trajectories_by_mask: mask does not cover trajectory span");
        bool inside = true;
        for (size_t i = 0; i < t.points.size() && inside; ++i) {
            int x = std::clamp(static_cast<int>(std::lround(t.points[i].x)), 0, mask.width - 1);
            int y = std::clamp(static_cast<int>(std::lround(t.points[i].y)), 0, mask.height - 1);
            inside = mask.at(t.start_frame + static_cast<int>(i), x, y);
        }
        if (inside) keep.push_back(t);
    }
    return keep;
}

std::vector<PoseAnnotation> inject_pose_noise(const std::vector<PoseAnnotation>& anns,
                                              double sigma_px, double dropout_prob, uint64_t seed,
                                              PoseSource relabel, int width, int height) {
    Rng rng(seed);
    std::vector<PoseAnnotation> out = anns;
    for (auto& a : out) {
        a.source = relabel;
        for (int j = 0; j < kNumJoints; ++j) {
            auto& jnt = a.joints[static_cast<size_t>(j)];
            if (!jnt) continue;
            if (rng.next_double() < dropout_prob) {
                jnt.reset();
                a.occluded[static_cast<size_t>(j)] = false;
                continue;
            }
            jnt->x = std::clamp(jnt->x + sigma_px * rng.next_gaussian(), 0.0,
                                static_cast<double>(width - 1));
            jnt->y = std::clamp(jnt->y + sigma_px * rng.next_gaussian(), 0.0,
                                static_cast<double>(height - 1));
        }
    }
    return out;
}

}  // namespace trajfuse
