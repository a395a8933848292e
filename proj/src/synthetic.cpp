#include "trajfuse/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace trajfuse {

namespace {

constexpr double kPi = 3.141592653589793;
constexpr double kTwoPi = 6.283185307179586;

double deg2rad(double d) { return d * kPi / 180.0; }

// Three-octave smoothstep value noise over a hashed lattice; evaluable at
// arbitrary real coordinates so rigid motions are exact.
class ValueNoise {
public:
    ValueNoise(uint64_t seed, double cell = 9.0) : cell_(cell) {
        Rng rng(seed);
        for (auto& v : table_) v = rng.next_double();
    }

    double operator()(double x, double y) const {
        return 0.55 * octave(x, y, cell_) + 0.30 * octave(x + 31.7, y + 11.3, cell_ / 2.3) +
               0.15 * octave(x + 7.1, y + 91.7, cell_ / 5.1);
    }

private:
    double lattice(int64_t ix, int64_t iy) const {
        uint64_t h = static_cast<uint64_t>(ix) * 73856093ull ^
                     static_cast<uint64_t>(iy) * 19349663ull;
        return table_[h % table_.size()];
    }
    static double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }
    double octave(double x, double y, double scale) const {
        double fx = x / scale, fy = y / scale;
        auto ix = static_cast<int64_t>(std::floor(fx));
        auto iy = static_cast<int64_t>(std::floor(fy));
        double tx = smoothstep(fx - static_cast<double>(ix));
        double ty = smoothstep(fy - static_cast<double>(iy));
        double v00 = lattice(ix, iy), v10 = lattice(ix + 1, iy);
        double v01 = lattice(ix, iy + 1), v11 = lattice(ix + 1, iy + 1);
        return (v00 * (1 - tx) + v10 * tx) * (1 - ty) + (v01 * (1 - tx) + v11 * tx) * ty;
    }

    std::array<double, 4096> table_;
    double cell_;
};

// Quantize to the 8-bit grid so PGM round-trips are exact.
float quantize(double v) {
    v = std::clamp(v, 0.0, 1.0);
    return static_cast<float>(std::lround(v * 255.0) / 255.0);
}

double dist_to_segment(const Vec2& p, const Vec2& a, const Vec2& b, double& along) {
    Vec2 ab = b - a;
    double len2 = ab.dot(ab);
    double t = len2 < 1e-12 ? 0.0 : std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    along = t;
    return (p - (a + ab * t)).norm();
}

struct PartDef {
    JointId a, b;
    double halfwidth_frac;  // relative to torso length
    double shade;
};

const PartDef kFigureParts[12] = {
    {JointId::Head, JointId::Neck, 0.16, 0.98},
    {JointId::Neck, JointId::LHip, 0.14, 0.80},   // stands in for the torso column
    {JointId::Neck, JointId::LShoulder, 0.07, 0.86},
    {JointId::Neck, JointId::RShoulder, 0.07, 0.90},
    {JointId::LShoulder, JointId::LElbow, 0.07, 0.94},
    {JointId::RShoulder, JointId::RElbow, 0.07, 0.88},
    {JointId::LElbow, JointId::LWrist, 0.06, 1.00},
    {JointId::RElbow, JointId::RWrist, 0.06, 0.92},
    {JointId::LHip, JointId::LKnee, 0.08, 0.84},
    {JointId::RHip, JointId::RKnee, 0.08, 0.96},
    {JointId::LKnee, JointId::LAnkle, 0.07, 0.90},
    {JointId::RKnee, JointId::RAnkle, 0.07, 0.98},
};

// Painterly max-composite of textured capsules. The banding rides along each
// limb in limb-local coordinates so patches move rigidly with the part; two
// incommensurate periods plus a cross-limb falloff keep local appearance
// unique, otherwise patch correlation can lock onto the wrong band.
double figure_intensity(const Vec2& p, const std::array<Vec2, kNumJoints>& joints,
                        double torso_len, int part_salt) {
    double best = 0.0;
    for (int i = 0; i < 12; ++i) {
        const PartDef& part = kFigureParts[i];
        Vec2 a = joints[static_cast<size_t>(part.a)];
        Vec2 b = (i == 1) ? midpoint(joints[static_cast<size_t>(JointId::LHip)],
                                     joints[static_cast<size_t>(JointId::RHip)])
                          : joints[static_cast<size_t>(part.b)];
        double along = 0;
        double d = dist_to_segment(p, a, b, along);
        double hw = part.halfwidth_frac * torso_len;
        double cov = std::clamp((hw + 0.75 - d) / 1.5, 0.0, 1.0);
        if (cov <= 0.0) continue;
        double arc = along * (b - a).norm();
        double phase = 1.7 * (i + 1 + part_salt);
        double band = 0.70 + 0.18 * std::cos(kTwoPi * arc / 3.5 + phase) +
                      0.12 * std::cos(kTwoPi * arc / 8.13 + 0.9 * phase);
        double cross = 1.0 - 0.30 * std::min(1.0, (d / std::max(hw, 0.5)) * (d / std::max(hw, 0.5)));
        best = std::max(best, cov * part.shade * band * cross);
    }
    // hands and feet: discs extending each forearm and shin, rigid with the
    // joint so extremity patches carry unique trackable structure
    struct Extremity {
        JointId from, tip;
        double shade;
    };
    static const Extremity kExtremities[4] = {
        {JointId::LElbow, JointId::LWrist, 1.00},
        {JointId::RElbow, JointId::RWrist, 0.90},
        {JointId::LKnee, JointId::LAnkle, 0.95},
        {JointId::RKnee, JointId::RAnkle, 0.85},
    };
    for (const auto& e : kExtremities) {
        Vec2 from = joints[static_cast<size_t>(e.from)];
        Vec2 tip = joints[static_cast<size_t>(e.tip)];
        Vec2 dir = tip - from;
        double len = dir.norm();
        if (len < 1e-9) continue;
        Vec2 center = tip + dir * (0.10 * torso_len / len);
        double r = 0.08 * torso_len;
        double d = (p - center).norm();
        double cov = std::clamp((r + 0.75 - d) / 1.5, 0.0, 1.0);
        if (cov > 0.0) {
            double shade = e.shade * (0.85 + 0.15 * std::cos(0.9 * (p.x - center.x) +
                                                             1.3 * (p.y - center.y)));
            best = std::max(best, cov * shade);
        }
    }
    return best;
}

PoseAnnotation make_annotation(const std::array<Vec2, kNumJoints>& joints, int frame,
                               int person_id, int activity, double yaw_deg) {
    PoseAnnotation a;
    a.frame = frame;
    a.person_id = person_id;
    a.activity_label = activity;
    a.torso_rotation = TorsoRotation{yaw_deg, 0.0, 0.0};
    for (int j = 0; j < kNumJoints; ++j) a.joints[static_cast<size_t>(j)] = joints[static_cast<size_t>(j)];
    return a;
}

}  // namespace

const char* motif_name(Motif m) {
    switch (m) {
        case Motif::TranslatingBlob: return "translating-blob";
        case Motif::OscillatingLimbFigure: return "oscillating-limb-figure";
        case Motif::RotatingTexture: return "rotating-texture";
        case Motif::StaticTextured: return "static-textured";
        case Motif::TwoFigureScene: return "two-figure-scene";
    }
    return "static-textured";
}

std::optional<Motif> motif_from_name(const std::string& s) {
    for (Motif m : {Motif::TranslatingBlob, Motif::OscillatingLimbFigure, Motif::RotatingTexture,
                    Motif::StaticTextured, Motif::TwoFigureScene})
        if (s == motif_name(m)) return m;
    return std::nullopt;
}

SyntheticSpec SyntheticSpec::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("synthetic spec: ") + e.what());
    }
    SyntheticSpec s;
    auto m = motif_from_name(j.value("motif", "static-textured"));
    if (!m) throw InvalidSpec("unknown motif '" + j.value("motif", "") + "'");
    s.motif = *m;
    s.width = j.value("width", 64);
    s.height = j.value("height", 64);
    s.frames = j.value("frames", 45);
    s.seed = j.value("seed", 0ull);
    if (j.contains("params"))
        for (const auto& [k, v] : j["params"].items()) s.params[k] = v.get<double>();
    return s;
}

std::string SyntheticSpec::to_json_text() const {
    nlohmann::json j = {{"motif", motif_name(motif)}, {"width", width},   {"height", height},
                        {"frames", frames},           {"seed", seed},     {"params", params}};
    return j.dump();
}

std::array<Vec2, kNumJoints> figure_joints(const FigureParams& p, int frame) {
    const double T = p.torso_len;
    const double s = std::cos(deg2rad(p.yaw_deg));
    const double ph = kTwoPi * frame / p.period + p.phase;

    std::array<Vec2, kNumJoints> j{};
    Vec2 C{p.cx, p.cy};
    Vec2 neck = C + Vec2{0, -T};
    double hb = deg2rad(p.head_bob_deg) * std::sin(ph);
    j[static_cast<size_t>(JointId::Neck)] = neck;
    j[static_cast<size_t>(JointId::Head)] = neck + Vec2{0.40 * T * std::sin(hb) * s, -0.40 * T * std::cos(hb)};
    for (int side = 0; side < 2; ++side) {
        double q = side == 0 ? -1.0 : 1.0;
        double arm_ph = ph + (q > 0 ? kPi : 0.0);
        double leg_ph = ph + (q > 0 ? 0.0 : kPi);
        Vec2 shoulder = neck + Vec2{q * 0.26 * T * s, 0.10 * T};
        Vec2 hip = C + Vec2{q * 0.16 * T * s, 0};
        double alpha = deg2rad(p.shoulder_swing_deg) * std::sin(arm_ph);
        Vec2 elbow = shoulder + Vec2{q * 0.34 * T * std::sin(alpha) * s, 0.34 * T * std::cos(alpha)};
        double beta = deg2rad(p.elbow_swing_deg) * std::sin(arm_ph + 0.9);
        Vec2 wrist = elbow + Vec2{q * 0.30 * T * std::sin(alpha + beta) * s,
                                  0.30 * T * std::cos(alpha + beta)};
        double gamma = deg2rad(p.hip_swing_deg) * std::sin(leg_ph);
        Vec2 knee = hip + Vec2{q * 0.42 * T * std::sin(gamma) * s, 0.42 * T * std::cos(gamma)};
        double kappa = deg2rad(p.knee_swing_deg) * (0.5 + 0.5 * std::sin(leg_ph + 1.0));
        Vec2 ankle = knee + Vec2{q * 0.40 * T * std::sin(gamma + kappa) * s,
                                 0.40 * T * std::cos(gamma + kappa)};
        if (side == 0) {
            j[static_cast<size_t>(JointId::LShoulder)] = shoulder;
            j[static_cast<size_t>(JointId::LElbow)] = elbow;
            j[static_cast<size_t>(JointId::LWrist)] = wrist;
            j[static_cast<size_t>(JointId::LHip)] = hip;
            j[static_cast<size_t>(JointId::LKnee)] = knee;
            j[static_cast<size_t>(JointId::LAnkle)] = ankle;
        } else {
            j[static_cast<size_t>(JointId::RShoulder)] = shoulder;
            j[static_cast<size_t>(JointId::RElbow)] = elbow;
            j[static_cast<size_t>(JointId::RWrist)] = wrist;
            j[static_cast<size_t>(JointId::RHip)] = hip;
            j[static_cast<size_t>(JointId::RKnee)] = knee;
            j[static_cast<size_t>(JointId::RAnkle)] = ankle;
        }
    }
    return j;
}

FigureParams figure_params_from_spec(const SyntheticSpec& spec, int person) {
    Rng rng(spec.seed * 1315423911ull + 0x5bd1e995ull * static_cast<uint64_t>(person + 1));
    FigureParams p;
    double base_x = spec.motif == Motif::TwoFigureScene ? (person == 0 ? 0.30 : 0.70) : 0.5;
    p.cx = spec.param("center_x_frac", base_x) * spec.width;
    p.cy = spec.param("center_y_frac", 0.58) * spec.height;
    p.torso_len = spec.param("torso_frac", spec.motif == Motif::TwoFigureScene ? 0.24 : 0.30) *
                  std::min(spec.width, spec.height);
    p.period = spec.param("period", 24.0);
    p.phase = spec.param("phase", rng.uniform(0.0, kTwoPi));
    p.yaw_deg = spec.param("yaw_deg", rng.uniform(-45.0, 45.0));
    p.shoulder_swing_deg = spec.param("shoulder_swing_deg", 25.0);
    p.elbow_swing_deg = spec.param("elbow_swing_deg", 20.0);
    p.hip_swing_deg = spec.param("hip_swing_deg", 18.0);
    p.knee_swing_deg = spec.param("knee_swing_deg", 12.0);
    p.head_bob_deg = spec.param("head_bob_deg", 5.0);
    if (p.period <= 0) throw InvalidSpec("period must be positive");
    return p;
}

namespace {

SyntheticClip gen_translating_blob(const SyntheticSpec& spec) {
    const int w = spec.width, h = spec.height, n = spec.frames;
    Vec2 pan{spec.param("vx", 2.0), spec.param("vy", 1.0)};
    Vec2 obj{spec.param("object_vx", 0.0), spec.param("object_vy", 0.0)};
    double radius = spec.param("blob_radius", 9.0);
    if (std::max(std::abs(pan.x) + std::abs(obj.x), std::abs(pan.y) + std::abs(obj.y)) > 8.0)
        throw InvalidSpec("blob speed above 8 px/frame");

    Vec2 blob_v = pan + obj;
    // the blob reflects at frame margins so it stays visible at any speed
    double margin = radius + 3.0;
    if (radius > 0 && (2.0 * margin >= w || 2.0 * margin >= h))
        throw InvalidSpec("blob radius too large for the frame");
    auto reflect = [margin](double p, double extent) {
        double lo = margin, span = extent - 2.0 * margin;
        if (span <= 0) return extent / 2.0;
        double m = std::fmod(p - lo, 2.0 * span);
        if (m < 0) m += 2.0 * span;
        return lo + (m < span ? m : 2.0 * span - m);
    };
    Vec2 c0{w / 2.0, h / 2.0};

    ValueNoise bg(spec.seed, 9.0);
    ValueNoise fg(spec.seed + 101, 5.0);
    std::vector<Frame> frames;
    frames.reserve(static_cast<size_t>(n));
    BodyMask mask = BodyMask::empty(0, n, w, h);
    for (int t = 0; t < n; ++t) {
        Frame f(w, h);
        Vec2 c{reflect(c0.x + blob_v.x * t, w), reflect(c0.y + blob_v.y * t, h)};
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double v = bg(x - pan.x * t, y - pan.y * t);
                double d = std::hypot(x - c.x, y - c.y);
                if (d < radius + 1.0) {
                    double cov = std::clamp(radius + 0.5 - d, 0.0, 1.0);
                    double blob = 0.35 + 0.65 * fg(x - c.x + 50.0, y - c.y + 50.0);
                    v = v * (1 - cov) + blob * cov;
                }
                f.at(x, y) = quantize(v);
                // the mask includes the soft edge and its gradient support:
                // appearance out to radius + 2.5 moves with the object
                if (d <= radius + 2.5)
                    mask.masks[static_cast<size_t>(t)][static_cast<size_t>(y) * w + x] = 1;
            }
        frames.push_back(std::move(f));
    }
    SyntheticClip out;
    out.clip = VideoClip(std::move(frames));
    out.object_mask = std::move(mask);
    out.scene_velocity = pan;
    return out;
}

SyntheticClip gen_rotating_texture(const SyntheticSpec& spec) {
    const int w = spec.width, h = spec.height, n = spec.frames;
    double omega = spec.param("ang_velocity", 0.045);
    double radius = spec.param("disc_radius_frac", 0.38) * std::min(w, h);
    double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;

    ValueNoise bg(spec.seed, 9.0);
    ValueNoise disc(spec.seed + 202, 7.0);
    std::vector<Frame> frames;
    frames.reserve(static_cast<size_t>(n));
    BodyMask mask = BodyMask::empty(0, n, w, h);
    for (int t = 0; t < n; ++t) {
        double ang = -omega * t;  // inverse rotation for sampling
        double ca = std::cos(ang), sa = std::sin(ang);
        Frame f(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double dx = x - cx, dy = y - cy;
                double d = std::hypot(dx, dy);
                double v;
                if (d < radius) {
                    double rx = ca * dx - sa * dy, ry = sa * dx + ca * dy;
                    v = 0.15 + 0.75 * disc(rx + 200.0, ry + 200.0);
                    mask.masks[static_cast<size_t>(t)][static_cast<size_t>(y) * w + x] = 1;
                } else {
                    v = 0.10 + 0.55 * bg(x, y);
                }
                f.at(x, y) = quantize(v);
            }
        frames.push_back(std::move(f));
    }
    SyntheticClip out;
    out.clip = VideoClip(std::move(frames));
    out.object_mask = std::move(mask);
    out.scene_velocity = {0, 0};
    return out;
}

SyntheticClip gen_static_textured(const SyntheticSpec& spec) {
    const int w = spec.width, h = spec.height;
    ValueNoise bg(spec.seed, 9.0);
    Frame f(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) f.at(x, y) = quantize(0.08 + 0.84 * bg(x, y));
    std::vector<Frame> frames(static_cast<size_t>(spec.frames), f);
    SyntheticClip out;
    out.clip = VideoClip(std::move(frames));
    out.scene_velocity = {0, 0};
    return out;
}

SyntheticClip gen_figures(const SyntheticSpec& spec, int n_people) {
    const int w = spec.width, h = spec.height, n = spec.frames;
    ValueNoise bg(spec.seed, 9.0);
    int activity = static_cast<int>(spec.param("activity", 0.0));

    std::vector<FigureParams> figs;
    for (int p = 0; p < n_people; ++p) figs.push_back(figure_params_from_spec(spec, p));

    std::vector<Frame> frames;
    frames.reserve(static_cast<size_t>(n));
    SyntheticClip out;
    for (int t = 0; t < n; ++t) {
        std::vector<std::array<Vec2, kNumJoints>> joints;
        for (int p = 0; p < n_people; ++p) joints.push_back(figure_joints(figs[static_cast<size_t>(p)], t));

        Frame f(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double v = 0.06 + 0.22 * bg(x, y);
                for (int p = 0; p < n_people; ++p) {
                    double fg = figure_intensity({static_cast<double>(x), static_cast<double>(y)},
                                                 joints[static_cast<size_t>(p)],
                                                 figs[static_cast<size_t>(p)].torso_len, 3 * p);
                    v = std::max(v, 0.30 + 0.65 * fg * (p == 0 ? 1.0 : 0.93));
                }
                f.at(x, y) = quantize(v);
            }
        frames.push_back(std::move(f));

        for (int p = 0; p < n_people; ++p) {
            for (const auto& jp : joints[static_cast<size_t>(p)])
                if (jp.x < 0 || jp.y < 0 || jp.x > w - 1.0 || jp.y > h - 1.0)
                    throw InvalidSpec("figure joint leaves the frame; shrink torso_frac");
            PoseAnnotation a = make_annotation(joints[static_cast<size_t>(p)], t, p, activity,
                                               figs[static_cast<size_t>(p)].yaw_deg);
            // joints of the rear figure covered by the front figure's parts
            // are marked occluded (two-figure scenes only)
            if (n_people > 1 && p == 0) {
                for (int jj = 0; jj < kNumJoints; ++jj) {
                    double cover = figure_intensity(joints[0][static_cast<size_t>(jj)],
                                                    joints[1], figs[1].torso_len, 3);
                    if (cover > 0.4) a.occluded[static_cast<size_t>(jj)] = true;
                }
            }
            out.annotations.push_back(std::move(a));
        }
    }
    out.clip = VideoClip(std::move(frames));
    out.scene_velocity = {0, 0};
    out.n_people = n_people;
    return out;
}

}  // namespace

SyntheticClip generate_synthetic_clip(const SyntheticSpec& spec) {
    if (spec.width < 16 || spec.height < 16) throw InvalidSpec("frame size below 16 px");
    if (spec.frames < 2) throw InvalidSpec("need at least 2 frames");
    switch (spec.motif) {
        case Motif::TranslatingBlob: return gen_translating_blob(spec);
        case Motif::RotatingTexture: return gen_rotating_texture(spec);
        case Motif::StaticTextured: return gen_static_textured(spec);
        case Motif::OscillatingLimbFigure: return gen_figures(spec, 1);
        case Motif::TwoFigureScene: return gen_figures(spec, 2);
    }
    throw InvalidSpec("unknown motif");
}

}  // namespace trajfuse
