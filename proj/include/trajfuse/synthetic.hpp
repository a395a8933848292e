#pragma once

#include <map>
#include <optional>
#include <string>

#include "trajfuse/media.hpp"
#include "trajfuse/pose.hpp"

namespace trajfuse {

enum class Motif {
    TranslatingBlob,
    OscillatingLimbFigure,
    RotatingTexture,
    StaticTextured,
    TwoFigureScene,
};
const char* motif_name(Motif m);
std::optional<Motif> motif_from_name(const std::string& s);

// Deterministic synthetic clip recipe. Identical spec + seed reproduce the
// clip bit for bit; frames are quantized to the 8-bit grid so a PGM
// round-trip is lossless.
struct SyntheticSpec {
    Motif motif = Motif::StaticTextured;
    int width = 64;
    int height = 64;
    int frames = 45;
    uint64_t seed = 0;
    std::map<std::string, double> params;  // motif-specific overrides

    double param(const std::string& key, double dflt) const {
        auto it = params.find(key);
        return it == params.end() ? dflt : it->second;
    }

    static SyntheticSpec from_json_text(const std::string& text);
    std::string to_json_text() const;
};

// Supported params per motif (all optional):
//   translating-blob:  vx, vy (scene pan, default 2,1), object_vx, object_vy
//                      (blob motion relative to the scene, default 0),
//                      blob_radius (default 9)
//   oscillating-limb-figure / two-figure-scene:
//                      period (frames, default 24), phase (radians, seeded),
//                      yaw_deg (seeded in [-45,45]), torso_frac (default 0.30),
//                      shoulder_swing_deg (25), elbow_swing_deg (20),
//                      hip_swing_deg (18), knee_swing_deg (12),
//                      head_bob_deg (5), center_x_frac, center_y_frac
//   rotating-texture:  ang_velocity (rad/frame, default 0.045),
//                      disc_radius_frac (default 0.38)
//   static-textured:   (none)

struct SyntheticClip {
    VideoClip clip;
    std::vector<PoseAnnotation> annotations;  // figure motifs only
    std::optional<BodyMask> object_mask;      // moving-object motifs only
    Vec2 scene_velocity;                      // true global motion, px/frame
    int n_people = 0;
};

SyntheticClip generate_synthetic_clip(const SyntheticSpec& spec);

// The figure kinematics, exposed so tests can evaluate the formula
// independently of the renderer.
//
// With T = torso_frac * min(w,h), hip midpoint C = (cx, cy), yaw scale
// s = cos(yaw), phase sums p(t) = 2*pi*t/period + phase and side sign
// q in {-1 (left), +1 (right)}:
//   neck       = C + (0, -T)
//   head       = neck + 0.40*T * (sin(hb)*s, -cos(hb)),    hb = head_bob * sin(p(t))
//   shoulder_q = neck + (q*0.26*T*s, 0.10*T)
//   hip_q      = C + (q*0.16*T*s, 0)
//   alpha_q(t) = shoulder_swing * sin(p(t) + (q>0 ? pi : 0))
//   elbow_q    = shoulder_q + 0.34*T * (q*sin(alpha_q)*s, cos(alpha_q))
//   beta_q(t)  = elbow_swing * sin(p(t) + 0.9 + (q>0 ? pi : 0))
//   wrist_q    = elbow_q + 0.30*T * (q*sin(alpha_q+beta_q)*s, cos(alpha_q+beta_q))
//   gamma_q(t) = hip_swing * sin(p(t) + (q>0 ? 0 : pi))
//   knee_q     = hip_q + 0.42*T * (q*sin(gamma_q)*s, cos(gamma_q))
//   kappa_q(t) = knee_swing * (0.5 + 0.5*sin(p(t) + 1.0 + (q>0 ? 0 : pi)))
//   ankle_q    = knee_q + 0.40*T * (q*sin(gamma_q+kappa_q)*s, cos(gamma_q+kappa_q))
// All swing angles are given in degrees and converted to radians inside.
struct FigureParams {
    double cx = 0, cy = 0;   // hip midpoint, px
    double torso_len = 0;    // T, px
    double yaw_deg = 0;
    double phase = 0;
    double period = 24;
    double shoulder_swing_deg = 25;
    double elbow_swing_deg = 20;
    double hip_swing_deg = 18;
    double knee_swing_deg = 12;
    double head_bob_deg = 5;
};

std::array<Vec2, kNumJoints> figure_joints(const FigureParams& p, int frame);

// Figure parameters the generator derives from a spec (per person index).
FigureParams figure_params_from_spec(const SyntheticSpec& spec, int person);

}  // namespace trajfuse
