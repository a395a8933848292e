#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "trajfuse/pose.hpp"
#include "trajfuse/synthetic.hpp"

using namespace trajfuse;
namespace fs = std::filesystem;

namespace {

PoseAnnotation upright_pose(double cx, double cy, double torso, int frame = 0) {
    PoseAnnotation a;
    a.frame = frame;
    auto set = [&](JointId j, double x, double y) {
        a.joints[static_cast<size_t>(j)] = Vec2{x, y};
    };
    set(JointId::Head, cx, cy - 1.4 * torso);
    set(JointId::Neck, cx, cy - torso);
    set(JointId::LShoulder, cx - 0.26 * torso, cy - 0.9 * torso);
    set(JointId::RShoulder, cx + 0.26 * torso, cy - 0.9 * torso);
    set(JointId::LElbow, cx - 0.30 * torso, cy - 0.55 * torso);
    set(JointId::RElbow, cx + 0.30 * torso, cy - 0.55 * torso);
    set(JointId::LWrist, cx - 0.32 * torso, cy - 0.25 * torso);
    set(JointId::RWrist, cx + 0.32 * torso, cy - 0.25 * torso);
    set(JointId::LHip, cx - 0.16 * torso, cy);
    set(JointId::RHip, cx + 0.16 * torso, cy);
    set(JointId::LKnee, cx - 0.18 * torso, cy + 0.45 * torso);
    set(JointId::RKnee, cx + 0.18 * torso, cy + 0.45 * torso);
    set(JointId::LAnkle, cx - 0.18 * torso, cy + 0.9 * torso);
    set(JointId::RAnkle, cx + 0.18 * torso, cy + 0.9 * torso);
    return a;
}

}  // namespace

TEST_CASE("annotation files round-trip with flags intact") {
    PoseAnnotation a = upright_pose(30, 40, 15);
    a.person_id = 2;
    a.activity_label = 5;
    a.occluded[static_cast<size_t>(JointId::LElbow)] = true;
    a.joints[static_cast<size_t>(JointId::LWrist)].reset();
    a.joints[static_cast<size_t>(JointId::RWrist)].reset();
    a.torso_rotation = TorsoRotation{35, 0, 0};

    fs::path file = fs::temp_directory_path() / "trajfuse_ann.jsonl";
    save_annotations({a}, file, 64, 80);
    auto back = load_annotations(file);
    REQUIRE(back.size() == 1);
    CHECK(back[0].person_id == 2);
    CHECK(back[0].activity_label == 5);
    CHECK(back[0].occlusion_count() == 1);
    CHECK(back[0].truncation_count() == 2);
    REQUIRE(back[0].torso_rotation.has_value());
    CHECK(back[0].torso_rotation->yaw == doctest::Approx(35.0));
    CHECK(back[0].joints[static_cast<size_t>(JointId::Head)]->x == doctest::Approx(30.0));
}

TEST_CASE("fully visible record parses with zero counts") {
    fs::path file = fs::temp_directory_path() / "trajfuse_ann_full.jsonl";
    save_annotations({upright_pose(30, 40, 15)}, file);
    auto back = load_annotations(file);
    REQUIRE(back.size() == 1);
    CHECK(back[0].occlusion_count() == 0);
    CHECK(back[0].truncation_count() == 0);
}

TEST_CASE("malformed coordinates raise ParseError") {
    fs::path file = fs::temp_directory_path() / "trajfuse_ann_bad.jsonl";
    {
        std::ofstream out(file);
        out << R"({"frame":0,"joints":{"head":{"x":"NaN","y":3}}})" << "\n";
    }
    CHECK_THROWS_AS(load_annotations(file), ParseError);
}

TEST_CASE("out-of-bounds joints raise InvariantViolation when bounds are known") {
    fs::path file = fs::temp_directory_path() / "trajfuse_ann_oob.jsonl";
    {
        std::ofstream out(file);
        out << R"({"frame":0,"width":32,"height":32,"joints":{"head":{"x":40,"y":3}}})" << "\n";
    }
    CHECK_THROWS_AS(load_annotations(file), InvariantViolation);
}

TEST_CASE("window tiling matches the closed form") {
    for (int n : {7, 8, 9, 10, 20, 45}) {
        auto starts = pose_window_starts(n);
        CHECK(starts.size() == static_cast<size_t>((n - kPoseWindow) / kPoseStep + 1));
        for (size_t i = 0; i < starts.size(); ++i)
            CHECK(starts[i] == static_cast<int>(i) * kPoseStep);
    }
    CHECK(pose_window_starts(6).empty());
}

TEST_CASE("tracking a static clip keeps joints in place") {
    SyntheticSpec spec;
    spec.motif = Motif::OscillatingLimbFigure;
    spec.seed = 19;
    spec.params["shoulder_swing_deg"] = 0;
    spec.params["elbow_swing_deg"] = 0;
    spec.params["hip_swing_deg"] = 0;
    spec.params["knee_swing_deg"] = 0;
    spec.params["head_bob_deg"] = 0;
    SyntheticClip sc = generate_synthetic_clip(spec);
    const PoseAnnotation& key = sc.annotations[10];
    JointTrack track = track_joints(sc.clip, key);
    for (int j = 0; j < kNumJoints; ++j) {
        REQUIRE(track.joints[static_cast<size_t>(j)].has_value());
        for (int t = 0; t < kPoseWindow; ++t) {
            Vec2 p = (*track.joints[static_cast<size_t>(j)])[static_cast<size_t>(t)];
            CHECK(std::abs(p.x - key.joints[static_cast<size_t>(j)]->x) <= 0.5);
            CHECK(std::abs(p.y - key.joints[static_cast<size_t>(j)]->y) <= 0.5);
        }
    }
}

TEST_CASE("tracking follows the moving wrist within two pixels") {
    // oracle: generator kinematics give the true wrist path
    SyntheticSpec spec;
    spec.motif = Motif::OscillatingLimbFigure;
    spec.seed = 23;
    spec.width = 96;
    spec.height = 96;
    spec.params["period"] = 30;
    SyntheticClip sc = generate_synthetic_clip(spec);
    const PoseAnnotation& key = sc.annotations[12];
    JointTrack track = track_joints(sc.clip, key);
    int start = track.start_frame;
    for (int j : {static_cast<int>(JointId::RWrist), static_cast<int>(JointId::LWrist)}) {
        REQUIRE(track.joints[static_cast<size_t>(j)].has_value());
        for (int t = 0; t < kPoseWindow; ++t) {
            Vec2 truth = *sc.annotations[static_cast<size_t>(start + t)].joints[static_cast<size_t>(j)];
            Vec2 got = (*track.joints[static_cast<size_t>(j)])[static_cast<size_t>(t)];
            CHECK((got - truth).norm() <= 2.0);
        }
    }
}

TEST_CASE("absent joints stay absent across the window") {
    SyntheticSpec spec;
    spec.motif = Motif::OscillatingLimbFigure;
    spec.seed = 19;
    SyntheticClip sc = generate_synthetic_clip(spec);
    PoseAnnotation key = sc.annotations[10];
    key.joints[static_cast<size_t>(JointId::LAnkle)].reset();
    key.joints[static_cast<size_t>(JointId::RAnkle)].reset();
    JointTrack track = track_joints(sc.clip, key);
    CHECK_FALSE(track.joints[static_cast<size_t>(JointId::LAnkle)].has_value());
    CHECK_FALSE(track.joints[static_cast<size_t>(JointId::RAnkle)].has_value());
    CHECK(track.joints[static_cast<size_t>(JointId::Head)].has_value());
}

TEST_CASE("key frame outside the clip raises") {
    SyntheticSpec spec;
    spec.motif = Motif::StaticTextured;
    spec.seed = 2;
    SyntheticClip sc = generate_synthetic_clip(spec);
    PoseAnnotation a = upright_pose(30, 40, 15, 100);
    CHECK_THROWS_AS(track_joints(sc.clip, a), KeyFrameOutOfRange);
}

TEST_CASE("static track yields zero temporal differences") {
    JointTrack track = replicate_pose(upright_pose(30, 40, 15), 0);
    PoseDescriptors d = compute_pose_descriptors(track);
    REQUIRE(!d.temporal_diffs.empty());
    for (const auto& v : d.temporal_diffs)
        for (float x : v) CHECK(x == 0.0f);
}

TEST_CASE("a fully extended arm reads 180 degrees at the elbow") {
    PoseAnnotation a = upright_pose(40, 40, 16);
    // collinear shoulder-elbow-wrist
    a.joints[static_cast<size_t>(JointId::RShoulder)] = Vec2{44, 24};
    a.joints[static_cast<size_t>(JointId::RElbow)] = Vec2{50, 24};
    a.joints[static_cast<size_t>(JointId::RWrist)] = Vec2{56, 24};
    PoseDescriptors d = compute_pose_descriptors(replicate_pose(a, 0));
    // triple order: L arm, R arm, L leg, R leg, torso-neck
    REQUIRE(d.joint_angles.size() == 5);
    for (int t = 0; t < kPoseWindow; ++t)
        CHECK(d.joint_angles[1][static_cast<size_t>(t)] == doctest::Approx(180.0).epsilon(1e-9));
}

TEST_CASE("a thirty-degree forearm swing shows up as the elbow-angle delta") {
    // oracle: generator kinematics with only the elbow oscillating
    SyntheticSpec spec;
    spec.motif = Motif::OscillatingLimbFigure;
    spec.seed = 29;
    spec.params["shoulder_swing_deg"] = 0;
    spec.params["elbow_swing_deg"] = 30;
    spec.params["hip_swing_deg"] = 0;
    spec.params["knee_swing_deg"] = 0;
    spec.params["head_bob_deg"] = 0;
    spec.params["yaw_deg"] = 0;   // keep angles undistorted by foreshortening
    spec.params["phase"] = -0.9;  // beta(t) = 30 sin(2 pi t / P)
    spec.params["period"] = 24;
    SyntheticClip sc = generate_synthetic_clip(spec);

    std::vector<const PoseAnnotation*> frames;
    for (int t = 0; t < kPoseWindow; ++t) frames.push_back(&sc.annotations[static_cast<size_t>(t)]);
    JointTrack track = joint_track_from_annotations(frames, 0);
    PoseDescriptors d = compute_pose_descriptors(track);
    REQUIRE(d.joint_angles.size() == 5);
    // left arm (q=-1, phase offset 0): elbow angle = 180 - |30 sin(2 pi t/24)|
    double delta = std::abs(d.joint_angles[0][6] - d.joint_angles[0][0]);
    CHECK(delta == doctest::Approx(30.0).epsilon(0.07));
}

TEST_CASE("descriptors are invariant to uniform scaling") {
    PoseAnnotation a = upright_pose(100, 120, 20);
    PoseAnnotation b = upright_pose(0, 0, 0);
    for (int j = 0; j < kNumJoints; ++j)
        b.joints[static_cast<size_t>(j)] = Vec2{a.joints[static_cast<size_t>(j)]->x * 3.5,
                                                a.joints[static_cast<size_t>(j)]->y * 3.5};
    PoseDescriptors da = compute_pose_descriptors(replicate_pose(a, 0));
    PoseDescriptors db = compute_pose_descriptors(replicate_pose(b, 0));
    REQUIRE(da.relative_positions.size() == db.relative_positions.size());
    for (size_t i = 0; i < da.relative_positions.size(); ++i)
        for (size_t k = 0; k < da.relative_positions[i].size(); ++k)
            CHECK(std::abs(da.relative_positions[i][k] - db.relative_positions[i][k]) <= 1e-6);
    REQUIRE(da.joint_angles.size() == db.joint_angles.size());
    for (size_t i = 0; i < da.joint_angles.size(); ++i)
        for (size_t k = 0; k < da.joint_angles[i].size(); ++k)
            CHECK(std::abs(da.joint_angles[i][k] - db.joint_angles[i][k]) <= 1e-4);
}

TEST_CASE("absent joints never contribute descriptor entries") {
    PoseAnnotation a = upright_pose(40, 40, 16);
    a.joints[static_cast<size_t>(JointId::LWrist)].reset();
    a.joints[static_cast<size_t>(JointId::RAnkle)].reset();
    PoseDescriptors d = compute_pose_descriptors(replicate_pose(a, 0));
    // 14 joints minus neck minus two absent
    CHECK(d.relative_positions.size() == 11);
    CHECK(d.temporal_diffs.size() == 11);
    // left arm and right leg triples drop out
    CHECK(d.joint_angles.size() == 3);
}

TEST_CASE("degenerate torso raises") {
    PoseAnnotation a = upright_pose(40, 40, 0.2);
    CHECK_THROWS_AS(compute_pose_descriptors(replicate_pose(a, 0)), DegenerateTorso);
    PoseAnnotation b = upright_pose(40, 40, 16);
    b.joints[static_cast<size_t>(JointId::Neck)].reset();
    CHECK_THROWS_AS(compute_pose_descriptors(replicate_pose(b, 0)), DegenerateTorso);
}

TEST_CASE("body mask covers all joint pixels") {
    PoseAnnotation a = upright_pose(32, 40, 16);
    BodyMask mask = build_body_mask({a}, 64, 80);
    for (int j = 0; j < kNumJoints; ++j) {
        Vec2 p = *a.joints[static_cast<size_t>(j)];
        CHECK(mask.at(0, static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y))));
    }
}

TEST_CASE("a frame-filling figure covers at least ninety percent") {
    // figure far larger than the frame: the visible region is crossed by
    // wide part rectangles
    PoseAnnotation a = upright_pose(12, 20, 40);
    BodyMask mask = build_body_mask({a}, 24, 24);
    CHECK(mask.density(0) >= 0.9);
}

TEST_CASE("left-half figure leaves the right half empty") {
    PoseAnnotation a = upright_pose(16, 40, 14);
    BodyMask mask = build_body_mask({a}, 128, 80);
    int right_on = 0;
    for (int y = 0; y < 80; ++y)
        for (int x = 64; x < 128; ++x) right_on += mask.at(0, x, y);
    CHECK(right_on == 0);
}

TEST_CASE("frames without joints raise NoJoints") {
    PoseAnnotation a = upright_pose(32, 40, 16);
    PoseAnnotation empty;
    empty.frame = 1;
    CHECK_THROWS_AS(build_body_mask({a, empty}, 64, 80), NoJoints);
}

TEST_CASE("mask filtering keeps subsets and is idempotent") {
    SyntheticSpec spec;
    spec.motif = Motif::TranslatingBlob;
    spec.seed = 31;
    spec.frames = 20;
    SyntheticClip sc = generate_synthetic_clip(spec);
    DtConfig cfg;
    auto trajs = track_points(sc.clip, cfg);
    REQUIRE(!trajs.empty());

    BodyMask full = BodyMask::full(0, sc.clip.frame_count(), sc.clip.width(), sc.clip.height());
    auto kept = filter_trajectories_by_mask(trajs, full);
    CHECK(kept.size() == trajs.size());

    BodyMask none = BodyMask::empty(0, sc.clip.frame_count(), sc.clip.width(), sc.clip.height());
    CHECK(filter_trajectories_by_mask(trajs, none).empty());

    // left-half mask: survivors live wholly in the left half; oracle is an
    // independent per-point membership recheck
    BodyMask half = none;
    for (auto& m : half.masks)
        for (int y = 0; y < half.height; ++y)
            for (int x = 0; x < half.width / 2; ++x) m[static_cast<size_t>(y) * half.width + x] = 1;
    auto lefts = filter_trajectories_by_mask(trajs, half);
    CHECK(lefts.size() <= trajs.size());
    for (const auto& t : lefts)
        for (const auto& p : t.points) CHECK(std::lround(p.x) < half.width / 2);
    auto again = filter_trajectories_by_mask(lefts, half);
    CHECK(again.size() == lefts.size());
}

TEST_CASE("mask frames dump as loadable pgm files") {
    PoseAnnotation a = upright_pose(32, 40, 16);
    PoseAnnotation b = upright_pose(34, 40, 16, 1);
    BodyMask mask = build_body_mask({a, b}, 64, 80);
    fs::path dir = fs::temp_directory_path() / "trajfuse_mask_dump";
    fs::remove_all(dir);
    save_mask_frames(mask, dir);
    Frame f0 = load_pgm(dir / "mask_00000.pgm");
    REQUIRE(f0.width() == 64);
    REQUIRE(f0.height() == 80);
    for (int y = 0; y < 80; ++y)
        for (int x = 0; x < 64; ++x)
            CHECK((f0.at(x, y) == 1.0f) == mask.at(0, x, y));
}

TEST_CASE("noise injection relabels, jitters and drops joints deterministically") {
    std::vector<PoseAnnotation> anns;
    for (int f = 0; f < 10; ++f) {
        PoseAnnotation a = upright_pose(32, 40, 16, f);
        anns.push_back(a);
    }
    auto ps1 = inject_pose_noise(anns, 1.5, 0.2, 77, PoseSource::PS_M, 64, 80);
    auto ps2 = inject_pose_noise(anns, 1.5, 0.2, 77, PoseSource::PS_M, 64, 80);
    REQUIRE(ps1.size() == ps2.size());
    size_t dropped = 0;
    for (size_t i = 0; i < ps1.size(); ++i) {
        CHECK(ps1[i].source == PoseSource::PS_M);
        for (int j = 0; j < kNumJoints; ++j) {
            REQUIRE(ps1[i].joints[static_cast<size_t>(j)].has_value() ==
                    ps2[i].joints[static_cast<size_t>(j)].has_value());
            if (ps1[i].joints[static_cast<size_t>(j)]) {
                CHECK(ps1[i].joints[static_cast<size_t>(j)]->x ==
                      ps2[i].joints[static_cast<size_t>(j)]->x);
            } else {
                ++dropped;
            }
        }
    }
    CHECK(dropped > 0);
}
