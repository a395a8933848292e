#include "trajfuse/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace trajfuse {

const std::array<Method, 8> kAllMethods = {
    Method::DT,       Method::GT,
    Method::GT_T,     Method::PS_T,
    Method::PS_M,     Method::PSM_DT_FEATURES,
    Method::PSM_DT_CLASSIFIERS, Method::PSM_FILTER_DT,
};

const char* method_name(Method m) {
    switch (m) {
        case Method::DT: return "DT";
        case Method::GT: return "GT";
        case Method::GT_T: return "GT-T";
        case Method::PS_T: return "PS-T";
        case Method::PS_M: return "PS-M";
        case Method::PSM_DT_FEATURES: return "PSM+DT-features";
        case Method::PSM_DT_CLASSIFIERS: return "PSM+DT-classifiers";
        case Method::PSM_FILTER_DT: return "PSM-filter-DT";
    }
    return "DT";
}

std::optional<Method> method_from_name(const std::string& s) {
    for (Method m : kAllMethods)
        if (s == method_name(m)) return m;
    return std::nullopt;
}

bool method_uses_dt(Method m) {
    return m == Method::DT || m == Method::PSM_DT_FEATURES || m == Method::PSM_DT_CLASSIFIERS ||
           m == Method::PSM_FILTER_DT;
}

bool method_uses_pose(Method m) {
    return m == Method::GT || m == Method::GT_T || m == Method::PS_T || m == Method::PS_M ||
           m == Method::PSM_DT_FEATURES || m == Method::PSM_DT_CLASSIFIERS;
}

PoseSource method_pose_source(Method m) {
    switch (m) {
        case Method::GT: return PoseSource::GT;
        case Method::GT_T: return PoseSource::GT_T;
        case Method::PS_T: return PoseSource::PS_T;
        default: return PoseSource::PS_M;
    }
}

// --- manifest ---

RunManifest RunManifest::load(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open manifest " + file.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(std::string("manifest: ") + e.what());
    }
    RunManifest m;
    if (j.contains("dataset")) m.dataset_root = j["dataset"].get<std::string>();
    if (j.contains("method")) {
        auto meth = method_from_name(j["method"].get<std::string>());
        if (!meth) throw ParseError("unknown method '" + j["method"].get<std::string>() + "'");
        m.method = *meth;
    }
    m.seed = j.value("seed", 1ull);
    if (j.contains("out")) m.out_dir = j["out"].get<std::string>();

    if (j.contains("synthetic")) {
        const auto& s = j["synthetic"];
        m.clip_width = s.value("width", 64);
        m.clip_height = s.value("height", 64);
        m.clip_frames = s.value("frames", 45);
        for (const auto& c : s.value("suite", json::array())) {
            SuiteClass sc;
            sc.class_id = c.at("class_id").get<int>();
            auto motif = motif_from_name(c.at("motif").get<std::string>());
            if (!motif) throw ParseError("unknown motif in suite");
            sc.motif = *motif;
            sc.train = c.value("train", 0);
            sc.test = c.value("test", 0);
            if (c.contains("params"))
                for (const auto& [k, v] : c["params"].items()) sc.params[k] = v.get<double>();
            m.suite.push_back(std::move(sc));
        }
    }

    if (j.contains("config")) {
        const auto& c = j["config"];
        m.codebook_k = c.value("codebook_k", m.codebook_k);
        m.pose_codebook_k = c.value("pose_codebook_k", m.pose_codebook_k);
        m.kmeans.max_iters = c.value("kmeans_max_iters", m.kmeans.max_iters);
        m.kmeans.sample_cap = c.value("kmeans_sample_cap", m.kmeans.sample_cap);
        m.train.epochs = c.value("epochs", m.train.epochs);
        m.train.lambda = c.value("lambda", m.train.lambda);
        m.train.map.order_n = c.value("map_order", m.train.map.order_n);
        m.train.map.sampling_period = c.value("map_period", m.train.map.sampling_period);
        m.noise_sigma = c.value("noise_sigma", m.noise_sigma);
        m.noise_dropout = c.value("noise_dropout", m.noise_dropout);
        m.key_frame = c.value("key_frame", m.key_frame);
        m.allow_short = c.value("allow_short", m.allow_short);
        auto& d = m.dt;
        d.sample_stride = c.value("dt_stride", d.sample_stride);
        d.volume_size = c.value("dt_volume", d.volume_size);
        d.static_disp_threshold = c.value("dt_static_threshold", d.static_disp_threshold);
        d.erratic_disp_threshold = c.value("dt_erratic_threshold", d.erratic_disp_threshold);
        d.camera_residual_threshold =
            c.value("dt_camera_threshold", d.camera_residual_threshold);
    }
    m.train.seed = m.seed;
    return m;
}

std::string RunManifest::canonical_config_text() const {
    json suite_j = json::array();
    for (const auto& s : suite)
        suite_j.push_back({{"class_id", s.class_id},
                           {"motif", motif_name(s.motif)},
                           {"train", s.train},
                           {"test", s.test},
                           {"params", s.params}});
    json j = {
        {"method", method_name(method)},
        {"seed", seed},
        {"synthetic", {{"w", clip_width}, {"h", clip_height}, {"frames", clip_frames},
                       {"suite", suite_j}}},
        {"dt", {{"stride", dt.sample_stride}, {"volume", dt.volume_size},
                {"static", dt.static_disp_threshold}, {"erratic", dt.erratic_disp_threshold},
                {"camera", dt.camera_residual_threshold}}},
        {"codebook_k", codebook_k},
        {"pose_codebook_k", pose_codebook_k},
        {"epochs", train.epochs},
        {"lambda", train.lambda},
        {"map", {{"order", train.map.order_n}, {"period", train.map.sampling_period}}},
        {"noise", {{"sigma", noise_sigma}, {"dropout", noise_dropout}}},
        {"key_frame", key_frame},
        {"allow_short", allow_short},
    };
    return j.dump();
}

std::string RunManifest::config_hash() const { return hash_hex(fnv1a64(canonical_config_text())); }

// --- dataset index ---

DatasetIndex DatasetIndex::load(const fs::path& root) {
    std::ifstream in(root / "index.json");
    if (!in) throw IoError("missing dataset index under " + root.string());
    json j = json::parse(in);
    DatasetIndex idx;
    idx.width = j.value("width", 0);
    idx.height = j.value("height", 0);
    idx.frames = j.value("frames", 0);
    for (const auto& c : j.at("clips")) {
        ClipEntry e;
        e.id = c.at("id").get<std::string>();
        e.class_id = c.at("class_id").get<int>();
        e.split = c.at("split").get<std::string>();
        e.motif = c.value("motif", "");
        e.n_people = c.value("n_people", 0);
        e.fully_visible = c.value("fully_visible", false);
        e.dir = root / c.at("dir").get<std::string>();
        if (c.contains("gt_annotations") && !c["gt_annotations"].is_null())
            e.gt_annotations = root / c["gt_annotations"].get<std::string>();
        if (c.contains("ps_annotations") && !c["ps_annotations"].is_null())
            e.ps_annotations = root / c["ps_annotations"].get<std::string>();
        idx.clips.push_back(std::move(e));
    }
    return idx;
}

void DatasetIndex::save(const fs::path& root) const {
    json clips_j = json::array();
    for (const auto& e : clips) {
        json c = {
            {"id", e.id},         {"class_id", e.class_id},
            {"split", e.split},   {"motif", e.motif},
            {"n_people", e.n_people}, {"fully_visible", e.fully_visible},
            {"dir", fs::relative(e.dir, root).string()},
        };
        c["gt_annotations"] =
            e.gt_annotations ? json(fs::relative(*e.gt_annotations, root).string()) : json(nullptr);
        c["ps_annotations"] =
            e.ps_annotations ? json(fs::relative(*e.ps_annotations, root).string()) : json(nullptr);
        clips_j.push_back(std::move(c));
    }
    json j = {{"width", width}, {"height", height}, {"frames", frames}, {"clips", clips_j}};
    std::ofstream out(root / "index.json");
    if (!out) throw IoError("cannot write dataset index");
    out << j.dump(2) << "\n";
}

std::vector<std::pair<int, int>> DatasetIndex::train_sizes() const {
    std::map<int, int> counts;
    for (const auto& c : clips)
        if (c.split == "train") ++counts[c.class_id];
    return {counts.begin(), counts.end()};
}

RunPaths RunPaths::for_run(const RunManifest& m) {
    RunPaths p;
    fs::path base = m.out_dir / method_name(m.method);
    p.features_dir = base / "features";
    p.codebook_dir = base / "codebooks";
    p.bow_dir = base / "bow";
    p.model_file = base / "model.bin";
    p.predictions_file = base / "predictions.csv";
    p.eval_file = base / "eval.json";
    p.analysis_dir = m.out_dir / "analysis";
    p.report_dir = m.out_dir / "report";
    return p;
}

// --- synth-gen ---

namespace {

uint64_t clip_seed(uint64_t run_seed, int class_id, int clip_idx) {
    std::string key = "clip/" + std::to_string(run_seed) + "/" + std::to_string(class_id) + "/" +
                      std::to_string(clip_idx);
    return fnv1a64(key);
}

// per-clip motion parameter jitter so clips of one class are not replicas
void jitter_params(SyntheticSpec& spec, Motif motif, Rng& rng) {
    auto set_if_absent = [&spec](const std::string& k, double v) {
        if (!spec.params.count(k)) spec.params[k] = v;
    };
    switch (motif) {
        case Motif::TranslatingBlob: {
            double speed = rng.uniform(1.5, 3.0);
            double angle = rng.uniform(0.0, 6.283185307179586);
            set_if_absent("vx", std::round(speed * std::cos(angle) * 4.0) / 4.0);
            set_if_absent("vy", std::round(speed * std::sin(angle) * 4.0) / 4.0);
            // the blob always moves against the pan, otherwise the whole clip
            // is camera-consistent and pruning leaves nothing
            double ospeed = rng.uniform(0.6, 1.1);
            double oangle = rng.uniform(0.0, 6.283185307179586);
            set_if_absent("object_vx", std::round(ospeed * std::cos(oangle) * 8.0) / 8.0);
            set_if_absent("object_vy", std::round(ospeed * std::sin(oangle) * 8.0) / 8.0);
            break;
        }
        case Motif::RotatingTexture:
            set_if_absent("ang_velocity", rng.uniform(0.035, 0.06));
            break;
        case Motif::OscillatingLimbFigure:
        case Motif::TwoFigureScene:
            set_if_absent("period", std::floor(rng.uniform(18.0, 30.0)));
            break;
        case Motif::StaticTextured:
            break;
    }
}

bool key_frame_fully_visible(const std::vector<PoseAnnotation>& anns, int key) {
    bool saw = false;
    for (const auto& a : anns)
        if (a.frame == key) {
            saw = true;
            if (a.truncation_count() > 0) return false;
        }
    return saw;
}

}  // namespace

DatasetIndex cmd_synth_gen(const RunManifest& m) {
    if (m.suite.empty()) throw InvalidSpec("synth-gen: manifest has no synthetic suite");
    fs::create_directories(m.dataset_root / "clips");
    fs::create_directories(m.dataset_root / "annotations");

    struct Job {
        SyntheticSpec spec;
        std::string id;
        int class_id;
        std::string split;
    };
    std::vector<Job> jobs;
    for (const auto& sc : m.suite) {
        int total = sc.train + sc.test;
        for (int i = 0; i < total; ++i) {
            Job job;
            job.class_id = sc.class_id;
            job.split = i < sc.train ? "train" : "test";
            char id[32];
            std::snprintf(id, sizeof(id), "c%02d_%03d", sc.class_id, i);
            job.id = id;
            job.spec.motif = sc.motif;
            job.spec.width = m.clip_width;
            job.spec.height = m.clip_height;
            job.spec.frames = m.clip_frames;
            job.spec.seed = clip_seed(m.seed, sc.class_id, i);
            job.spec.params = sc.params;
            job.spec.params["activity"] = sc.class_id;
            Rng rng(job.spec.seed ^ 0xa5a5a5a5ull);
            jitter_params(job.spec, sc.motif, rng);
            jobs.push_back(std::move(job));
        }
    }

    DatasetIndex idx;
    idx.width = m.clip_width;
    idx.height = m.clip_height;
    idx.frames = m.clip_frames;
    idx.clips.resize(jobs.size());
    int key = m.key_frame >= 0 ? m.key_frame : m.clip_frames / 2;

    parallel_for(jobs.size(), [&](size_t lo, size_t hi) {
        for (size_t i = lo; i < hi; ++i) {
            const Job& job = jobs[i];
            SyntheticClip sc = generate_synthetic_clip(job.spec);
            fs::path clip_dir = m.dataset_root / "clips" / job.id;
            save_frame_sequence(sc.clip, clip_dir);

            ClipEntry e;
            e.id = job.id;
            e.class_id = job.class_id;
            e.split = job.split;
            e.motif = motif_name(job.spec.motif);
            e.n_people = sc.n_people;
            e.dir = clip_dir;
            if (!sc.annotations.empty()) {
                fs::path gt = m.dataset_root / "annotations" / (job.id + ".gt.jsonl");
                save_annotations(sc.annotations, gt, sc.clip.width(), sc.clip.height());
                e.gt_annotations = gt;
                auto ps = inject_pose_noise(sc.annotations, m.noise_sigma, m.noise_dropout,
                                            job.spec.seed ^ 0x50534dull, PoseSource::PS_M,
                                            sc.clip.width(), sc.clip.height());
                fs::path psp = m.dataset_root / "annotations" / (job.id + ".ps.jsonl");
                save_annotations(ps, psp, sc.clip.width(), sc.clip.height());
                e.ps_annotations = psp;
                e.fully_visible = sc.n_people == 1 && key_frame_fully_visible(sc.annotations, key);
            }
            idx.clips[i] = std::move(e);
        }
    }, 1);
    idx.save(m.dataset_root);
    return idx;
}

// --- extraction ---

PoseFeatureFile extract_pose_windows(const VideoClip& clip,
                                     const std::vector<PoseAnnotation>& anns, Method method,
                                     int key_frame) {
    PoseFeatureFile out;
    std::set<int> persons;
    for (const auto& a : anns) persons.insert(a.person_id);

    auto add = [&out](const JointTrack& track) {
        PoseDescriptors d;
        try {
            d = compute_pose_descriptors(track);
        } catch (const DegenerateTorso&) {
            return;  // window unusable; skip
        }
        for (auto& v : d.relative_positions) out.rel.push_back(std::move(v));
        for (auto& v : d.joint_angles) out.ang.push_back(std::move(v));
        for (auto& v : d.temporal_diffs) out.tmp.push_back(std::move(v));
    };

    if (method == Method::GT || method == Method::GT_T || method == Method::PS_T) {
        for (int person : persons) {
            const PoseAnnotation* keyann = nullptr;
            for (const auto& a : anns)
                if (a.person_id == person && a.frame == key_frame) keyann = &a;
            if (!keyann) continue;
            if (method == Method::GT) {
                add(replicate_pose(*keyann, std::max(0, key_frame - kPoseWindow / 2)));
            } else {
                add(track_joints(clip, *keyann));
            }
        }
    } else {
        // multi-pose: use the annotations of every window frame directly
        std::map<std::pair<int, int>, const PoseAnnotation*> by_pf;
        for (const auto& a : anns) by_pf[{a.person_id, a.frame}] = &a;
        for (int start : pose_window_starts(clip.frame_count())) {
            for (int person : persons) {
                std::vector<const PoseAnnotation*> frames;
                bool complete = true;
                for (int t = 0; t < kPoseWindow && complete; ++t) {
                    auto it = by_pf.find({person, start + t});
                    if (it == by_pf.end())
                        complete = false;
                    else
                        frames.push_back(it->second);
                }
                if (complete) add(joint_track_from_annotations(frames, start));
            }
        }
    }
    return out;
}

std::optional<BodyMask> body_mask_from_annotations(const std::vector<PoseAnnotation>& anns,
                                                   int width, int height) {
    if (anns.empty()) return std::nullopt;
    try {
        return build_body_mask(anns, width, height);
    } catch (const NoJoints&) {
        return std::nullopt;
    }
}

namespace {

void save_json_atomic(const json& j, const fs::path& file) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    out << j.dump(2) << "\n";
}

json load_json(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());
    return json::parse(in);
}

void check_hash(const json& j, const std::string& expect, const fs::path& file) {
    if (j.value("config_hash", "") != expect)
        throw StaleArtifacts(file.string() + ": config hash " + j.value("config_hash", "<none>") +
                             " does not match current " + expect);
}

std::vector<PoseAnnotation> load_required_annotations(const ClipEntry& e, PoseSource src,
                                                      bool required) {
    const std::optional<fs::path>& path =
        (src == PoseSource::GT || src == PoseSource::GT_T) ? e.gt_annotations : e.ps_annotations;
    if (!path) {
        if (required)
            throw MissingAnnotations("clip " + e.id + " lacks " +
                                     std::string(pose_source_name(src)) + " annotations");
        return {};
    }
    return load_annotations(*path);
}

}  // namespace

void save_pose_features(const PoseFeatureFile& f, const std::string& clip_id,
                        const std::string& config_hash, const fs::path& file) {
    auto enc = [](const std::vector<std::vector<float>>& vs) {
        json arr = json::array();
        for (const auto& v : vs) arr.push_back(v);
        return arr;
    };
    json j = {{"clip_id", clip_id},
              {"config_hash", config_hash},
              {"rel", enc(f.rel)},
              {"ang", enc(f.ang)},
              {"tmp", enc(f.tmp)}};
    save_json_atomic(j, file);
}

PoseFeatureFile load_pose_features(const fs::path& file, const std::string& expect_hash) {
    json j = load_json(file);
    if (!expect_hash.empty()) check_hash(j, expect_hash, file);
    PoseFeatureFile f;
    auto dec = [](const json& arr, std::vector<std::vector<float>>& out) {
        for (const auto& v : arr) out.push_back(v.get<std::vector<float>>());
    };
    dec(j.at("rel"), f.rel);
    dec(j.at("ang"), f.ang);
    dec(j.at("tmp"), f.tmp);
    return f;
}

void cmd_extract(const RunManifest& m) {
    DatasetIndex idx = DatasetIndex::load(m.dataset_root);
    RunPaths paths = RunPaths::for_run(m);
    fs::create_directories(paths.features_dir);
    const std::string hash = m.config_hash();
    int key = m.key_frame >= 0 ? m.key_frame : idx.frames / 2;
    bool pure_pose = method_uses_pose(m.method) && !method_uses_dt(m.method);

    parallel_for(idx.clips.size(), [&](size_t lo, size_t hi) {
        for (size_t i = lo; i < hi; ++i) {
            const ClipEntry& e = idx.clips[i];
            VideoClip clip = load_frame_sequence(e.dir, "frame_*.pgm", m.allow_short);

            if (method_uses_dt(m.method)) {
                DtExtraction ext = extract_dense_trajectories(clip, m.dt);
                std::vector<Trajectory> kept = ext.pruned;
                std::vector<DescriptorSet> descs = ext.descriptors;
                if (m.method == Method::PSM_FILTER_DT) {
                    auto anns = load_required_annotations(e, PoseSource::PS_M, true);
                    auto mask = body_mask_from_annotations(anns, clip.width(), clip.height());
                    if (!mask)
                        throw MissingAnnotations("clip " + e.id + ": no localized joints for mask");
                    kept = filter_trajectories_by_mask(ext.pruned, *mask);
                    descs.clear();
                    for (const auto& t : kept)
                        descs.push_back(compute_descriptors(t, clip, ext.flows.median, m.dt));
                }
                write_dt_features(kept, descs, m.dt, e.id,
                                  paths.features_dir / (e.id + ".dtf"), hash);
            }
            if (method_uses_pose(m.method)) {
                auto anns = load_required_annotations(e, method_pose_source(m.method), pure_pose);
                PoseFeatureFile pf =
                    anns.empty() ? PoseFeatureFile{}
                                 : extract_pose_windows(clip, anns, m.method, key);
                save_pose_features(pf, e.id, hash, paths.features_dir / (e.id + ".pose.json"));
            }
        }
    }, 1);
}

// --- codebooks ---

namespace {

const std::vector<std::string> kDtTypes = {"traj", "hog", "hof", "mbh"};
const std::vector<std::string> kPoseTypes = {"pose_rel", "pose_ang", "pose_tmp"};

std::vector<std::vector<float>> gather_dt_type(const std::vector<DtFeatureRecord>& recs,
                                               const std::string& type) {
    std::vector<std::vector<float>> out;
    out.reserve(recs.size());
    for (const auto& r : recs) {
        if (type == "traj") out.push_back(r.traj);
        else if (type == "hog") out.push_back(r.hog);
        else if (type == "hof") out.push_back(r.hof);
        else out.push_back(r.mbh);
    }
    return out;
}

void check_dt_sidecar(const fs::path& binfile, const std::string& hash) {
    json side = load_json(binfile.string() + ".json");
    check_hash(side, hash, binfile);
}

}  // namespace

void cmd_train_codebook(const RunManifest& m) {
    DatasetIndex idx = DatasetIndex::load(m.dataset_root);
    RunPaths paths = RunPaths::for_run(m);
    fs::create_directories(paths.codebook_dir);
    const std::string hash = m.config_hash();

    json manifest = {{"config_hash", hash}, {"books", json::array()}};

    auto train_and_save = [&](const std::string& type,
                              const std::vector<std::vector<float>>& samples, int k) {
        uint64_t seed = fnv1a64("codebook/" + std::to_string(m.seed) + "/" + type);
        Codebook cb = train_codebook(samples, k, seed, m.kmeans, type);
        save_codebook(cb, paths.codebook_dir / (type + ".cbk"));
        manifest["books"].push_back({{"type", type}, {"k", cb.k}, {"dim", cb.dim},
                                     {"distortion", cb.distortion}});
    };

    if (method_uses_dt(m.method)) {
        std::map<std::string, std::vector<std::vector<float>>> pools;
        for (const auto& e : idx.clips) {
            if (e.split != "train") continue;
            fs::path f = paths.features_dir / (e.id + ".dtf");
            check_dt_sidecar(f, hash);
            auto recs = read_dt_features(f);
            for (const auto& type : kDtTypes) {
                auto vecs = gather_dt_type(recs, type);
                auto& pool = pools[type];
                pool.insert(pool.end(), vecs.begin(), vecs.end());
            }
        }
        for (const auto& type : kDtTypes) {
            if (pools[type].size() < static_cast<size_t>(m.codebook_k))
                throw TooFewSamples("codebook '" + type + "': " +
                                    std::to_string(pools[type].size()) + " samples for k=" +
                                    std::to_string(m.codebook_k));
            train_and_save(type, pools[type], m.codebook_k);
        }
    }
    if (method_uses_pose(m.method)) {
        std::vector<std::vector<float>> rel, ang, tmp;
        for (const auto& e : idx.clips) {
            if (e.split != "train") continue;
            PoseFeatureFile pf =
                load_pose_features(paths.features_dir / (e.id + ".pose.json"), hash);
            rel.insert(rel.end(), pf.rel.begin(), pf.rel.end());
            ang.insert(ang.end(), pf.ang.begin(), pf.ang.end());
            tmp.insert(tmp.end(), pf.tmp.begin(), pf.tmp.end());
        }
        const std::vector<std::vector<float>>* pools[3] = {&rel, &ang, &tmp};
        for (int i = 0; i < 3; ++i) {
            if (pools[i]->size() < static_cast<size_t>(m.pose_codebook_k))
                throw TooFewSamples("codebook '" + kPoseTypes[static_cast<size_t>(i)] + "': " +
                                    std::to_string(pools[i]->size()) + " samples for k=" +
                                    std::to_string(m.pose_codebook_k));
            train_and_save(kPoseTypes[static_cast<size_t>(i)], *pools[i], m.pose_codebook_k);
        }
    }
    save_json_atomic(manifest, paths.codebook_dir / "manifest.json");
}

// --- encode ---

namespace {

ClipFeature encode_dt_clip(const RunPaths& paths, const std::string& clip_id,
                           const std::map<std::string, Codebook>& books) {
    auto recs = read_dt_features(paths.features_dir / (clip_id + ".dtf"));
    std::vector<BowHistogram> hists;
    for (const auto& type : kDtTypes)
        hists.push_back(encode_histogram(gather_dt_type(recs, type), books.at(type)));
    return stack_features(hists, kDtTypes, clip_id);
}

ClipFeature encode_pose_clip(const RunPaths& paths, const std::string& clip_id,
                             const std::map<std::string, Codebook>& books,
                             const std::string& hash) {
    PoseFeatureFile pf = load_pose_features(paths.features_dir / (clip_id + ".pose.json"), hash);
    std::vector<BowHistogram> hists;
    hists.push_back(encode_histogram(pf.rel, books.at("pose_rel")));
    hists.push_back(encode_histogram(pf.ang, books.at("pose_ang")));
    hists.push_back(encode_histogram(pf.tmp, books.at("pose_tmp")));
    return stack_features(hists, kPoseTypes, clip_id);
}

std::map<std::string, Codebook> load_codebooks(const RunPaths& paths, const std::string& hash,
                                               const std::vector<std::string>& types) {
    json manifest = load_json(paths.codebook_dir / "manifest.json");
    check_hash(manifest, hash, paths.codebook_dir / "manifest.json");
    std::map<std::string, Codebook> books;
    for (const auto& type : types)
        books[type] = load_codebook(paths.codebook_dir / (type + ".cbk"));
    return books;
}

}  // namespace

void cmd_encode(const RunManifest& m) {
    DatasetIndex idx = DatasetIndex::load(m.dataset_root);
    RunPaths paths = RunPaths::for_run(m);
    fs::create_directories(paths.bow_dir);
    const std::string hash = m.config_hash();

    std::vector<std::string> types;
    if (method_uses_dt(m.method)) types.insert(types.end(), kDtTypes.begin(), kDtTypes.end());
    if (method_uses_pose(m.method)) types.insert(types.end(), kPoseTypes.begin(), kPoseTypes.end());
    auto books = load_codebooks(paths, hash, types);

    parallel_for(idx.clips.size(), [&](size_t lo, size_t hi) {
        for (size_t i = lo; i < hi; ++i) {
            const ClipEntry& e = idx.clips[i];
            if (m.method == Method::PSM_DT_CLASSIFIERS) {
                // two feature files; fusion happens at the score level
                check_dt_sidecar(paths.features_dir / (e.id + ".dtf"), hash);
                save_clip_feature(encode_dt_clip(paths, e.id, books),
                                  paths.bow_dir / (e.id + ".dt.feat"));
                save_clip_feature(encode_pose_clip(paths, e.id, books, hash),
                                  paths.bow_dir / (e.id + ".pose.feat"));
            } else if (m.method == Method::PSM_DT_FEATURES) {
                check_dt_sidecar(paths.features_dir / (e.id + ".dtf"), hash);
                ClipFeature fused = fuse_features(encode_dt_clip(paths, e.id, books),
                                                  encode_pose_clip(paths, e.id, books, hash));
                save_clip_feature(fused, paths.bow_dir / (e.id + ".feat"));
            } else if (method_uses_dt(m.method)) {
                check_dt_sidecar(paths.features_dir / (e.id + ".dtf"), hash);
                save_clip_feature(encode_dt_clip(paths, e.id, books),
                                  paths.bow_dir / (e.id + ".feat"));
            } else {
                save_clip_feature(encode_pose_clip(paths, e.id, books, hash),
                                  paths.bow_dir / (e.id + ".feat"));
            }
        }
    }, 1);
    save_json_atomic(json{{"config_hash", hash}}, paths.bow_dir / "manifest.json");
}

// --- train / predict ---

namespace {

std::vector<ClipFeature> load_split_features(const DatasetIndex& idx, const RunPaths& paths,
                                             const std::string& split, const std::string& suffix,
                                             std::vector<int>* labels,
                                             std::vector<std::string>* ids = nullptr) {
    std::vector<ClipFeature> out;
    for (const auto& e : idx.clips) {
        if (!split.empty() && e.split != split) continue;
        out.push_back(load_clip_feature(paths.bow_dir / (e.id + suffix)));
        if (labels) labels->push_back(e.class_id);
        if (ids) ids->push_back(e.id);
    }
    return out;
}

void check_bow_manifest(const RunPaths& paths, const std::string& hash) {
    json j = load_json(paths.bow_dir / "manifest.json");
    check_hash(j, hash, paths.bow_dir / "manifest.json");
}

}  // namespace

void cmd_train(const RunManifest& m) {
    DatasetIndex idx = DatasetIndex::load(m.dataset_root);
    RunPaths paths = RunPaths::for_run(m);
    const std::string hash = m.config_hash();
    check_bow_manifest(paths, hash);
    fs::create_directories(paths.model_file.parent_path());

    TrainConfig cfg = m.train;
    if (m.method == Method::PSM_DT_CLASSIFIERS) {
        std::vector<int> labels;
        auto dt_feats = load_split_features(idx, paths, "train", ".dt.feat", &labels);
        std::vector<int> pose_labels;
        auto pose_feats = load_split_features(idx, paths, "train", ".pose.feat", &pose_labels);

        ClassifierBank dt_bank = train_one_vs_all(dt_feats, labels, cfg);
        ClassifierBank pose_bank = train_one_vs_all(pose_feats, labels, cfg);
        save_classifier_bank(dt_bank, paths.model_file.parent_path() / "model.dt.bin");
        save_classifier_bank(pose_bank, paths.model_file.parent_path() / "model.pose.bin");

        std::vector<ClipFeature> fused;
        for (size_t i = 0; i < dt_feats.size(); ++i)
            fused.push_back(fuse_classifier_scores(predict_scores(dt_bank, dt_feats[i]),
                                                   predict_scores(pose_bank, pose_feats[i]),
                                                   dt_feats[i].clip_id));
        TrainConfig second = cfg;
        second.map = FeatureMapParams::identity();  // scores can be negative
        ClassifierBank fuse_bank = train_one_vs_all(fused, labels, second);
        save_classifier_bank(fuse_bank, paths.model_file);
    } else {
        std::vector<int> labels;
        auto feats = load_split_features(idx, paths, "train", ".feat", &labels);
        ClassifierBank bank = train_one_vs_all(feats, labels, cfg);
        save_classifier_bank(bank, paths.model_file);
    }
    json j = {{"config_hash", hash}};
    save_json_atomic(j, paths.model_file.parent_path() / "train_manifest.json");
}

namespace {

std::string fmt_score(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace

void cmd_predict(const RunManifest& m) {
    DatasetIndex idx = DatasetIndex::load(m.dataset_root);
    RunPaths paths = RunPaths::for_run(m);
    const std::string hash = m.config_hash();
    json tm = load_json(paths.model_file.parent_path() / "train_manifest.json");
    check_hash(tm, hash, paths.model_file);

    std::ofstream out(paths.predictions_file);
    if (!out) throw IoError("cannot write " + paths.predictions_file.string());
    out << "clip_id,class_id,score\n";

    auto emit = [&](const std::string& clip_id, const ScoreVector& s) {
        for (size_t c = 0; c < s.class_ids.size(); ++c)
            out << clip_id << "," << s.class_ids[c] << "," << fmt_score(s.scores[c]) << "\n";
    };

    if (m.method == Method::PSM_DT_CLASSIFIERS) {
        ClassifierBank dt_bank =
            load_classifier_bank(paths.model_file.parent_path() / "model.dt.bin");
        ClassifierBank pose_bank =
            load_classifier_bank(paths.model_file.parent_path() / "model.pose.bin");
        ClassifierBank fuse_bank = load_classifier_bank(paths.model_file);
        for (const auto& e : idx.clips) {
            if (e.split != "test") continue;
            auto dt_f = load_clip_feature(paths.bow_dir / (e.id + ".dt.feat"));
            auto pose_f = load_clip_feature(paths.bow_dir / (e.id + ".pose.feat"));
            ClipFeature fused = fuse_classifier_scores(predict_scores(dt_bank, dt_f),
                                                       predict_scores(pose_bank, pose_f), e.id);
            emit(e.id, predict_scores(fuse_bank, fused));
        }
    } else {
        ClassifierBank bank = load_classifier_bank(paths.model_file);
        for (const auto& e : idx.clips) {
            if (e.split != "test") continue;
            emit(e.id, predict_scores(bank, load_clip_feature(paths.bow_dir / (e.id + ".feat"))));
        }
    }
    out.close();
    save_json_atomic(json{{"config_hash", hash}},
                     fs::path(paths.predictions_file.string() + ".json"));
}

// --- eval ---

namespace {

struct Predictions {
    // class -> scores over test clips (index-aligned with clip_ids)
    std::vector<std::string> clip_ids;
    std::map<int, std::vector<double>> scores;
};

Predictions load_predictions(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());
    std::string line;
    std::getline(in, line);  // header
    Predictions p;
    std::map<std::string, size_t> clip_pos;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string clip, cls, score;
        std::getline(ss, clip, ',');
        std::getline(ss, cls, ',');
        std::getline(ss, score, ',');
        if (!clip_pos.count(clip)) {
            clip_pos[clip] = p.clip_ids.size();
            p.clip_ids.push_back(clip);
        }
        int c = std::stoi(cls);
        auto& vec = p.scores[c];
        vec.resize(p.clip_ids.size(), 0.0);
        vec[clip_pos[clip]] = std::stod(score);
    }
    for (auto& [c, vec] : p.scores) vec.resize(p.clip_ids.size(), 0.0);
    return p;
}

}  // namespace

EvalReport cmd_eval(const RunManifest& m, const EvalOptions& opts) {
    DatasetIndex idx = DatasetIndex::load(m.dataset_root);
    RunPaths paths = RunPaths::for_run(m);
    const std::string hash = m.config_hash();
    json pm = load_json(fs::path(paths.predictions_file.string() + ".json"));
    check_hash(pm, hash, paths.predictions_file);

    Predictions preds = load_predictions(paths.predictions_file);

    std::map<std::string, const ClipEntry*> by_id;
    for (const auto& e : idx.clips) by_id[e.id] = &e;

    // subset filter over test clips
    std::vector<size_t> kept;
    for (size_t i = 0; i < preds.clip_ids.size(); ++i) {
        auto it = by_id.find(preds.clip_ids[i]);
        if (it == by_id.end())
            throw StaleArtifacts("prediction for unknown clip " + preds.clip_ids[i]);
        if (opts.subset == "single-fully-visible" && !it->second->fully_visible) continue;
        kept.push_back(i);
    }
    if (kept.empty()) throw EmptySubset("eval: no test clips in subset '" + opts.subset + "'");

    std::map<int, std::vector<double>> scores;
    std::map<int, std::vector<int>> labels;
    for (const auto& [cls, vec] : preds.scores) {
        auto& s = scores[cls];
        auto& l = labels[cls];
        for (size_t i : kept) {
            s.push_back(vec[i]);
            l.push_back(by_id.at(preds.clip_ids[i])->class_id == cls ? 1 : 0);
        }
    }

    std::vector<int> subset_classes;
    if (opts.top_n > 0) {
        subset_classes = top_n_by_train_size(idx.train_sizes(), opts.top_n);
    } else {
        for (const auto& [cls, vec] : preds.scores) subset_classes.push_back(cls);
    }

    EvalReport rep = mean_average_precision(scores, labels, subset_classes);

    json per_class = json::object();
    for (size_t i = 0; i < rep.class_ids.size(); ++i)
        per_class[std::to_string(rep.class_ids[i])] = rep.per_class_ap[i];
    json j = {{"method", method_name(m.method)},
              {"config_hash", hash},
              {"map", rep.map},
              {"subset", opts.subset},
              {"top_n", opts.top_n},
              {"slice_n", rep.slice_n},
              {"per_class_ap", per_class},
              {"excluded_classes", rep.excluded_classes}};
    save_json_atomic(j, paths.eval_file);
    return rep;
}

// --- analyze / report ---

void cmd_analyze(const RunManifest& m) {
    DatasetIndex idx = DatasetIndex::load(m.dataset_root);
    RunPaths paths = RunPaths::for_run(m);
    fs::create_directories(paths.analysis_dir);
    const std::string hash = m.config_hash();
    int key = m.key_frame >= 0 ? m.key_frame : idx.frames / 2;

    // reference pose statistics from the training split only (avoids leakage)
    std::vector<PoseAnnotation> train_keys;
    for (const auto& e : idx.clips) {
        if (e.split != "train" || !e.gt_annotations) continue;
        for (const auto& a : load_annotations(*e.gt_annotations))
            if (a.frame == key) train_keys.push_back(a);
    }
    PoseStatistics stats = compute_pose_statistics(train_keys);

    std::vector<ComplexityProfile> profiles(idx.clips.size());
    parallel_for(idx.clips.size(), [&](size_t lo, size_t hi) {
        for (size_t i = lo; i < hi; ++i) {
            const ClipEntry& e = idx.clips[i];
            ComplexityProfile prof;
            prof.clip_id = e.id;
            prof.class_id = e.class_id;

            VideoClip clip = load_frame_sequence(e.dir, "frame_*.pgm", m.allow_short);
            DtExtraction ext = extract_dense_trajectories(clip, m.dt);

            std::optional<BodyMask> mask;
            std::vector<PoseAnnotation> gt;
            if (e.gt_annotations) gt = load_annotations(*e.gt_annotations);
            if (e.ps_annotations) {
                mask = body_mask_from_annotations(load_annotations(*e.ps_annotations),
                                                  clip.width(), clip.height());
            } else if (!gt.empty()) {
                mask = body_mask_from_annotations(gt, clip.width(), clip.height());
            }
            prof.motion = compute_motion_complexity(ext.pruned, mask ? &*mask : nullptr,
                                                    e.n_people);

            // static measures averaged over the key frame's annotated people
            StaticComplexity acc;
            int n = 0;
            double vp_sum = 0;
            int vp_n = 0;
            for (const auto& a : gt) {
                if (a.frame != key) continue;
                try {
                    StaticComplexity sc = compute_static_complexity(a, stats);
                    acc.pose_dev += sc.pose_dev;
                    acc.occlusion_count += sc.occlusion_count;
                    acc.part_length_dev += sc.part_length_dev;
                    acc.truncation_count += sc.truncation_count;
                    if (sc.viewpoint_dev) {
                        vp_sum += *sc.viewpoint_dev;
                        ++vp_n;
                    }
                    ++n;
                } catch (const DegenerateTorso&) {
                    // person unusable for static measures
                }
            }
            if (n) {
                prof.pose.pose_dev = acc.pose_dev / n;
                prof.pose.occlusion_count =
                    static_cast<int>(std::lround(static_cast<double>(acc.occlusion_count) / n));
                prof.pose.part_length_dev = acc.part_length_dev / n;
                prof.pose.truncation_count =
                    static_cast<int>(std::lround(static_cast<double>(acc.truncation_count) / n));
                if (vp_n) prof.pose.viewpoint_dev = vp_sum / vp_n;
            }
            profiles[i] = std::move(prof);
        }
    }, 1);

    json per_clip = json::array();
    for (const auto& p : profiles) {
        json j = {{"clip_id", p.clip_id},
                  {"class_id", p.class_id},
                  {"pose", p.pose.pose_dev},
                  {"occlusion", p.pose.occlusion_count},
                  {"part_length", p.pose.part_length_dev},
                  {"truncation", p.pose.truncation_count},
                  {"n_dt", p.motion.n_dt},
                  {"ms", p.motion.ms},
                  {"n_people", p.motion.n_people}};
        j["viewpoint"] = p.pose.viewpoint_dev ? json(*p.pose.viewpoint_dev) : json(nullptr);
        j["n_dt_body"] = p.motion.n_dt_body ? json(*p.motion.n_dt_body) : json(nullptr);
        j["ms_body"] = p.motion.ms_body ? json(*p.motion.ms_body) : json(nullptr);
        per_clip.push_back(std::move(j));
    }
    save_json_atomic(json{{"config_hash", hash}, {"clips", per_clip}},
                     paths.analysis_dir / "complexity.json");
}

namespace {

std::vector<ComplexityProfile> load_profiles(const fs::path& file, const std::string& hash) {
    json j = load_json(file);
    if (!hash.empty()) check_hash(j, hash, file);
    std::vector<ComplexityProfile> out;
    for (const auto& c : j.at("clips")) {
        ComplexityProfile p;
        p.clip_id = c.at("clip_id").get<std::string>();
        p.class_id = c.at("class_id").get<int>();
        p.pose.pose_dev = c.at("pose").get<double>();
        p.pose.occlusion_count = c.at("occlusion").get<int>();
        p.pose.part_length_dev = c.at("part_length").get<double>();
        p.pose.truncation_count = c.at("truncation").get<int>();
        if (!c.at("viewpoint").is_null()) p.pose.viewpoint_dev = c["viewpoint"].get<double>();
        p.motion.n_dt = c.at("n_dt").get<int>();
        p.motion.ms = c.at("ms").get<double>();
        p.motion.n_people = c.at("n_people").get<int>();
        if (!c.at("n_dt_body").is_null()) p.motion.n_dt_body = c["n_dt_body"].get<int>();
        if (!c.at("ms_body").is_null()) p.motion.ms_body = c["ms_body"].get<double>();
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace

void cmd_report(const RunManifest& m) {
    DatasetIndex idx = DatasetIndex::load(m.dataset_root);
    RunPaths paths = RunPaths::for_run(m);
    fs::create_directories(paths.report_dir);

    auto profiles = load_profiles(paths.analysis_dir / "complexity.json", "");
    auto cc = aggregate_complexity(profiles);
    auto train_sizes = idx.train_sizes();

    // every method with an eval artifact in this out dir joins the report
    std::vector<MethodCurve> methods;
    for (Method meth : kAllMethods) {
        fs::path f = m.out_dir / method_name(meth) / "eval.json";
        if (!fs::exists(f)) continue;
        json j = load_json(f);
        MethodCurve curve;
        curve.method = method_name(meth);
        for (const auto& [cls, ap] : j.at("per_class_ap").items())
            curve.per_class_ap[std::stoi(cls)] = ap.get<double>();
        methods.push_back(std::move(curve));
    }

    write_class_report_csv(paths.report_dir / "class_report.csv", cc, train_sizes, methods);

    // performance as a function of training-set size
    std::vector<int> by_train;
    {
        auto ranked = train_sizes;
        std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        for (const auto& [cls, cnt] : ranked) by_train.push_back(cls);
    }
    write_curve_csv(paths.report_dir / "curve_train_size.csv", by_train, methods);
    write_curve_svg(paths.report_dir / "curve_train_size.svg",
                    "cumulative mAP, classes by training-set size", by_train, methods);

    // one sorted-performance curve per complexity measure
    auto emit_measure = [&](const std::string& measure) {
        bool have = std::all_of(cc.begin(), cc.end(), [&](const ClassComplexity& c) {
            return c.means.count(measure) > 0;
        });
        if (!have || cc.empty()) return;
        auto ranked = rank_classes(cc, measure);
        write_curve_csv(paths.report_dir / ("curve_" + measure + ".csv"), ranked, methods);
        write_curve_svg(paths.report_dir / ("curve_" + measure + ".svg"),
                        "cumulative mAP by " + measure, ranked, methods);
    };
    for (const auto& name : kPoseMeasures) emit_measure(name);
    for (const auto& name : kMotionMeasures) emit_measure(name);
}

}  // namespace trajfuse
