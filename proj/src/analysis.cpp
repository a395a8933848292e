#include "trajfuse/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace trajfuse {

namespace {

constexpr double kPi = 3.141592653589793;

std::optional<Vec2> hip_mid(const PoseAnnotation& a) {
    const auto& lh = a.joints[static_cast<size_t>(JointId::LHip)];
    const auto& rh = a.joints[static_cast<size_t>(JointId::RHip)];
    if (lh && rh) return midpoint(*lh, *rh);
    if (lh) return *lh;
    if (rh) return *rh;
    return std::nullopt;
}

double torso_length_or_throw(const PoseAnnotation& a) {
    const auto& neck = a.joints[static_cast<size_t>(JointId::Neck)];
    auto hm = hip_mid(a);
    if (!neck || !hm) throw DegenerateTorso("neck or hips absent; cannot normalize");
    double len = (*neck - *hm).norm();
    if (len < 1.0) throw DegenerateTorso("torso length below 1 px");
    return len;
}

}  // namespace

const std::vector<std::string> kPoseMeasures = {"pose", "occlusion", "viewpoint", "part_length",
                                                "truncation"};
const std::vector<std::string> kMotionMeasures = {"n_dt", "n_dt_body", "ms", "ms_body",
                                                  "n_people"};

PoseStatistics compute_pose_statistics(const std::vector<PoseAnnotation>& training_annotations) {
    PoseStatistics stats;
    std::array<Vec2, kNumJoints> sums{};
    std::array<size_t, kNumJoints> counts{};
    std::map<std::string, std::pair<double, size_t>> part_acc;

    for (const auto& a : training_annotations) {
        const auto& neck = a.joints[static_cast<size_t>(JointId::Neck)];
        auto hm = hip_mid(a);
        if (!neck || !hm) continue;
        double torso = (*neck - *hm).norm();
        if (torso < 1.0) continue;
        for (int j = 0; j < kNumJoints; ++j) {
            const auto& p = a.joints[static_cast<size_t>(j)];
            if (!p) continue;
            Vec2 n = (*p - *neck) / torso;
            sums[static_cast<size_t>(j)] += n;
            ++counts[static_cast<size_t>(j)];
        }
        for (const auto& part : kBodyParts) {
            const auto& pa = a.joints[static_cast<size_t>(part.a)];
            const auto& pb = a.joints[static_cast<size_t>(part.b)];
            if (!pa || !pb) continue;
            auto& [sum, n] = part_acc[part.name];
            sum += (*pa - *pb).norm() / torso;
            ++n;
        }
        auto& [tsum, tn] = part_acc["torso"];
        tsum += 1.0;  // torso normalized by itself
        ++tn;
    }
    for (int j = 0; j < kNumJoints; ++j)
        if (counts[static_cast<size_t>(j)])
            stats.mean_pose[static_cast<size_t>(j)] =
                sums[static_cast<size_t>(j)] / static_cast<double>(counts[static_cast<size_t>(j)]);
    for (const auto& [name, acc] : part_acc)
        if (acc.second) stats.mean_part_lengths[name] = acc.first / static_cast<double>(acc.second);
    return stats;
}

StaticComplexity compute_static_complexity(const PoseAnnotation& ann, const PoseStatistics& ref) {
    StaticComplexity out;
    double torso = torso_length_or_throw(ann);
    const Vec2 neck = *ann.joints[static_cast<size_t>(JointId::Neck)];

    double sq = 0;
    int n = 0;
    for (int j = 0; j < kNumJoints; ++j) {
        const auto& p = ann.joints[static_cast<size_t>(j)];
        const auto& m = ref.mean_pose[static_cast<size_t>(j)];
        if (!p || !m) continue;
        Vec2 d = (*p - neck) / torso - *m;
        sq += d.dot(d);
        ++n;
    }
    out.pose_dev = n ? std::sqrt(sq / n) : 0.0;

    out.occlusion_count = ann.occlusion_count();
    out.truncation_count = ann.truncation_count();

    if (ann.torso_rotation) {
        // geodesic angle of R = Ry(yaw) Rx(pitch) Rz(roll) from the identity;
        // absent pitch/roll default to zero upstream
        double y = ann.torso_rotation->yaw * kPi / 180.0;
        double p = ann.torso_rotation->pitch * kPi / 180.0;
        double r = ann.torso_rotation->roll * kPi / 180.0;
        double cy = std::cos(y), sy = std::sin(y);
        double cp = std::cos(p), sp = std::sin(p);
        double cr = std::cos(r), sr = std::sin(r);
        // trace of the composed rotation
        double t00 = cy * cr + sy * sp * sr;
        double t11 = cp * cr;
        double t22 = cy * cp;
        double tr = t00 + t11 + t22;
        double c = std::clamp((tr - 1.0) / 2.0, -1.0, 1.0);
        out.viewpoint_dev = std::acos(c) * 180.0 / kPi;
    }

    double psq = 0;
    int pn = 0;
    for (const auto& part : kBodyParts) {
        const auto& pa = ann.joints[static_cast<size_t>(part.a)];
        const auto& pb = ann.joints[static_cast<size_t>(part.b)];
        auto it = ref.mean_part_lengths.find(part.name);
        if (!pa || !pb || it == ref.mean_part_lengths.end() || it->second <= 0) continue;
        double rel = ((*pa - *pb).norm() / torso - it->second) / it->second;
        psq += rel * rel;
        ++pn;
    }
    out.part_length_dev = pn ? std::sqrt(psq / pn) : 0.0;
    return out;
}

MotionComplexity compute_motion_complexity(const std::vector<Trajectory>& trajs,
                                           const BodyMask* mask, int n_people) {
    MotionComplexity out;
    out.n_people = n_people;
    out.n_dt = static_cast<int>(trajs.size());

    auto mean_step = [](const std::vector<Trajectory>& ts) {
        double sum = 0;
        size_t steps = 0;
        for (const auto& t : ts) {
            for (size_t i = 0; i + 1 < t.points.size(); ++i) {
                sum += (t.points[i + 1] - t.points[i]).norm();
                ++steps;
            }
        }
        return steps ? sum / static_cast<double>(steps) : 0.0;  // empty -> 0 by contract
    };
    out.ms = mean_step(trajs);

    if (mask) {
        auto body = filter_trajectories_by_mask(trajs, *mask);
        out.n_dt_body = static_cast<int>(body.size());
        out.ms_body = mean_step(body);
    }
    return out;
}

std::vector<ClassComplexity> aggregate_complexity(const std::vector<ComplexityProfile>& profiles) {
    std::map<int, std::map<std::string, std::pair<double, size_t>>> acc;
    std::map<int, int> clip_counts;
    auto add = [&](int cls, const std::string& key, double v) {
        auto& [sum, n] = acc[cls][key];
        sum += v;
        ++n;
    };
    for (const auto& p : profiles) {
        ++clip_counts[p.class_id];
        add(p.class_id, "pose", p.pose.pose_dev);
        add(p.class_id, "occlusion", p.pose.occlusion_count);
        if (p.pose.viewpoint_dev) add(p.class_id, "viewpoint", *p.pose.viewpoint_dev);
        add(p.class_id, "part_length", p.pose.part_length_dev);
        add(p.class_id, "truncation", p.pose.truncation_count);
        add(p.class_id, "n_dt", p.motion.n_dt);
        if (p.motion.n_dt_body) add(p.class_id, "n_dt_body", *p.motion.n_dt_body);
        add(p.class_id, "ms", p.motion.ms);
        if (p.motion.ms_body) add(p.class_id, "ms_body", *p.motion.ms_body);
        add(p.class_id, "n_people", p.motion.n_people);
    }
    std::vector<ClassComplexity> out;
    for (const auto& [cls, measures] : acc) {
        ClassComplexity cc;
        cc.class_id = cls;
        cc.n_clips = clip_counts[cls];
        for (const auto& [key, sn] : measures)
            cc.means[key] = sn.first / static_cast<double>(sn.second);
        out.push_back(std::move(cc));
    }
    return out;
}

double average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw DimensionMismatch("average_precision: score/label count mismatch");
    size_t positives = 0;
    for (int l : labels) positives += l != 0;
    if (positives == 0) throw NoPositives("average_precision: no positive labels");

    std::vector<size_t> order(scores.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    std::vector<double> precision(order.size()), recall(order.size());
    size_t tp = 0;
    for (size_t r = 0; r < order.size(); ++r) {
        tp += labels[order[r]] != 0;
        precision[r] = static_cast<double>(tp) / static_cast<double>(r + 1);
        recall[r] = static_cast<double>(tp) / static_cast<double>(positives);
    }

    double ap = 0;
    for (int t = 0; t <= 10; ++t) {
        double thresh = t / 10.0;
        double best = 0;
        for (size_t r = 0; r < order.size(); ++r)
            if (recall[r] >= thresh - 1e-12) best = std::max(best, precision[r]);
        ap += best;
    }
    return ap / 11.0;
}

EvalReport mean_average_precision(const std::map<int, std::vector<double>>& per_class_scores,
                                  const std::map<int, std::vector<int>>& per_class_labels,
                                  const std::vector<int>& class_subset) {
    if (class_subset.empty()) throw EmptySubset("mean_average_precision: empty class subset");
    EvalReport rep;
    rep.slice_n = static_cast<int>(class_subset.size());
    std::vector<int> subset = class_subset;
    std::sort(subset.begin(), subset.end());
    double total = 0;
    for (int cls : subset) {
        auto s = per_class_scores.find(cls);
        auto l = per_class_labels.find(cls);
        if (s == per_class_scores.end() || l == per_class_labels.end())
            throw InvariantViolation("mean_average_precision: missing scores for class " +
                                     std::to_string(cls));
        bool any_pos = std::any_of(l->second.begin(), l->second.end(), [](int v) { return v != 0; });
        if (!any_pos) {
            rep.excluded_classes.push_back(cls);
            continue;
        }
        double ap = average_precision(s->second, l->second);
        rep.class_ids.push_back(cls);
        rep.per_class_ap.push_back(ap);
        total += ap;
    }
    if (rep.class_ids.empty())
        throw EmptySubset("mean_average_precision: every class lacks test positives");
    rep.map = total / static_cast<double>(rep.class_ids.size());
    return rep;
}

std::vector<int> rank_classes(const std::vector<ClassComplexity>& cc, const std::string& measure,
                              std::optional<RankDirection> direction) {
    bool is_pose = std::find(kPoseMeasures.begin(), kPoseMeasures.end(), measure) !=
                   kPoseMeasures.end();
    bool is_motion = std::find(kMotionMeasures.begin(), kMotionMeasures.end(), measure) !=
                     kMotionMeasures.end();
    if (!is_pose && !is_motion) throw UnknownMeasure("rank_classes: '" + measure + "'");
    RankDirection dir =
        direction.value_or(is_pose ? RankDirection::Increasing : RankDirection::Decreasing);

    std::vector<std::pair<double, int>> keyed;
    keyed.reserve(cc.size());
    for (const auto& c : cc) {
        auto it = c.means.find(measure);
        if (it == c.means.end())
            throw InvariantViolation("rank_classes: measure '" + measure +
                                     "' missing for class " + std::to_string(c.class_id));
        keyed.emplace_back(it->second, c.class_id);
    }
    std::stable_sort(keyed.begin(), keyed.end(), [dir](const auto& a, const auto& b) {
        if (a.first != b.first)
            return dir == RankDirection::Increasing ? a.first < b.first : a.first > b.first;
        return a.second < b.second;  // ties by class id
    });
    std::vector<int> out;
    out.reserve(keyed.size());
    for (const auto& [v, id] : keyed) out.push_back(id);
    return out;
}

std::vector<int> top_n_by_train_size(const std::vector<std::pair<int, int>>& class_train_counts,
                                     int n) {
    if (n > static_cast<int>(class_train_counts.size()))
        throw NTooLarge("top_n_by_train_size: n=" + std::to_string(n) + " > " +
                        std::to_string(class_train_counts.size()) + " classes");
    std::vector<std::pair<int, int>> sorted = class_train_counts;  // (class, train count)
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<int> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(sorted[static_cast<size_t>(i)].first);
    return out;
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// cumulative mean AP over the ranked prefix, skipping classes the method
// never evaluated
std::vector<double> cumulative_map(const std::vector<int>& ranked, const MethodCurve& m) {
    std::vector<double> out;
    out.reserve(ranked.size());
    double sum = 0;
    size_t n = 0;
    for (int cls : ranked) {
        auto it = m.per_class_ap.find(cls);
        if (it != m.per_class_ap.end()) {
            sum += it->second;
            ++n;
        }
        out.push_back(n ? sum / static_cast<double>(n) : 0.0);
    }
    return out;
}

}  // namespace

void write_class_report_csv(const std::filesystem::path& file,
                            const std::vector<ClassComplexity>& cc,
                            const std::vector<std::pair<int, int>>& train_sizes,
                            const std::vector<MethodCurve>& methods) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    out << "class,train_size";
    for (const auto& m : methods) out << ",ap_" << m.method;
    for (const auto& name : kPoseMeasures) out << "," << name;
    for (const auto& name : kMotionMeasures) out << "," << name;
    out << "\n";
    std::map<int, int> train(train_sizes.begin(), train_sizes.end());
    for (const auto& c : cc) {
        out << c.class_id << "," << (train.count(c.class_id) ? train.at(c.class_id) : 0);
        for (const auto& m : methods) {
            auto it = m.per_class_ap.find(c.class_id);
            out << "," << (it == m.per_class_ap.end() ? "" : fmt(it->second));
        }
        auto emit = [&](const std::string& name) {
            auto it = c.means.find(name);
            out << "," << (it == c.means.end() ? "" : fmt(it->second));
        };
        for (const auto& name : kPoseMeasures) emit(name);
        for (const auto& name : kMotionMeasures) emit(name);
        out << "\n";
    }
}

void write_curve_csv(const std::filesystem::path& file, const std::vector<int>& ranked_classes,
                     const std::vector<MethodCurve>& methods) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    out << "rank,class";
    for (const auto& m : methods) out << ",cum_map_" << m.method;
    out << "\n";
    std::vector<std::vector<double>> curves;
    curves.reserve(methods.size());
    for (const auto& m : methods) curves.push_back(cumulative_map(ranked_classes, m));
    for (size_t r = 0; r < ranked_classes.size(); ++r) {
        out << (r + 1) << "," << ranked_classes[r];
        for (const auto& c : curves) out << "," << fmt(c[r]);
        out << "\n";
    }
}

void write_curve_svg(const std::filesystem::path& file, const std::string& title,
                     const std::vector<int>& ranked_classes,
                     const std::vector<MethodCurve>& methods) {
    static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    const int W = 640, H = 420, ml = 56, mr = 160, mt = 40, mb = 44;
    const int pw = W - ml - mr, ph = H - mt - mb;

    double ymax = 0.0;
    std::vector<std::vector<double>> curves;
    curves.reserve(methods.size());
    for (const auto& m : methods) {
        curves.push_back(cumulative_map(ranked_classes, m));
        for (double v : curves.back()) ymax = std::max(ymax, v);
    }
    if (ymax <= 0) ymax = 1.0;
    ymax = std::min(1.0, ymax * 1.1);

    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << ml << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">"
        << title << "</text>\n";
    // axes
    out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
        << mt + ph << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
        << "\" stroke=\"black\"/>\n";
    for (int g = 0; g <= 5; ++g) {
        double fy = mt + ph - ph * (g / 5.0);
        out << "<line x1=\"" << ml << "\" y1=\"" << fy << "\" x2=\"" << ml + pw << "\" y2=\"" << fy
            << "\" stroke=\"#dddddd\"/>\n";
        out << "<text x=\"" << ml - 8 << "\" y=\"" << fy + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << fmt(ymax * g / 5.0) << "</text>\n";
    }
    out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 10
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << "classes in ranked order</text>\n";
    size_t npts = ranked_classes.size();
    for (size_t mi = 0; mi < methods.size(); ++mi) {
        const auto& curve = curves[mi];
        out << "<polyline fill=\"none\" stroke=\"" << kColors[mi % 8]
            << "\" stroke-width=\"1.6\" points=\"";
        for (size_t i = 0; i < npts; ++i) {
            double fx = ml + (npts == 1 ? 0.5 : static_cast<double>(i) / (npts - 1)) * pw;
            double fy = mt + ph - (curve[i] / ymax) * ph;
            out << fmt(fx) << "," << fmt(fy) << " ";
        }
        out << "\"/>\n";
        out << "<text x=\"" << ml + pw + 12 << "\" y=\"" << mt + 16 + 18 * static_cast<int>(mi)
            << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << kColors[mi % 8] << "\">"
            << methods[mi].method << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace trajfuse
