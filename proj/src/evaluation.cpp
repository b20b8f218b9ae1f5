#include "eovseg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "eovseg/error.hpp"
#include "eovseg/kernels.hpp"
#include "eovseg/tensor_io.hpp"

namespace eovseg {

// ---------------------------------------------------------------------------
// Annotation

void PanopticAnnotation::validate() const {
    if (map.ids.size() != map.height * map.width) throw ShapeError("segment map size does not match its extents");
    std::set<std::int32_t> ids;
    for (const auto& s : segments) {
        if (s.id <= 0) throw FormatError("segment id must be positive, got " + std::to_string(s.id));
        if (!ids.insert(s.id).second) throw FormatError("duplicate segment id " + std::to_string(s.id));
    }
    for (auto id : map.ids)
        if (id != 0 && !ids.count(id)) throw FormatError("segment id " + std::to_string(id) + " has no record");
}

const SegmentInfo* PanopticAnnotation::find(std::int32_t id) const {
    for (const auto& s : segments)
        if (s.id == id) return &s;
    return nullptr;
}

std::vector<std::int32_t> PanopticAnnotation::semantic() const {
    std::map<std::int32_t, std::int32_t> label;
    for (const auto& s : segments) label[s.id] = s.label;
    std::vector<std::int32_t> out(map.ids.size(), -1);
    for (std::size_t i = 0; i < out.size(); ++i)
        if (map.ids[i] != 0) out[i] = label.at(map.ids[i]);
    return out;
}

void save_annotation(const std::filesystem::path& ids_file, const std::filesystem::path& segments_file,
                     const PanopticAnnotation& a) {
    a.validate();
    Tensor ids({a.map.height, a.map.width});
    for (std::size_t i = 0; i < a.map.ids.size(); ++i) ids[i] = static_cast<float>(a.map.ids[i]);
    write_tensor(ids_file, ids);
    std::ofstream f(segments_file, std::ios::trunc);
    if (!f) throw FormatError(segments_file.string() + ": cannot open for writing");
    for (const auto& s : a.segments) f << s.id << ' ' << s.label << ' ' << (s.is_thing ? "thing" : "stuff") << '\n';
}

PanopticAnnotation load_annotation(const std::filesystem::path& ids_file, const std::filesystem::path& segments_file) {
    const Tensor ids = read_tensor(ids_file);
    if (ids.rank() != 2) throw FormatError(ids_file.string() + ": segment map must be rank 2");
    PanopticAnnotation a;
    a.map = SegmentMap(ids.dim(0), ids.dim(1));
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const float v = ids[i];
        if (v < 0.0f || v != std::floor(v) || v > 2147483647.0f)
            throw FormatError(ids_file.string() + ": non-integral segment id");
        a.map.ids[i] = static_cast<std::int32_t>(v);
    }
    std::ifstream f(segments_file);
    if (!f) throw FormatError(segments_file.string() + ": cannot open");
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        SegmentInfo s;
        std::string kind;
        if (!(fields >> s.id >> s.label >> kind) || (kind != "thing" && kind != "stuff"))
            throw FormatError(segments_file.string() + ": malformed line '" + line + "'");
        s.is_thing = kind == "thing";
        a.segments.push_back(s);
    }
    try {
        a.validate();
    } catch (const Error& e) {
        throw FormatError(segments_file.string() + ": " + e.what());
    }
    return a;
}

// ---------------------------------------------------------------------------
// Scene specification

void SceneSpec::validate() const {
    if (height == 0 || width == 0) throw ConfigError("scene extents must be positive");
    if (classes.empty()) throw ConfigError("scene needs at least one class");
    if (background.empty() && objects.empty()) throw ConfigError("scene needs at least one segment");
    if (background.size() > height) throw ConfigError("more background bands than rows");
    for (auto b : background) {
        if (b >= classes.size()) throw ConfigError("background class index out of range");
        if (classes[b].is_thing) throw ConfigError("background class '" + classes[b].name + "' must be stuff");
    }
    if (min_size == 0 || min_size > max_size) throw ConfigError("scene needs 0 < min_size <= max_size");
    for (const auto& o : objects) {
        if (o.label >= classes.size()) throw ConfigError("object class index out of range");
        if (o.geometry) {
            if (o.count != 1) throw ConfigError("explicitly placed objects must have count 1");
            const auto& g = *o.geometry;
            bool inside = false;
            switch (o.shape) {
                case ShapeKind::rect: inside = g[2] > 0 && g[3] > 0 && g[0] + g[2] <= width && g[1] + g[3] <= height; break;
                case ShapeKind::triangle: inside = g[2] > 0 && g[0] + g[2] <= width && g[1] + g[2] <= height; break;
                case ShapeKind::disk:
                    inside = g[2] > 0 && g[0] >= g[2] && g[1] >= g[2] && g[0] + g[2] < width && g[1] + g[2] < height;
                    break;
            }
            if (!inside) throw ConfigError("explicit object geometry lies outside the image");
        }
    }
}

std::vector<ClassInfo> SceneSpec::vocabulary() const {
    std::vector<ClassInfo> out;
    for (const auto& c : classes) out.push_back({c.name, c.seen, c.is_thing});
    return out;
}

namespace {

ShapeKind parse_shape(const std::string& s) {
    if (s == "rect") return ShapeKind::rect;
    if (s == "disk") return ShapeKind::disk;
    if (s == "triangle") return ShapeKind::triangle;
    throw ConfigError("unknown shape '" + s + "'");
}

std::size_t class_index(const SceneSpec& spec, const nlohmann::json& v) {
    if (v.is_number_unsigned()) return v.get<std::size_t>();
    const auto name = v.get<std::string>();
    for (std::size_t i = 0; i < spec.classes.size(); ++i)
        if (spec.classes[i].name == name) return i;
    throw ConfigError("unknown class '" + name + "'");
}

}  // namespace

SceneSpec parse_scene_spec(const std::string& json_text) {
    SceneSpec spec;
    try {
        const auto j = nlohmann::json::parse(json_text);
        spec.height = j.value("height", spec.height);
        spec.width = j.value("width", spec.width);
        for (const auto& c : j.at("classes")) {
            SceneClass sc;
            sc.name = c.at("name").get<std::string>();
            sc.is_thing = c.value("thing", true);
            sc.seen = c.value("seen", true);
            if (c.contains("color")) sc.color = c.at("color").get<std::array<float, 3>>();
            spec.classes.push_back(sc);
        }
        if (j.contains("background"))
            for (const auto& b : j.at("background")) spec.background.push_back(class_index(spec, b));
        if (j.contains("objects"))
            for (const auto& o : j.at("objects")) {
                SceneObject so;
                so.label = class_index(spec, o.at("class"));
                so.shape = parse_shape(o.value("shape", std::string("rect")));
                so.count = o.value("count", std::size_t{1});
                if (o.contains("x")) {
                    const std::size_t x = o.at("x"), y = o.at("y");
                    if (so.shape == ShapeKind::rect)
                        so.geometry = std::array<std::size_t, 4>{x, y, o.at("w").get<std::size_t>(), o.at("h").get<std::size_t>()};
                    else
                        so.geometry = std::array<std::size_t, 4>{x, y, o.at("size").get<std::size_t>(), 0};
                }
                spec.objects.push_back(so);
            }
        spec.min_size = j.value("min_size", spec.min_size);
        spec.max_size = j.value("max_size", spec.max_size);
        spec.min_visible = j.value("min_visible", spec.min_visible);
        spec.max_retries = j.value("max_retries", spec.max_retries);
        spec.noise = j.value("noise", spec.noise);
        spec.template_seed = j.value("template_seed", spec.template_seed);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("scene spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

SceneSpec load_scene_spec(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw FormatError(path.string() + ": cannot open scene spec");
    std::stringstream ss;
    ss << f.rdbuf();
    try {
        return parse_scene_spec(ss.str());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Scene generation

Tensor class_templates(std::size_t num_classes, std::size_t num_templates, std::size_t dim, std::uint64_t template_seed) {
    if (num_templates == 0) throw ConfigError("at least one prompt template is required");
    Tensor out({num_templates, num_classes, dim});
    const float jitter = 0.5f / std::sqrt(static_cast<float>(dim));
    for (std::size_t c = 0; c < num_classes; ++c) {
        Rng rng(mix_seed(template_seed, c));
        Tensor base = l2_normalize(rng.uniform_tensor({1, dim}, -1.0f, 1.0f), 1);
        for (std::size_t t = 0; t < num_templates; ++t) {
            Tensor v({1, dim});
            for (std::size_t j = 0; j < dim; ++j) v[j] = base[j] + jitter * rng.uniform(-1.0f, 1.0f);
            v = l2_normalize(v, 1);
            std::copy(v.data().begin(), v.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>((t * num_classes + c) * dim));
        }
    }
    return out;
}

namespace {

// Pixels covered by a shape with geometry {x, y, size, h}.
template <class Fn>
void for_each_pixel(ShapeKind kind, const std::array<std::size_t, 4>& g, std::size_t height, std::size_t width, Fn&& fn) {
    switch (kind) {
        case ShapeKind::rect:
            for (std::size_t y = g[1]; y < std::min(height, g[1] + g[3]); ++y)
                for (std::size_t x = g[0]; x < std::min(width, g[0] + g[2]); ++x) fn(y, x);
            break;
        case ShapeKind::disk: {
            const long cx = static_cast<long>(g[0]), cy = static_cast<long>(g[1]), r = static_cast<long>(g[2]);
            for (long y = std::max(0L, cy - r); y <= std::min(static_cast<long>(height) - 1, cy + r); ++y)
                for (long x = std::max(0L, cx - r); x <= std::min(static_cast<long>(width) - 1, cx + r); ++x)
                    if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r)
                        fn(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
            break;
        }
        case ShapeKind::triangle: {
            const double mid = static_cast<double>(g[0]) + (static_cast<double>(g[2]) - 1.0) / 2.0;
            for (std::size_t y = g[1]; y < std::min(height, g[1] + g[2]); ++y) {
                const double half = (static_cast<double>(y - g[1]) + 1.0) / 2.0;
                for (std::size_t x = g[0]; x < std::min(width, g[0] + g[2]); ++x)
                    if (std::fabs(static_cast<double>(x) - mid) <= half) fn(y, x);
            }
            break;
        }
    }
}

std::optional<std::array<std::size_t, 4>> random_geometry(ShapeKind kind, const SceneSpec& spec, Rng& rng) {
    const std::size_t limit = std::min(spec.max_size, std::min(spec.height, spec.width));
    if (spec.min_size > limit) return std::nullopt;
    const std::size_t size = spec.min_size + rng.below(limit - spec.min_size + 1);
    switch (kind) {
        case ShapeKind::rect: {
            const std::size_t h = spec.min_size + rng.below(limit - spec.min_size + 1);
            return std::array<std::size_t, 4>{rng.below(spec.width - size + 1), rng.below(spec.height - h + 1), size, h};
        }
        case ShapeKind::triangle:
            return std::array<std::size_t, 4>{rng.below(spec.width - size + 1), rng.below(spec.height - size + 1), size, 0};
        case ShapeKind::disk: {
            const std::size_t r = size / 2;
            if (2 * r + 1 > std::min(spec.height, spec.width) || r == 0) return std::nullopt;
            return std::array<std::size_t, 4>{r + rng.below(spec.width - 2 * r), r + rng.below(spec.height - 2 * r), r, 0};
        }
    }
    return std::nullopt;
}

std::map<std::int32_t, std::size_t> areas(const SegmentMap& m) {
    std::map<std::int32_t, std::size_t> out;
    for (auto id : m.ids)
        if (id) ++out[id];
    return out;
}

}  // namespace

Scene generate_scene(const SceneSpec& spec, Rng& rng, std::size_t num_templates, std::size_t dim) {
    spec.validate();
    Scene scene;
    SegmentMap map(spec.height, spec.width);
    std::vector<SegmentInfo> records;
    std::int32_t next_id = 1;

    const std::size_t bands = spec.background.size();
    for (std::size_t b = 0; b < bands; ++b) {
        const std::size_t y0 = b * spec.height / bands, y1 = (b + 1) * spec.height / bands;
        for (std::size_t y = y0; y < y1; ++y)
            for (std::size_t x = 0; x < spec.width; ++x) map.at(y, x) = next_id;
        records.push_back({next_id++, static_cast<std::int32_t>(spec.background[b]), false});
    }

    std::vector<std::int32_t> placed;
    for (const auto& obj : spec.objects) {
        for (std::size_t k = 0; k < obj.count; ++k) {
            bool ok = false;
            const std::size_t attempts = obj.geometry ? 1 : spec.max_retries;
            for (std::size_t attempt = 0; attempt < attempts && !ok; ++attempt) {
                const auto g = obj.geometry ? obj.geometry : random_geometry(obj.shape, spec, rng);
                if (!g) break;
                SegmentMap trial = map;
                for_each_pixel(obj.shape, *g, spec.height, spec.width,
                               [&](std::size_t y, std::size_t x) { trial.at(y, x) = next_id; });
                const auto a = areas(trial);
                ok = a.count(next_id) && (obj.geometry || a.at(next_id) >= spec.min_visible);
                for (auto id : placed)
                    if (!obj.geometry && (!a.count(id) || a.at(id) < spec.min_visible)) ok = false;
                if (ok) map = std::move(trial);
            }
            if (!ok)
                throw Error("generate_scene: could not place object of class '" + spec.classes[obj.label].name +
                            "' after " + std::to_string(attempts) + " attempts");
            placed.push_back(next_id);
            records.push_back({next_id++, static_cast<std::int32_t>(obj.label), spec.classes[obj.label].is_thing});
        }
    }

    const auto a = areas(map);
    for (const auto& r : records)
        if (a.count(r.id)) scene.gt.segments.push_back(r);
    scene.gt.map = std::move(map);
    scene.gt.validate();

    scene.image = Tensor({3, spec.height, spec.width});
    const auto sem = scene.gt.semantic();
    const std::size_t hw = spec.height * spec.width;
    for (std::size_t p = 0; p < hw; ++p) {
        const auto& color = sem[p] >= 0 ? spec.classes[static_cast<std::size_t>(sem[p])].color
                                         : std::array<float, 3>{0.0f, 0.0f, 0.0f};
        for (std::size_t c = 0; c < 3; ++c) scene.image[c * hw + p] = color[c] + spec.noise * rng.uniform(-1.0f, 1.0f);
    }
    scene.templates = class_templates(spec.classes.size(), num_templates, dim, spec.template_seed);
    scene.classes = spec.vocabulary();
    return scene;
}

void save_scene(const std::filesystem::path& dir, const Scene& scene) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw FormatError(dir.string() + ": cannot create directory: " + ec.message());
    write_tensor(dir / "image.eovt", scene.image);
    save_annotation(dir / "gt_ids.eovt", dir / "gt_segments.txt", scene.gt);
    write_tensor(dir / "templates.eovt", scene.templates);
    write_vocabulary(dir / "vocabulary.txt", scene.classes);
}

Scene load_scene(const std::filesystem::path& dir) {
    Scene s;
    s.image = read_tensor(dir / "image.eovt");
    if (s.image.rank() != 3 || s.image.dim(0) != 3)
        throw FormatError((dir / "image.eovt").string() + ": image must be [3, H, W]");
    s.gt = load_annotation(dir / "gt_ids.eovt", dir / "gt_segments.txt");
    s.templates = read_tensor(dir / "templates.eovt");
    if (s.templates.rank() != 3) throw FormatError((dir / "templates.eovt").string() + ": templates must be rank 3");
    s.classes = read_vocabulary(dir / "vocabulary.txt");
    return s;
}

// ---------------------------------------------------------------------------
// Metrics

namespace {

struct Overlap {
    std::map<std::int32_t, std::size_t> pred_area, gt_area, pred_void;
    std::map<std::pair<std::int32_t, std::int32_t>, std::size_t> inter;
};

Overlap overlap(const PanopticAnnotation& pred, const PanopticAnnotation& gt) {
    if (pred.map.height != gt.map.height || pred.map.width != gt.map.width)
        throw ShapeError("prediction and ground truth extents differ");
    Overlap o;
    for (std::size_t i = 0; i < pred.map.ids.size(); ++i) {
        const auto p = pred.map.ids[i], g = gt.map.ids[i];
        if (p) ++o.pred_area[p];
        if (g) ++o.gt_area[g];
        if (p && g) ++o.inter[{p, g}];
        if (p && !g) ++o.pred_void[p];
    }
    return o;
}

std::vector<SegmentMatch> matches_from(const Overlap& o, const PanopticAnnotation& pred, const PanopticAnnotation& gt) {
    std::vector<SegmentMatch> out;
    for (const auto& [key, n] : o.inter) {
        const auto* ps = pred.find(key.first);
        const auto* gs = gt.find(key.second);
        if (!ps || !gs || ps->label != gs->label) continue;
        const auto pv = o.pred_void.count(key.first) ? o.pred_void.at(key.first) : 0;
        const double uni = static_cast<double>(o.pred_area.at(key.first) + o.gt_area.at(key.second) - n - pv);
        const double iou = static_cast<double>(n) / uni;
        if (iou > 0.5) out.push_back({key.first, key.second, iou});
    }
    return out;
}

}  // namespace

std::vector<SegmentMatch> match_segments(const PanopticAnnotation& pred, const PanopticAnnotation& gt) {
    pred.validate();
    gt.validate();
    return matches_from(overlap(pred, gt), pred, gt);
}

PanopticAnnotation merge_stuff(const PanopticAnnotation& a) {
    PanopticAnnotation out;
    out.map = a.map;
    std::map<std::int32_t, std::int32_t> first_of_label, remap;
    for (const auto& s : a.segments) {
        if (s.is_thing) {
            out.segments.push_back(s);
            continue;
        }
        auto it = first_of_label.find(s.label);
        if (it == first_of_label.end()) {
            first_of_label[s.label] = s.id;
            out.segments.push_back(s);
        } else {
            remap[s.id] = it->second;
        }
    }
    for (auto& id : out.map.ids)
        if (auto it = remap.find(id); it != remap.end()) id = it->second;
    return out;
}

PanopticQuality pq_metrics(const PanopticAnnotation& pred_in, const PanopticAnnotation& gt_in) {
    pred_in.validate();
    gt_in.validate();
    const auto pred = merge_stuff(pred_in);
    const auto gt = merge_stuff(gt_in);
    const auto o = overlap(pred, gt);
    const auto matches = matches_from(o, pred, gt);

    PanopticQuality q;
    std::set<std::int32_t> matched_pred, matched_gt;
    for (const auto& m : matches) {
        auto& c = q.per_class[gt.find(m.gt_id)->label];
        ++c.tp;
        c.iou_sum += m.iou;
        matched_pred.insert(m.pred_id);
        matched_gt.insert(m.gt_id);
    }
    for (const auto& s : gt.segments)
        if (!matched_gt.count(s.id) && o.gt_area.count(s.id)) ++q.per_class[s.label].fn;
    for (const auto& s : pred.segments) {
        if (matched_pred.count(s.id) || !o.pred_area.count(s.id)) continue;
        const auto pv = o.pred_void.count(s.id) ? o.pred_void.at(s.id) : 0;
        // Predictions lying mostly on void are ignored.
        if (static_cast<double>(pv) / static_cast<double>(o.pred_area.at(s.id)) > 0.5) continue;
        ++q.per_class[s.label].fp;
    }

    std::size_t counted = 0;
    for (auto& [label, c] : q.per_class) {
        const double denom = static_cast<double>(c.tp) + 0.5 * static_cast<double>(c.fp) + 0.5 * static_cast<double>(c.fn);
        if (denom == 0.0) continue;
        c.pq = c.iou_sum / denom;
        c.sq = c.tp ? c.iou_sum / static_cast<double>(c.tp) : 0.0;
        c.rq = static_cast<double>(c.tp) / denom;
        q.pq += c.pq;
        q.sq += c.sq;
        q.rq += c.rq;
        ++counted;
    }
    if (counted) {
        q.pq /= static_cast<double>(counted);
        q.sq /= static_cast<double>(counted);
        q.rq /= static_cast<double>(counted);
    }
    return q;
}

double miou(const std::vector<std::int32_t>& pred_sem, const std::vector<std::int32_t>& gt_sem) {
    if (pred_sem.size() != gt_sem.size()) throw ShapeError("miou: maps differ in size");
    std::map<std::int32_t, std::pair<std::size_t, std::size_t>> iu;  // class -> (intersection, union)
    for (std::size_t i = 0; i < gt_sem.size(); ++i) {
        const auto g = gt_sem[i], p = pred_sem[i];
        if (g < 0) continue;
        if (p == g) {
            ++iu[g].first;
            ++iu[g].second;
        } else {
            ++iu[g].second;
            if (p >= 0) ++iu[p].second;
        }
    }
    if (iu.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [c, v] : iu) sum += static_cast<double>(v.first) / static_cast<double>(v.second);
    return sum / static_cast<double>(iu.size());
}

PanopticAnnotation assemble_panoptic(const MaskSet& masks, const std::vector<Detection>& detections,
                                     const std::vector<ClassInfo>& classes, std::size_t height, std::size_t width) {
    PanopticAnnotation out;
    out.map = SegmentMap(height, width);
    if (detections.empty()) return out;
    if (height % masks.height() || width % masks.width() || height / masks.height() != width / masks.width())
        throw ShapeError("assemble_panoptic: output extents are not an integer multiple of the mask grid");
    const std::size_t factor = height / masks.height(), k = detections.size(), mhw = masks.height() * masks.width();

    Tensor selected({k, masks.height(), masks.width()});
    for (std::size_t i = 0; i < k; ++i)
        std::copy_n(masks.logits.ptr() + detections[i].mask * mhw, mhw, selected.ptr() + i * mhw);
    const Tensor logits = factor == 1 ? selected : bilinear_upsample(selected, factor);
    const Tensor prob = pointwise(Activation::sigmoid, logits);

    const std::size_t hw = height * width;
    std::vector<std::int64_t> owner(hw, -1);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t p = 0; p < hw; ++p) {
        std::size_t best = 0;
        float best_score = detections[0].confidence * prob[p];
        for (std::size_t i = 1; i < k; ++i) {
            const float s = detections[i].confidence * prob[i * hw + p];
            if (s > best_score) {
                best_score = s;
                best = i;
            }
        }
        if (prob[best * hw + p] >= 0.5f) {
            owner[p] = static_cast<std::int64_t>(best);
            ++count[best];
        }
    }

    std::vector<std::int32_t> id_of(k, 0);
    std::map<std::size_t, std::int32_t> stuff_id;
    std::int32_t next = 1;
    for (std::size_t i = 0; i < k; ++i) {
        if (!count[i]) continue;
        const std::size_t label = detections[i].label;
        const bool thing = label < classes.size() ? classes[label].is_thing : true;
        if (!thing) {
            if (auto it = stuff_id.find(label); it != stuff_id.end()) {
                id_of[i] = it->second;
                continue;
            }
            stuff_id[label] = next;
        }
        id_of[i] = next;
        out.segments.push_back({next, static_cast<std::int32_t>(label), thing});
        ++next;
    }
    for (std::size_t p = 0; p < hw; ++p)
        if (owner[p] >= 0) out.map.ids[p] = id_of[static_cast<std::size_t>(owner[p])];
    return out;
}

}  // namespace eovseg
