#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eovseg/classifier.hpp"
#include "eovseg/decoder.hpp"
#include "eovseg/rng.hpp"
#include "eovseg/tensor.hpp"

namespace eovseg {

// Integer segment-id raster; 0 is void.
struct SegmentMap {
    std::size_t height = 0, width = 0;
    std::vector<std::int32_t> ids;

    SegmentMap() = default;
    SegmentMap(std::size_t h, std::size_t w) : height(h), width(w), ids(h * w, 0) {}
    std::int32_t& at(std::size_t y, std::size_t x) { return ids[y * width + x]; }
    std::int32_t at(std::size_t y, std::size_t x) const { return ids[y * width + x]; }
};

struct SegmentInfo {
    std::int32_t id = 0;
    std::int32_t label = 0;
    bool is_thing = true;
};

struct PanopticAnnotation {
    SegmentMap map;
    std::vector<SegmentInfo> segments;

    // Every nonzero id in the map has exactly one record; ids unique.
    void validate() const;
    const SegmentInfo* find(std::int32_t id) const;
    // Class per pixel, -1 for void.
    std::vector<std::int32_t> semantic() const;
};

// Ids as an EOVT [H, W] tensor with integral values plus a sidecar
// "<id> <class> <thing|stuff>" text file.
void save_annotation(const std::filesystem::path& ids_file, const std::filesystem::path& segments_file,
                     const PanopticAnnotation& a);
PanopticAnnotation load_annotation(const std::filesystem::path& ids_file, const std::filesystem::path& segments_file);

// ---------------------------------------------------------------------------
// Synthetic scenes

enum class ShapeKind { rect, disk, triangle };

struct SceneClass {
    std::string name;
    bool is_thing = true;
    bool seen = true;
    std::array<float, 3> color{0.5f, 0.5f, 0.5f};
};

struct SceneObject {
    std::size_t label = 0;
    ShapeKind shape = ShapeKind::rect;
    std::size_t count = 1;
    // Explicit placement (count must be 1): rect/triangle use x, y, size
    // (and h for rect); disk uses x, y as the center and size as the radius.
    std::optional<std::array<std::size_t, 4>> geometry;
};

struct SceneSpec {
    std::size_t height = 64, width = 64;
    std::vector<SceneClass> classes;
    std::vector<std::size_t> background;  // stuff classes tiled as horizontal bands
    std::vector<SceneObject> objects;     // drawn back to front
    std::size_t min_size = 8, max_size = 24;
    std::size_t min_visible = 8;          // pixels every placed object must keep
    std::size_t max_retries = 200;
    float noise = 0.05f;
    std::uint64_t template_seed = 7;

    void validate() const;
    std::vector<ClassInfo> vocabulary() const;
};

SceneSpec parse_scene_spec(const std::string& json_text);
SceneSpec load_scene_spec(const std::filesystem::path& path);

struct Scene {
    Tensor image;  // [3, H, W]
    PanopticAnnotation gt;
    Tensor templates;  // [M, N_class, D]
    std::vector<ClassInfo> classes;
};

// Per-class prompt templates: a unit base vector seeded by (template_seed,
// class index) plus per-template perturbation, each row unit-norm.
Tensor class_templates(std::size_t num_classes, std::size_t num_templates, std::size_t dim, std::uint64_t template_seed);

Scene generate_scene(const SceneSpec& spec, Rng& rng, std::size_t num_templates, std::size_t dim);

void save_scene(const std::filesystem::path& dir, const Scene& scene);
Scene load_scene(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Metrics

struct SegmentMatch {
    std::int32_t pred_id = 0;
    std::int32_t gt_id = 0;
    double iou = 0.0;
};

// Same-class pairs with IoU > 0.5. Pred pixels on gt void are excluded from
// the union.
std::vector<SegmentMatch> match_segments(const PanopticAnnotation& pred, const PanopticAnnotation& gt);

struct ClassQuality {
    std::size_t tp = 0, fp = 0, fn = 0;
    double iou_sum = 0.0;
    double pq = 0.0, sq = 0.0, rq = 0.0;
};

struct PanopticQuality {
    std::map<std::int32_t, ClassQuality> per_class;
    double pq = 0.0, sq = 0.0, rq = 0.0;  // means over classes with tp + fp + fn > 0
};

// Stuff segments sharing a class are merged into one segment first.
PanopticQuality pq_metrics(const PanopticAnnotation& pred, const PanopticAnnotation& gt);

PanopticAnnotation merge_stuff(const PanopticAnnotation& a);

// Mean over classes whose union is nonempty; pixels where gt is void (< 0)
// are ignored.
double miou(const std::vector<std::int32_t>& pred_sem, const std::vector<std::int32_t>& gt_sem);

// Pixel-wise argmax of confidence * mask probability over the detections
// (masks bilinearly upsampled from stride 4 to full resolution); pixels whose
// winning probability is below 0.5 stay void. One segment per detection,
// stuff detections of the same class merged.
PanopticAnnotation assemble_panoptic(const MaskSet& masks, const std::vector<Detection>& detections,
                                     const std::vector<ClassInfo>& classes, std::size_t height, std::size_t width);

}  // namespace eovseg
