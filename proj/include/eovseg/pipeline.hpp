#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "eovseg/classifier.hpp"
#include "eovseg/config.hpp"
#include "eovseg/evaluation.hpp"
#include "eovseg/model.hpp"

namespace eovseg {

// Named intermediates of one forward pass. Each name may be recorded once.
class Trace {
public:
    void put(const std::string& name, const Tensor& t);
    const Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
    const std::vector<std::string>& names() const { return order_; }

    // One EOVT file per tensor plus a manifest (WeightStore layout).
    void save(const std::filesystem::path& dir) const;
    static Trace load(const std::filesystem::path& dir);

private:
    std::vector<std::string> order_;
    std::map<std::string, Tensor> tensors_;
};

// Trace names in pipeline order for a fusion mode.
std::vector<std::string> trace_names(FusionMode mode);

// Zero-pads bottom/right so both extents are multiples of `multiple`.
Tensor pad_image(const Tensor& image, std::size_t multiple = 32);

// Bilinear resize (half-pixel centers) so the shorter side equals `short_side`.
Tensor resize_short_side(const Tensor& image, std::size_t short_side);

struct ForwardResult {
    PanopticAnnotation panoptic;  // at the input image extents
    ClassScores scores;           // ensembled, [N, N_class]
    MaskSet masks;                // [N, H'/4, W'/4] on the padded grid
    std::vector<Detection> detections;
    std::vector<std::pair<std::string, Shape>> stage_shapes;
};

// Full forward pass. Images whose extents are not multiples of 32 are padded
// and the panoptic map is cropped back. Failures are rethrown as StageError
// carrying the stage name.
ForwardResult forward(const Tensor& image, const TextEmbeddings& text, const ModelConfig& config,
                      const ModelWeights& weights, Trace* trace = nullptr);

struct ReplayResult {
    std::string stage;
    std::string output;
    bool bitwise = false;
};

// Re-executes each stage on the dumped inputs (plus the original image and
// text) and compares against the dumped outputs.
std::vector<ReplayResult> replay_trace(const Trace& trace, const Tensor& image, const TextEmbeddings& text,
                                       const ModelConfig& config, const ModelWeights& weights);

}  // namespace eovseg
