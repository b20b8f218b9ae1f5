#include "eovseg/classifier.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "eovseg/error.hpp"
#include "eovseg/kernels.hpp"

namespace eovseg {

std::vector<ClassInfo> read_vocabulary(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw FormatError(path.string() + ": cannot open vocabulary");
    std::vector<ClassInfo> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        std::string name, seen, kind;
        std::getline(fields, name, '\t');
        std::getline(fields, seen, '\t');
        std::getline(fields, kind, '\t');
        if (name.empty() || (seen != "seen" && seen != "unseen") || (!kind.empty() && kind != "thing" && kind != "stuff"))
            throw FormatError(path.string() + ":" + std::to_string(lineno) +
                              ": expected '<name>\\t<seen|unseen>[\\t<thing|stuff>]'");
        out.push_back({name, seen == "seen", kind != "stuff"});
    }
    if (out.empty()) throw FormatError(path.string() + ": vocabulary is empty");
    return out;
}

void write_vocabulary(const std::filesystem::path& path, const std::vector<ClassInfo>& classes) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw FormatError(path.string() + ": cannot open for writing");
    for (const auto& c : classes)
        f << c.name << '\t' << (c.seen ? "seen" : "unseen") << '\t' << (c.is_thing ? "thing" : "stuff") << '\n';
}

std::vector<bool> TextEmbeddings::seen_mask() const {
    std::vector<bool> seen;
    for (const auto& c : classes) seen.push_back(c.seen);
    return seen;
}

EnsembleMethod parse_ensemble_method(std::string_view name) {
    if (name == "geometric") return EnsembleMethod::geometric;
    if (name == "arithmetic") return EnsembleMethod::arithmetic;
    throw ConfigError("unknown ensemble method '" + std::string(name) + "'");
}

std::string to_string(EnsembleMethod method) {
    return method == EnsembleMethod::geometric ? "geometric" : "arithmetic";
}

void EnsembleParams::validate() const {
    if (!(alpha >= 0.0f && alpha <= 1.0f)) throw ConfigError("ensemble alpha must lie in [0, 1]");
    if (!(beta >= 0.0f && beta <= 1.0f)) throw ConfigError("ensemble beta must lie in [0, 1]");
}

Tensor build_text_embeddings(const Tensor& templates) {
    require_rank(templates, 3, "text templates");
    const std::size_t m = templates.dim(0), n = templates.dim(1), d = templates.dim(2);
    Tensor mean({n, d});
    for (std::size_t c = 0; c < n; ++c) {
        double sq = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < m; ++t) acc += templates[(t * n + c) * d + j];
            mean[c * d + j] = static_cast<float>(acc / static_cast<double>(m));
            sq += static_cast<double>(mean[c * d + j]) * mean[c * d + j];
        }
        if (sq < 1e-24) throw Error("build_text_embeddings: class " + std::to_string(c) + " averages to a zero vector");
    }
    return l2_normalize(mean, 1);
}

TextEmbeddings make_text_embeddings(const Tensor& templates, std::vector<ClassInfo> classes) {
    TextEmbeddings t{build_text_embeddings(templates), std::move(classes)};
    if (t.classes.size() != t.size())
        throw ShapeError("vocabulary lists " + std::to_string(t.classes.size()) + " classes but templates hold " +
                         std::to_string(t.size()));
    return t;
}

ClassScores in_vocab_scores(const Tensor& embeddings, const Tensor& text, float tau) {
    if (!(tau > 0.0f)) throw ConfigError("temperature must be positive");
    require_rank(embeddings, 2, "classifier embeddings");
    require_rank(text, 2, "text embeddings");
    if (embeddings.dim(1) != text.dim(1))
        throw ShapeError("classifier: embedding width " + std::to_string(embeddings.dim(1)) +
                         " does not match text width " + std::to_string(text.dim(1)));
    Tensor logits = matmul(l2_normalize(embeddings, 1), transpose2d(l2_normalize(text, 1)));
    for (auto& v : logits.data()) v /= tau;
    return {softmax(logits, 1), ScoreKind::in_vocab};
}

ClassScores out_vocab_scores(const Tensor& clip_features, const MaskSet& masks, const Tensor& text, float tau) {
    ClassScores s = in_vocab_scores(mask_pool(clip_features, masks), text, tau);
    s.kind = ScoreKind::out_vocab;
    return s;
}

ClassScores ensemble(const ClassScores& in_vocab, const ClassScores& out_vocab, const EnsembleParams& p,
                     const std::vector<bool>& seen) {
    p.validate();
    require_rank(in_vocab.scores, 2, "ensemble in-vocabulary scores");
    require_shape(out_vocab.scores, in_vocab.scores.shape(), "ensemble out-of-vocabulary scores");
    const std::size_t rows = in_vocab.scores.dim(0), classes = in_vocab.scores.dim(1);
    if (seen.size() != classes)
        throw ShapeError("ensemble: seen mask has " + std::to_string(seen.size()) + " entries for " +
                         std::to_string(classes) + " classes");
    Tensor out(in_vocab.scores.shape());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < classes; ++c) {
            const std::size_t i = r * classes + c;
            const double si = in_vocab.scores[i], so = out_vocab.scores[i];
            const double w = seen[c] ? p.alpha : p.beta;
            double v;
            if (p.method == EnsembleMethod::geometric) {
                if (!(si > 0.0) || !(so > 0.0))
                    throw Error("ensemble: geometric mode requires positive scores (row " + std::to_string(r) +
                                ", class " + std::to_string(c) + ")");
                v = std::pow(si, 1.0 - w) * std::pow(so, w);
            } else {
                v = (1.0 - w) * si + w * so;
            }
            out[i] = static_cast<float>(v);
        }
    return {std::move(out), ScoreKind::ensembled};
}

std::vector<Detection> classify(const MaskSet& masks, const ClassScores& scores, float score_floor) {
    require_rank(scores.scores, 2, "classify scores");
    if (scores.scores.dim(0) != masks.count())
        throw ShapeError("classify: " + std::to_string(scores.scores.dim(0)) + " score rows for " +
                         std::to_string(masks.count()) + " masks");
    const std::size_t classes = scores.scores.dim(1);
    std::vector<Detection> out;
    for (std::size_t r = 0; r < masks.count(); ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < classes; ++c)
            if (scores.scores[r * classes + c] > scores.scores[r * classes + best]) best = c;
        const float conf = scores.scores[r * classes + best];
        if (conf >= score_floor) out.push_back({r, best, conf});
    }
    return out;
}

}  // namespace eovseg
