#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "eovseg/decoder.hpp"
#include "eovseg/tensor.hpp"

namespace eovseg {

struct ClassInfo {
    std::string name;
    bool seen = true;      // member of the training vocabulary
    bool is_thing = true;  // countable instance vs. amorphous region
};

// Vocabulary file: one class per line, "<name>\t<seen|unseen>\t<thing|stuff>".
// Lines starting with '#' are comments. The third column is optional
// (default thing).
std::vector<ClassInfo> read_vocabulary(const std::filesystem::path& path);
void write_vocabulary(const std::filesystem::path& path, const std::vector<ClassInfo>& classes);

struct TextEmbeddings {
    Tensor embeddings;  // [N_class, D], unit rows
    std::vector<ClassInfo> classes;

    std::size_t size() const { return embeddings.dim(0); }
    std::vector<bool> seen_mask() const;
};

enum class ScoreKind { in_vocab, out_vocab, ensembled };

struct ClassScores {
    Tensor scores;  // [N_mask, N_class]
    ScoreKind kind = ScoreKind::in_vocab;
};

enum class EnsembleMethod { geometric, arithmetic };
EnsembleMethod parse_ensemble_method(std::string_view name);
std::string to_string(EnsembleMethod method);

struct EnsembleParams {
    float alpha = 0.4f;  // out-of-vocabulary weight for seen classes
    float beta = 0.8f;   // out-of-vocabulary weight for unseen classes
    EnsembleMethod method = EnsembleMethod::geometric;

    void validate() const;
};

// Averages M prompt templates [M, N_class, D] and L2-normalizes each class row.
Tensor build_text_embeddings(const Tensor& templates);
TextEmbeddings make_text_embeddings(const Tensor& templates, std::vector<ClassInfo> classes);

// softmax over classes of cos(E_row, E_t) / tau.
ClassScores in_vocab_scores(const Tensor& embeddings, const Tensor& text, float tau);

// E_c = normalize(mask_pool(F_clip, M)); then as in_vocab_scores.
ClassScores out_vocab_scores(const Tensor& clip_features, const MaskSet& masks, const Tensor& text, float tau);

// Per class i:
//   geometric:  S_I^(1-w) * S_O^w
//   arithmetic: (1-w) S_I + w S_O
// with w = alpha for seen classes and beta otherwise. Evaluated in double.
ClassScores ensemble(const ClassScores& in_vocab, const ClassScores& out_vocab, const EnsembleParams& p,
                     const std::vector<bool>& seen);

struct Detection {
    std::size_t mask = 0;
    std::size_t label = 0;
    float confidence = 0.0f;
};

// Row argmax (lowest index wins ties); rows below score_floor are dropped.
std::vector<Detection> classify(const MaskSet& masks, const ClassScores& scores, float score_floor);

}  // namespace eovseg
