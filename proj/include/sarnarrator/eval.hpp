#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace sarnarrator {

// Lowercase tokens, ASCII punctuation stripped, whitespace split.
using TokenizedCaption = std::vector<std::string>;

TokenizedCaption tokenize(const std::string& caption);

// Suffix stripper behind the METEOR stem stage: ing/ed/es/s with a minimum
// stem length of 3.
std::string light_stem(const std::string& token);

// Modified n-gram precision with clipping, geometric mean over orders 1..n,
// brevity penalty exp(1 - r/c) when c < r with the closest reference length
// as r. Zero precision at any order gives 0 unless `smooth` substitutes the
// add-epsilon numerator.
double bleu(const TokenizedCaption& candidate,
            const std::vector<TokenizedCaption>& references, int n,
            bool smooth = false);

// Corpus-level variant: clipped counts and lengths pooled over items before
// the geometric mean and brevity penalty.
double corpus_bleu(const std::vector<TokenizedCaption>& candidates,
                   const std::vector<std::vector<TokenizedCaption>>& references,
                   int n, bool smooth = false);

// LCS F-score with beta = 1.2, maximum over references.
double rouge_l(const TokenizedCaption& candidate,
               const std::vector<TokenizedCaption>& references);

// Two-stage unigram alignment (exact, then stem), Fmean = 10PR/(R+9P),
// fragmentation penalty 0.5*(chunks/matches)^3, maximum over references.
double meteor_simplified(const TokenizedCaption& candidate,
                         const std::vector<TokenizedCaption>& references);

// Base CIDEr: tf-idf n-gram vectors (n = 1..4, idf over the reference
// corpus), per-n cosine averaged over references, mean over n, times 10.
std::vector<double> cider_scores(
    const std::vector<TokenizedCaption>& candidates,
    const std::vector<std::vector<TokenizedCaption>>& references);
double cider(const std::vector<TokenizedCaption>& candidates,
             const std::vector<std::vector<TokenizedCaption>>& references);

// Rows are images, columns are texts; the ground-truth pairing is equal
// index, so retrieval evaluation requires a square matrix.
struct SimilarityMatrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<float> scores;  // row-major

  float at(size_t r, size_t c) const { return scores[r * cols + c]; }
};

enum class RetrievalDirection { i2t, t2i };

// Rank candidates by descending score, ties broken by ascending index; a
// query scores a hit when its equal-index item ranks within k.
double recall_at_k(const SimilarityMatrix& m, int k, RetrievalDirection dir);

// Mean of {i2t, t2i} x Recall@{1,5,10}; requires at least a 10x10 matrix.
double mean_recall(const SimilarityMatrix& m);

// Text format: header line "rows cols", then row-major whitespace-separated
// reals. Entries must be finite.
SimilarityMatrix read_similarity_matrix(const std::string& path);
void write_similarity_matrix(const SimilarityMatrix& m,
                             const std::string& path);

// Two embedding files in the same text format ("n k" header); similarity is
// the dot product, so the embedding widths must agree.
SimilarityMatrix similarity_from_embeddings(const std::string& image_path,
                                            const std::string& text_path);

struct CaptionEvalItem {
  std::string id;
  std::string candidate;
  std::vector<std::string> references;
};

// Line-delimited JSON {"id", "candidate", "references": [str]}.
std::vector<CaptionEvalItem> read_caption_eval_items(const std::string& path);

struct CaptionEvalReport {
  double bleu_1 = 0.0;
  double bleu_2 = 0.0;
  double bleu_3 = 0.0;
  double bleu_4 = 0.0;
  double meteor = 0.0;
  double rouge_l = 0.0;
  double cider = 0.0;
};

// BLEU and CIDEr aggregate at corpus level; METEOR and ROUGE-L average over
// items.
CaptionEvalReport evaluate_captions(const std::vector<CaptionEvalItem>& items,
                                    bool smooth = false);
std::string caption_report_json(const CaptionEvalReport& report);

struct RetrievalReport {
  double i2t_r1 = 0.0;
  double i2t_r5 = 0.0;
  double i2t_r10 = 0.0;
  double t2i_r1 = 0.0;
  double t2i_r5 = 0.0;
  double t2i_r10 = 0.0;
  double mean = 0.0;
};

RetrievalReport evaluate_retrieval(const SimilarityMatrix& m);
std::string retrieval_report_json(const RetrievalReport& report);

}  // namespace sarnarrator
