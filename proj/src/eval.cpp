#include "sarnarrator/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "sarnarrator/errors.hpp"
#include "sarnarrator/kernels.hpp"
#include "sarnarrator/util.hpp"

namespace sarnarrator {

namespace {

constexpr double kRougeBetaSq = 1.2 * 1.2;
constexpr double kBleuEpsilon = 0.1;

using NgramCounts = std::unordered_map<std::string, int64_t>;

// n-grams keyed by their tokens joined with an unprintable separator.
NgramCounts ngram_counts(const TokenizedCaption& tokens, int n) {
  NgramCounts counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (int j = 1; j < n; ++j) {
      key += '\x1f';
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

void require_references(const std::vector<TokenizedCaption>& references) {
  if (references.empty()) {
    raise(errc::no_references, "at least one reference caption is required");
  }
}

void check_bleu_order(int n) {
  if (n < 1 || n > 4) {
    raise(errc::invalid_argument,
          "BLEU order must be in 1..4, got " + std::to_string(n));
  }
}

// Clipped numerator and candidate-side denominator for one order.
std::pair<int64_t, int64_t> clipped_counts(
    const TokenizedCaption& candidate,
    const std::vector<TokenizedCaption>& references, int order) {
  const int64_t denom =
      std::max<int64_t>(0, static_cast<int64_t>(candidate.size()) - order + 1);
  if (denom == 0) return {0, 0};
  NgramCounts cand = ngram_counts(candidate, order);
  NgramCounts max_ref;
  for (const auto& ref : references) {
    for (const auto& [key, count] : ngram_counts(ref, order)) {
      auto& slot = max_ref[key];
      slot = std::max(slot, count);
    }
  }
  int64_t clipped = 0;
  for (const auto& [key, count] : cand) {
    auto it = max_ref.find(key);
    if (it != max_ref.end()) clipped += std::min(count, it->second);
  }
  return {clipped, denom};
}

// Reference length closest to the candidate's; ties pick the shorter.
int64_t closest_ref_length(size_t candidate_len,
                           const std::vector<TokenizedCaption>& references) {
  int64_t best = static_cast<int64_t>(references.front().size());
  for (const auto& ref : references) {
    const auto len = static_cast<int64_t>(ref.size());
    const auto c = static_cast<int64_t>(candidate_len);
    if (std::llabs(len - c) < std::llabs(best - c) ||
        (std::llabs(len - c) == std::llabs(best - c) && len < best)) {
      best = len;
    }
  }
  return best;
}

double bleu_from_totals(const std::vector<std::pair<int64_t, int64_t>>& totals,
                        int64_t cand_len, int64_t ref_len, bool smooth) {
  double log_sum = 0.0;
  for (const auto& [clipped, denom] : totals) {
    if (denom == 0) return 0.0;
    double numerator = static_cast<double>(clipped);
    if (clipped == 0) {
      if (!smooth) return 0.0;
      numerator = kBleuEpsilon;
    }
    log_sum += std::log(numerator / static_cast<double>(denom));
  }
  log_sum /= static_cast<double>(totals.size());
  if (cand_len == 0) return 0.0;
  const double bp =
      cand_len >= ref_len
          ? 1.0
          : std::exp(1.0 - static_cast<double>(ref_len) /
                               static_cast<double>(cand_len));
  return bp * std::exp(log_sum);
}

int64_t lcs_length(const TokenizedCaption& a, const TokenizedCaption& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<int64_t> prev(b.size() + 1, 0);
  std::vector<int64_t> cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

struct Alignment {
  int64_t matches = 0;
  int64_t chunks = 0;
};

// Greedy left-to-right alignment: each candidate token takes the earliest
// unmatched reference position, exact matches first, stem matches second.
Alignment align_unigrams(const TokenizedCaption& candidate,
                         const TokenizedCaption& reference) {
  std::vector<int64_t> cand_to_ref(candidate.size(), -1);
  std::vector<bool> ref_used(reference.size(), false);

  for (int stage = 0; stage < 2; ++stage) {
    for (size_t i = 0; i < candidate.size(); ++i) {
      if (cand_to_ref[i] >= 0) continue;
      const std::string key =
          stage == 0 ? candidate[i] : light_stem(candidate[i]);
      for (size_t j = 0; j < reference.size(); ++j) {
        if (ref_used[j]) continue;
        const std::string ref_key =
            stage == 0 ? reference[j] : light_stem(reference[j]);
        if (key == ref_key) {
          cand_to_ref[i] = static_cast<int64_t>(j);
          ref_used[j] = true;
          break;
        }
      }
    }
  }

  Alignment out;
  int64_t prev_ref = -2;
  for (size_t i = 0; i < candidate.size(); ++i) {
    if (cand_to_ref[i] < 0) continue;
    ++out.matches;
    // A chunk extends only while both sides advance by exactly one.
    const bool contiguous =
        i > 0 && cand_to_ref[i - 1] >= 0 && cand_to_ref[i] == prev_ref + 1;
    if (!contiguous) ++out.chunks;
    prev_ref = cand_to_ref[i];
  }
  return out;
}

using TfIdf = std::unordered_map<std::string, double>;

double cosine(const TfIdf& a, const TfIdf& b) {
  double dot = 0.0;
  double norm_a = 0.0;
  double norm_b = 0.0;
  for (const auto& [key, value] : a) {
    norm_a += value * value;
    auto it = b.find(key);
    if (it != b.end()) dot += value * it->second;
  }
  for (const auto& [key, value] : b) norm_b += value * value;
  if (norm_a == 0.0 || norm_b == 0.0) return 0.0;
  return dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
}

std::vector<float> parse_real_grid(std::istream& in, const std::string& path,
                                   size_t& rows, size_t& cols) {
  int64_t r = 0;
  int64_t c = 0;
  if (!(in >> r >> c) || r <= 0 || c <= 0) {
    raise(errc::malformed_document,
          path + ": expected a positive 'rows cols' header");
  }
  rows = static_cast<size_t>(r);
  cols = static_cast<size_t>(c);
  std::vector<float> values(rows * cols);
  for (size_t i = 0; i < values.size(); ++i) {
    double v = 0.0;
    if (!(in >> v)) {
      raise(errc::malformed_document,
            path + ": expected " + std::to_string(values.size()) +
                " values, got " + std::to_string(i));
    }
    if (!std::isfinite(v)) {
      raise(errc::malformed_document,
            path + ": non-finite entry at index " + std::to_string(i));
    }
    values[i] = static_cast<float>(v);
  }
  double extra = 0.0;
  if (in >> extra) {
    raise(errc::malformed_document, path + ": trailing values after grid");
  }
  return values;
}

}  // namespace

TokenizedCaption tokenize(const std::string& caption) {
  std::string cleaned;
  cleaned.reserve(caption.size());
  for (char ch : caption) {
    const auto u = static_cast<unsigned char>(ch);
    if (u < 128 && std::ispunct(u)) {
      cleaned += ' ';
    } else {
      cleaned += static_cast<char>(u < 128 ? std::tolower(u) : u);
    }
  }
  return split_ws(cleaned);
}

std::string light_stem(const std::string& token) {
  auto try_strip = [&](const char* suffix) -> bool {
    const size_t n = std::char_traits<char>::length(suffix);
    return token.size() >= n + 3 &&
           token.compare(token.size() - n, n, suffix) == 0;
  };
  if (try_strip("ing")) return token.substr(0, token.size() - 3);
  if (try_strip("ed")) return token.substr(0, token.size() - 2);
  if (try_strip("es")) return token.substr(0, token.size() - 2);
  if (try_strip("s") && token.compare(token.size() - 2, 2, "ss") != 0) {
    return token.substr(0, token.size() - 1);
  }
  return token;
}

double bleu(const TokenizedCaption& candidate,
            const std::vector<TokenizedCaption>& references, int n,
            bool smooth) {
  check_bleu_order(n);
  require_references(references);
  std::vector<std::pair<int64_t, int64_t>> totals;
  for (int order = 1; order <= n; ++order) {
    totals.push_back(clipped_counts(candidate, references, order));
  }
  return bleu_from_totals(totals, static_cast<int64_t>(candidate.size()),
                          closest_ref_length(candidate.size(), references),
                          smooth);
}

double corpus_bleu(const std::vector<TokenizedCaption>& candidates,
                   const std::vector<std::vector<TokenizedCaption>>& references,
                   int n, bool smooth) {
  check_bleu_order(n);
  if (candidates.size() != references.size()) {
    raise(errc::alignment_mismatch,
          "candidate/reference list sizes differ: " +
              std::to_string(candidates.size()) + " vs " +
              std::to_string(references.size()));
  }
  if (candidates.empty()) {
    raise(errc::alignment_mismatch, "empty evaluation corpus");
  }
  std::vector<std::pair<int64_t, int64_t>> totals(n, {0, 0});
  int64_t cand_len = 0;
  int64_t ref_len = 0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    require_references(references[i]);
    for (int order = 1; order <= n; ++order) {
      const auto [clipped, denom] =
          clipped_counts(candidates[i], references[i], order);
      totals[order - 1].first += clipped;
      totals[order - 1].second += denom;
    }
    cand_len += static_cast<int64_t>(candidates[i].size());
    ref_len += closest_ref_length(candidates[i].size(), references[i]);
  }
  return bleu_from_totals(totals, cand_len, ref_len, smooth);
}

double rouge_l(const TokenizedCaption& candidate,
               const std::vector<TokenizedCaption>& references) {
  require_references(references);
  double best = 0.0;
  for (const auto& ref : references) {
    const int64_t lcs = lcs_length(candidate, ref);
    if (lcs == 0) continue;
    const double p = static_cast<double>(lcs) / candidate.size();
    const double r = static_cast<double>(lcs) / ref.size();
    const double f = (1.0 + kRougeBetaSq) * p * r / (r + kRougeBetaSq * p);
    best = std::max(best, f);
  }
  return best;
}

double meteor_simplified(const TokenizedCaption& candidate,
                         const std::vector<TokenizedCaption>& references) {
  require_references(references);
  double best = 0.0;
  for (const auto& ref : references) {
    if (candidate.empty() || ref.empty()) continue;
    const Alignment a = align_unigrams(candidate, ref);
    if (a.matches == 0) continue;
    const double m = static_cast<double>(a.matches);
    const double p = m / candidate.size();
    const double r = m / ref.size();
    const double fmean = 10.0 * p * r / (r + 9.0 * p);
    const double frag = static_cast<double>(a.chunks) / m;
    const double penalty = 0.5 * frag * frag * frag;
    best = std::max(best, fmean * (1.0 - penalty));
  }
  return best;
}

std::vector<double> cider_scores(
    const std::vector<TokenizedCaption>& candidates,
    const std::vector<std::vector<TokenizedCaption>>& references) {
  if (candidates.size() != references.size()) {
    raise(errc::alignment_mismatch,
          "candidate/reference list sizes differ: " +
              std::to_string(candidates.size()) + " vs " +
              std::to_string(references.size()));
  }
  if (candidates.empty()) {
    raise(errc::alignment_mismatch, "empty evaluation corpus");
  }
  const size_t corpus_n = candidates.size();

  // Document frequency per order: number of items whose reference set
  // contains the n-gram.
  std::vector<NgramCounts> df(4);
  for (const auto& refs : references) {
    require_references(refs);
    for (int order = 1; order <= 4; ++order) {
      NgramCounts seen;
      for (const auto& ref : refs) {
        for (const auto& [key, count] : ngram_counts(ref, order)) {
          seen[key] = 1;
        }
      }
      for (const auto& kv : seen) ++df[order - 1][kv.first];
    }
  }

  const double log_n = std::log(static_cast<double>(corpus_n));
  auto tfidf = [&](const TokenizedCaption& tokens, int order) {
    TfIdf vec;
    for (const auto& [key, count] : ngram_counts(tokens, order)) {
      const auto it = df[order - 1].find(key);
      const int64_t d = it == df[order - 1].end() ? 0 : it->second;
      const double idf = log_n - std::log(static_cast<double>(std::max<int64_t>(1, d)));
      vec[key] = static_cast<double>(count) * idf;
    }
    return vec;
  };

  std::vector<double> scores;
  scores.reserve(corpus_n);
  for (size_t i = 0; i < corpus_n; ++i) {
    double sum_over_n = 0.0;
    for (int order = 1; order <= 4; ++order) {
      const TfIdf cand_vec = tfidf(candidates[i], order);
      double sum_over_refs = 0.0;
      for (const auto& ref : references[i]) {
        sum_over_refs += cosine(cand_vec, tfidf(ref, order));
      }
      sum_over_n += sum_over_refs / static_cast<double>(references[i].size());
    }
    scores.push_back(10.0 * sum_over_n / 4.0);
  }
  return scores;
}

double cider(const std::vector<TokenizedCaption>& candidates,
             const std::vector<std::vector<TokenizedCaption>>& references) {
  const std::vector<double> scores = cider_scores(candidates, references);
  double sum = 0.0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

double recall_at_k(const SimilarityMatrix& m, int k, RetrievalDirection dir) {
  if (m.rows != m.cols || m.rows == 0) {
    raise(errc::alignment_mismatch,
          "equal-index retrieval needs a non-empty square matrix, got " +
              std::to_string(m.rows) + "x" + std::to_string(m.cols));
  }
  const size_t n = m.rows;
  if (k < 1 || static_cast<size_t>(k) > n) {
    raise(errc::k_out_of_range,
          "k=" + std::to_string(k) + " outside [1," + std::to_string(n) + "]");
  }
  size_t hits = 0;
  for (size_t q = 0; q < n; ++q) {
    auto score = [&](size_t j) {
      return dir == RetrievalDirection::i2t ? m.at(q, j) : m.at(j, q);
    };
    const float truth = score(q);
    size_t rank = 1;
    for (size_t j = 0; j < n; ++j) {
      if (score(j) > truth || (score(j) == truth && j < q)) ++rank;
    }
    if (rank <= static_cast<size_t>(k)) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

double mean_recall(const SimilarityMatrix& m) {
  if (m.rows < 10 || m.cols < 10) {
    raise(errc::k_out_of_range,
          "mean recall needs at least a 10x10 matrix, got " +
              std::to_string(m.rows) + "x" + std::to_string(m.cols));
  }
  double sum = 0.0;
  for (RetrievalDirection dir :
       {RetrievalDirection::i2t, RetrievalDirection::t2i}) {
    for (int k : {1, 5, 10}) sum += recall_at_k(m, k, dir);
  }
  return sum / 6.0;
}

SimilarityMatrix read_similarity_matrix(const std::string& path) {
  std::istringstream in(read_file(path));
  SimilarityMatrix m;
  m.scores = parse_real_grid(in, path, m.rows, m.cols);
  return m;
}

void write_similarity_matrix(const SimilarityMatrix& m,
                             const std::string& path) {
  std::ostringstream out;
  out << m.rows << ' ' << m.cols << '\n';
  out.precision(std::numeric_limits<float>::max_digits10);
  for (size_t r = 0; r < m.rows; ++r) {
    for (size_t c = 0; c < m.cols; ++c) {
      if (c > 0) out << ' ';
      out << m.at(r, c);
    }
    out << '\n';
  }
  write_file(path, out.str());
}

SimilarityMatrix similarity_from_embeddings(const std::string& image_path,
                                            const std::string& text_path) {
  size_t an = 0;
  size_t ak = 0;
  size_t bn = 0;
  size_t bk = 0;
  std::istringstream a_in(read_file(image_path));
  const std::vector<float> a = parse_real_grid(a_in, image_path, an, ak);
  std::istringstream b_in(read_file(text_path));
  const std::vector<float> b = parse_real_grid(b_in, text_path, bn, bk);
  if (ak != bk) {
    raise(errc::alignment_mismatch,
          "embedding widths differ: " + std::to_string(ak) + " vs " +
              std::to_string(bk));
  }
  std::vector<float> bt(bk * bn);
  for (size_t i = 0; i < bn; ++i) {
    for (size_t j = 0; j < bk; ++j) bt[j * bn + i] = b[i * bk + j];
  }
  SimilarityMatrix m;
  m.rows = an;
  m.cols = bn;
  m.scores.resize(an * bn);
  kernels::matmul_a_bt_f32(a.data(), an, bt.data(), bn, ak, m.scores.data());
  return m;
}

std::vector<CaptionEvalItem> read_caption_eval_items(const std::string& path) {
  std::vector<CaptionEvalItem> items;
  size_t line_no = 0;
  for (const std::string& line : read_lines(path)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      CaptionEvalItem item;
      item.id = j.at("id").get<std::string>();
      item.candidate = j.at("candidate").get<std::string>();
      item.references = j.at("references").get<std::vector<std::string>>();
      items.push_back(std::move(item));
    } catch (const nlohmann::json::exception& e) {
      raise(errc::malformed_document, path + ":" + std::to_string(line_no) +
                                          ": " + e.what());
    }
  }
  return items;
}

CaptionEvalReport evaluate_captions(const std::vector<CaptionEvalItem>& items,
                                    bool smooth) {
  if (items.empty()) {
    raise(errc::alignment_mismatch, "empty evaluation corpus");
  }
  std::vector<TokenizedCaption> candidates;
  std::vector<std::vector<TokenizedCaption>> references;
  for (const auto& item : items) {
    candidates.push_back(tokenize(item.candidate));
    std::vector<TokenizedCaption> refs;
    for (const auto& ref : item.references) refs.push_back(tokenize(ref));
    references.push_back(std::move(refs));
  }

  CaptionEvalReport report;
  report.bleu_1 = corpus_bleu(candidates, references, 1, smooth);
  report.bleu_2 = corpus_bleu(candidates, references, 2, smooth);
  report.bleu_3 = corpus_bleu(candidates, references, 3, smooth);
  report.bleu_4 = corpus_bleu(candidates, references, 4, smooth);
  double meteor_sum = 0.0;
  double rouge_sum = 0.0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    meteor_sum += meteor_simplified(candidates[i], references[i]);
    rouge_sum += rouge_l(candidates[i], references[i]);
  }
  report.meteor = meteor_sum / static_cast<double>(candidates.size());
  report.rouge_l = rouge_sum / static_cast<double>(candidates.size());
  report.cider = cider(candidates, references);
  return report;
}

std::string caption_report_json(const CaptionEvalReport& report) {
  nlohmann::ordered_json j;
  j["spice"] = "not_computed";
  j["bleu_1"] = report.bleu_1;
  j["bleu_2"] = report.bleu_2;
  j["bleu_3"] = report.bleu_3;
  j["bleu_4"] = report.bleu_4;
  j["meteor"] = report.meteor;
  j["rouge_l"] = report.rouge_l;
  j["cider"] = report.cider;
  return j.dump(2) + "\n";
}

RetrievalReport evaluate_retrieval(const SimilarityMatrix& m) {
  RetrievalReport report;
  report.i2t_r1 = recall_at_k(m, 1, RetrievalDirection::i2t);
  report.i2t_r5 = recall_at_k(m, 5, RetrievalDirection::i2t);
  report.i2t_r10 = recall_at_k(m, 10, RetrievalDirection::i2t);
  report.t2i_r1 = recall_at_k(m, 1, RetrievalDirection::t2i);
  report.t2i_r5 = recall_at_k(m, 5, RetrievalDirection::t2i);
  report.t2i_r10 = recall_at_k(m, 10, RetrievalDirection::t2i);
  report.mean = (report.i2t_r1 + report.i2t_r5 + report.i2t_r10 +
                 report.t2i_r1 + report.t2i_r5 + report.t2i_r10) /
                6.0;
  return report;
}

std::string retrieval_report_json(const RetrievalReport& report) {
  nlohmann::ordered_json j;
  j["i2t_r1"] = report.i2t_r1;
  j["i2t_r5"] = report.i2t_r5;
  j["i2t_r10"] = report.i2t_r10;
  j["t2i_r1"] = report.t2i_r1;
  j["t2i_r5"] = report.t2i_r5;
  j["t2i_r10"] = report.t2i_r10;
  j["mean_recall"] = report.mean;
  return j.dump(2) + "\n";
}

}  // namespace sarnarrator
