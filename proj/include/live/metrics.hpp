#pragma once

#include <map>
#include <string>
#include <vector>

namespace live {

enum class RougeVariant { r1, r2, rl };

// Lowercased whitespace tokens.
std::vector<std::string> metric_tokens(const std::string& text);

// Corpus BLEU over n = 1..max_n: clipped n-gram precisions against each
// hypothesis's references, geometric mean, brevity penalty against the
// closest reference length. If any precision has a zero numerator, orders
// n >= 2 use (matches + 1) / (total + 1).
double bleu(const std::vector<std::string>& hypotheses, const std::vector<std::vector<std::string>>& references,
            int max_n = 4);

// Mean per-pair F1. r1/r2 use clipped unigram/bigram overlap, rl the LCS.
double rouge(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
             RougeVariant variant);

// Unique n-grams over total n-grams across the whole corpus.
double distinct(const std::vector<std::string>& hypotheses, int n);

struct EvalReport {
  std::map<std::string, double> scores;  // in [0, 1]
  std::size_t corpus_size = 0;
  std::string rouge_aggregation = "macro-average of per-pair F1";
};

// bleu1..bleu4, rouge1, rouge2, rougeL, distinct1, distinct2.
EvalReport evaluate_corpus(const std::vector<std::string>& hypotheses,
                           const std::vector<std::vector<std::string>>& references);

// Fixed metric order used by every printed table.
const std::vector<std::string>& metric_order();

// A single validation number by name (e.g. "bleu4", "rougeL").
double metric_by_name(const std::string& name, const std::vector<std::string>& hypotheses,
                      const std::vector<std::vector<std::string>>& references);

}  // namespace live
