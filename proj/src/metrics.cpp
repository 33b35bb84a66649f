#include "live/metrics.hpp"

#include "live/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace live {

namespace {

using Gram = std::vector<std::string>;
using Counts = std::map<Gram, int>;

Counts ngram_counts(const std::vector<std::string>& toks, int n) {
  Counts c;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i)
    ++c[Gram(toks.begin() + static_cast<std::ptrdiff_t>(i), toks.begin() + static_cast<std::ptrdiff_t>(i) + n)];
  return c;
}

std::size_t lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double f1(double overlap, double hyp_total, double ref_total) {
  if (overlap <= 0.0 || hyp_total <= 0.0 || ref_total <= 0.0) return 0.0;
  const double p = overlap / hyp_total, r = overlap / ref_total;
  return 2.0 * p * r / (p + r);
}

}  // namespace

std::vector<std::string> metric_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string w; in >> w;) {
    std::transform(w.begin(), w.end(), w.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.push_back(w);
  }
  return out;
}

double bleu(const std::vector<std::string>& hypotheses, const std::vector<std::vector<std::string>>& references,
            int max_n) {
  if (hypotheses.empty()) throw Error(ErrorCode::EmptyCorpus, "bleu: no hypotheses");
  if (hypotheses.size() != references.size())
    throw Error(ErrorCode::InvalidArgument, "bleu: hypothesis and reference counts differ");
  if (max_n < 1) throw Error(ErrorCode::InvalidArgument, "bleu: max_n must be >= 1");

  std::vector<double> match(static_cast<std::size_t>(max_n), 0.0), total(static_cast<std::size_t>(max_n), 0.0);
  double hyp_len = 0.0, ref_len = 0.0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto hyp = metric_tokens(hypotheses[i]);
    std::vector<std::vector<std::string>> refs;
    for (const auto& r : references[i]) refs.push_back(metric_tokens(r));
    if (refs.empty()) throw Error(ErrorCode::InvalidArgument, "bleu: hypothesis " + std::to_string(i) + " has no reference");
    hyp_len += static_cast<double>(hyp.size());
    // Closest reference length; shorter wins ties.
    std::size_t best = refs.front().size();
    for (const auto& r : refs) {
      const auto d = [&](std::size_t len) { return std::abs(static_cast<long>(len) - static_cast<long>(hyp.size())); };
      if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
    }
    ref_len += static_cast<double>(best);
    for (int n = 1; n <= max_n; ++n) {
      const Counts hc = ngram_counts(hyp, n);
      Counts max_ref;
      for (const auto& r : refs)
        for (const auto& [g, c] : ngram_counts(r, n)) max_ref[g] = std::max(max_ref[g], c);
      for (const auto& [g, c] : hc) {
        auto it = max_ref.find(g);
        match[static_cast<std::size_t>(n - 1)] += std::min(c, it == max_ref.end() ? 0 : it->second);
        total[static_cast<std::size_t>(n - 1)] += c;
      }
    }
  }
  if (match[0] == 0.0) return 0.0;
  const bool smooth = std::any_of(match.begin(), match.end(), [](double m) { return m == 0.0; });
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    double m = match[static_cast<std::size_t>(n - 1)], t = total[static_cast<std::size_t>(n - 1)];
    if (smooth && n >= 2) {
      m += 1.0;
      t += 1.0;
    }
    log_sum += std::log(m / t);
  }
  const double bp = hyp_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / hyp_len);
  return bp * std::exp(log_sum / max_n);
}

double rouge(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
             RougeVariant variant) {
  if (hypotheses.empty()) throw Error(ErrorCode::EmptyCorpus, "rouge: no hypotheses");
  if (hypotheses.size() != references.size())
    throw Error(ErrorCode::InvalidArgument, "rouge: hypothesis and reference counts differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto hyp = metric_tokens(hypotheses[i]);
    const auto ref = metric_tokens(references[i]);
    if (variant == RougeVariant::rl) {
      sum += f1(static_cast<double>(lcs(hyp, ref)), static_cast<double>(hyp.size()), static_cast<double>(ref.size()));
      continue;
    }
    const int n = variant == RougeVariant::r1 ? 1 : 2;
    const Counts hc = ngram_counts(hyp, n), rc = ngram_counts(ref, n);
    double overlap = 0.0, ht = 0.0, rt = 0.0;
    for (const auto& [g, c] : hc) {
      ht += c;
      auto it = rc.find(g);
      if (it != rc.end()) overlap += std::min(c, it->second);
    }
    for (const auto& [g, c] : rc) rt += c;
    sum += f1(overlap, ht, rt);
  }
  return sum / static_cast<double>(hypotheses.size());
}

double distinct(const std::vector<std::string>& hypotheses, int n) {
  if (hypotheses.empty()) throw Error(ErrorCode::EmptyCorpus, "distinct: no hypotheses");
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "distinct: n must be >= 1");
  std::set<Gram> unique;
  std::size_t total = 0;
  for (const auto& h : hypotheses) {
    for (const auto& [g, c] : ngram_counts(metric_tokens(h), n)) {
      unique.insert(g);
      total += static_cast<std::size_t>(c);
    }
  }
  return total ? static_cast<double>(unique.size()) / static_cast<double>(total) : 0.0;
}

const std::vector<std::string>& metric_order() {
  static const std::vector<std::string> order = {"bleu1",  "bleu2",  "bleu3",     "bleu4",    "rouge1",
                                                 "rouge2", "rougeL", "distinct1", "distinct2"};
  return order;
}

double metric_by_name(const std::string& name, const std::vector<std::string>& hypotheses,
                      const std::vector<std::vector<std::string>>& references) {
  if (name.size() == 5 && name.rfind("bleu", 0) == 0 && name[4] >= '1' && name[4] <= '4')
    return bleu(hypotheses, references, name[4] - '0');
  if (name == "distinct1" || name == "distinct2") return distinct(hypotheses, name.back() - '0');
  if (name == "rouge1" || name == "rouge2" || name == "rougeL") {
    // Multi-reference ROUGE takes the best-scoring reference per pair.
    double sum = 0.0;
    const auto variant = name == "rouge1" ? RougeVariant::r1 : name == "rouge2" ? RougeVariant::r2 : RougeVariant::rl;
    if (hypotheses.empty()) throw Error(ErrorCode::EmptyCorpus, "rouge: no hypotheses");
    if (hypotheses.size() != references.size())
      throw Error(ErrorCode::InvalidArgument, "rouge: hypothesis and reference counts differ");
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
      if (references[i].empty()) throw Error(ErrorCode::InvalidArgument, "rouge: hypothesis without reference");
      double best = 0.0;
      for (const auto& r : references[i]) best = std::max(best, rouge({hypotheses[i]}, {r}, variant));
      sum += best;
    }
    return sum / static_cast<double>(hypotheses.size());
  }
  throw Error(ErrorCode::InvalidArgument, "unknown metric '" + name + "'");
}

EvalReport evaluate_corpus(const std::vector<std::string>& hypotheses,
                           const std::vector<std::vector<std::string>>& references) {
  EvalReport r;
  r.corpus_size = hypotheses.size();
  for (const auto& name : metric_order()) r.scores[name] = metric_by_name(name, hypotheses, references);
  return r;
}

}  // namespace live
