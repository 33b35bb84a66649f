#include "live/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace live {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double hyp_score(const Hypothesis& h, bool length_normalize) {
  return length_normalize && !h.tokens.empty() ? h.log_prob / static_cast<double>(h.tokens.size()) : h.log_prob;
}

}  // namespace

DecodeMode parse_decode_mode(const std::string& s) {
  if (s == "beam") return DecodeMode::beam;
  if (s == "nucleus") return DecodeMode::nucleus;
  throw Error(ErrorCode::InvalidArgument, "unknown decode mode '" + s + "'");
}

void DecodeConfig::validate() const {
  if (beam_size < 1) throw Error(ErrorCode::InvalidArgument, "beam_size must be >= 1");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "top_p must lie in (0, 1]");
  if (!(temperature > 0.0)) throw Error(ErrorCode::InvalidArgument, "temperature must be positive");
  if (max_len < 1) throw Error(ErrorCode::InvalidArgument, "max_len must be >= 1");
}

bool banned_token(TokenId t) { return t == kPad || t == kBos; }

Eigen::VectorXd next_log_probs(const Eigen::VectorXd& logits) {
  double mx = kNegInf;
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    if (!banned_token(static_cast<TokenId>(i))) mx = std::max(mx, logits(i));
  double sum = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    if (!banned_token(static_cast<TokenId>(i))) sum += std::exp(logits(i) - mx);
  const double lse = mx + std::log(sum);
  Eigen::VectorXd out(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    out(i) = banned_token(static_cast<TokenId>(i)) ? kNegInf : logits(i) - lse;
  return out;
}

Hypothesis beam_search(const NextTokenLogits& model, const DecodeConfig& cfg) {
  cfg.validate();
  struct Cand {
    Hypothesis h;
    bool finished;
  };
  // Orders by score desc, then shorter, then lexicographic tokens.
  auto better = [&](const Hypothesis& a, const Hypothesis& b) {
    const double sa = hyp_score(a, cfg.length_normalize), sb = hyp_score(b, cfg.length_normalize);
    if (sa != sb) return sa > sb;
    if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
    return a.tokens < b.tokens;
  };

  std::vector<Hypothesis> live{Hypothesis{}};
  std::vector<Hypothesis> finished;
  for (std::size_t step = 0; step < cfg.max_len && !live.empty(); ++step) {
    std::vector<Cand> cands;
    for (const auto& h : live) {
      std::vector<TokenId> prefix{kBos};
      prefix.insert(prefix.end(), h.tokens.begin(), h.tokens.end());
      const Eigen::VectorXd lp = next_log_probs(model(prefix));
      for (Eigen::Index t = 0; t < lp.size(); ++t) {
        if (!std::isfinite(lp(t))) continue;
        Hypothesis ext = h;
        ext.tokens.push_back(static_cast<TokenId>(t));
        ext.log_prob += lp(t);
        cands.push_back({std::move(ext), t == kEos});
      }
    }
    std::sort(cands.begin(), cands.end(), [&](const Cand& a, const Cand& b) { return better(a.h, b.h); });
    if (cands.size() > cfg.beam_size) cands.resize(cfg.beam_size);
    live.clear();
    for (auto& c : cands) (c.finished ? finished : live).push_back(std::move(c.h));
    // Without length normalization, extensions only lose probability, so a
    // finished hypothesis at least as good as every live one is final.
    if (!cfg.length_normalize && !finished.empty() && !live.empty()) {
      const auto best_fin = std::min_element(finished.begin(), finished.end(), better);
      const bool done = std::all_of(live.begin(), live.end(),
                                    [&](const Hypothesis& h) { return best_fin->log_prob >= h.log_prob; });
      if (done) live.clear();
    }
  }
  // Hypotheses cut by max_len count as finished.
  finished.insert(finished.end(), live.begin(), live.end());
  return *std::min_element(finished.begin(), finished.end(), better);
}

std::vector<TokenId> nucleus_set(const Eigen::VectorXd& probs, double top_p) {
  std::vector<TokenId> order(static_cast<std::size_t>(probs.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) { return probs(a) > probs(b); });
  std::vector<TokenId> keep;
  double cum = 0.0;
  constexpr double eps = 1e-12;
  bool straddled = false;
  for (TokenId t : order) {
    if (probs(t) <= 0.0) break;
    if (!keep.empty() && cum >= top_p - eps) {
      // Once the prefix lands exactly on top_p the set is closed; if the last
      // token overshot it, the tokens tied with it stay in as well.
      if (!straddled || probs(t) < probs(keep.back())) break;
    }
    keep.push_back(t);
    cum += probs(t);
    if (!straddled && cum >= top_p - eps) straddled = cum > top_p + eps;
  }
  return keep;
}

std::vector<TokenId> nucleus_sample(const NextTokenLogits& model, const DecodeConfig& cfg, std::mt19937_64& rng,
                                    std::vector<std::vector<TokenId>>* trace) {
  cfg.validate();
  std::vector<TokenId> out;
  std::vector<TokenId> prefix{kBos};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t step = 0; step < cfg.max_len; ++step) {
    const Eigen::VectorXd probs = next_log_probs(model(prefix) / cfg.temperature).array().exp();
    const auto nucleus = nucleus_set(probs, cfg.top_p);
    if (trace) trace->push_back(nucleus);
    double mass = 0.0;
    for (TokenId t : nucleus) mass += probs(t);
    const double u = unit(rng) * mass;
    double cum = 0.0;
    TokenId pick = nucleus.back();
    for (TokenId t : nucleus) {
      cum += probs(t);
      if (u < cum) {
        pick = t;
        break;
      }
    }
    out.push_back(pick);
    prefix.push_back(pick);
    if (pick == kEos) break;
  }
  return out;
}

NextTokenLogits model_scorer(const Seq2Seq<float>& model, const Seq2SeqInput& src) {
  using Pass = Seq2Seq<float>::Pass;
  Pass enc(model, nullptr);
  const auto mem = model.memory(enc, src);
  MatF memory = mem.rows.value();
  std::vector<bool> visible = mem.visible;
  return [&model, memory, visible](const std::vector<TokenId>& prefix) {
    Pass ps(model, nullptr);
    const MatF logits = model.decode(ps, ps.constant(memory), visible, prefix).value();
    return Eigen::VectorXd(logits.row(logits.rows() - 1).transpose().cast<double>());
  };
}

std::vector<TokenId> generate(const Seq2Seq<float>& model, const Seq2SeqInput& src, const DecodeConfig& cfg) {
  auto scorer = model_scorer(model, src);
  if (cfg.mode == DecodeMode::beam) return beam_search(scorer, cfg).tokens;
  std::mt19937_64 rng(cfg.seed);
  return nucleus_sample(scorer, cfg, rng);
}

}  // namespace live
