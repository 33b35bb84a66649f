#include "live/gating.hpp"

#include "live/error.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace live {

Granularity parse_granularity(const std::string& s) {
  if (s == "doc") return Granularity::doc;
  if (s == "sent") return Granularity::sent;
  if (s == "word") return Granularity::word;
  throw Error(ErrorCode::InvalidArgument, "unknown granularity '" + s + "'");
}

GateScope parse_scope(const std::string& s) {
  if (s == "all_tokens") return GateScope::all_tokens;
  if (s == "nouns_only") return GateScope::nouns_only;
  throw Error(ErrorCode::InvalidArgument, "unknown gate scope '" + s + "'");
}

std::string to_string(Granularity g) {
  switch (g) {
    case Granularity::doc: return "doc";
    case Granularity::sent: return "sent";
    case Granularity::word: return "word";
  }
  return "?";
}

std::string to_string(GateScope s) { return s == GateScope::all_tokens ? "all_tokens" : "nouns_only"; }

void GateConfig::validate() const {
  if (!(theta >= 0.0 && theta <= 1.0)) throw Error(ErrorCode::InvalidArgument, "theta must lie in [0, 1]");
  if (scope == GateScope::nouns_only && noun_lexicon.empty())
    throw Error(ErrorCode::InvalidArgument, "nouns_only scope requires a non-empty noun lexicon");
}

std::unordered_set<std::string> load_noun_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read noun lexicon " + path);
  std::unordered_set<std::string> out;
  for (std::string line; std::getline(in, line);) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) out.insert(line);
  }
  return out;
}

bool FusionAssignment::all_skip() const {
  return std::all_of(image_of.begin(), image_of.end(), [](int i) { return i == kSkip; });
}

std::vector<int> FusionAssignment::used_images() const {
  std::set<int> used;
  for (int i : image_of)
    if (i != kSkip) used.insert(i);
  return {used.begin(), used.end()};
}

FusionAssignment FusionAssignment::all_skipping(std::size_t tokens, std::size_t images) {
  return {std::vector<int>(tokens, kSkip), images};
}

std::size_t images_required(const SegmentedDocument& doc, const TokenizedDocument& tokens, Granularity g) {
  switch (g) {
    case Granularity::doc: return 1;
    case Granularity::sent: return doc.units.size();
    case Granularity::word: return tokens.ids.size() - 2;
  }
  return 0;
}

std::vector<std::string> image_texts(const SegmentedDocument& doc, const TokenizedDocument& tokens, Granularity g) {
  std::vector<std::string> out;
  switch (g) {
    case Granularity::doc: out.push_back(doc.raw_text); break;
    case Granularity::sent:
      for (const auto& u : doc.units) out.push_back(u.text);
      break;
    case Granularity::word:
      for (std::size_t t = 1; t + 1 < tokens.pieces.size(); ++t) out.push_back(tokens.pieces[t]);
      break;
  }
  return out;
}

FusionAssignment build_fusion_assignment(const SegmentedDocument& doc, const TokenizedDocument& tokens,
                                         std::span<const double> gammas, const GateConfig& cfg) {
  cfg.validate();
  const std::size_t need = images_required(doc, tokens, cfg.granularity);
  if (gammas.size() != need)
    throw Error(ErrorCode::EmbeddingCountMismatch, to_string(cfg.granularity) + " granularity needs " +
                                                       std::to_string(need) + " embeddings, got " +
                                                       std::to_string(gammas.size()));
  FusionAssignment a = FusionAssignment::all_skipping(tokens.ids.size(), need);
  for (std::size_t t = 0; t < tokens.ids.size(); ++t) {
    const int unit = tokens.unit_of[t];
    if (unit < 0) continue;  // <bos>, <eos>, <pad>
    int image = 0;
    switch (cfg.granularity) {
      case Granularity::doc: image = 0; break;
      case Granularity::sent: image = unit; break;
      case Granularity::word: image = static_cast<int>(t) - 1; break;
    }
    if (!gate(gammas[static_cast<std::size_t>(image)], cfg.theta)) continue;
    if (cfg.scope == GateScope::nouns_only && !cfg.noun_lexicon.count(tokens.pieces[t])) continue;
    a.image_of[t] = image;
  }
  return a;
}

void check_assignment(const FusionAssignment& a, const TokenizedDocument& tokens, Granularity g) {
  if (a.size() != tokens.ids.size()) throw Error(ErrorCode::InvalidArgument, "assignment length != token count");
  std::vector<int> unit_image;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const int img = a.image_of[t];
    if (img == FusionAssignment::kSkip) continue;
    if (img < 0 || static_cast<std::size_t>(img) >= a.image_count)
      throw Error(ErrorCode::InvalidArgument, "image index out of range at token " + std::to_string(t));
    const int unit = tokens.unit_of[t];
    if (unit < 0) throw Error(ErrorCode::InvalidArgument, "special token attends to an image");
    if (g == Granularity::word) continue;
    if (unit_image.size() <= static_cast<std::size_t>(unit)) unit_image.resize(static_cast<std::size_t>(unit) + 1, -2);
    int& seen = unit_image[static_cast<std::size_t>(unit)];
    if (seen == -2) seen = img;
    if (seen != img) throw Error(ErrorCode::InvalidArgument, "sentence-mates attend to different images");
  }
}

double gated_fraction(std::span<const double> gammas, double theta) {
  if (gammas.empty()) return 0.0;
  const auto n = std::count_if(gammas.begin(), gammas.end(), [&](double g) { return gate(g, theta); });
  return static_cast<double>(n) / static_cast<double>(gammas.size());
}

}  // namespace live
