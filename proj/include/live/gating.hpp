#pragma once

#include "live/segmentation.hpp"

#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace live {

enum class Granularity { doc, sent, word };
enum class GateScope { all_tokens, nouns_only };

Granularity parse_granularity(const std::string& s);
GateScope parse_scope(const std::string& s);
std::string to_string(Granularity g);
std::string to_string(GateScope s);

struct GateConfig {
  double theta = 0.27;
  Granularity granularity = Granularity::sent;
  GateScope scope = GateScope::all_tokens;
  std::unordered_set<std::string> noun_lexicon;

  void validate() const;
};

// Plain text, one lowercase word per line.
std::unordered_set<std::string> load_noun_lexicon(const std::string& path);

// Inclusive: gamma == theta gates in.
inline bool gate(double gamma, double theta) { return gamma >= theta; }

// Per-token image index; kSkip bypasses the fusion layer entirely.
struct FusionAssignment {
  static constexpr int kSkip = -1;

  std::vector<int> image_of;
  std::size_t image_count = 0;

  std::size_t size() const { return image_of.size(); }
  bool skips(std::size_t t) const { return image_of[t] == kSkip; }
  bool all_skip() const;

  // Images referenced by at least one token, ascending.
  std::vector<int> used_images() const;

  static FusionAssignment all_skipping(std::size_t tokens, std::size_t images = 0);
};

// Number of images the granularity needs for this tokenized document.
std::size_t images_required(const SegmentedDocument& doc, const TokenizedDocument& tokens, Granularity g);

// The text each image is synthesized from, in image-index order.
std::vector<std::string> image_texts(const SegmentedDocument& doc, const TokenizedDocument& tokens, Granularity g);

// Builds the one-image-per-unit attention structure. gammas holds one score
// per image in image-index order (see images_required).
FusionAssignment build_fusion_assignment(const SegmentedDocument& doc, const TokenizedDocument& tokens,
                                         std::span<const double> gammas, const GateConfig& cfg);

// Throws InvalidArgument if the assignment breaks exclusivity or sentence
// agreement for this document.
void check_assignment(const FusionAssignment& a, const TokenizedDocument& tokens, Granularity g);

// Fraction of scores with gamma >= theta.
double gated_fraction(std::span<const double> gammas, double theta);

}  // namespace live
