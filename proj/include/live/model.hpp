#pragma once

// Transformer encoder-decoder with an optional vision-text fusion sub-layer
// after the self-attention sub-layer of selected encoder layers.
//
// The backbone is post-norm. The fusion sub-layer lets each text token whose
// assignment names an image attend over that image's projected patch rows;
// tokens assigned Skip are carried through bit-for-bit.

#include "live/gating.hpp"
#include "live/model_config.hpp"
#include "live/params.hpp"
#include "live/tape.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace live {

// One source/target pair with its images and token-to-image assignment.
struct Seq2SeqInput {
  std::vector<TokenId> src;          // <bos> ... <eos>, may contain <pad>
  std::vector<MatF> images;          // raw p x vision_dim patches, by image index
  FusionAssignment assign;           // one entry per src token
  std::vector<TokenId> tgt_in;       // decoder input, starts with <bos>
  std::vector<TokenId> tgt_out;      // gold next tokens, <pad> ignored
};

// Teacher-forcing pair from a target sequence <bos> y_1 .. y_n <eos>.
inline void set_target(Seq2SeqInput& in, const std::vector<TokenId>& target) {
  in.tgt_in.assign(target.begin(), target.end() - 1);
  in.tgt_out.assign(target.begin() + 1, target.end());
}

template <typename Scalar>
struct LossAndGrad {
  Scalar loss = 0;            // mean over non-pad target tokens
  std::size_t token_count = 0;
  GradSet<Scalar> grads;
};

namespace detail {

struct AttnSlots {
  int wq, bq, wk, bk, wv, bv, wo, bo;
};
struct NormSlots {
  int gain, bias;
};
struct FfnSlots {
  int w1, b1, w2, b2;
};
struct EncoderSlots {
  AttnSlots self;
  NormSlots ln1;
  FfnSlots ffn;
  NormSlots ln2;
  std::optional<AttnSlots> fusion;
  std::optional<NormSlots> fusion_ln;
};
struct DecoderSlots {
  AttnSlots self;
  NormSlots ln1;
  AttnSlots cross;
  NormSlots ln2;
  FfnSlots ffn;
  NormSlots ln3;
};

}  // namespace detail

template <typename Scalar>
class Seq2Seq {
 public:
  using M = Mat<Scalar>;
  using V = Var<Scalar>;

  // Fresh parameters from a seeded initializer.
  Seq2Seq(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    build_layout([&](const std::string&, Partition, Eigen::Index r, Eigen::Index c, Init init) {
      return initial_value(r, c, init, rng);
    });
  }

  // Adopts existing parameters; names, partitions and shapes must match the
  // layout implied by cfg.
  Seq2Seq(ModelConfig cfg, const ParamSet<Scalar>& params) : cfg_(std::move(cfg)) {
    cfg_.validate();
    build_layout([&](const std::string& name, Partition part, Eigen::Index r, Eigen::Index c, Init) {
      const int i = params.find(name);
      if (i < 0) throw Error(ErrorCode::ShapeMismatch, "parameter " + name + " missing");
      const auto& p = params[static_cast<std::size_t>(i)];
      if (p.partition != part)
        throw Error(ErrorCode::ShapeMismatch, "parameter " + name + " labelled " + to_string(p.partition) +
                                                  ", expected " + to_string(part));
      if (p.value.rows() != r || p.value.cols() != c)
        throw Error(ErrorCode::ShapeMismatch, "parameter " + name + " has wrong shape");
      return p.value;
    });
  }

  const ModelConfig& config() const { return cfg_; }
  ModelConfig& mutable_config() { return cfg_; }
  ParamSet<Scalar>& params() { return params_; }
  const ParamSet<Scalar>& params() const { return params_; }

  // Per-pass state: a tape plus lazily bound parameter leaves.
  class Pass {
   public:
    // Backbone leaves are bound as constants when freeze_backbone is set, so
    // no backbone gradient is ever formed.
    Pass(const Seq2Seq& model, GradSet<Scalar>* sinks, bool freeze_backbone = false)
        : model_(model), sinks_(sinks), freeze_backbone_(freeze_backbone), bound_(model.params_.size()) {}

    Tape<Scalar>& tape() { return tape_; }

    V p(int slot) {
      auto& b = bound_[static_cast<std::size_t>(slot)];
      if (b.id < 0) {
        const auto& param = model_.params_[static_cast<std::size_t>(slot)];
        const bool frozen = freeze_backbone_ && param.partition == Partition::backbone;
        M* sink = sinks_ && !frozen ? &(*sinks_)[static_cast<std::size_t>(slot)] : nullptr;
        b = tape_.param(param.value, sink);
      }
      return b;
    }

    V constant(M m) { return tape_.constant(std::move(m)); }

   private:
    const Seq2Seq& model_;
    GradSet<Scalar>* sinks_;
    bool freeze_backbone_;
    Tape<Scalar> tape_;
    std::vector<V> bound_;
  };

  // ---- building blocks on a pass -------------------------------------------

  V project(Pass& ps, const MatF& raw) const {
    if (static_cast<std::size_t>(raw.cols()) != cfg_.vision_dim)
      throw Error(ErrorCode::ShapeMismatch, "image width " + std::to_string(raw.cols()) + " != vision_dim " +
                                                std::to_string(cfg_.vision_dim));
    V x = ps.constant(raw.template cast<Scalar>());
    V h = gelu(linear(x, ps.p(proj_.w1), ps.p(proj_.b1)));
    return linear(h, ps.p(proj_.w2), ps.p(proj_.b2));
  }

  V attention(Pass& ps, V q_in, V kv_in, const detail::AttnSlots& s, const AttnMask& mask) const {
    const Eigen::Index dk = static_cast<Eigen::Index>(cfg_.model_dim / cfg_.heads);
    V q = linear(q_in, ps.p(s.wq), ps.p(s.bq));
    V k = linear(kv_in, ps.p(s.wk), ps.p(s.bk));
    V v = linear(kv_in, ps.p(s.wv), ps.p(s.bv));
    const Scalar inv = Scalar(1) / std::sqrt(Scalar(dk));
    std::vector<V> heads;
    for (std::size_t h = 0; h < cfg_.heads; ++h) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(h) * dk;
      V scores = scale(matmul_nt(slice_cols(q, c0, dk), slice_cols(k, c0, dk)), inv);
      heads.push_back(matmul(softmax_rows(scores, mask), slice_cols(v, c0, dk)));
    }
    V o = heads.size() == 1 ? heads.front() : concat_cols(heads);
    return linear(o, ps.p(s.wo), ps.p(s.bo));
  }

  V norm(Pass& ps, V x, const detail::NormSlots& s) const { return layer_norm(x, ps.p(s.gain), ps.p(s.bias)); }

  V ffn(Pass& ps, V x, const detail::FfnSlots& s) const {
    return linear(gelu(linear(x, ps.p(s.w1), ps.p(s.b1))), ps.p(s.w2), ps.p(s.b2));
  }

  // Fusion sub-layer of encoder layer `layer`. projected[k] must be set for
  // every image index the assignment references.
  V fusion(Pass& ps, V s, const std::vector<std::optional<V>>& projected, const FusionAssignment& assign,
           int layer) const {
    const auto& slots = enc_[static_cast<std::size_t>(layer)];
    if (!slots.fusion) throw Error(ErrorCode::InvalidArgument, "layer " + std::to_string(layer) + " has no fusion");
    if (assign.size() != static_cast<std::size_t>(s.rows()))
      throw Error(ErrorCode::ShapeMismatch, "assignment covers " + std::to_string(assign.size()) + " tokens, state has " +
                                                std::to_string(s.rows()));
    std::vector<int> all_rows;
    std::vector<V> deltas;
    for (int img : assign.used_images()) {
      if (static_cast<std::size_t>(img) >= projected.size() || !projected[static_cast<std::size_t>(img)])
        throw Error(ErrorCode::UnprojectedImage, "image " + std::to_string(img) + " was not projected");
      std::vector<int> rows;
      for (std::size_t t = 0; t < assign.size(); ++t)
        if (assign.image_of[t] == img) rows.push_back(static_cast<int>(t));
      V q = gather_rows(s, rows);
      if (cfg_.fusion_norm == FusionNorm::pre) q = norm(ps, q, *slots.fusion_ln);
      deltas.push_back(attention(ps, q, *projected[static_cast<std::size_t>(img)], *slots.fusion, {}));
      all_rows.insert(all_rows.end(), rows.begin(), rows.end());
    }
    if (all_rows.empty()) return s;  // every token skips: exact passthrough
    V delta = deltas.size() == 1 ? deltas.front() : concat_rows(deltas);
    V updated = gather_rows(s, all_rows) + delta;
    if (cfg_.fusion_norm == FusionNorm::post) updated = norm(ps, updated, *slots.fusion_ln);
    return scatter_rows(s, all_rows, updated);
  }

  // Returns the T x d_m encoder output. `memory_extra` receives the projected
  // gated image rows when the strategy routes images to the decoder.
  V encode(Pass& ps, const Seq2SeqInput& in, std::optional<V>* memory_extra = nullptr) const {
    const std::size_t T = in.src.size();
    check_length(T, "source");
    const bool uses_images = cfg_.fusion_strategy != FusionStrategy::none;
    if (uses_images && in.assign.size() != T)
      throw Error(ErrorCode::ShapeMismatch, "assignment covers " + std::to_string(in.assign.size()) + " tokens, source has " +
                                                std::to_string(T));

    std::vector<std::optional<V>> projected;
    std::vector<int> used;
    if (uses_images) {
      used = in.assign.used_images();
      projected.resize(in.images.size());
      for (int k : used) {
        if (static_cast<std::size_t>(k) >= in.images.size() || in.images[static_cast<std::size_t>(k)].size() == 0)
          throw Error(ErrorCode::UnprojectedImage, "no patches for image " + std::to_string(k));
        projected[static_cast<std::size_t>(k)] = project(ps, in.images[static_cast<std::size_t>(k)]);
      }
    }

    V x = embed(ps, in.src);
    std::vector<bool> visible(T);
    for (std::size_t t = 0; t < T; ++t) visible[t] = in.src[t] != kPad;

    Eigen::Index prefix = 0;
    if (cfg_.fusion_strategy == FusionStrategy::self_attention_concat && !used.empty()) {
      std::vector<V> parts;
      for (int k : used) parts.push_back(*projected[static_cast<std::size_t>(k)]);
      V images = parts.size() == 1 ? parts.front() : concat_rows(parts);
      prefix = images.rows();
      x = concat_rows(std::vector<V>{images, x});
      visible.insert(visible.begin(), static_cast<std::size_t>(prefix), true);
    }
    const AttnMask mask = key_mask(visible.size(), visible);

    for (std::size_t l = 0; l < enc_.size(); ++l) {
      const auto& s = enc_[l];
      x = norm(ps, x + attention(ps, x, x, s.self, mask), s.ln1);
      if (cfg_.fusion_strategy == FusionStrategy::cross_attention && s.fusion)
        x = fusion(ps, x, projected, in.assign, static_cast<int>(l));
      x = norm(ps, x + ffn(ps, x, s.ffn), s.ln2);
    }
    if (prefix > 0) x = slice_rows(x, prefix, static_cast<Eigen::Index>(T));

    if (memory_extra && cfg_.fusion_strategy == FusionStrategy::concat_encoder_output && !used.empty()) {
      std::vector<V> parts;
      for (int k : used) parts.push_back(*projected[static_cast<std::size_t>(k)]);
      *memory_extra = parts.size() == 1 ? parts.front() : concat_rows(parts);
    }
    return x;
  }

  // Decoder over `memory` (rows flagged in memory_visible may be attended).
  V decode(Pass& ps, V memory, const std::vector<bool>& memory_visible, const std::vector<TokenId>& tgt_in) const {
    const std::size_t T = tgt_in.size();
    check_length(T, "target");
    V y = embed(ps, tgt_in);
    AttnMask causal(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(T));
    for (std::size_t i = 0; i < T; ++i)
      for (std::size_t j = 0; j < T; ++j)
        causal(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = j <= i && tgt_in[j] != kPad;
    const AttnMask cross = key_mask(T, memory_visible);
    for (const auto& s : dec_) {
      y = norm(ps, y + attention(ps, y, y, s.self, causal), s.ln1);
      y = norm(ps, y + attention(ps, y, memory, s.cross, cross), s.ln2);
      y = norm(ps, y + ffn(ps, y, s.ffn), s.ln3);
    }
    return linear(y, ps.p(out_w_), ps.p(out_b_));
  }

  // Encoder output plus any decoder-side image rows, with visibility flags.
  struct Memory {
    V rows;
    std::vector<bool> visible;
  };

  Memory memory(Pass& ps, const Seq2SeqInput& in) const {
    std::optional<V> extra;
    V enc = encode(ps, in, &extra);
    std::vector<bool> visible(in.src.size());
    for (std::size_t t = 0; t < in.src.size(); ++t) visible[t] = in.src[t] != kPad;
    if (!extra) return {enc, visible};
    visible.insert(visible.end(), static_cast<std::size_t>(extra->rows()), true);
    return {concat_rows(std::vector<V>{enc, *extra}), visible};
  }

  V logits(Pass& ps, const Seq2SeqInput& in) const {
    auto mem = memory(ps, in);
    return decode(ps, mem.rows, mem.visible, in.tgt_in);
  }

  // ---- value-level API -----------------------------------------------------

  M project_patches(const MatF& raw) const {
    Pass ps(*this, nullptr);
    return project(ps, raw).value();
  }

  // `projected` holds one p x d_m matrix per image index; an empty matrix
  // marks an image that was not projected.
  M fusion_layer_forward(const M& s, const std::vector<M>& projected, const FusionAssignment& assign,
                         int layer = 0) const {
    Pass ps(*this, nullptr);
    std::vector<std::optional<V>> imgs(projected.size());
    for (std::size_t k = 0; k < projected.size(); ++k)
      if (projected[k].size() != 0) imgs[k] = ps.constant(projected[k]);
    return fusion(ps, ps.constant(s), imgs, assign, layer).value();
  }

  M encoder_forward(const Seq2SeqInput& in) const {
    Pass ps(*this, nullptr);
    return encode(ps, in).value();
  }

  M seq2seq_forward(const Seq2SeqInput& in) const {
    Pass ps(*this, nullptr);
    return logits(ps, in).value();
  }

  // Mean smoothed cross-entropy over every non-pad target token of the batch
  // and its exact gradient. With freeze_backbone the backbone gradients are
  // identically zero.
  LossAndGrad<Scalar> param_gradients(std::span<const Seq2SeqInput> batch, Scalar smoothing,
                                      bool freeze_backbone = false) const {
    LossAndGrad<Scalar> out;
    out.grads = zero_grads(params_);
    for (const auto& in : batch)
      for (TokenId t : in.tgt_out) out.token_count += t != kPad;
    if (out.token_count == 0) return out;
    const Scalar inv = Scalar(1) / Scalar(out.token_count);

    GradSet<Scalar> sink = zero_grads(params_);
    for (const auto& in : batch) {
      Pass ps(*this, &sink, freeze_backbone);
      V lg = logits(ps, in);
      V ce = smoothed_cross_entropy_sum(lg, std::vector<int>(in.tgt_out.begin(), in.tgt_out.end()), smoothing,
                                        static_cast<int>(kPad));
      out.loss += ce.value()(0, 0) * inv;
      ps.tape().backward(ce, inv);
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (!sink[i].allFinite())
        throw Error(ErrorCode::NonFiniteGradient, "gradient of " + params_[i].name + " is not finite");
      out.grads[i] = std::move(sink[i]);
    }
    if (!std::isfinite(static_cast<double>(out.loss))) throw Error(ErrorCode::NonFiniteGradient, "loss is not finite");
    return out;
  }

 private:
  enum class Init { xavier, embedding, ones, zeros };

  template <typename Make>
  void build_layout(Make make) {
    const auto d = static_cast<Eigen::Index>(cfg_.model_dim);
    const auto f = static_cast<Eigen::Index>(cfg_.ffn_dim);
    const auto vsz = static_cast<Eigen::Index>(cfg_.vocab_size);
    auto add = [&](const std::string& name, Partition part, Eigen::Index r, Eigen::Index c, Init init) {
      return params_.add(name, part, make(name, part, r, c, init));
    };
    auto attn = [&](const std::string& pre, Partition part, bool zero_out) {
      detail::AttnSlots s{};
      s.wq = add(pre + ".wq", part, d, d, Init::xavier);
      s.bq = add(pre + ".bq", part, 1, d, Init::zeros);
      s.wk = add(pre + ".wk", part, d, d, Init::xavier);
      s.bk = add(pre + ".bk", part, 1, d, Init::zeros);
      s.wv = add(pre + ".wv", part, d, d, Init::xavier);
      s.bv = add(pre + ".bv", part, 1, d, Init::zeros);
      s.wo = add(pre + ".wo", part, d, d, zero_out ? Init::zeros : Init::xavier);
      s.bo = add(pre + ".bo", part, 1, d, Init::zeros);
      return s;
    };
    auto ln = [&](const std::string& pre, Partition part) {
      return detail::NormSlots{add(pre + ".gain", part, 1, d, Init::ones), add(pre + ".bias", part, 1, d, Init::zeros)};
    };
    auto ff = [&](const std::string& pre) {
      detail::FfnSlots s{};
      s.w1 = add(pre + ".w1", Partition::backbone, d, f, Init::xavier);
      s.b1 = add(pre + ".b1", Partition::backbone, 1, f, Init::zeros);
      s.w2 = add(pre + ".w2", Partition::backbone, f, d, Init::xavier);
      s.b2 = add(pre + ".b2", Partition::backbone, 1, d, Init::zeros);
      return s;
    };

    tok_emb_ = add("embed.tokens", Partition::backbone, vsz, d, Init::embedding);
    const auto fusion_layers = cfg_.resolved_fusion_layers();
    for (std::size_t l = 0; l < cfg_.encoder_layers; ++l) {
      const std::string pre = "enc." + std::to_string(l);
      detail::EncoderSlots s{};
      s.self = attn(pre + ".self", Partition::backbone, false);
      s.ln1 = ln(pre + ".ln1", Partition::backbone);
      s.ffn = ff(pre + ".ffn");
      s.ln2 = ln(pre + ".ln2", Partition::backbone);
      if (std::find(fusion_layers.begin(), fusion_layers.end(), static_cast<int>(l)) != fusion_layers.end()) {
        s.fusion = attn(pre + ".fusion", Partition::fusion, cfg_.zero_init_fusion_output);
        s.fusion_ln = ln(pre + ".fusion_ln", Partition::fusion);
      }
      enc_.push_back(s);
    }
    for (std::size_t l = 0; l < cfg_.decoder_layers; ++l) {
      const std::string pre = "dec." + std::to_string(l);
      detail::DecoderSlots s{};
      s.self = attn(pre + ".self", Partition::backbone, false);
      s.ln1 = ln(pre + ".ln1", Partition::backbone);
      s.cross = attn(pre + ".cross", Partition::backbone, false);
      s.ln2 = ln(pre + ".ln2", Partition::backbone);
      s.ffn = ff(pre + ".ffn");
      s.ln3 = ln(pre + ".ln3", Partition::backbone);
      dec_.push_back(s);
    }
    out_w_ = add("out.w", Partition::backbone, d, vsz, Init::xavier);
    out_b_ = add("out.b", Partition::backbone, 1, vsz, Init::zeros);

    const auto h = static_cast<Eigen::Index>(cfg_.resolved_projection_hidden());
    const auto raw = static_cast<Eigen::Index>(cfg_.vision_dim);
    proj_.w1 = add("proj.w1", Partition::projection, raw, h, Init::xavier);
    proj_.b1 = add("proj.b1", Partition::projection, 1, h, Init::zeros);
    proj_.w2 = add("proj.w2", Partition::projection, h, d, Init::xavier);
    proj_.b2 = add("proj.b2", Partition::projection, 1, d, Init::zeros);
  }

  static M initial_value(Eigen::Index r, Eigen::Index c, Init init, std::mt19937_64& rng) {
    switch (init) {
      case Init::zeros: return M::Zero(r, c);
      case Init::ones: return M::Ones(r, c);
      case Init::embedding: {
        std::normal_distribution<double> n(0.0, 1.0);
        M m(r, c);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(n(rng));
        return m;
      }
      case Init::xavier: {
        const double a = std::sqrt(6.0 / static_cast<double>(r + c));
        std::uniform_real_distribution<double> u(-a, a);
        M m(r, c);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(u(rng));
        return m;
      }
    }
    return M();
  }

  void check_length(std::size_t n, const char* what) const {
    if (n == 0) throw Error(ErrorCode::InvalidArgument, std::string(what) + " sequence is empty");
    if (n > cfg_.max_len)
      throw Error(ErrorCode::LengthOverflow, std::string(what) + " length " + std::to_string(n) + " exceeds max_len " +
                                                 std::to_string(cfg_.max_len));
  }

  V embed(Pass& ps, const std::vector<TokenId>& ids) const {
    std::vector<int> rows;
    for (TokenId id : ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= cfg_.vocab_size)
        throw Error(ErrorCode::InvalidArgument, "token id " + std::to_string(id) + " outside vocabulary");
      rows.push_back(id);
    }
    return gather_rows(ps.p(tok_emb_), rows) + ps.constant(positions(ids.size()));
  }

  M positions(std::size_t n) const {
    const auto d = static_cast<Eigen::Index>(cfg_.model_dim);
    M pe(static_cast<Eigen::Index>(n), d);
    for (Eigen::Index pos = 0; pos < pe.rows(); ++pos)
      for (Eigen::Index i = 0; i < d; ++i) {
        const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
        pe(pos, i) = static_cast<Scalar>(i % 2 == 0 ? std::sin(pos * freq) : std::cos(pos * freq));
      }
    return pe;
  }

  static AttnMask key_mask(std::size_t queries, const std::vector<bool>& visible) {
    AttnMask m(static_cast<Eigen::Index>(queries), static_cast<Eigen::Index>(visible.size()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) m.col(c).setConstant(visible[static_cast<std::size_t>(c)]);
    return m;
  }

  ModelConfig cfg_;
  ParamSet<Scalar> params_;
  int tok_emb_ = -1;
  int out_w_ = -1;
  int out_b_ = -1;
  detail::FfnSlots proj_{};
  std::vector<detail::EncoderSlots> enc_;
  std::vector<detail::DecoderSlots> dec_;
};

// Mean smoothed cross-entropy over non-pad rows.
template <typename Scalar>
Scalar sequence_loss(const Mat<Scalar>& logits, const std::vector<TokenId>& targets, Scalar smoothing) {
  if (!(smoothing >= 0 && smoothing < 1)) throw Error(ErrorCode::InvalidArgument, "smoothing must lie in [0, 1)");
  Tape<Scalar> t;
  auto ce = smoothed_cross_entropy_sum(t.constant(logits), std::vector<int>(targets.begin(), targets.end()), smoothing,
                                       static_cast<int>(kPad));
  std::size_t n = 0;
  for (TokenId id : targets) n += id != kPad;
  return n ? ce.value()(0, 0) / Scalar(n) : Scalar(0);
}

}  // namespace live
