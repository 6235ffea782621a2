#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "omnisal/common/rng.hpp"
#include "omnisal/geometry/sampling_map.hpp"
#include "omnisal/net/config.hpp"
#include "omnisal/tensor/checkpoint.hpp"
#include "omnisal/tensor/tensor.hpp"

namespace omnisal::net {

using ag::Tensor;

// Score-matrix entry counts of factored vs joint space-time attention.
// Per attention group the factored scheme allocates F^2 + T^2 entries where
// the joint one needs F^2 * T^2; totals cover the whole T x F token grid
// (per attention head).
struct AttentionCost {
  std::size_t factored_per_group = 0;
  std::size_t joint_per_group = 0;
  std::size_t factored_total_entries = 0;
  std::size_t joint_total_entries = 0;
};

AttentionCost attention_cost(std::size_t frames, std::size_t viewports);

struct AttentionParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  int heads = 1;
};

// Multi-head scaled dot-product attention over the rows of x ([n, d]).
// score_counter accumulates allocated score-matrix entries (per head);
// probs_out, when given, collects each head's [n, n] probability matrix.
Tensor multi_head_attention(const Tensor& x, const AttentionParams& params,
                            std::size_t* score_counter = nullptr,
                            std::vector<Tensor>* probs_out = nullptr);

// Optional per-block additive term for the feed-forward sublayer (the
// audio adapter hook). Returning an undefined tensor leaves the block's
// arithmetic identical to the plain visual path.
using AdapterHook = std::function<Tensor(int block, const Tensor& tokens)>;

// SalViT360-style visual model: tangent encoder, spherical position
// embeddings, viewport temporal + spatial attention blocks, tangent decoder,
// ERP fusion. Parameters live in an owned ParamStore under "vis.*" names.
class SaliencyModel {
 public:
  SaliencyModel(NetConfig cfg, geom::ViewportLayout layout);

  void init_params(Rng& rng);

  const NetConfig& config() const { return cfg_; }
  const geom::ViewportLayout& layout() const { return layout_; }
  ag::ParamStore& params() { return params_; }
  const ag::ParamStore& params() const { return params_; }
  const geom::SamplingMap& input_map() const { return input_map_; }
  const geom::SamplingMap& output_map() const { return output_map_; }

  // Stage pieces (exposed for tests).
  std::pair<Tensor, Tensor> encode_patch(const Tensor& patch) const;  // [3,p,p] -> ([d,g,g], [d])
  Tensor pos_embed_table() const;                                     // [T, d]
  Tensor add_pos_embed(const Tensor& tokens) const;                   // [T,F,d] -> [T,F,d]
  Tensor vta(const Tensor& tokens, int block) const;
  Tensor vsa(const Tensor& tokens, int block) const;
  Tensor feedforward(const Tensor& tokens, int block, const AdapterHook& adapter = {}) const;
  Tensor vsta_block(const Tensor& tokens, int block, const AdapterHook& adapter = {}) const;
  Tensor run_blocks(const Tensor& tokens, const AdapterHook& adapter = {}) const;
  Tensor decode_patch(const Tensor& feat, const Tensor& token) const;  // -> [p'*p']

  // Tangent clip tensors [frame][viewport], each [3, p, p], already scaled
  // to [0, 1]. Returns the sum-1 normalized ERP map as a flat [H*W] tensor.
  Tensor forward_from_patches(const std::vector<std::vector<Tensor>>& patches,
                              const AdapterHook& adapter = {}) const;

  // Full pipeline from ERP frames (values in [0, 1]).
  geom::ErpGrid forward(const std::vector<geom::ErpGrid>& clip, int jobs = 1) const;

  // Projection of an ERP clip to per-frame patch tensors (no gradient).
  std::vector<std::vector<Tensor>> project_clip(const std::vector<geom::ErpGrid>& clip,
                                                int jobs = 1) const;

  geom::ErpGrid map_from_tensor(const Tensor& flat_map) const;

  void reset_score_counter() const { score_entries_ = 0; }
  std::size_t score_entries() const { return score_entries_; }

 private:
  AttentionParams attention_params(int block, const char* which) const;

  NetConfig cfg_;
  geom::ViewportLayout layout_;
  geom::SamplingMap input_map_;
  geom::SamplingMap output_map_;
  std::shared_ptr<const LinearMap> backproject_op_;
  ag::ParamStore params_;
  mutable std::size_t score_entries_ = 0;  // single training context assumed
};

}  // namespace omnisal::net
