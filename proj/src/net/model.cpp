#include "omnisal/net/model.hpp"

#include <cmath>

#include "omnisal/common/parallel.hpp"

namespace omnisal::net {

using namespace omnisal::ag;

AttentionCost attention_cost(std::size_t frames, std::size_t viewports) {
  if (frames < 1 || viewports < 1) throw DataError("attention_cost: F and T must be >= 1");
  AttentionCost cost;
  cost.factored_per_group = frames * frames + viewports * viewports;
  cost.joint_per_group = frames * frames * viewports * viewports;
  cost.factored_total_entries = viewports * frames * frames + frames * viewports * viewports;
  cost.joint_total_entries = (frames * viewports) * (frames * viewports);
  return cost;
}

Tensor multi_head_attention(const Tensor& x, const AttentionParams& params,
                            std::size_t* score_counter, std::vector<Tensor>* probs_out) {
  const std::size_t n = x.extent(0);
  const std::size_t d = x.extent(1);
  const std::size_t heads = static_cast<std::size_t>(params.heads);
  if (d % heads != 0) throw ShapeError("multi_head_attention: d must divide by heads");
  const std::size_t dh = d / heads;
  const Tensor q = linear(x, params.wq, params.bq);
  const Tensor k = linear(x, params.wk, params.bk);
  const Tensor v = linear(x, params.wv, params.bv);
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> head_outputs;
  head_outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = slice(q, 1, h * dh, dh);
    const Tensor kh = slice(k, 1, h * dh, dh);
    const Tensor vh = slice(v, 1, h * dh, dh);
    const Tensor scores = scale(matmul(qh, transpose(kh, 0, 1)), inv_scale);
    if (score_counter) *score_counter += n * n;
    const Tensor probs = softmax(scores, 1);
    if (probs_out) probs_out->push_back(probs);
    head_outputs.push_back(matmul(probs, vh));
  }
  const Tensor merged = concat(head_outputs, 1);
  return linear(merged, params.wo, params.bo);
}

SaliencyModel::SaliencyModel(NetConfig cfg, geom::ViewportLayout layout)
    : cfg_(std::move(cfg)), layout_(std::move(layout)) {
  cfg_.validate();
  if (layout_.count() == 0) throw DataError("SaliencyModel: empty layout");
  layout_.patch_size = cfg_.patch;
  input_map_ = geom::build_sampling_map(layout_, cfg_.erp_height, 2 * cfg_.erp_height);
  geom::ViewportLayout out_layout = layout_;
  out_layout.patch_size = cfg_.decoder_out;
  output_map_ = geom::build_sampling_map(out_layout, cfg_.erp_height, 2 * cfg_.erp_height);
  backproject_op_ = geom::backprojection_operator(output_map_);

  // Encoder stages.
  int in_ch = 3;
  for (int s = 0; s < cfg_.encoder_stages(); ++s) {
    const int out_ch = cfg_.encoder_channels[s];
    params_.create("vis.enc.stage" + std::to_string(s) + ".w",
                   {static_cast<std::size_t>(out_ch), static_cast<std::size_t>(in_ch), 3, 3});
    params_.create("vis.enc.stage" + std::to_string(s) + ".b", {static_cast<std::size_t>(out_ch)});
    in_ch = out_ch;
  }
  // Spherical position embedding: (sin lat, cos lat, sin lon, cos lon) -> d.
  params_.create("vis.posembed.w", {4, static_cast<std::size_t>(cfg_.token_dim)});

  const std::size_t d = static_cast<std::size_t>(cfg_.token_dim);
  for (int b = 0; b < cfg_.depth; ++b) {
    const std::string pre = "vis.blk" + std::to_string(b) + ".";
    for (const char* part : {"vta", "vsa"}) {
      for (const char* m : {"wq", "wk", "wv", "wo"}) {
        params_.create(pre + part + "." + m, {d, d});
      }
      for (const char* m : {"bq", "bk", "bv", "bo"}) {
        params_.create(pre + part + "." + m, {d});
      }
      params_.create(pre + part + ".ln.gamma", {d});
      params_.create(pre + part + ".ln.beta", {d});
    }
    params_.create(pre + "mlp.w1", {d, 4 * d});
    params_.create(pre + "mlp.b1", {4 * d});
    params_.create(pre + "mlp.w2", {4 * d, d});
    params_.create(pre + "mlp.b2", {d});
    params_.create(pre + "mlp.ln.gamma", {d});
    params_.create(pre + "mlp.ln.beta", {d});
  }

  // Decoder stages (upsample -> conv -> channel LN -> relu), then 1-ch conv.
  const std::vector<int> plan = cfg_.decoder_channels();
  for (int s = 0; s + 1 < static_cast<int>(plan.size()); ++s) {
    const std::string pre = "vis.dec.stage" + std::to_string(s) + ".";
    params_.create(pre + "w", {static_cast<std::size_t>(plan[s + 1]),
                               static_cast<std::size_t>(plan[s]), 3, 3});
    params_.create(pre + "b", {static_cast<std::size_t>(plan[s + 1])});
    params_.create(pre + "ln.gamma", {static_cast<std::size_t>(plan[s + 1])});
    params_.create(pre + "ln.beta", {static_cast<std::size_t>(plan[s + 1])});
  }
  params_.create("vis.dec.final.w", {1, static_cast<std::size_t>(plan.back()), 3, 3});
  params_.create("vis.dec.final.b", {1});
}

void SaliencyModel::init_params(Rng& rng) {
  const double d = static_cast<double>(cfg_.token_dim);
  int in_ch = 3;
  for (int s = 0; s < cfg_.encoder_stages(); ++s) {
    init::kaiming(params_.at("vis.enc.stage" + std::to_string(s) + ".w"), rng,
                  static_cast<std::size_t>(in_ch) * 9);
    init::zeros(params_.at("vis.enc.stage" + std::to_string(s) + ".b"));
    in_ch = cfg_.encoder_channels[s];
  }
  init::normal(params_.at("vis.posembed.w"), rng, 0.0, 0.5);
  for (int b = 0; b < cfg_.depth; ++b) {
    const std::string pre = "vis.blk" + std::to_string(b) + ".";
    for (const char* part : {"vta", "vsa"}) {
      for (const char* m : {"wq", "wk", "wv", "wo"}) {
        init::normal(params_.at(pre + part + "." + m), rng, 0.0, std::sqrt(1.0 / d));
      }
      for (const char* m : {"bq", "bk", "bv", "bo"}) init::zeros(params_.at(pre + part + "." + m));
      init::constant(params_.at(pre + part + ".ln.gamma"), 1.0);
      init::zeros(params_.at(pre + part + ".ln.beta"));
    }
    init::kaiming(params_.at(pre + "mlp.w1"), rng, static_cast<std::size_t>(cfg_.token_dim));
    init::zeros(params_.at(pre + "mlp.b1"));
    init::kaiming(params_.at(pre + "mlp.w2"), rng, 4 * static_cast<std::size_t>(cfg_.token_dim));
    init::zeros(params_.at(pre + "mlp.b2"));
    init::constant(params_.at(pre + "mlp.ln.gamma"), 1.0);
    init::zeros(params_.at(pre + "mlp.ln.beta"));
  }
  const std::vector<int> plan = cfg_.decoder_channels();
  for (int s = 0; s + 1 < static_cast<int>(plan.size()); ++s) {
    const std::string pre = "vis.dec.stage" + std::to_string(s) + ".";
    init::kaiming(params_.at(pre + "w"), rng, static_cast<std::size_t>(plan[s]) * 9);
    init::zeros(params_.at(pre + "b"));
    init::constant(params_.at(pre + "ln.gamma"), 1.0);
    init::zeros(params_.at(pre + "ln.beta"));
  }
  init::kaiming(params_.at("vis.dec.final.w"), rng, static_cast<std::size_t>(plan.back()) * 9);
  init::zeros(params_.at("vis.dec.final.b"));
}

std::pair<Tensor, Tensor> SaliencyModel::encode_patch(const Tensor& patch) const {
  if (patch.rank() != 3 || patch.extent(0) != 3 ||
      patch.extent(1) != static_cast<std::size_t>(cfg_.patch) ||
      patch.extent(2) != static_cast<std::size_t>(cfg_.patch)) {
    throw ShapeError("encode_patch: expected [3, p, p]");
  }
  Tensor x = patch;
  for (int s = 0; s < cfg_.encoder_stages(); ++s) {
    const std::string pre = "vis.enc.stage" + std::to_string(s) + ".";
    x = relu(conv2d(x, params_.at(pre + "w"), params_.at(pre + "b"), 2, 1));
  }
  const std::size_t d = x.extent(0);
  const std::size_t g = x.extent(1);
  const Tensor token = mean_axis(reshape(x, {d, g * g}), 1);  // global average pool
  return {x, token};
}

Tensor SaliencyModel::pos_embed_table() const {
  const std::size_t t_count = layout_.count();
  std::vector<double> coords(t_count * 4);
  for (std::size_t t = 0; t < t_count; ++t) {
    const auto& c = layout_.centers[t];
    coords[t * 4 + 0] = std::sin(c.lat);
    coords[t * 4 + 1] = std::cos(c.lat);
    coords[t * 4 + 2] = std::sin(c.lon);
    coords[t * 4 + 3] = std::cos(c.lon);
  }
  return matmul(Tensor::from_data({t_count, 4}, std::move(coords)), params_.at("vis.posembed.w"));
}

Tensor SaliencyModel::add_pos_embed(const Tensor& tokens) const {
  const std::size_t t_count = tokens.extent(0);
  const std::size_t frames = tokens.extent(1);
  if (t_count != layout_.count()) throw ShapeError("add_pos_embed: viewport count mismatch");
  const Tensor table = reshape(pos_embed_table(), {t_count, 1, tokens.extent(2)});
  const std::vector<Tensor> copies(frames, table);
  return add(tokens, concat(copies, 1));
}

AttentionParams SaliencyModel::attention_params(int block, const char* which) const {
  const std::string pre = "vis.blk" + std::to_string(block) + "." + which + ".";
  return {params_.at(pre + "wq"), params_.at(pre + "bq"), params_.at(pre + "wk"),
          params_.at(pre + "bk"), params_.at(pre + "wv"), params_.at(pre + "bv"),
          params_.at(pre + "wo"), params_.at(pre + "bo"), cfg_.heads};
}

Tensor SaliencyModel::vta(const Tensor& tokens, int block) const {
  const std::size_t t_count = tokens.extent(0);
  const std::size_t frames = tokens.extent(1);
  const std::size_t d = tokens.extent(2);
  const std::string pre = "vis.blk" + std::to_string(block) + ".vta.ln.";
  const AttentionParams attn = attention_params(block, "vta");
  std::vector<Tensor> rows;
  rows.reserve(t_count);
  for (std::size_t t = 0; t < t_count; ++t) {
    const Tensor x = reshape(slice(tokens, 0, t, 1), {frames, d});
    const Tensor normed = layer_norm(x, std::size_t{1}, params_.at(pre + "gamma"),
                                     params_.at(pre + "beta"), 1e-5);
    const Tensor out = multi_head_attention(normed, attn, &score_entries_);
    rows.push_back(reshape(add(x, out), {std::size_t{1}, frames, d}));
  }
  return concat(rows, 0);
}

Tensor SaliencyModel::vsa(const Tensor& tokens, int block) const {
  const std::size_t t_count = tokens.extent(0);
  const std::size_t frames = tokens.extent(1);
  const std::size_t d = tokens.extent(2);
  const std::string pre = "vis.blk" + std::to_string(block) + ".vsa.ln.";
  const AttentionParams attn = attention_params(block, "vsa");
  std::vector<Tensor> cols;
  cols.reserve(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    const Tensor x = reshape(slice(tokens, 1, f, 1), {t_count, d});
    const Tensor normed = layer_norm(x, std::size_t{1}, params_.at(pre + "gamma"),
                                     params_.at(pre + "beta"), 1e-5);
    const Tensor out = multi_head_attention(normed, attn, &score_entries_);
    cols.push_back(reshape(add(x, out), {t_count, std::size_t{1}, d}));
  }
  return concat(cols, 1);
}

Tensor SaliencyModel::feedforward(const Tensor& tokens, int block, const AdapterHook& adapter) const {
  const std::size_t t_count = tokens.extent(0);
  const std::size_t frames = tokens.extent(1);
  const std::size_t d = tokens.extent(2);
  const std::string pre = "vis.blk" + std::to_string(block) + ".mlp.";
  const Tensor flat = reshape(tokens, {t_count * frames, d});
  const Tensor normed = layer_norm(flat, std::size_t{1}, params_.at(pre + "ln.gamma"),
                                   params_.at(pre + "ln.beta"), 1e-5);
  const Tensor hidden = relu(linear(normed, params_.at(pre + "w1"), params_.at(pre + "b1")));
  const Tensor mlp_out =
      reshape(linear(hidden, params_.at(pre + "w2"), params_.at(pre + "b2")), tokens.shape());
  Tensor extra;
  if (adapter) extra = adapter(block, tokens);
  if (extra.defined()) return add(add(mlp_out, extra), tokens);
  return add(mlp_out, tokens);
}

Tensor SaliencyModel::vsta_block(const Tensor& tokens, int block, const AdapterHook& adapter) const {
  return feedforward(vsa(vta(tokens, block), block), block, adapter);
}

Tensor SaliencyModel::run_blocks(const Tensor& tokens, const AdapterHook& adapter) const {
  Tensor x = tokens;
  for (int b = 0; b < cfg_.depth; ++b) x = vsta_block(x, b, adapter);
  return x;
}

Tensor SaliencyModel::decode_patch(const Tensor& feat, const Tensor& token) const {
  const std::size_t d = feat.extent(0);
  const std::size_t g = feat.extent(1);
  if (token.size() != d) throw ShapeError("decode_patch: token dim mismatch");
  // Broadcast-add the transformer token onto the encoder map (skip connection).
  const Tensor ones_row = Tensor::filled({std::size_t{1}, g * g}, 1.0);
  const Tensor spread = reshape(matmul(reshape(token, {d, std::size_t{1}}), ones_row), {d, g, g});
  Tensor x = add(feat, spread);
  const std::vector<int> plan = cfg_.decoder_channels();
  for (int s = 0; s + 1 < static_cast<int>(plan.size()); ++s) {
    const std::string pre = "vis.dec.stage" + std::to_string(s) + ".";
    x = upsample_nearest2(x);
    x = conv2d(x, params_.at(pre + "w"), params_.at(pre + "b"), 1, 1);
    x = layer_norm(x, std::size_t{0}, params_.at(pre + "ln.gamma"), params_.at(pre + "ln.beta"),
                   1e-5);
    x = relu(x);
  }
  x = conv2d(x, params_.at("vis.dec.final.w"), params_.at("vis.dec.final.b"), 1, 1);
  x = softplus(x);
  const std::size_t out = x.extent(1);
  return reshape(x, {out * out});
}

Tensor SaliencyModel::forward_from_patches(const std::vector<std::vector<Tensor>>& patches,
                                           const AdapterHook& adapter) const {
  const std::size_t frames = patches.size();
  if (frames == 0) throw DataError("forward: empty clip");
  if (frames != static_cast<std::size_t>(cfg_.frames)) {
    throw ShapeError("forward: clip length must equal the configured frame count");
  }
  const std::size_t t_count = layout_.count();
  for (const auto& per_frame : patches) {
    if (per_frame.size() != t_count) throw ShapeError("forward: viewport count mismatch");
  }

  // Encode every (viewport, frame); keep encoder maps of the last frame for
  // the decoder skip connection.
  std::vector<Tensor> last_frame_feats(t_count);
  std::vector<Tensor> token_cells;  // [t][f] order
  token_cells.reserve(t_count * frames);
  const std::size_t d = static_cast<std::size_t>(cfg_.token_dim);
  for (std::size_t t = 0; t < t_count; ++t) {
    for (std::size_t f = 0; f < frames; ++f) {
      auto [feat, token] = encode_patch(patches[f][t]);
      if (f + 1 == frames) last_frame_feats[t] = feat;
      token_cells.push_back(reshape(token, {std::size_t{1}, std::size_t{1}, d}));
    }
  }
  std::vector<Tensor> per_viewport;
  per_viewport.reserve(t_count);
  for (std::size_t t = 0; t < t_count; ++t) {
    per_viewport.push_back(concat(
        std::vector<Tensor>(token_cells.begin() + static_cast<std::ptrdiff_t>(t * frames),
                            token_cells.begin() + static_cast<std::ptrdiff_t>((t + 1) * frames)),
        1));
  }
  Tensor tokens = concat(per_viewport, 0);  // [T, F, d]
  tokens = add_pos_embed(tokens);
  tokens = run_blocks(tokens, adapter);

  // Decode each viewport of the last frame and fuse back to ERP.
  std::vector<Tensor> tangent_maps;
  tangent_maps.reserve(t_count);
  for (std::size_t t = 0; t < t_count; ++t) {
    const Tensor token =
        reshape(slice(slice(tokens, 0, t, 1), 1, frames - 1, 1), {d});
    tangent_maps.push_back(decode_patch(last_frame_feats[t], token));
  }
  const Tensor stacked = concat(tangent_maps, 0);  // [T * p' * p']
  const Tensor erp = apply_linear_map(backproject_op_, stacked);
  return div(erp, sum(erp));
}

std::vector<std::vector<Tensor>> SaliencyModel::project_clip(const std::vector<geom::ErpGrid>& clip,
                                                             int jobs) const {
  std::vector<std::vector<Tensor>> out(clip.size());
  for (std::size_t f = 0; f < clip.size(); ++f) {
    if (clip[f].channels != 3) throw DataError("forward: frames must be 3-channel");
    if (clip[f].height != cfg_.erp_height) throw ShapeError("forward: frame height mismatch");
    const auto patches = geom::project_to_tangents(clip[f], input_map_, jobs);
    out[f].reserve(patches.size());
    for (const auto& patch : patches) {
      // Raster storage is already channel-planar, matching [C, p, p].
      out[f].push_back(Tensor::from_data(
          {3, static_cast<std::size_t>(cfg_.patch), static_cast<std::size_t>(cfg_.patch)},
          patch.data));
    }
  }
  return out;
}

geom::ErpGrid SaliencyModel::map_from_tensor(const Tensor& flat_map) const {
  geom::ErpGrid out(cfg_.erp_height, 1);
  if (flat_map.size() != out.data.size()) throw ShapeError("map_from_tensor: size mismatch");
  out.data = flat_map.values();
  return out;
}

geom::ErpGrid SaliencyModel::forward(const std::vector<geom::ErpGrid>& clip, int jobs) const {
  return map_from_tensor(forward_from_patches(project_clip(clip, jobs)));
}

}  // namespace omnisal::net
