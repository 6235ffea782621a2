#pragma once

#include <string>
#include <vector>

#include "omnisal/common/error.hpp"

namespace omnisal::net {

// Architecture knobs of the visual saliency model. The encoder is a stack of
// stride-2 3x3 convolutions; the grid it leaves (patch / 2^stages) is doubled
// by the decoder until decoder_out is reached.
struct NetConfig {
  int frames = 8;        // F, temporal window
  int token_dim = 512;   // d
  int heads = 8;
  int depth = 6;         // N transformer blocks
  int patch = 224;       // p, tangent input resolution
  int decoder_out = 112;  // p', tangent saliency resolution
  int erp_height = 128;   // H of the ERP maps the model produces
  std::vector<int> encoder_channels = {32, 64, 128, 256, 512};

  int encoder_stages() const { return static_cast<int>(encoder_channels.size()); }
  int grid() const { return patch >> encoder_stages(); }
  int decoder_stages() const;
  std::vector<int> decoder_channels() const;  // halving plan from token_dim

  void validate() const;

  std::string to_json() const;
  static NetConfig from_json(const std::string& text);
};

// Micro configuration used by gradient checks: F=2, T=4 viewports expected,
// d=8, 2 heads, 1 block, 16 px patches, 2 encoder stages.
NetConfig micro_config();

}  // namespace omnisal::net
