#include "omnisal/net/config.hpp"

#include <nlohmann/json.hpp>

namespace omnisal::net {

using nlohmann::json;

int NetConfig::decoder_stages() const {
  int g = grid(), stages = 0;
  while (g < decoder_out) {
    g *= 2;
    ++stages;
  }
  return stages;
}

std::vector<int> NetConfig::decoder_channels() const {
  std::vector<int> plan = {token_dim};
  for (int s = 0; s < decoder_stages(); ++s) plan.push_back(std::max(2, plan.back() / 2));
  return plan;
}

void NetConfig::validate() const {
  if (frames < 1) throw DataError("NetConfig: frames must be >= 1");
  if (depth < 0) throw DataError("NetConfig: depth must be >= 0");
  if (token_dim < 1 || heads < 1 || token_dim % heads != 0) {
    throw DataError("NetConfig: token_dim must be a positive multiple of heads");
  }
  if (encoder_channels.empty()) throw DataError("NetConfig: encoder needs at least one stage");
  if (encoder_channels.back() != token_dim) {
    throw DataError("NetConfig: last encoder channel count must equal token_dim");
  }
  if (patch != grid() << encoder_stages() || grid() < 1) {
    throw DataError("NetConfig: patch must be grid * 2^stages");
  }
  int g = grid();
  while (g < decoder_out) g *= 2;
  if (g != decoder_out) throw DataError("NetConfig: decoder_out must be grid * 2^k");
  if (erp_height < 2) throw DataError("NetConfig: erp_height too small");
}

std::string NetConfig::to_json() const {
  json j;
  j["frames"] = frames;
  j["token_dim"] = token_dim;
  j["heads"] = heads;
  j["depth"] = depth;
  j["patch"] = patch;
  j["decoder_out"] = decoder_out;
  j["erp_height"] = erp_height;
  j["encoder_channels"] = encoder_channels;
  return j.dump(2);
}

NetConfig NetConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("bad NetConfig JSON: ") + e.what());
  }
  NetConfig cfg;
  cfg.frames = j.value("frames", cfg.frames);
  cfg.token_dim = j.value("token_dim", cfg.token_dim);
  cfg.heads = j.value("heads", cfg.heads);
  cfg.depth = j.value("depth", cfg.depth);
  cfg.patch = j.value("patch", cfg.patch);
  cfg.decoder_out = j.value("decoder_out", cfg.decoder_out);
  cfg.erp_height = j.value("erp_height", cfg.erp_height);
  if (j.contains("encoder_channels")) {
    cfg.encoder_channels = j.at("encoder_channels").get<std::vector<int>>();
  }
  cfg.validate();
  return cfg;
}

NetConfig micro_config() {
  NetConfig cfg;
  cfg.frames = 2;
  cfg.token_dim = 8;
  cfg.heads = 2;
  cfg.depth = 1;
  cfg.patch = 16;
  cfg.decoder_out = 16;
  cfg.erp_height = 16;
  cfg.encoder_channels = {4, 8};
  cfg.validate();
  return cfg;
}

}  // namespace omnisal::net
