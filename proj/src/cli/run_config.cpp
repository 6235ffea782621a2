#include "omnisal/cli/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "omnisal/geometry/layout.hpp"

namespace omnisal::cli {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const char* where) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw DataError(std::string("config: unknown key '") + key + "' in " + where);
    }
  }
}

}  // namespace

std::string RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["jobs"] = jobs;
  j["layout"] = layout;
  j["net"] = json::parse(net.to_json());
  j["av"] = json::parse(av.to_json());
  j["idt"] = {{"dispersion_deg", idt_dispersion_deg}, {"min_dur_s", idt_min_dur_s}};
  j["density_sigma_deg"] = density_sigma_deg;
  j["consistency_window_s"] = consistency_window_s;
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("bad config JSON: ") + e.what());
  }
  reject_unknown(j, {"seed", "jobs", "layout", "net", "av", "idt", "density_sigma_deg",
                     "consistency_window_s"}, "the top level");
  RunConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  cfg.jobs = j.value("jobs", cfg.jobs);
  cfg.layout = j.value("layout", cfg.layout);
  if (j.contains("net")) {
    reject_unknown(j.at("net"), {"frames", "token_dim", "heads", "depth", "patch", "decoder_out",
                                 "erp_height", "encoder_channels"}, "net");
    cfg.net = net::NetConfig::from_json(j.at("net").dump());
  }
  if (j.contains("av")) {
    reject_unknown(j.at("av"), {"audio_dim", "bottleneck", "scale_init", "mlp_hidden", "window_s"},
                   "av");
    cfg.av = fusion::AvConfig::from_json(j.at("av").dump());
  }
  if (j.contains("idt")) {
    reject_unknown(j.at("idt"), {"dispersion_deg", "min_dur_s"}, "idt");
    cfg.idt_dispersion_deg = j.at("idt").value("dispersion_deg", cfg.idt_dispersion_deg);
    cfg.idt_min_dur_s = j.at("idt").value("min_dur_s", cfg.idt_min_dur_s);
  }
  cfg.density_sigma_deg = j.value("density_sigma_deg", cfg.density_sigma_deg);
  cfg.consistency_window_s = j.value("consistency_window_s", cfg.consistency_window_s);
  if (cfg.jobs < 1) throw DataError("config: jobs must be >= 1");
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open config: " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return from_json(buf.str());
}

void RunConfig::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path);
  f << to_json() << "\n";
}

geom::ViewportLayout RunConfig::resolve_layout() const {
  if (layout == "default" || layout == "shifted" || layout == "wide-fov" ||
      layout == "wide_fov" || layout == "coarse") {
    return geom::layout_by_name(layout);
  }
  return geom::load_layout_file(layout);
}

}  // namespace omnisal::cli
