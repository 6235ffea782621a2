// omnisal: spherical video saliency toolkit CLI.
// One binary, subcommand per pipeline stage; every run is reproducible from
// (inputs, config, seed). Exit codes: 0 ok, 1 usage, 2 data error or failed
// self-check, 3 numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <nlohmann/json.hpp>

#include "omnisal/audio/mel.hpp"
#include "omnisal/audio/resample.hpp"
#include "omnisal/audio/wav_io.hpp"
#include "omnisal/check/selfcheck.hpp"
#include "omnisal/cli/run_config.hpp"
#include "omnisal/fusion/av_model.hpp"
#include "omnisal/gaze/gaze.hpp"
#include "omnisal/geometry/image_io.hpp"
#include "omnisal/sal/metrics.hpp"
#include "omnisal/toy/toytrain.hpp"
#include "omnisal/vqa/quality.hpp"

namespace fs = std::filesystem;
using namespace omnisal;
using nlohmann::json;

namespace {

std::vector<std::string> list_files(const std::string& dir, const std::vector<std::string>& exts) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    for (const auto& want : exts) {
      if (ext == want) {
        out.push_back(entry.path().string());
        break;
      }
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError("no matching files in " + dir);
  return out;
}

geom::ErpGrid load_frame_unit_range(const std::string& path) {
  geom::ErpGrid g = geom::read_erp_image(path);
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".png") {
    for (double& v : g.data) v /= 255.0;  // PNG bytes -> [0, 1]
  }
  return g;
}

void write_map_outputs(const geom::ErpGrid& map, const std::string& pfm_path,
                       const std::string& png_path) {
  if (!pfm_path.empty()) geom::write_pfm(pfm_path, map);
  if (!png_path.empty()) geom::write_png_autoscale(png_path, map);
}

struct CommonOpts {
  std::string config_path;
  std::string emit_config;
  std::optional<std::uint64_t> seed_flag;
  std::optional<int> jobs_flag;

  cli::RunConfig resolve() const {
    cli::RunConfig cfg;
    if (!config_path.empty()) cfg = cli::RunConfig::load(config_path);
    if (const char* env = std::getenv("OMNISAL_SEED")) cfg.seed = std::stoull(env);
    if (const char* env = std::getenv("OMNISAL_JOBS")) cfg.jobs = std::stoi(env);
    if (seed_flag) cfg.seed = *seed_flag;
    if (jobs_flag) cfg.jobs = *jobs_flag;
    if (cfg.jobs < 1) throw DataError("jobs must be >= 1");
    if (!emit_config.empty()) cfg.save(emit_config);
    return cfg;
  }
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "run-config JSON (flags override it)");
  cmd->add_option("--emit-config", opts.emit_config, "write the effective config JSON here");
  cmd->add_option("--seed", opts.seed_flag, "RNG seed (also OMNISAL_SEED)");
  cmd->add_option("--jobs", opts.jobs_flag, "worker threads (also OMNISAL_JOBS)");
}

fusion::AvSaliencyModel build_model(const cli::RunConfig& cfg, const std::string& layout_name,
                                    const std::string& checkpoint) {
  cli::RunConfig effective = cfg;
  if (!layout_name.empty()) effective.layout = layout_name;
  geom::ViewportLayout layout = effective.resolve_layout();
  layout.patch_size = effective.net.patch;
  fusion::AvSaliencyModel model(effective.net, effective.av, layout);
  Rng rng(effective.seed);
  model.init_params(rng);
  if (!checkpoint.empty()) model.params().load_partial(checkpoint);
  return model;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"spherical video saliency toolkit"};
  app.require_subcommand(1);

  // ---- project ----
  auto* project = app.add_subcommand("project", "ERP image -> tangent patches");
  CommonOpts project_opts;
  std::string project_input, project_layout = "default", project_outdir, project_format = "pfm";
  int project_patch = 0;
  project->add_option("--input", project_input, "ERP image (.pfm or .png)")->required();
  project->add_option("--layout", project_layout, "default|shifted|wide-fov|coarse|layout.json");
  project->add_option("--out-dir", project_outdir, "output directory")->required();
  project->add_option("--format", project_format, "pfm|png");
  project->add_option("--patch-size", project_patch, "override layout patch size");
  add_common(project, project_opts);
  project->callback([&] {
    const cli::RunConfig cfg = project_opts.resolve();
    geom::ViewportLayout layout =
        project_layout == "default" || project_layout == "shifted" ||
                project_layout == "wide-fov" || project_layout == "coarse"
            ? geom::layout_by_name(project_layout)
            : geom::load_layout_file(project_layout);
    if (project_patch > 0) layout.patch_size = project_patch;
    const geom::ErpGrid erp = geom::read_erp_image(project_input);
    const geom::SamplingMap map = geom::build_sampling_map(layout, erp.height, erp.width, cfg.jobs);
    const auto patches = geom::project_to_tangents(erp, map, cfg.jobs);
    fs::create_directories(project_outdir);
    char name[64];
    for (std::size_t t = 0; t < patches.size(); ++t) {
      std::snprintf(name, sizeof(name), "patch_%03zu.%s", t, project_format.c_str());
      const std::string path = (fs::path(project_outdir) / name).string();
      if (project_format == "pfm") geom::write_pfm(path, patches[t]);
      else if (project_format == "png") geom::write_png(path, patches[t]);
      else throw DataError("unknown --format: " + project_format);
    }
    std::cout << "wrote " << patches.size() << " patches to " << project_outdir << "\n";
  });

  // ---- backproject ----
  auto* backproject = app.add_subcommand("backproject", "tangent patches -> ERP image");
  CommonOpts back_opts;
  std::string back_dir, back_layout = "default", back_out, back_png, back_weight, back_blend = "uniform";
  int back_height = 0;
  backproject->add_option("--patches-dir", back_dir, "directory of patch .pfm files")->required();
  backproject->add_option("--layout", back_layout, "layout name or JSON path");
  backproject->add_option("--height", back_height, "ERP height in pixels")->required();
  backproject->add_option("--out", back_out, "output ERP .pfm")->required();
  backproject->add_option("--out-png", back_png, "optional PNG visualization");
  backproject->add_option("--out-weight", back_weight, "optional coverage-weight .pfm");
  backproject->add_option("--blend", back_blend, "uniform|cosine");
  add_common(backproject, back_opts);
  backproject->callback([&] {
    const cli::RunConfig cfg = back_opts.resolve();
    const auto files = list_files(back_dir, {".pfm"});
    std::vector<geom::Raster> patches;
    for (const auto& f : files) patches.push_back(geom::read_pfm(f));
    geom::ViewportLayout layout =
        back_layout == "default" || back_layout == "shifted" || back_layout == "wide-fov" ||
                back_layout == "coarse"
            ? geom::layout_by_name(back_layout)
            : geom::load_layout_file(back_layout);
    if (patches.empty()) throw DataError("no patches found");
    layout.patch_size = patches[0].height;
    const geom::SamplingMap map =
        geom::build_sampling_map(layout, back_height, 2 * back_height, cfg.jobs);
    const geom::BlendMode blend = back_blend == "cosine" ? geom::BlendMode::kCosineWeighted
                                                         : geom::BlendMode::kUniform;
    const auto [erp, weight] = geom::back_project(patches, map, cfg.jobs, blend);
    geom::write_pfm(back_out, erp);
    if (!back_png.empty()) geom::write_png_autoscale(back_png, erp);
    if (!back_weight.empty()) geom::write_pfm(back_weight, weight);
    std::cout << "wrote " << back_out << "\n";
  });

  // ---- mask ----
  auto* mask = app.add_subcommand("mask", "overlap weight mask (viewport coverage counts)");
  CommonOpts mask_opts;
  std::string mask_layout = "default", mask_out, mask_png;
  int mask_height = 128;
  mask->add_option("--layout", mask_layout, "layout name or JSON path");
  mask->add_option("--height", mask_height, "ERP height in pixels");
  mask->add_option("--out", mask_out, "output .pfm")->required();
  mask->add_option("--out-png", mask_png, "optional PNG visualization");
  add_common(mask, mask_opts);
  mask->callback([&] {
    const cli::RunConfig cfg = mask_opts.resolve();
    geom::ViewportLayout layout =
        mask_layout == "default" || mask_layout == "shifted" || mask_layout == "wide-fov" ||
                mask_layout == "coarse"
            ? geom::layout_by_name(mask_layout)
            : geom::load_layout_file(mask_layout);
    const geom::ErpGrid grid = geom::overlap_mask(layout, mask_height, 2 * mask_height, cfg.jobs);
    write_map_outputs(grid, mask_out, mask_png);
    std::cout << "wrote " << mask_out << "\n";
  });

  // ---- fixations ----
  auto* fixations = app.add_subcommand("fixations", "gaze CSV -> fixation CSV (I-DT)");
  CommonOpts fix_opts;
  std::string fix_in, fix_out, fix_subject = "s00";
  std::optional<double> fix_disp, fix_mindur;
  fixations->add_option("--input", fix_in, "gaze CSV: timestamp_s,lat_deg,lon_deg")->required();
  fixations->add_option("--out", fix_out, "fixation CSV")->required();
  fixations->add_option("--dispersion-deg", fix_disp, "max dispersion (default 1.5)");
  fixations->add_option("--min-dur-s", fix_mindur, "min duration (default 0.1)");
  fixations->add_option("--subject", fix_subject, "subject id column value");
  add_common(fixations, fix_opts);
  fixations->callback([&] {
    const cli::RunConfig cfg = fix_opts.resolve();
    gaze::IdtParams params;
    params.max_dispersion_deg = fix_disp.value_or(cfg.idt_dispersion_deg);
    params.min_duration_s = fix_mindur.value_or(cfg.idt_min_dur_s);
    const auto trace = gaze::read_gaze_csv(fix_in);
    const auto fx = gaze::idt_fixations(trace, params);
    gaze::write_fixation_csv(fix_out, fix_subject, fx);
    std::cout << "wrote " << fx.size() << " fixations to " << fix_out << "\n";
  });

  // ---- salmap ----
  auto* salmap = app.add_subcommand("salmap", "fixation CSV -> density map");
  CommonOpts sal_opts;
  std::string sal_in, sal_out, sal_png;
  int sal_height = 128;
  std::optional<double> sal_sigma;
  salmap->add_option("--input", sal_in, "fixation CSV")->required();
  salmap->add_option("--height", sal_height, "ERP height");
  salmap->add_option("--sigma-deg", sal_sigma, "Gaussian sigma (default 1.0)");
  salmap->add_option("--out", sal_out, "output .pfm")->required();
  salmap->add_option("--out-png", sal_png, "optional PNG");
  add_common(salmap, sal_opts);
  salmap->callback([&] {
    const cli::RunConfig cfg = sal_opts.resolve();
    std::vector<gaze::Fixation> fx;
    for (auto& [subject, f] : gaze::read_fixation_csv(sal_in)) fx.push_back(f);
    const geom::ErpGrid map =
        gaze::density_map(fx, sal_height, 2 * sal_height, sal_sigma.value_or(cfg.density_sigma_deg));
    write_map_outputs(map, sal_out, sal_png);
    std::cout << "wrote " << sal_out << "\n";
  });

  // ---- consistency ----
  auto* consistency = app.add_subcommand("consistency", "windowed inter-subject consistency");
  CommonOpts cons_opts;
  std::vector<std::string> cons_inputs;
  std::string cons_out;
  int cons_height = 64;
  std::optional<double> cons_window, cons_sigma;
  consistency->add_option("--inputs", cons_inputs, "per-subject gaze CSVs (>= 3)")->required();
  consistency->add_option("--out", cons_out, "scores CSV")->required();
  consistency->add_option("--height", cons_height, "ERP height for density maps");
  consistency->add_option("--window-s", cons_window, "window length (default 2)");
  consistency->add_option("--sigma-deg", cons_sigma, "density sigma (default 1.0)");
  add_common(consistency, cons_opts);
  consistency->callback([&] {
    const cli::RunConfig cfg = cons_opts.resolve();
    std::vector<std::vector<gaze::Fixation>> subjects;
    gaze::IdtParams params;
    params.max_dispersion_deg = cfg.idt_dispersion_deg;
    params.min_duration_s = cfg.idt_min_dur_s;
    for (const auto& path : cons_inputs) {
      subjects.push_back(gaze::idt_fixations(gaze::read_gaze_csv(path), params));
    }
    const auto scores = gaze::inter_subject_consistency(
        subjects, cons_height, 2 * cons_height, cons_window.value_or(cfg.consistency_window_s),
        cons_sigma.value_or(cfg.density_sigma_deg));
    std::ofstream f(cons_out, std::ios::binary);
    if (!f) throw DataError("cannot open for writing: " + cons_out);
    f << "window_start_s,score,subjects\n";
    for (const auto& s : scores) {
      f << s.window_start << "," << s.score << "," << s.subjects_used << "\n";
    }
    std::cout << "wrote " << scores.size() << " windows to " << cons_out << "\n";
  });

  // ---- metrics ----
  auto* metrics = app.add_subcommand("metrics", "prediction dir + GT dir -> NSS/KLD/CC/SIM");
  CommonOpts met_opts;
  std::string met_pred, met_gt, met_fix, met_json, met_csv, met_video = "video";
  metrics->add_option("--pred-dir", met_pred, "predicted saliency .pfm dir")->required();
  metrics->add_option("--gt-sal-dir", met_gt, "ground-truth density .pfm dir")->required();
  metrics->add_option("--gt-fix-dir", met_fix, "ground-truth fixation .pfm dir (for NSS)");
  metrics->add_option("--out-json", met_json, "JSON report path");
  metrics->add_option("--out-csv", met_csv, "CSV report path");
  metrics->add_option("--video", met_video, "video id for the report rows");
  add_common(metrics, met_opts);
  metrics->callback([&] {
    met_opts.resolve();
    const auto pred_files = list_files(met_pred, {".pfm"});
    const auto gt_files = list_files(met_gt, {".pfm"});
    if (pred_files.size() != gt_files.size()) {
      throw DataError("prediction and ground-truth frame counts differ");
    }
    std::vector<std::string> fix_files;
    if (!met_fix.empty()) {
      fix_files = list_files(met_fix, {".pfm"});
      if (fix_files.size() != pred_files.size()) {
        throw DataError("fixation map frame count differs");
      }
    }
    json rows = json::array();
    std::ofstream csv;
    if (!met_csv.empty()) {
      csv.open(met_csv, std::ios::binary);
      csv << "video,frame,nss,kld,cc,sim\n";
    }
    double sum_nss = 0, sum_kld = 0, sum_cc = 0, sum_sim = 0;
    for (std::size_t k = 0; k < pred_files.size(); ++k) {
      geom::Raster pred = geom::read_pfm(pred_files[k]);
      geom::Raster gt = geom::read_pfm(gt_files[k]);
      sal::normalize_sum1(pred);
      sal::normalize_sum1(gt);
      json row;
      row["video"] = met_video;
      row["frame"] = k;
      double nss_v = std::numeric_limits<double>::quiet_NaN();
      if (!fix_files.empty()) {
        const geom::Raster fix = geom::read_pfm(fix_files[k]);
        nss_v = sal::nss(pred, fix);
        row["nss"] = nss_v;
      } else {
        row["nss"] = nullptr;
      }
      const double kld_v = sal::kld(gt, pred);
      const double cc_v = sal::cc(pred, gt);
      const double sim_v = sal::sim(pred, gt);
      row["kld"] = kld_v;
      row["cc"] = cc_v;
      row["sim"] = sim_v;
      rows.push_back(row);
      if (csv.is_open()) {
        csv << met_video << "," << k << "," << (fix_files.empty() ? "" : std::to_string(nss_v))
            << "," << kld_v << "," << cc_v << "," << sim_v << "\n";
      }
      if (!fix_files.empty()) sum_nss += nss_v;
      sum_kld += kld_v;
      sum_cc += cc_v;
      sum_sim += sim_v;
    }
    const double n = static_cast<double>(pred_files.size());
    json report;
    report["rows"] = rows;
    report["mean"] = {{"nss", fix_files.empty() ? json(nullptr) : json(sum_nss / n)},
                      {"kld", sum_kld / n},
                      {"cc", sum_cc / n},
                      {"sim", sum_sim / n}};
    if (!met_json.empty()) {
      std::ofstream jf(met_json);
      jf << report.dump(2) << "\n";
    } else {
      std::cout << report["mean"].dump() << "\n";
    }
  });

  // ---- audio ----
  auto* audio_cmd = app.add_subcommand("audio", "ambisonics utilities");
  audio_cmd->require_subcommand(1);
  auto* rotdec = audio_cmd->add_subcommand("rotate-decode", "4-ch WAV + layout -> per-viewport mono WAVs");
  CommonOpts rot_opts;
  std::string rot_in, rot_layout = "default", rot_outdir;
  bool rot_wxyz = false;
  rotdec->add_option("--input", rot_in, "4-channel B-format WAV")->required();
  rotdec->add_option("--layout", rot_layout, "layout name or JSON path");
  rotdec->add_option("--out-dir", rot_outdir, "output directory")->required();
  rotdec->add_flag("--wxyz", rot_wxyz, "interpret file channels as (W,X,Y,Z)");
  add_common(rotdec, rot_opts);
  rotdec->callback([&] {
    rot_opts.resolve();
    const audio::FoaClip foa = audio::read_wav_foa(rot_in, rot_wxyz);
    const geom::ViewportLayout layout =
        rot_layout == "default" || rot_layout == "shifted" || rot_layout == "wide-fov" ||
                rot_layout == "coarse"
            ? geom::layout_by_name(rot_layout)
            : geom::load_layout_file(rot_layout);
    const auto waves = audio::viewport_waveforms(foa, layout);
    fs::create_directories(rot_outdir);
    char name[64];
    for (std::size_t t = 0; t < waves.size(); ++t) {
      std::snprintf(name, sizeof(name), "viewport_%02zu.wav", t);
      audio::write_wav_mono((fs::path(rot_outdir) / name).string(), waves[t]);
    }
    std::cout << "wrote " << waves.size() << " mono WAVs to " << rot_outdir << "\n";
  });
  auto* melcmd = audio_cmd->add_subcommand("mel", "mono WAV -> log-mel matrix (PFM)");
  CommonOpts mel_opts;
  std::string mel_in, mel_out;
  melcmd->add_option("--input", mel_in, "mono WAV")->required();
  melcmd->add_option("--out", mel_out, "output .pfm (frames x 128)")->required();
  add_common(melcmd, mel_opts);
  melcmd->callback([&] {
    mel_opts.resolve();
    audio::MonoClip clip = audio::read_wav_mono(mel_in);
    audio::MelParams params;
    if (clip.sample_rate != params.sample_rate) clip = audio::resample(clip, params.sample_rate);
    const audio::MelSpec mel = audio::mel_spectrogram(clip, params);
    geom::Raster out(mel.frames, mel.n_mels, 1);
    out.data = mel.data;
    geom::write_pfm(mel_out, out);
    std::cout << "wrote " << mel.frames << "x" << mel.n_mels << " mel matrix to " << mel_out << "\n";
  });

  // ---- forward ----
  auto* forward = app.add_subcommand("forward", "frames (+ optional 4-ch WAV) -> saliency maps");
  CommonOpts fwd_opts;
  std::string fwd_frames, fwd_outdir, fwd_audio, fwd_ckpt, fwd_layout;
  bool fwd_png = false, fwd_wxyz = false;
  std::optional<double> fwd_scale;
  forward->add_option("--frames-dir", fwd_frames, "ERP frames (.png in [0,255] or .pfm in [0,1])")
      ->required();
  forward->add_option("--out-dir", fwd_outdir, "output directory")->required();
  forward->add_option("--audio", fwd_audio, "optional 4-channel B-format WAV");
  forward->add_flag("--wxyz", fwd_wxyz, "audio file channels are (W,X,Y,Z)");
  forward->add_option("--checkpoint", fwd_ckpt, "checkpoint basename (manifest + blob)");
  forward->add_option("--layout", fwd_layout, "override the config layout");
  forward->add_flag("--png", fwd_png, "also write PNG heatmaps");
  forward->add_option("--adapter-scale", fwd_scale, "override every adapter scale s");
  add_common(forward, fwd_opts);
  forward->callback([&] {
    const cli::RunConfig cfg = fwd_opts.resolve();
    fusion::AvSaliencyModel model = build_model(cfg, fwd_layout, fwd_ckpt);
    if (fwd_scale) {
      for (int b = 0; b < model.visual().config().depth; ++b) {
        ag::init::constant(model.params().at("adapter" + std::to_string(b) + ".s"), *fwd_scale);
      }
    }
    const auto files = list_files(fwd_frames, {".png", ".pfm"});
    std::vector<geom::ErpGrid> frames;
    for (const auto& f : files) frames.push_back(load_frame_unit_range(f));
    const int F = model.visual().config().frames;
    if (static_cast<int>(frames.size()) < F) {
      throw DataError("need at least " + std::to_string(F) + " frames");
    }
    std::optional<std::vector<std::vector<double>>> pooled;
    if (!fwd_audio.empty()) {
      pooled = model.pooled_audio(audio::read_wav_foa(fwd_audio, fwd_wxyz));
    }
    fs::create_directories(fwd_outdir);
    char name[64];
    int written = 0;
    for (std::size_t end = static_cast<std::size_t>(F); end <= frames.size(); ++end) {
      const std::vector<geom::ErpGrid> clip(frames.begin() + static_cast<std::ptrdiff_t>(end) - F,
                                            frames.begin() + static_cast<std::ptrdiff_t>(end));
      const auto patches = model.visual().project_clip(clip, cfg.jobs);
      const geom::ErpGrid map =
          model.visual().map_from_tensor(model.forward_from_patches(patches, pooled));
      std::snprintf(name, sizeof(name), "sal_%04zu.pfm", end - 1);
      geom::write_pfm((fs::path(fwd_outdir) / name).string(), map);
      if (fwd_png) {
        std::snprintf(name, sizeof(name), "sal_%04zu.png", end - 1);
        geom::write_png_autoscale((fs::path(fwd_outdir) / name).string(), map);
      }
      ++written;
    }
    std::cout << "wrote " << written << " saliency maps to " << fwd_outdir << "\n";
  });

  // ---- train-toy ----
  auto* traintoy = app.add_subcommand("train-toy", "synthetic-data overfit run");
  CommonOpts toy_opts;
  std::string toy_out, toy_visual_ckpt;
  std::optional<std::size_t> toy_steps;
  bool toy_adapters = false;
  std::optional<double> toy_lr;
  traintoy->add_option("--out", toy_out, "checkpoint basename to write")->required();
  traintoy->add_option("--steps", toy_steps, "training steps (default 2000, adapters 200)");
  traintoy->add_flag("--adapters-only", toy_adapters, "freeze the visual model, train adapters");
  traintoy->add_option("--visual-checkpoint", toy_visual_ckpt, "start from this visual checkpoint");
  traintoy->add_option("--lr", toy_lr, "adapter learning rate (default 2e-6)");
  add_common(traintoy, toy_opts);
  traintoy->callback([&] {
    const cli::RunConfig cfg = toy_opts.resolve();
    Rng rng(cfg.seed);
    if (toy_adapters) {
      fusion::AvSaliencyModel model(toy::toy_net_config(), toy::toy_av_config(), toy::toy_layout());
      model.init_params(rng);
      if (!toy_visual_ckpt.empty()) model.params().load_partial(toy_visual_ckpt);
      const auto report = toy::train_adapter_toy(model, toy_steps.value_or(200), rng, &std::cout,
                                                 toy_lr.value_or(2e-6));
      model.params().save(toy_out);
      model.save_adapters(toy_out + "_adapters");
      std::cout << "adapter mass " << report.mass_before << " -> " << report.mass_after
                << ", frozen intact: " << (report.frozen_intact ? "yes" : "no") << "\n";
    } else {
      net::SaliencyModel model(toy::toy_net_config(), toy::toy_layout());
      model.init_params(rng);
      if (!toy_visual_ckpt.empty()) model.params().load(toy_visual_ckpt);
      const auto data = toy::make_visual_dataset(model.config(), 2, rng);
      const auto report = toy::train_visual_toy(model, data, toy_steps.value_or(2000), &std::cout);
      model.params().save(toy_out);
      std::cout << "loss " << report.loss_first << " -> " << report.loss_last << "\n";
      for (std::size_t k = 0; k < report.kld_per_clip.size(); ++k) {
        std::cout << "clip " << k << ": kld " << report.kld_per_clip[k] << ", cc "
                  << report.cc_per_clip[k] << "\n";
      }
    }
    // The sidecar config reproduces the toy architecture so the checkpoint
    // can be fed straight back into `forward --config`.
    cli::RunConfig effective = cfg;
    effective.net = toy::toy_net_config();
    effective.av = toy::toy_av_config();
    effective.layout = "coarse";
    effective.save(toy_out + "_config.json");
    std::cout << "checkpoint written to " << toy_out << ".{json,bin}\n";
  });

  // ---- vqa ----
  auto* vqa_cmd = app.add_subcommand("vqa", "saliency-weighted PSNR / WS-PSNR");
  CommonOpts vqa_opts;
  std::string vqa_ref, vqa_imp, vqa_sal, vqa_json;
  vqa_cmd->add_option("--ref-dir", vqa_ref, "reference luma frames (.png/.pfm)")->required();
  vqa_cmd->add_option("--impaired-dir", vqa_imp, "impaired luma frames")->required();
  vqa_cmd->add_option("--saliency-dir", vqa_sal, "per-frame saliency maps (.pfm)")->required();
  vqa_cmd->add_option("--out-json", vqa_json, "JSON report path");
  add_common(vqa_cmd, vqa_opts);
  vqa_cmd->callback([&] {
    vqa_opts.resolve();
    auto load_luma = [](const std::string& dir) {
      std::vector<geom::ErpGrid> out;
      for (const auto& f : list_files(dir, {".png", ".pfm"})) {
        geom::ErpGrid g = geom::read_erp_image(f);
        if (g.channels == 3) {  // BT.601 luma from RGB
          geom::ErpGrid y(g.height, 1);
          for (int i = 0; i < g.height; ++i) {
            for (int j = 0; j < g.width; ++j) {
              y.at(0, i, j) =
                  0.299 * g.at(0, i, j) + 0.587 * g.at(1, i, j) + 0.114 * g.at(2, i, j);
            }
          }
          out.push_back(std::move(y));
        } else {
          out.push_back(std::move(g));
        }
      }
      return out;
    };
    const auto ref = load_luma(vqa_ref);
    const auto imp = load_luma(vqa_imp);
    std::vector<geom::ErpGrid> sal;
    for (const auto& f : list_files(vqa_sal, {".pfm"})) {
      sal.push_back(geom::read_erp_pfm(f));
    }
    const vqa::VideoScores scores = vqa::score_video(ref, imp, sal);
    json rows = json::array();
    for (std::size_t k = 0; k < scores.per_frame_wpsnr.size(); ++k) {
      rows.push_back({{"frame", k},
                      {"wpsnr", vqa::psnr_to_string(scores.per_frame_wpsnr[k])},
                      {"wwspsnr", vqa::psnr_to_string(scores.per_frame_wwspsnr[k])}});
    }
    json report;
    report["frames"] = rows;
    report["aggregate"] = {{"wpsnr", vqa::psnr_to_string(scores.mean_wpsnr)},
                           {"wwspsnr", vqa::psnr_to_string(scores.mean_wwspsnr)}};
    if (!vqa_json.empty()) {
      std::ofstream jf(vqa_json);
      jf << report.dump(2) << "\n";
    }
    std::cout << report["aggregate"].dump() << "\n";
  });

  // ---- selftest ----
  auto* selftest = app.add_subcommand("selftest", "run the invariant/oracle suites");
  CommonOpts self_opts;
  add_common(selftest, self_opts);
  selftest->callback([&] {
    const cli::RunConfig cfg = self_opts.resolve();
    const auto results = check::run_fast_checks(cfg.jobs);
    int failures = 0;
    for (const auto& r : results) {
      std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << "  " << r.detail << "\n";
      failures += r.pass ? 0 : 1;
    }
    if (failures > 0) {
      throw DataError(std::to_string(failures) + " self-check(s) failed");
    }
    std::cout << "all " << results.size() << " self-checks passed\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage errors -> 1
  }
  return 0;
}

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
