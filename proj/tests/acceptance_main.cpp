// Acceptance suite: runs every criterion at its pinned tolerance and prints
// one PASS/FAIL line per criterion. Exit code is the number of failures.
//
// Usage: acceptance [path-to-omnisal-binary]
// The binary path is needed for the CLI determinism criterion; it defaults to
// ../tools/omnisal relative to the working directory.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "omnisal/check/selfcheck.hpp"
#include "omnisal/geometry/image_io.hpp"

namespace fs = std::filesystem;
using namespace omnisal;

namespace {

int failures = 0;

void report(int index, const check::CheckResult& r) {
  std::printf("[%s] %2d. %-34s %s(%.2f s)\n", r.pass ? "PASS" : "FAIL", index, r.name.c_str(),
              r.detail.c_str(), r.seconds);
  std::fflush(stdout);
  if (!r.pass) ++failures;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

int run_cmd(const std::string& cmd) { return std::system(cmd.c_str()); }

check::CheckResult check_cli_determinism(const std::string& binary) {
  check::CheckResult result;
  result.name = "CLI determinism (selftest, forward)";
  const fs::path work = fs::path("acceptance_tmp");
  fs::remove_all(work);
  fs::create_directories(work / "frames");

  // Two synthetic frames.
  for (int f = 0; f < 2; ++f) {
    geom::ErpGrid g(32, 3);
    for (int i = 0; i < g.height; ++i) {
      for (int j = 0; j < g.width; ++j) {
        const auto c = g.pixel_center(i, j);
        for (int ch = 0; ch < 3; ++ch) {
          g.at(ch, i, j) = 0.4 + 0.25 * std::cos(c.lat) * std::cos(c.lon + 0.3 * ch + 0.1 * f);
        }
      }
    }
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%02d.pfm", f);
    geom::write_pfm((work / "frames" / name).string(), g);
  }
  {
    std::ofstream cfg(work / "run.json");
    cfg << R"({"seed": 3, "layout": "coarse",
      "net": {"frames": 2, "token_dim": 8, "heads": 2, "depth": 1, "patch": 16,
              "decoder_out": 16, "erp_height": 32, "encoder_channels": [4, 8]},
      "av": {"audio_dim": 16, "bottleneck": 4, "mlp_hidden": 16}})";
  }

  std::ostringstream detail;
  bool ok = true;
  const std::string base = binary + " ";

  // selftest twice, bitwise-identical stdout.
  ok = ok && run_cmd(base + "selftest > " + (work / "self1.txt").string() + " 2>&1") == 0;
  ok = ok && run_cmd(base + "selftest > " + (work / "self2.txt").string() + " 2>&1") == 0;
  if (!ok) detail << "[selftest exited nonzero] ";
  if (ok && read_file((work / "self1.txt").string()) != read_file((work / "self2.txt").string())) {
    ok = false;
    detail << "[selftest output differs between runs] ";
  }

  // forward: two repeats and jobs 1 vs 4, all bitwise-identical.
  const std::string fwd = base + "forward --frames-dir " + (work / "frames").string() +
                          " --config " + (work / "run.json").string() + " --out-dir ";
  auto run_forward = [&](const std::string& out, const std::string& extra) {
    return run_cmd(fwd + (work / out).string() + " " + extra + " > /dev/null 2>&1") == 0;
  };
  bool fok = run_forward("f1", "--jobs 1") && run_forward("f2", "--jobs 1") &&
             run_forward("f4", "--jobs 4");
  if (!fok) {
    ok = false;
    detail << "[forward exited nonzero] ";
  } else {
    const std::string a = read_file((work / "f1" / "sal_0001.pfm").string());
    const std::string b = read_file((work / "f2" / "sal_0001.pfm").string());
    const std::string d = read_file((work / "f4" / "sal_0001.pfm").string());
    if (a.empty() || a != b) {
      ok = false;
      detail << "[forward output differs between runs] ";
    }
    if (a != d) {
      ok = false;
      detail << "[forward output differs between --jobs 1 and --jobs 4] ";
    }
  }
  fs::remove_all(work);
  result.pass = ok;
  result.detail = detail.str();
  if (ok) result.detail = "selftest x2 and forward x3 byte-identical";
  return result;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string binary = argc > 1 ? argv[1] : "../tools/omnisal";
  const int jobs = 4;

  report(1, check::check_geometry_roundtrip(jobs));
  report(2, check::check_overlap_mask(jobs));
  report(3, check::check_attention());
  report(4, check::check_differentiability());
  report(5, check::check_metric_identities());
  report(6, check::check_ambisonics());
  report(7, check::check_no_audio_degradation());
  report(8, check::check_toy_overfit(nullptr));
  report(9, check::check_adapter_tuning(nullptr));
  report(10, check::check_idt());
  report(11, check::check_vqa());
  report(12, check_cli_determinism(binary));

  if (failures == 0) {
    std::printf("acceptance: all 12 criteria passed\n");
  } else {
    std::printf("acceptance: %d criteria FAILED\n", failures);
  }
  return failures;
}
