#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "upisp/errors.hpp"
#include "upisp/imgcore/image_io.hpp"
#include "upisp/mapper/checkpoint.hpp"
#include "upisp/pipeline/config.hpp"
#include "upisp/pipeline/dataset.hpp"
#include "upisp/pipeline/run.hpp"
#include "upisp/quality/metrics.hpp"
#include "upisp/rawproc/rawproc.hpp"
#include "upisp/stitcher/stitcher.hpp"

namespace fs = std::filesystem;
using namespace upisp;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

struct StageArgs {
  std::string config;
  std::vector<std::string> overrides;
  bool force = false;
};

void add_stage_options(CLI::App* cmd, StageArgs& args, bool required) {
  auto* opt = cmd->add_option("-c,--config", args.config, "Run config (.toml or .json)");
  if (required) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--set", args.overrides, "Override a config value, e.g. --set train.batch=8");
  cmd->add_flag("--force", args.force, "Re-run even when outputs are up to date");
}

pipeline::RunOptions run_options(const StageArgs& args, bool quiet) {
  pipeline::RunOptions o;
  o.force = args.force;
  if (!quiet) o.log = [](const std::string& m) { std::cerr << m << '\n'; };
  return o;
}

int run_stage_command(const StageArgs& args, pipeline::Stage stage, unsigned workers, bool quiet) {
  pipeline::RunConfig cfg = pipeline::load_run_config(args.config, args.overrides);
  if (workers > 0) cfg.workers = cfg.train.workers = workers;
  const auto out = pipeline::run_stage(cfg, stage, run_options(args, quiet));
  std::cout << out.report.string() << '\n';
  return 0;
}

std::vector<fs::path> sorted_files(const fs::path& dir, const std::vector<std::string>& exts) {
  const pipeline::Manifest m = pipeline::scan_dataset(dir, exts);
  if (m.parents.size() != 1) {
    throw ConfigError(dir.string() + " must hold the patches of exactly one image");
  }
  std::vector<fs::path> files;
  for (const auto& r : m.records) files.push_back(r.file);
  return files;
}

struct StitchArgs {
  std::string input, output, report;
  int border = stitch::kDefaultBorder;
  int raw_height = 0, raw_width = 0;
};

int stitch_command(const StitchArgs& a, unsigned workers) {
  if (a.output.empty()) throw ConfigError("stitch: --output is required");
  std::vector<fs::path> files = pipeline::scan_dataset(a.input, {".raw"}).records.empty()
                                    ? sorted_files(a.input, {".png", ".jpg", ".jpeg"})
                                    : sorted_files(a.input, {".raw"});
  if (files.empty()) throw ConfigError("stitch: no patches in " + a.input);
  std::vector<RgbImage> tiles;
  std::vector<ScalarMap> maps;
  const rawproc::RawProcConfig raw_cfg{};
  for (const auto& f : files) {
    if (f.extension() == ".raw") {
      const RawPatch raw = a.raw_height > 0 ? read_raw_file(f, a.raw_height, a.raw_width) : read_raw_file(f);
      maps.push_back(stitch::score_map(raw, raw_cfg));
      tiles.push_back(rawproc::preprocess(raw, raw_cfg));
    } else {
      tiles.push_back(read_image(f));
      maps.push_back(stitch::score_map(tiles.back()));
    }
  }
  const auto res = stitch::infer_layout(maps, a.border, workers);
  write_png(stitch::assemble<3, RgbTag>(tiles, res.best.rows, res.best.cols), a.output);
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : res.candidates) cands.push_back({{"R", c.rows}, {"C", c.cols}, {"score", c.score}});
  const nlohmann::json report = {{"N", files.size()},
                                 {"R", res.best.rows},
                                 {"C", res.best.cols},
                                 {"score", res.best.score},
                                 {"all_candidate_scores", cands}};
  if (!a.report.empty()) {
    std::ofstream(a.report) << report.dump(2) << '\n';
  }
  std::cout << report.dump() << '\n';
  return 0;
}

struct InferArgs {
  std::string checkpoint, input, output;
  int raw_height = 0, raw_width = 0;
};

int infer_command(const InferArgs& a, unsigned workers) {
  if (a.input.empty() || a.output.empty()) throw ConfigError("infer: --input and --output are required");
  const auto ck = mapper::load_checkpoint(a.checkpoint);
  const pipeline::Manifest m = pipeline::scan_dataset(a.input, {".raw"});
  if (m.records.empty()) throw ConfigError("infer: no .raw patches in " + a.input);
  std::vector<RawPatch> raws;
  for (const auto& r : m.records) {
    raws.push_back(a.raw_height > 0 ? read_raw_file(r.file, a.raw_height, a.raw_width) : read_raw_file(r.file));
  }
  const auto preds = mapper::infer(*ck.head, raws, rawproc::RawProcConfig{}, workers);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const fs::path out = fs::path(a.output) / (m.records[i].id + ".png");
    fs::create_directories(out.parent_path());
    write_png(preds[i], out);
  }
  std::cout << preds.size() << " predictions written to " << a.output << '\n';
  return 0;
}

struct EvalArgs {
  std::string pred, ref, out, csv;
};

int eval_command(const EvalArgs& a, unsigned workers) {
  if (a.ref.empty() || a.out.empty()) throw ConfigError("eval: --pred, --ref and --out are required");
  const std::vector<std::string> exts = {".png", ".jpg", ".jpeg"};
  const pipeline::Manifest preds = pipeline::scan_dataset(a.pred, exts);
  const pipeline::Manifest refs = pipeline::scan_dataset(a.ref, exts);
  std::vector<std::string> names;
  std::vector<RgbImage> p, r;
  for (const auto& rec : preds.records) {
    const auto it = std::find_if(refs.records.begin(), refs.records.end(),
                                 [&](const auto& x) { return x.id == rec.id; });
    if (it == refs.records.end()) throw ConfigError("eval: no reference for " + rec.id);
    names.push_back(rec.id);
    p.push_back(read_image(rec.file));
    r.push_back(read_image(it->file));
  }
  const auto report = quality::evaluate(names, p, r, workers);
  quality::write_report_json(report, a.out);
  if (!a.csv.empty()) quality::write_report_csv(report, a.csv);
  std::cout << report.to_json()["mean"].dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"upisp: unpaired RAW-to-RGB colour mapping with optimal-transport pseudo-pairs"};
  app.require_subcommand(1);
  unsigned workers = 0;
  bool quiet = false;
  app.add_option("-j,--workers", workers, "Worker threads (overrides the config)");
  app.add_flag("-q,--quiet", quiet, "Only print results");

  StageArgs run_args;
  auto* run = app.add_subcommand("run", "Run every pipeline stage");
  add_stage_options(run, run_args, true);

  struct Named {
    pipeline::Stage stage;
    const char* help;
    StageArgs args;
    CLI::App* cmd = nullptr;
  };
  std::vector<Named> stages = {
      {pipeline::Stage::kPreprocess, "Pre-process source RAW patches", {}},
      {pipeline::Stage::kMatchImages, "Image-level fused Gromov-Wasserstein matching", {}},
      {pipeline::Stage::kBuildPairs, "Build the patch pseudo-pair graph", {}},
      {pipeline::Stage::kTrain, "Train the colour-mapping head", {}},
      {pipeline::Stage::kPreview, "Write input | prediction montages", {}},
  };
  for (auto& s : stages) {
    s.cmd = app.add_subcommand(std::string(pipeline::stage_name(s.stage)), s.help);
    add_stage_options(s.cmd, s.args, true);
  }

  StageArgs stitch_stage, infer_stage, eval_stage;
  StitchArgs stitch_args;
  auto* stitch_cmd = app.add_subcommand("stitch", "Infer the patch grid of one image and assemble it");
  add_stage_options(stitch_cmd, stitch_stage, false);
  stitch_cmd->add_option("--input", stitch_args.input, "Directory with the patches of one image");
  stitch_cmd->add_option("--output", stitch_args.output, "Assembled PNG");
  stitch_cmd->add_option("--report", stitch_args.report, "Layout report JSON");
  stitch_cmd->add_option("--border", stitch_args.border, "Seam border width")->check(CLI::PositiveNumber);
  stitch_cmd->add_option("--raw-height", stitch_args.raw_height, "RAW patch height (default: sidecar)");
  stitch_cmd->add_option("--raw-width", stitch_args.raw_width, "RAW patch width (default: sidecar)");

  InferArgs infer_args;
  auto* infer_cmd = app.add_subcommand("infer", "Apply a trained head to RAW patches");
  add_stage_options(infer_cmd, infer_stage, false);
  infer_cmd->add_option("--checkpoint", infer_args.checkpoint, "Head checkpoint");
  infer_cmd->add_option("--input", infer_args.input, "Directory of RAW patches");
  infer_cmd->add_option("--output", infer_args.output, "Output directory for PNGs");
  infer_cmd->add_option("--raw-height", infer_args.raw_height, "RAW patch height (default: sidecar)");
  infer_cmd->add_option("--raw-width", infer_args.raw_width, "RAW patch width (default: sidecar)");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "PSNR / SSIM / CIEDE2000 against references");
  add_stage_options(eval_cmd, eval_stage, false);
  eval_cmd->add_option("--pred", eval_args.pred, "Prediction directory");
  eval_cmd->add_option("--ref", eval_args.ref, "Reference directory");
  eval_cmd->add_option("--out", eval_args.out, "Metric report JSON");
  eval_cmd->add_option("--csv", eval_args.csv, "Optional per-image CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (run->parsed()) {
      pipeline::RunConfig cfg = pipeline::load_run_config(run_args.config, run_args.overrides);
      if (workers > 0) cfg.workers = cfg.train.workers = workers;
      const auto summary = pipeline::run_pipeline(cfg, run_options(run_args, quiet));
      nlohmann::json out = {{"run_dir", summary.run_dir.string()}, {"stages", nlohmann::json::array()}};
      for (const auto& s : summary.stages) {
        out["stages"].push_back({{"stage", pipeline::stage_name(s.stage)}, {"skipped", s.skipped}});
      }
      std::cout << out.dump() << '\n';
      return 0;
    }
    for (const auto& s : stages) {
      if (s.cmd->parsed()) return run_stage_command(s.args, s.stage, workers, quiet);
    }
    const unsigned w = workers > 0 ? workers : 1;
    if (stitch_cmd->parsed()) {
      if (!stitch_stage.config.empty()) return run_stage_command(stitch_stage, pipeline::Stage::kStitch, workers, quiet);
      if (stitch_args.input.empty()) throw ConfigError("stitch: give --config or --input/--output");
      return stitch_command(stitch_args, w);
    }
    if (infer_cmd->parsed()) {
      if (!infer_stage.config.empty()) return run_stage_command(infer_stage, pipeline::Stage::kInfer, workers, quiet);
      if (infer_args.checkpoint.empty()) throw ConfigError("infer: give --config or --checkpoint/--input/--output");
      return infer_command(infer_args, w);
    }
    if (eval_cmd->parsed()) {
      if (!eval_stage.config.empty()) return run_stage_command(eval_stage, pipeline::Stage::kEval, workers, quiet);
      if (eval_args.pred.empty()) throw ConfigError("eval: give --config or --pred/--ref/--out");
      return eval_command(eval_args, w);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}
