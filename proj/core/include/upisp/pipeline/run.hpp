#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "upisp/imgcore/planes.hpp"
#include "upisp/imgcore/raw.hpp"
#include "upisp/mapper/heads.hpp"
#include "upisp/pipeline/config.hpp"
#include "upisp/pipeline/dataset.hpp"

namespace upisp::pipeline {

enum class Stage { kPreprocess, kStitch, kMatchImages, kBuildPairs, kTrain, kInfer, kEval, kPreview };

inline constexpr std::array kAllStages = {Stage::kPreprocess, Stage::kStitch, Stage::kMatchImages,
                                          Stage::kBuildPairs, Stage::kTrain,  Stage::kInfer,
                                          Stage::kEval,       Stage::kPreview};

std::string_view stage_name(Stage stage) noexcept;
Stage stage_from_name(std::string_view name);

// Files inside a run directory.
struct RunLayout {
  std::filesystem::path root;

  std::filesystem::path config_snapshot() const { return root / "config.json"; }
  std::filesystem::path lock_file() const { return root / ".lock"; }
  std::filesystem::path report(Stage s) const;
  std::filesystem::path source_manifest() const { return root / "preprocess" / "source_manifest.json"; }
  std::filesystem::path target_manifest() const { return root / "preprocess" / "target_manifest.json"; }
  std::filesystem::path preprocessed(const PatchRecord& r) const;
  std::filesystem::path stitched_source_manifest() const { return root / "stitch" / "source_manifest.json"; }
  std::filesystem::path stitched_target_manifest() const { return root / "stitch" / "target_manifest.json"; }
  std::filesystem::path layouts() const { return root / "stitch" / "layouts.json"; }
  std::filesystem::path stitched(const std::string& domain, const std::string& parent) const;
  std::filesystem::path embeddings(const std::string& which) const;
  std::filesystem::path image_plan() const { return root / "match" / "image_plan.json"; }
  std::filesystem::path pair_graph() const { return root / "pairs" / "pair_graph.jsonl"; }
  std::filesystem::path checkpoint() const { return root / "train" / "head.ckpt"; }
  std::filesystem::path trace() const { return root / "train" / "trace.json"; }
  std::filesystem::path prediction(const PatchRecord& r) const;
  std::filesystem::path metrics_json() const { return root / "eval" / "metrics.json"; }
  std::filesystem::path metrics_csv() const { return root / "eval" / "metrics.csv"; }
  std::filesystem::path preview(const std::string& parent) const;
};

struct StageOutcome {
  Stage stage;
  bool skipped = false;
  std::filesystem::path report;
};

struct RunSummary {
  std::filesystem::path run_dir;
  std::vector<StageOutcome> stages;
};

struct RunOptions {
  bool force = false;  // ignore up-to-date reports
  std::function<void(const std::string&)> log;
};

// Exclusive ownership of a run directory for the lifetime of the object.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

// Validates the config and both datasets, snapshots the config, takes the
// lock and runs every stage in order. A stage is skipped when its report
// fingerprint (stage config plus input file hashes) and output hashes are
// unchanged. A failing stage writes a "failed" report and the error names it.
RunSummary run_pipeline(const RunConfig& cfg, const RunOptions& opts = {});

// Runs one stage; upstream stages must have completed.
StageOutcome run_stage(const RunConfig& cfg, Stage stage, const RunOptions& opts = {});

RawPatch load_raw(const RunConfig& cfg, const std::filesystem::path& path);

// "ccm", "lut3d", "cnn", or several of them joined by '+', applied left to right.
std::unique_ptr<mapper::ColorHead> make_head_by_name(const std::string& name, int lut_lattice,
                                                     int hidden, std::uint64_t seed);

}  // namespace upisp::pipeline
