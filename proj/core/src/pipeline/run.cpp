#include "upisp/pipeline/run.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <unistd.h>

#include "upisp/errors.hpp"
#include "upisp/imgcore/containers.hpp"
#include "upisp/imgcore/image_io.hpp"
#include "upisp/mapper/checkpoint.hpp"
#include "upisp/mapper/train.hpp"
#include "upisp/objective/losses.hpp"
#include "upisp/otmatch/costs.hpp"
#include "upisp/otmatch/fgw.hpp"
#include "upisp/otmatch/pair_graph.hpp"
#include "upisp/pipeline/hash.hpp"
#include "upisp/pipeline/preview.hpp"
#include "upisp/quality/metrics.hpp"
#include "upisp/stitcher/stitcher.hpp"
#include "upisp/util/parallel.hpp"

namespace upisp::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kRawExtensions = {".raw"};
const std::vector<std::string> kImageExtensions = {".png", ".jpg", ".jpeg"};

void write_json(const json& j, const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

struct Ctx {
  const RunConfig& cfg;
  RunLayout layout;
  const RunOptions& opts;

  void log(const std::string& msg) const {
    if (opts.log) opts.log(msg);
  }
  std::string rel(const fs::path& p) const {
    const fs::path r = p.lexically_normal().lexically_relative(layout.root.lexically_normal());
    if (r.empty() || *r.begin() == "..") return fs::absolute(p).lexically_normal().string();
    return r.generic_string();
  }
  fs::path abs(const std::string& name) const {
    const fs::path p(name);
    return p.is_absolute() ? p : layout.root / p;
  }
};

struct StageWork {
  std::vector<fs::path> outputs;
  json details = json::object();
};

std::string hash_or_missing(const fs::path& p) {
  return fs::is_regular_file(p) ? sha256_file(p) : std::string("missing");
}

// Upstream stages whose outputs feed a stage.
std::vector<Stage> upstream_of(Stage s) {
  switch (s) {
    case Stage::kPreprocess: return {};
    case Stage::kStitch: return {Stage::kPreprocess};
    case Stage::kMatchImages: return {Stage::kStitch};
    case Stage::kBuildPairs: return {Stage::kMatchImages};
    case Stage::kTrain: return {Stage::kStitch, Stage::kBuildPairs};
    case Stage::kInfer: return {Stage::kStitch, Stage::kTrain};
    case Stage::kEval: return {Stage::kStitch, Stage::kInfer};
    case Stage::kPreview: return {Stage::kPreprocess, Stage::kStitch, Stage::kInfer};
  }
  return {};
}

json config_subset(const RunConfig& cfg, Stage s) {
  const json all = cfg.to_json();
  switch (s) {
    case Stage::kPreprocess: return {{"raw", all["raw"]}};
    case Stage::kStitch: return {{"raw", all["raw"]}, {"stitch", all["stitch"]}};
    case Stage::kMatchImages:
    case Stage::kBuildPairs: return {{"match", all["match"]}};
    case Stage::kTrain: return {{"raw", all["raw"]}, {"train", all["train"]}, {"seed", cfg.seed}};
    case Stage::kInfer: return {{"raw", all["raw"]}};
    case Stage::kEval: return {{"reference_dir", all["paths"]["reference_dir"]}};
    case Stage::kPreview: return json::object();
  }
  return json::object();
}

void add_tree_inputs(const fs::path& root, const std::vector<std::string>& exts, bool sidecars,
                     std::vector<fs::path>& out) {
  const Manifest m = scan_dataset(root, exts);
  for (const auto& r : m.records) {
    out.push_back(r.file);
    if (sidecars) {
      fs::path side = r.file;
      side.replace_extension(".json");
      if (fs::is_regular_file(side)) out.push_back(side);
    }
  }
}

std::vector<fs::path> extra_inputs(const Ctx& ctx, Stage s) {
  std::vector<fs::path> in;
  const RunConfig& cfg = ctx.cfg;
  switch (s) {
    case Stage::kPreprocess:
      add_tree_inputs(cfg.source_dir, kRawExtensions, true, in);
      add_tree_inputs(cfg.target_dir, kImageExtensions, false, in);
      break;
    case Stage::kMatchImages:
      for (const auto* p : {&cfg.source_image_embeddings, &cfg.target_image_embeddings,
                            &cfg.source_patch_embeddings, &cfg.target_patch_embeddings}) {
        if (!p->empty()) in.push_back(*p);
      }
      break;
    case Stage::kEval:
      if (!cfg.reference_dir.empty()) add_tree_inputs(cfg.reference_dir, kImageExtensions, false, in);
      break;
    default:
      break;
  }
  return in;
}

// ---------------------------------------------------------------------------
// Stage bodies

StageWork do_preprocess(const Ctx& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const Manifest src = scan_dataset(cfg.source_dir, kRawExtensions);
  const Manifest tgt = scan_dataset(cfg.target_dir, kImageExtensions);
  StageWork w;
  for (const auto& r : src.records) fs::create_directories(ctx.layout.preprocessed(r).parent_path());
  parallel_for(
      src.records.size(),
      [&](std::size_t i) {
        const auto& r = src.records[i];
        write_png(rawproc::preprocess(load_raw(cfg, r.file), cfg.raw), ctx.layout.preprocessed(r));
      },
      cfg.workers);
  for (const auto& r : src.records) w.outputs.push_back(ctx.layout.preprocessed(r));
  write_manifest(src, ctx.layout.source_manifest());
  write_manifest(tgt, ctx.layout.target_manifest());
  w.outputs.push_back(ctx.layout.source_manifest());
  w.outputs.push_back(ctx.layout.target_manifest());
  w.details = {{"source_patches", src.records.size()},
               {"source_images", src.parents.size()},
               {"target_patches", tgt.records.size()},
               {"target_images", tgt.parents.size()}};
  ctx.log("preprocessed " + std::to_string(src.records.size()) + " source patches");
  return w;
}

json layout_json(const stitch::LayoutResult& res, std::size_t n) {
  json cands = json::array();
  for (const auto& c : res.candidates) cands.push_back({{"R", c.rows}, {"C", c.cols}, {"score", c.score}});
  return {{"N", n}, {"R", res.best.rows}, {"C", res.best.cols}, {"score", res.best.score},
          {"all_candidate_scores", cands}};
}

StageWork do_stitch(const Ctx& ctx) {
  const RunConfig& cfg = ctx.cfg;
  StageWork w;
  json layouts = {{"source", json::object()}, {"target", json::object()}};
  for (const std::string domain : {"source", "target"}) {
    const bool is_source = domain == "source";
    Manifest m = read_manifest(is_source ? ctx.layout.source_manifest() : ctx.layout.target_manifest());
    for (const auto& parent : m.parents) {
      const auto idx = m.records_of(parent);
      std::vector<RgbImage> tiles(idx.size());
      std::vector<ScalarMap> maps(idx.size());
      parallel_for(
          idx.size(),
          [&](std::size_t k) {
            const auto& r = m.records[idx[k]];
            if (is_source) {
              maps[k] = stitch::score_map(load_raw(cfg, r.file), cfg.raw);
              tiles[k] = read_png(ctx.layout.preprocessed(r));
            } else {
              tiles[k] = read_image(r.file);
              maps[k] = stitch::score_map(tiles[k]);
            }
          },
          cfg.workers);
      const auto res = stitch::infer_layout(maps, cfg.stitch_border, cfg.workers);
      for (std::size_t k = 0; k < idx.size(); ++k) {
        m.records[idx[k]].row = static_cast<int>(k) / res.best.cols;
        m.records[idx[k]].col = static_cast<int>(k) % res.best.cols;
      }
      const fs::path out = ctx.layout.stitched(domain, parent);
      fs::create_directories(out.parent_path());
      write_png(stitch::assemble<3, RgbTag>(tiles, res.best.rows, res.best.cols), out);
      w.outputs.push_back(out);
      layouts[domain][parent] = layout_json(res, idx.size());
      ctx.log("stitched " + domain + " image " + parent + " as " + std::to_string(res.best.rows) + "x" +
              std::to_string(res.best.cols));
    }
    const fs::path mp = is_source ? ctx.layout.stitched_source_manifest() : ctx.layout.stitched_target_manifest();
    write_manifest(m, mp);
    w.outputs.push_back(mp);
  }
  write_json(layouts, ctx.layout.layouts());
  w.outputs.push_back(ctx.layout.layouts());
  w.details = layouts;
  return w;
}

EmbeddingSet ordered(const EmbeddingSet& set, const std::vector<std::string>& names, const std::string& what) {
  EmbeddingSet out(set.dim());
  for (const auto& n : names) {
    const auto i = set.find(n);
    if (!i) throw ConfigError(what + " has no record named '" + n + "'");
    out.add(n, set[*i].values);
  }
  return out;
}

EmbeddingSet descriptors(const std::vector<std::string>& names, const std::vector<fs::path>& files,
                         const RunConfig& cfg) {
  std::vector<std::vector<float>> values(names.size());
  parallel_for(
      names.size(),
      [&](std::size_t i) { values[i] = objective::histogram_descriptor(read_image(files[i]), cfg.train.hist); },
      cfg.workers);
  EmbeddingSet out(values.empty() ? 0 : static_cast<std::uint32_t>(values[0].size()));
  for (std::size_t i = 0; i < names.size(); ++i) out.add(names[i], std::move(values[i]));
  return out;
}

StageWork do_match(const Ctx& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const Manifest src = read_manifest(ctx.layout.stitched_source_manifest());
  const Manifest tgt = read_manifest(ctx.layout.stitched_target_manifest());
  StageWork w;
  json sources = json::object();

  auto save = [&](const EmbeddingSet& set, const std::string& which) {
    const fs::path out = ctx.layout.embeddings(which);
    fs::create_directories(out.parent_path());
    write_embeddings(set, out);
    w.outputs.push_back(out);
  };
  // Images: ingested embedding and/or histogram block, each L2-normalized.
  auto image_set = [&](const fs::path& file, const std::vector<std::string>& names,
                       const std::vector<fs::path>& images, const std::string& which) {
    std::vector<EmbeddingSet> blocks;
    json used = json::array();
    if (!file.empty()) {
      blocks.push_back(ordered(read_embeddings(file), names, file.string()));
      used.push_back(file.string());
    }
    if (file.empty() || cfg.image_histogram) {
      blocks.push_back(descriptors(names, images, cfg));
      used.push_back("histogram");
    }
    sources[which] = used;
    EmbeddingSet set = ot::compose_descriptors(blocks);
    save(set, which);
    return set;
  };
  // Patches: ingested embedding only, histogram when none is given.
  auto patch_set = [&](const fs::path& file, const std::vector<std::string>& names,
                       const std::vector<fs::path>& images, const std::string& which) {
    EmbeddingSet set = file.empty() ? descriptors(names, images, cfg)
                                    : ordered(read_embeddings(file), names, file.string());
    sources[which] = file.empty() ? std::string("histogram") : file.string();
    save(set, which);
  };

  std::vector<fs::path> src_images, tgt_images, src_patches, tgt_patches;
  for (const auto& p : src.parents) src_images.push_back(ctx.layout.stitched("source", p));
  for (const auto& p : tgt.parents) tgt_images.push_back(ctx.layout.stitched("target", p));
  for (const auto& r : src.records) src_patches.push_back(ctx.layout.preprocessed(r));
  for (const auto& r : tgt.records) tgt_patches.push_back(r.file);

  const EmbeddingSet si = image_set(cfg.source_image_embeddings, src.parents, src_images, "source_images");
  const EmbeddingSet ti = image_set(cfg.target_image_embeddings, tgt.parents, tgt_images, "target_images");
  patch_set(cfg.source_patch_embeddings, src.ids(), src_patches, "source_patches");
  patch_set(cfg.target_patch_embeddings, tgt.ids(), tgt_patches, "target_patches");

  const ot::CostMatrices costs = ot::build_costs(si, ti, cfg.alpha);
  const ot::TransportPlan plan =
      ot::fgw_match(costs, ot::uniform_marginal(costs.cross.rows()), ot::uniform_marginal(costs.cross.cols()),
                    cfg.sinkhorn, cfg.outer_iters);
  json rows = json::array();
  for (Eigen::Index i = 0; i < plan.plan.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < plan.plan.cols(); ++j) row.push_back(plan.plan(i, j));
    rows.push_back(row);
  }
  write_json({{"source_names", src.parents},
              {"target_names", tgt.parents},
              {"plan", rows},
              {"converged", plan.converged},
              {"iterations", plan.iterations},
              {"violation", plan.violation}},
             ctx.layout.image_plan());
  w.outputs.push_back(ctx.layout.image_plan());
  w.details = {{"descriptors", sources}, {"converged", plan.converged}, {"violation", plan.violation}};
  if (!plan.converged) ctx.log("warning: image-level transport did not reach the tolerance");
  return w;
}

StageWork do_build_pairs(const Ctx& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const Manifest src = read_manifest(ctx.layout.stitched_source_manifest());
  const Manifest tgt = read_manifest(ctx.layout.stitched_target_manifest());
  const json plan_json = read_json(ctx.layout.image_plan());
  const auto& rows = plan_json.at("plan");
  ot::Matrix plan(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(rows.empty() ? 0 : rows[0].size()));
  for (Eigen::Index i = 0; i < plan.rows(); ++i) {
    for (Eigen::Index j = 0; j < plan.cols(); ++j) plan(i, j) = rows[i][j].get<double>();
  }
  const EmbeddingSet sp = read_embeddings(ctx.layout.embeddings("source_patches"));
  const EmbeddingSet tp = read_embeddings(ctx.layout.embeddings("target_patches"));
  const auto src_parent = src.parent_indices();
  const auto tgt_parent = tgt.parent_indices();
  ot::PairGraphConfig pc;
  pc.top_images = cfg.top_images;
  pc.top_patches = cfg.top_patches;
  pc.sinkhorn = cfg.sinkhorn;
  pc.workers = cfg.workers;
  const ot::PairGraph graph = ot::build_pair_graph(plan, sp, src_parent, tp, tgt_parent, pc);
  graph.validate(cfg.top_patches);
  fs::create_directories(ctx.layout.pair_graph().parent_path());
  ot::write_pair_graph(graph, ctx.layout.pair_graph());
  std::size_t candidates = 0;
  for (const auto& e : graph.entries) candidates += e.candidates.size();
  StageWork w;
  w.outputs.push_back(ctx.layout.pair_graph());
  w.details = {{"entries", graph.entries.size()}, {"candidates", candidates}};
  ctx.log("pair graph: " + std::to_string(graph.entries.size()) + " source entries");
  return w;
}

std::map<std::string, const PatchRecord*> by_id(const Manifest& m) {
  std::map<std::string, const PatchRecord*> out;
  for (const auto& r : m.records) out[r.id] = &r;
  return out;
}

StageWork do_train(const Ctx& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const Manifest src = read_manifest(ctx.layout.stitched_source_manifest());
  const Manifest tgt = read_manifest(ctx.layout.stitched_target_manifest());
  const ot::PairGraph graph = ot::read_pair_graph(ctx.layout.pair_graph());
  const auto src_ids = by_id(src), tgt_ids = by_id(tgt);
  auto lookup = [](const auto& ids, const std::string& id) {
    const auto it = ids.find(id);
    if (it == ids.end()) throw ConfigError("pair graph references unknown patch '" + id + "'");
    return it->second;
  };
  std::vector<RgbImage> sources(graph.source_names.size()), targets(graph.target_names.size());
  parallel_for(
      sources.size(),
      [&](std::size_t i) {
        sources[i] = rawproc::preprocess(load_raw(cfg, lookup(src_ids, graph.source_names[i])->file), cfg.raw);
      },
      cfg.workers);
  parallel_for(
      targets.size(),
      [&](std::size_t j) { targets[j] = read_image(lookup(tgt_ids, graph.target_names[j])->file); },
      cfg.workers);

  auto head = make_head_by_name(cfg.head, cfg.lut_lattice, cfg.hidden, cfg.seed);
  json trace = json::array();
  const auto result = mapper::train(*head, graph, sources, targets, cfg.train, [&](const mapper::EpochRecord& r) {
    trace.push_back({{"stage", r.stage},
                     {"epoch", r.epoch},
                     {"mean_loss", r.mean_loss},
                     {"terms",
                      {{"mom", r.terms.mom},
                       {"luma", r.terms.luma},
                       {"chroma", r.terms.chroma},
                       {"gram", r.terms.gram},
                       {"tv", r.terms.tv}}}});
    ctx.log("epoch " + std::to_string(r.epoch) + " (stage " + std::to_string(r.stage) +
            ") loss " + std::to_string(r.mean_loss));
  });
  fs::create_directories(ctx.layout.checkpoint().parent_path());
  mapper::save_checkpoint(*head, cfg.seed, 2, ctx.layout.checkpoint());
  write_json({{"seed", cfg.seed}, {"steps", result.steps}, {"epochs", trace}}, ctx.layout.trace());
  StageWork w;
  w.outputs = {ctx.layout.checkpoint(), ctx.layout.trace()};
  w.details = {{"head", cfg.head}, {"parameters", head->parameter_count()}, {"steps", result.steps}};
  return w;
}

StageWork do_infer(const Ctx& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const Manifest src = read_manifest(ctx.layout.stitched_source_manifest());
  const mapper::Checkpoint ck = mapper::load_checkpoint(ctx.layout.checkpoint());
  std::vector<RawPatch> raws(src.records.size());
  parallel_for(raws.size(), [&](std::size_t i) { raws[i] = load_raw(cfg, src.records[i].file); }, cfg.workers);
  const auto preds = mapper::infer(*ck.head, raws, cfg.raw, cfg.workers);
  StageWork w;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const fs::path out = ctx.layout.prediction(src.records[i]);
    fs::create_directories(out.parent_path());
    write_png(preds[i], out);
    w.outputs.push_back(out);
  }
  w.details = {{"predictions", preds.size()}};
  return w;
}

StageWork do_eval(const Ctx& ctx) {
  const RunConfig& cfg = ctx.cfg;
  StageWork w;
  if (cfg.reference_dir.empty()) {
    w.details = {{"evaluated", false}, {"reason", "no reference_dir configured"}};
    return w;
  }
  const Manifest src = read_manifest(ctx.layout.stitched_source_manifest());
  const Manifest ref_manifest = scan_dataset(cfg.reference_dir, kImageExtensions);
  const auto refs = by_id(ref_manifest);
  std::vector<std::string> names;
  std::vector<RgbImage> preds, gts;
  for (const auto& r : src.records) {
    const auto it = refs.find(r.id);
    if (it == refs.end()) throw ConfigError("no reference image for patch '" + r.id + "'");
    names.push_back(r.id);
    preds.push_back(read_png(ctx.layout.prediction(r)));
    gts.push_back(read_image(it->second->file));
  }
  const auto report = quality::evaluate(names, preds, gts, cfg.workers);
  fs::create_directories(ctx.layout.metrics_json().parent_path());
  quality::write_report_json(report, ctx.layout.metrics_json());
  quality::write_report_csv(report, ctx.layout.metrics_csv());
  w.outputs = {ctx.layout.metrics_json(), ctx.layout.metrics_csv()};
  w.details = report.to_json()["mean"];
  w.details["evaluated"] = true;
  w.details["count"] = report.images.size();
  return w;
}

StageWork do_preview(const Ctx& ctx) {
  const Manifest src = read_manifest(ctx.layout.stitched_source_manifest());
  StageWork w;
  json warnings = json::array();
  for (const auto& parent : src.parents) {
    const auto idx = src.records_of(parent);
    int rows = 0, cols = 0;
    for (const auto i : idx) {
      rows = std::max(rows, src.records[i].row + 1);
      cols = std::max(cols, src.records[i].col + 1);
    }
    if (rows * cols != static_cast<int>(idx.size())) {
      throw FormatError("manifest grid for '" + parent + "' is inconsistent");
    }
    std::vector<std::optional<RgbImage>> inputs(idx.size()), preds(idx.size());
    std::vector<std::string> ids(idx.size());
    for (const auto i : idx) {
      const auto& r = src.records[i];
      const std::size_t slot = static_cast<std::size_t>(r.row) * cols + r.col;
      ids[slot] = r.id;
      if (fs::is_regular_file(ctx.layout.preprocessed(r))) inputs[slot] = read_png(ctx.layout.preprocessed(r));
      if (fs::is_regular_file(ctx.layout.prediction(r))) preds[slot] = read_png(ctx.layout.prediction(r));
    }
    const Montage m = build_montage(inputs, preds, rows, cols);
    const fs::path out = ctx.layout.preview(parent);
    fs::create_directories(out.parent_path());
    write_png(m.image, out);
    w.outputs.push_back(out);
    json missing = json::array();
    for (const int k : m.missing) missing.push_back(ids[static_cast<std::size_t>(k)]);
    if (!missing.empty()) {
      warnings.push_back({{"image", parent}, {"missing_patches", missing}});
      ctx.log("warning: " + std::to_string(missing.size()) + " missing patch(es) in preview of " + parent);
    }
    w.details["images"][parent] = {{"rows", rows}, {"cols", cols}, {"missing_patches", missing}};
  }
  w.details["warnings"] = warnings;
  return w;
}

StageWork run_body(const Ctx& ctx, Stage s) {
  switch (s) {
    case Stage::kPreprocess: return do_preprocess(ctx);
    case Stage::kStitch: return do_stitch(ctx);
    case Stage::kMatchImages: return do_match(ctx);
    case Stage::kBuildPairs: return do_build_pairs(ctx);
    case Stage::kTrain: return do_train(ctx);
    case Stage::kInfer: return do_infer(ctx);
    case Stage::kEval: return do_eval(ctx);
    case Stage::kPreview: return do_preview(ctx);
  }
  throw Error("unknown stage");
}

// ---------------------------------------------------------------------------
// Stage driver

StageOutcome execute(const Ctx& ctx, Stage s) {
  const std::string name(stage_name(s));
  const fs::path report_path = ctx.layout.report(s);

  std::vector<fs::path> inputs;
  for (const Stage up : upstream_of(s)) {
    const fs::path up_report = ctx.layout.report(up);
    const json up_json = fs::is_regular_file(up_report) ? read_json(up_report) : json::object();
    if (up_json.value("status", "") != "ok") {
      throw ConfigError("stage '" + name + "' needs stage '" + std::string(stage_name(up)) +
                        "' to complete first");
    }
    for (const auto& [out, _] : up_json.at("outputs").items()) inputs.push_back(ctx.abs(out));
  }
  for (auto& p : extra_inputs(ctx, s)) inputs.push_back(std::move(p));

  std::map<std::string, std::string> input_hashes;
  for (const auto& p : inputs) input_hashes[ctx.rel(p)] = hash_or_missing(p);
  const json subset = config_subset(ctx.cfg, s);
  Sha256 fp;
  fp.update(name).update("\n").update(subset.dump()).update("\n");
  for (const auto& [k, v] : input_hashes) fp.update(k).update("=").update(v).update("\n");
  const std::string fingerprint = fp.hex();

  if (!ctx.opts.force && fs::is_regular_file(report_path)) {
    const json old = read_json(report_path);
    bool fresh = old.value("status", "") == "ok" && old.value("fingerprint", "") == fingerprint;
    if (fresh) {
      for (const auto& [out, hash] : old.at("outputs").items()) {
        if (hash_or_missing(ctx.abs(out)) != hash.get<std::string>()) {
          fresh = false;
          break;
        }
      }
    }
    if (fresh) {
      ctx.log("[" + name + "] up to date, skipped");
      return {s, true, report_path};
    }
  }

  ctx.log("[" + name + "] running");
  json report = {{"stage", name},
                 {"seed", ctx.cfg.seed},
                 {"fingerprint", fingerprint},
                 {"config", subset},
                 {"inputs", input_hashes}};
  const auto t0 = std::chrono::steady_clock::now();
  auto fail = [&](const std::exception& e) {
    report["status"] = "failed";
    report["error"] = e.what();
    report["outputs"] = json::object();
    write_json(report, report_path);
  };
  StageWork work;
  try {
    work = run_body(ctx, s);
  } catch (const ConfigError& e) {
    fail(e);
    throw ConfigError("stage '" + name + "': " + e.what());
  } catch (const std::exception& e) {
    fail(e);
    throw Error("stage '" + name + "': " + e.what());
  }
  json outputs = json::object();
  for (const auto& p : work.outputs) outputs[ctx.rel(p)] = sha256_file(p);
  report["status"] = "ok";
  report["outputs"] = outputs;
  report["details"] = work.details;
  report["elapsed_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json(report, report_path);
  return {s, false, report_path};
}

void prepare_run_dir(const RunConfig& cfg) {
  cfg.validate();
  const Manifest src = scan_dataset(cfg.source_dir, kRawExtensions);
  if (src.records.empty()) throw ConfigError("no .raw patches found in " + cfg.source_dir.string());
  const Manifest tgt = scan_dataset(cfg.target_dir, kImageExtensions);
  if (tgt.records.empty()) throw ConfigError("no target images found in " + cfg.target_dir.string());
  make_head_by_name(cfg.head, cfg.lut_lattice, 1, cfg.seed);
  fs::create_directories(cfg.output_dir);
}

}  // namespace

std::string_view stage_name(Stage stage) noexcept {
  switch (stage) {
    case Stage::kPreprocess: return "preprocess";
    case Stage::kStitch: return "stitch";
    case Stage::kMatchImages: return "match-images";
    case Stage::kBuildPairs: return "build-pairs";
    case Stage::kTrain: return "train";
    case Stage::kInfer: return "infer";
    case Stage::kEval: return "eval";
    case Stage::kPreview: return "preview";
  }
  return "unknown";
}

Stage stage_from_name(std::string_view name) {
  for (const Stage s : kAllStages) {
    if (stage_name(s) == name) return s;
  }
  throw ConfigError("unknown stage '" + std::string(name) + "'");
}

fs::path RunLayout::report(Stage s) const {
  return root / "reports" / (std::string(stage_name(s)) + ".json");
}
fs::path RunLayout::preprocessed(const PatchRecord& r) const {
  return root / "preprocess" / "source" / (r.id + ".png");
}
fs::path RunLayout::stitched(const std::string& domain, const std::string& parent) const {
  return root / "stitch" / domain / (parent + ".png");
}
fs::path RunLayout::embeddings(const std::string& which) const {
  return root / "match" / (which + ".emb");
}
fs::path RunLayout::prediction(const PatchRecord& r) const {
  return root / "infer" / (r.id + ".png");
}
fs::path RunLayout::preview(const std::string& parent) const {
  return root / "preview" / (parent + ".png");
}

RunLock::RunLock(const fs::path& dir) : path_(dir / ".lock") {
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (!f) {
    throw Error("run directory " + dir.string() + " is locked by another run (remove " +
                path_.string() + " if no run is active)");
  }
  std::fprintf(f, "%ld\n", static_cast<long>(::getpid()));
  std::fclose(f);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

RawPatch load_raw(const RunConfig& cfg, const fs::path& path) {
  return cfg.raw_height > 0 ? read_raw_file(path, cfg.raw_height, cfg.raw_width) : read_raw_file(path);
}

std::unique_ptr<mapper::ColorHead> make_head_by_name(const std::string& name, int lut_lattice, int hidden,
                                                     std::uint64_t seed) {
  std::unique_ptr<mapper::ColorHead> head;
  std::size_t start = 0;
  while (true) {
    const std::size_t plus = name.find('+', start);
    const std::string part = name.substr(start, plus == std::string::npos ? std::string::npos : plus - start);
    std::unique_ptr<mapper::ColorHead> next;
    switch (mapper::head_kind_from_string(part)) {
      case mapper::HeadKind::kCcm: next = std::make_unique<mapper::CcmHead>(); break;
      case mapper::HeadKind::kLut3d: next = std::make_unique<mapper::Lut3dHead>(lut_lattice); break;
      case mapper::HeadKind::kResidualCnn: next = std::make_unique<mapper::ResidualCnnHead>(seed, hidden); break;
      case mapper::HeadKind::kComposed: throw ConfigError("use 'a+b' to compose heads");
    }
    head = head ? std::make_unique<mapper::ComposedHead>(std::move(head), std::move(next)) : std::move(next);
    if (plus == std::string::npos) break;
    start = plus + 1;
  }
  return head;
}

RunSummary run_pipeline(const RunConfig& cfg, const RunOptions& opts) {
  prepare_run_dir(cfg);
  RunLock lock(cfg.output_dir);
  write_json(cfg.to_json(), RunLayout{cfg.output_dir}.config_snapshot());
  const Ctx ctx{cfg, RunLayout{fs::absolute(cfg.output_dir)}, opts};
  RunSummary summary{ctx.layout.root, {}};
  for (const Stage s : kAllStages) summary.stages.push_back(execute(ctx, s));
  return summary;
}

StageOutcome run_stage(const RunConfig& cfg, Stage stage, const RunOptions& opts) {
  prepare_run_dir(cfg);
  RunLock lock(cfg.output_dir);
  write_json(cfg.to_json(), RunLayout{cfg.output_dir}.config_snapshot());
  const Ctx ctx{cfg, RunLayout{fs::absolute(cfg.output_dir)}, opts};
  return execute(ctx, stage);
}

}  // namespace upisp::pipeline
