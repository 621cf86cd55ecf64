#include "mbsr/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "mbsr/checkpoint.hpp"
#include "mbsr/hash.hpp"
#include "mbsr/render.hpp"
#include "mbsr/synthetic.hpp"

namespace mbsr {

namespace fs = std::filesystem;

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::config: return "config";
    case Stage::io: return "io";
    case Stage::analyze: return "analyze";
    case Stage::transform: return "fit-transforms";
    case Stage::dataset: return "make-dataset";
    case Stage::train: return "train";
    case Stage::evaluate: return "evaluate";
    case Stage::render: return "render";
  }
  return "unknown";
}

int exit_code(Stage s) { return 2 + static_cast<int>(s); }

namespace {

template <typename F>
auto staged(Stage s, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(s, e.what());
  }
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

double max_of(const Map2D& m) {
  double hi = 0.0;
  for (double v : m.flat()) hi = std::max(hi, v);
  return hi;
}

nlohmann::ordered_json aggregates(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["tag"] = r.dataset_tag;
  j["compounds"] = r.compounds;
  j["samples"] = r.samples.size();
  j["mean_ssim"] = r.mean_ssim;
  j["mean_nmse_db"] = r.mean_nmse_db;
  return j;
}

}  // namespace

std::string describe_config(const RunConfig& c) {
  std::vector<std::string> compounds;
  for (const auto& s : c.synth.compounds)
    compounds.push_back(s.tag + ":" + num(s.rho) + ":" + num(s.sparsity) + ":" + num(s.gamma) + ":" +
                        std::to_string(s.seed) + (s.complementary ? ":1" : ""));
  const std::vector<std::pair<std::string, std::string>> kv{
      {"data.grids", c.grids.generic_string()},
      {"data.reference", c.reference},
      {"data.joined", c.joined},
      {"data.min_nonzero_frac", num(c.min_nonzero_frac)},
      {"out", c.out.generic_string()},
      {"transform.n_quantiles", std::to_string(c.n_quantiles)},
      {"model.features", std::to_string(c.model.features)},
      {"model.blocks", std::to_string(c.model.blocks)},
      {"model.reduction", std::to_string(c.model.reduction)},
      {"train.lr_max", num(c.train.lr_max)},
      {"train.lr_min", num(c.train.lr_min)},
      {"train.max_iters", std::to_string(c.train.max_iters)},
      {"train.val_every", std::to_string(c.train.val_every)},
      {"train.patience", std::to_string(c.train.patience)},
      {"train.batch_size", std::to_string(c.train.batch_size)},
      {"train.seed", std::to_string(c.train.seed)},
      {"split.seed", std::to_string(c.split.seed)},
      {"split.train", num(c.split.train)},
      {"split.val", num(c.split.val)},
      {"split.test", num(c.split.test)},
      {"synth.rows", std::to_string(c.synth.rows)},
      {"synth.cols", std::to_string(c.synth.cols)},
      {"synth.correlation_length", num(c.synth.correlation_length)},
      {"synth.hf_scale", num(c.synth.hf_scale)},
      {"synth.seed", std::to_string(c.synth.shared_seed)},
      {"synth.dates", join(c.synth.dates, ",")},
      {"synth.compounds", join(compounds, ";")},
      {"report.figures", std::to_string(c.figures)},
      {"report.tag", c.tag},
  };
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

Pipeline::Pipeline(RunConfig cfg) : cfg_(std::move(cfg)), layout_{cfg_.out} {}

fs::path Pipeline::synth() {
  return staged(Stage::io, [&] {
    cfg_.synth.validate();
    auto set = gen_compound_set(cfg_.synth);
    write_grid_set(set.grids, layout_.grids());
    grids_ = std::move(set.grids);
    return layout_.grids();
  });
}

const std::vector<EmissionGrid>& Pipeline::grids() {
  if (!grids_) {
    staged(Stage::io, [&] {
      const fs::path dir = cfg_.grids.empty() ? layout_.grids() : cfg_.grids;
      if (!fs::is_directory(dir))
        throw Error("no grid archive at " + dir.string() + "; set data.grids or run synth first");
      grids_ = load_grid_set(dir);
      if (grids_->empty()) throw Error("no grid files in " + dir.string());
    });
  }
  return *grids_;
}

InterconnectionMatrix Pipeline::analyze() {
  const auto& g = grids();
  return staged(Stage::analyze, [&] {
    if (!matrix_) matrix_ = build_matrix(g);
    if (matrix_->size() < 2) throw Error("interconnection analysis needs at least 2 compounds");
    fs::create_directories(layout_.analysis());
    write_matrix_csv(*matrix_, layout_.analysis());
    render_interconnection(*matrix_, layout_.analysis() / "interconnection.ppm");
    return *matrix_;
  });
}

std::vector<std::string> Pipeline::compounds() {
  if (!joined_) {
    const auto sel = staged(Stage::config, [&] { return parse_joined(cfg_.joined); });
    if (sel.is_auto()) {
      if (!matrix_) analyze();
      joined_ = staged(Stage::analyze, [&] { return rank_compounds(*matrix_, cfg_.reference, sel.k, *sel.mode); });
    } else {
      joined_ = sel.compounds;
    }
  }
  std::vector<std::string> all{cfg_.reference};
  all.insert(all.end(), joined_->begin(), joined_->end());
  return all;
}

const ArchiveSet& Pipeline::archives() {
  if (!archives_) {
    const auto names = compounds();
    const auto& g = grids();
    staged(Stage::io, [&] {
      std::vector<EmissionGrid> used;
      for (const auto& grid : g)
        if (std::find(names.begin(), names.end(), grid.compound) != names.end()) used.push_back(grid);
      auto built = build_archives(used);
      for (const auto& n : names)
        if (!built.contains(n)) throw Error("compound '" + n + "' not found in the grid archive");
      archives_ = ArchiveSet(built.begin(), built.end());
    });
  }
  return *archives_;
}

std::vector<std::int64_t> Pipeline::reference_ids() {
  const auto& ref = archives().at(cfg_.reference);
  std::vector<std::int64_t> ids;
  for (const auto& [id, rec] : ref.patches) {
    const auto v = rec.hr.flat();
    const auto nz = static_cast<double>(std::count_if(v.begin(), v.end(), [](double x) { return x != 0.0; }));
    if (nz >= cfg_.min_nonzero_frac * static_cast<double>(v.size())) ids.push_back(id);
  }
  return ids;
}

SplitIndices Pipeline::split() {
  const auto ids = reference_ids();
  return staged(Stage::dataset, [&] { return split_ids(ids, cfg_.split); });
}

void Pipeline::fit_transforms() {
  const auto names = compounds();
  const auto& arch = archives();
  const auto ids = reference_ids();
  const auto parts = split();
  staged(Stage::transform, [&] {
    std::vector<std::int64_t> train_ids;
    for (auto p : parts.train) train_ids.push_back(ids[p]);
    transforms_ = mbsr::fit_transforms(arch, names, train_ids, cfg_.n_quantiles);
    fs::create_directories(layout_.transforms());
    for (const auto& [name, t] : *transforms_) {
      save_transform(t, layout_.transforms() / (name + ".qtf"));
      save_transform_json(t, layout_.transforms() / (name + ".json"));
    }
  });
  staged(Stage::io, [&] {
    for (const auto& [name, a] : arch) save_archive(a, layout_.archives() / name);
  });
}

const TransformSet& Pipeline::transforms() {
  if (!transforms_) {
    const auto names = compounds();
    staged(Stage::transform, [&] {
      TransformSet set;
      for (const auto& n : names) {
        const auto path = layout_.transforms() / (n + ".qtf");
        if (!fs::exists(path)) throw Error("missing transform " + path.string() + "; run fit-transforms first");
        set.emplace(n, load_transform(path));
      }
      transforms_ = std::move(set);
    });
  }
  return *transforms_;
}

DatasetManifest Pipeline::make_dataset() {
  const auto names = compounds();
  const auto& arch = archives();
  const auto& tfs = transforms();
  const auto ids = reference_ids();
  const auto parts = split();
  return staged(Stage::dataset, [&] {
    const std::vector<std::string> joined(names.begin() + 1, names.end());
    samples_ = assemble_misr(arch, cfg_.reference, joined, tfs, ids);
    DatasetManifest m;
    m.reference = cfg_.reference;
    m.joined = joined;
    for (const auto& n : names) m.transform_fingerprints[n] = to_hex(tfs.at(n).fitted_on());
    m.split_seed = cfg_.split.seed;
    for (auto p : parts.train) m.train_ids.push_back(ids[p]);
    for (auto p : parts.val) m.val_ids.push_back(ids[p]);
    for (auto p : parts.test) m.test_ids.push_back(ids[p]);
    save_manifest(m, layout_.dataset());
    return m;
  });
}

const std::vector<MisrSample>& Pipeline::samples() {
  if (!samples_) make_dataset();
  return *samples_;
}

TrainResult<float> Pipeline::train() {
  const auto n = compounds().size();
  const auto& s = samples();
  const auto parts = split();
  return staged(Stage::train, [&] {
    SrModelConfig mc = cfg_.model;
    mc.in_channels = n;
    fs::create_directories(layout_.checkpoint().parent_path());
    try {
      auto res = mbsr::train(init_model<float>(mc, cfg_.train.seed), s, parts.train, parts.val, cfg_.train);
      save_checkpoint(Checkpoint<float>{res.best_model, res.optimizer, res.iterations}, layout_.checkpoint());
      write_history_csv(res.history, layout_.history());
      model_ = res.best_model;
      return res;
    } catch (const TrainingDiverged& e) {
      write_history_csv(e.history, layout_.history());
      throw;
    }
  });
}

const SrModel<float>& Pipeline::model() {
  if (!model_) {
    const auto n = compounds().size();
    staged(Stage::evaluate, [&] {
      if (!fs::exists(layout_.checkpoint()))
        throw Error("missing checkpoint " + layout_.checkpoint().string() + "; run train first");
      auto ckpt = load_checkpoint<float>(layout_.checkpoint());
      if (ckpt.model.config().in_channels != n)
        throw Error("checkpoint expects " + std::to_string(ckpt.model.config().in_channels) + " channels, config has " +
                    std::to_string(n));
      model_ = std::move(ckpt.model);
    });
  }
  return *model_;
}

RunSummary Pipeline::evaluate() {
  const auto names = compounds();
  const auto& s = samples();
  const auto& m = model();
  const auto& tfs = transforms();
  const auto& ref = archives().at(cfg_.reference);
  const auto parts = split();
  return staged(Stage::evaluate, [&] {
    const std::string tag = cfg_.tag.empty() ? "C=" + std::to_string(names.size()) : cfg_.tag;
    RunSummary out;
    out.joined.assign(names.begin() + 1, names.end());
    predictions_ = predict(m, s, parts.test);
    out.report = evaluate_predictions(s, parts.test, *predictions_, ref, tfs.at(cfg_.reference), tag);
    out.baseline =
        evaluate_predictions(s, parts.test, predict_bicubic(s, parts.test), ref, tfs.at(cfg_.reference), "bicubic");
    const auto dir = layout_.eval();
    fs::create_directories(dir);
    write_report_csv(out.report, dir / "report.csv");
    write_report_json(out.report, dir / "report.json");
    write_report_csv(out.baseline, dir / "baseline.csv");
    write_report_json(out.baseline, dir / "baseline.json");
    const std::vector<EvalReport> both{out.baseline, out.report};
    write_comparison_csv(both, dir / "comparison.csv");
    std::ofstream txt(dir / "comparison.txt");
    txt << comparison_text(both);
    if (!txt) throw Error("cannot write " + (dir / "comparison.txt").string());
    summary_ = out;
    return out;
  });
}

void Pipeline::render_figures() {
  if (!summary_) evaluate();
  const auto& s = samples();
  const auto& ref = archives().at(cfg_.reference);
  const auto& tf = transforms().at(cfg_.reference);
  const auto parts = split();
  staged(Stage::render, [&] {
    std::map<std::int64_t, std::size_t> pred_of;
    for (std::size_t k = 0; k < parts.test.size(); ++k) pred_of[s[parts.test[k]].patch_id] = k;

    auto ranked = summary_->report.samples;
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const SampleScore& a, const SampleScore& b) { return a.nmse_db < b.nmse_db; });
    const std::size_t n = std::min(cfg_.figures, ranked.size());

    const auto dir = layout_.figures();
    fs::create_directories(dir);
    auto emit = [&](const std::string& prefix, const SampleScore& score) {
      const Map2D& hr = ref.at(score.patch_id).hr;
      const Map2D sr = to_physical((*predictions_)[pred_of.at(score.patch_id)], tf);
      double hi = std::max(max_of(hr), max_of(sr));
      if (!(hi > 0.0)) hi = 1.0;
      const std::string base = prefix + "_patch" + std::to_string(score.patch_id);
      render_heatmap(hr, dir / (base + "_hr.ppm"), Palette::sequential, 0.0, hi, 4);
      render_heatmap(sr, dir / (base + "_sr.ppm"), Palette::sequential, 0.0, hi, 4);
      render_heatmap(error_map(hr, sr), dir / (base + "_err.ppm"), Palette::sequential, 0.0, hi, 4);
      write_histogram_csv(histogram(hr.flat(), 50, 0.0, hi), histogram(sr.flat(), 50, 0.0, hi),
                          dir / (base + "_hist.csv"));
    };
    for (std::size_t i = 0; i < n; ++i) emit("best" + std::to_string(i), ranked[i]);
    for (std::size_t i = 0; i < n; ++i) emit("worst" + std::to_string(i), ranked[ranked.size() - 1 - i]);
  });
}

void Pipeline::write_run_manifest(const RunSummary& summary) {
  staged(Stage::io, [&] {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(layout_.root))
      if (e.is_regular_file() && e.path() != layout_.manifest()) files.push_back(e.path());
    std::vector<std::string> rel;
    for (const auto& f : files) rel.push_back(fs::relative(f, layout_.root).generic_string());
    std::sort(rel.begin(), rel.end());

    nlohmann::ordered_json j;
    j["reference"] = cfg_.reference;
    j["joined"] = summary.joined;
    j["report"] = aggregates(summary.report);
    j["baseline"] = aggregates(summary.baseline);
    auto& arts = j["artifacts"] = nlohmann::ordered_json::array();
    for (const auto& r : rel) {
      const auto p = layout_.root / r;
      arts.push_back({{"path", r}, {"bytes", fs::file_size(p)}, {"fnv1a", to_hex(hash_file(p.string()))}});
    }
    std::ofstream out(layout_.manifest());
    out << j.dump(2) << '\n';
    if (!out) throw Error("cannot write " + layout_.manifest().string());
  });
}

RunSummary Pipeline::run() {
  staged(Stage::config, [&] { cfg_.validate(); });
  staged(Stage::io, [&] {
    fs::create_directories(layout_.root);
    std::ofstream(layout_.root / "config.txt") << describe_config(cfg_);
  });
  if (cfg_.grids.empty()) synth();

  std::set<std::string> present;
  for (const auto& g : grids()) present.insert(g.compound);
  if (present.size() >= 2) analyze();

  fit_transforms();
  make_dataset();
  train();
  auto summary = evaluate();
  render_figures();
  write_run_manifest(summary);
  summary.manifest = layout_.manifest();
  return summary;
}

fs::path cmd_synth(const RunConfig& cfg) { return Pipeline(cfg).synth(); }

InterconnectionMatrix cmd_analyze(const RunConfig& cfg) {
  staged(Stage::config, [&] {
    if (!cfg.grids.empty() && !fs::is_directory(cfg.grids))
      throw Error("data.grids: directory '" + cfg.grids.string() + "' does not exist");
  });
  return Pipeline(cfg).analyze();
}

RunSummary cmd_run(const RunConfig& cfg) { return Pipeline(cfg).run(); }

}  // namespace mbsr
