#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mbsr/config.hpp"
#include "mbsr/dataset.hpp"
#include "mbsr/interconnection.hpp"
#include "mbsr/metrics.hpp"
#include "mbsr/model.hpp"
#include "mbsr/train.hpp"

namespace mbsr {

/// Pipeline stages; each maps to a distinct process exit code.
enum class Stage { config, io, analyze, transform, dataset, train, evaluate, render };

const char* stage_name(Stage s);
int exit_code(Stage s);

class StageError : public Error {
 public:
  StageError(Stage stage, const std::string& what)
      : Error(std::string("[") + stage_name(stage) + "] " + what), stage(stage) {}
  Stage stage;
};

/// Output directory layout of a run.
struct RunLayout {
  std::filesystem::path root;

  std::filesystem::path grids() const { return root / "grids"; }
  std::filesystem::path analysis() const { return root / "analysis"; }
  std::filesystem::path archives() const { return root / "archives"; }
  std::filesystem::path transforms() const { return root / "transforms"; }
  std::filesystem::path dataset() const { return root / "dataset.json"; }
  std::filesystem::path checkpoint() const { return root / "model" / "checkpoint.bin"; }
  std::filesystem::path history() const { return root / "model" / "history.csv"; }
  std::filesystem::path eval() const { return root / "eval"; }
  std::filesystem::path figures() const { return root / "figures"; }
  std::filesystem::path manifest() const { return root / "run_manifest.json"; }
};

struct RunSummary {
  std::vector<std::string> joined;
  EvalReport report;    // trained network
  EvalReport baseline;  // bicubic upsampling of the reference channel
  std::filesystem::path manifest;
};

/// Stateful orchestrator. Each stage reuses what earlier stages produced in
/// this process and otherwise reloads their artifacts from the output
/// directory. Failures are rethrown as StageError; partial outputs stay.
class Pipeline {
 public:
  explicit Pipeline(RunConfig cfg);

  const RunConfig& config() const { return cfg_; }
  const RunLayout& layout() const { return layout_; }

  std::filesystem::path synth();
  InterconnectionMatrix analyze();
  /// Reference first, then the resolved joined compounds.
  std::vector<std::string> compounds();
  void fit_transforms();
  DatasetManifest make_dataset();
  TrainResult<float> train();
  RunSummary evaluate();
  /// HR / SR / |error| heatmaps and a value histogram for the N best and N
  /// worst test samples of the last evaluation.
  void render_figures();
  RunSummary run();

  /// Lists every file under the output root with its FNV-1a hash.
  void write_run_manifest(const RunSummary& summary);

 private:
  const std::vector<EmissionGrid>& grids();
  const ArchiveSet& archives();
  const TransformSet& transforms();
  const std::vector<MisrSample>& samples();
  const SrModel<float>& model();
  std::vector<std::int64_t> reference_ids();
  SplitIndices split();

  RunConfig cfg_;
  RunLayout layout_;
  std::optional<std::vector<EmissionGrid>> grids_;
  std::optional<InterconnectionMatrix> matrix_;
  std::optional<std::vector<std::string>> joined_;
  std::optional<ArchiveSet> archives_;
  std::optional<TransformSet> transforms_;
  std::optional<std::vector<MisrSample>> samples_;
  std::optional<SrModel<float>> model_;
  std::optional<RunSummary> summary_;
  std::optional<std::vector<Map2D>> predictions_;
};

/// One-shot wrappers used by the command-line tool.
std::filesystem::path cmd_synth(const RunConfig& cfg);
InterconnectionMatrix cmd_analyze(const RunConfig& cfg);
RunSummary cmd_run(const RunConfig& cfg);

/// Resolved configuration as `key = value` lines (stable order).
std::string describe_config(const RunConfig& cfg);

}  // namespace mbsr
