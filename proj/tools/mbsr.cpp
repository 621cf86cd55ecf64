// Command-line front end: one subcommand per pipeline stage plus `run`.
#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "mbsr/config.hpp"
#include "mbsr/grid_io.hpp"
#include "mbsr/pipeline.hpp"
#include "mbsr/render.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

mbsr::RunConfig load_config(const Common& o) {
  try {
    mbsr::KeyValueConfig kv;
    if (!o.config.empty()) kv = mbsr::KeyValueConfig::load(o.config);
    kv.apply_env(mbsr::kEnvPrefix, mbsr::RunConfig::known_keys());
    if (!o.out.empty()) kv.set("out", o.out);
    if (o.seed) {
      const auto s = std::to_string(*o.seed);
      kv.set("train.seed", s);
      kv.set("split.seed", s);
      kv.set("synth.seed", s);
    }
    return mbsr::RunConfig::from_kv(kv);
  } catch (const mbsr::Error& e) {
    throw mbsr::StageError(mbsr::Stage::config, e.what());
  }
}

void validated(const mbsr::RunConfig& cfg) {
  try {
    cfg.validate();
  } catch (const mbsr::Error& e) {
    throw mbsr::StageError(mbsr::Stage::config, e.what());
  }
}

void print_summary(const mbsr::RunSummary& s) {
  std::cout << mbsr::comparison_text({s.baseline, s.report});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-compound emission map super-resolution"};
  app.require_subcommand(1);
  Common o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "key = value configuration file");
    sub->add_option("--seed", o.seed, "overrides train.seed, split.seed and synth.seed");
    sub->add_option("--out", o.out, "output directory (overrides `out`)");
    return sub;
  };

  auto* synth = add_common(app.add_subcommand("synth", "generate a synthetic grid archive"));
  auto* analyze = add_common(app.add_subcommand("analyze", "inter-compound SSIM / PCC matrices"));
  auto* fit = add_common(app.add_subcommand("fit-transforms", "slice patches and fit quantile transforms"));
  auto* make = add_common(app.add_subcommand("make-dataset", "assemble samples and write dataset.json"));
  auto* train = add_common(app.add_subcommand("train", "train the network and write a checkpoint"));
  auto* eval = add_common(app.add_subcommand("evaluate", "score the checkpoint on the test split"));
  auto* run = add_common(app.add_subcommand("run", "all stages end to end"));

  auto* render = app.add_subcommand("render", "render a grid file as a PPM heatmap");
  std::string in_path, out_path, palette = "sequential";
  std::optional<double> lo, hi;
  std::size_t cell = 1;
  render->add_option("input", in_path, "grid file (.csv or .bgrid)")->required();
  render->add_option("output", out_path, "output .ppm")->required();
  render->add_option("--palette", palette, "sequential | diverging");
  render->add_option("--lo", lo, "value mapped to the low palette end (default: min)");
  render->add_option("--hi", hi, "value mapped to the high palette end (default: max)");
  render->add_option("--cell", cell, "pixels per grid cell");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      std::cout << mbsr::cmd_synth(load_config(o)).string() << '\n';
    } else if (*analyze) {
      const auto m = mbsr::cmd_analyze(load_config(o));
      std::cout << "analyzed " << m.size() << " compounds\n";
    } else if (*run) {
      const auto s = mbsr::cmd_run(load_config(o));
      print_summary(s);
      std::cout << "manifest: " << s.manifest.string() << '\n';
    } else if (*render) {
      try {
        const auto grid = mbsr::load_grid(in_path);
        const double a = lo.value_or(mbsr::min_value(grid.values));
        double b = hi.value_or(mbsr::max_value(grid.values));
        if (!(b > a)) b = a + 1.0;
        mbsr::render_heatmap(grid.values, out_path, mbsr::parse_palette(palette), a, b, cell);
      } catch (const mbsr::Error& e) {
        throw mbsr::StageError(mbsr::Stage::render, e.what());
      }
    } else {
      const auto cfg = load_config(o);
      validated(cfg);
      mbsr::Pipeline p(cfg);
      if (*fit) {
        p.fit_transforms();
      } else if (*make) {
        const auto m = p.make_dataset();
        std::cout << "train " << m.train_ids.size() << ", val " << m.val_ids.size() << ", test "
                  << m.test_ids.size() << '\n';
      } else if (*train) {
        const auto r = p.train();
        std::cout << "iterations " << r.iterations << ", best val L1 " << r.best_val << " at " << r.best_iter
                  << (r.stopped_early ? " (early stop)" : "") << '\n';
      } else if (*eval) {
        print_summary(p.evaluate());
        p.render_figures();
      }
    }
  } catch (const mbsr::StageError& e) {
    std::cerr << "mbsr: " << e.what() << '\n';
    return mbsr::exit_code(e.stage);
  } catch (const std::exception& e) {
    std::cerr << "mbsr: [io] " << e.what() << '\n';
    return mbsr::exit_code(mbsr::Stage::io);
  }
  return 0;
}
