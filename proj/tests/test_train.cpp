#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "mbsr/checkpoint.hpp"
#include "mbsr/dataset.hpp"
#include "mbsr/rng.hpp"
#include "mbsr/train.hpp"
#include "test_util.hpp"

using namespace mbsr;

namespace {

// Smooth LR/HR pairs: target is a fixed blur-free upscale of the input.
std::vector<MisrSample> toy_samples(std::size_t n, std::uint64_t seed) {
  std::vector<MisrSample> out(n);
  SplitMix64 r(seed);
  for (std::size_t s = 0; s < n; ++s) {
    out[s].patch_id = static_cast<std::int64_t>(s);
    out[s].compounds = {"ref"};
    const double a = r.uniform(0.2, 0.8), b = r.uniform(-0.01, 0.01);
    out[s].input.resize(256);
    out[s].target.resize(4096);
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x) out[s].input[y * 16 + x] = a + b * double(x + y);
    for (std::size_t y = 0; y < 64; ++y)
      for (std::size_t x = 0; x < 64; ++x) out[s].target[y * 64 + x] = a + b * double(x / 4 + y / 4);
  }
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("cosine schedule hits its endpoints exactly") {
  TrainConfig cfg;
  cfg.max_iters = 300000;
  CHECK(cosine_lr(0, cfg) == 1e-4);
  CHECK(cosine_lr(cfg.max_iters, cfg) == 1e-7);
  CHECK(cosine_lr(cfg.max_iters / 2, cfg) == doctest::Approx((1e-4 + 1e-7) / 2).epsilon(1e-14));
  CHECK(cosine_lr(cfg.max_iters / 4, cfg) ==
        doctest::Approx(1e-7 + 0.5 * (1e-4 - 1e-7) * (1.0 + std::sqrt(0.5))).epsilon(1e-12));
  double prev = cosine_lr(0, cfg);
  for (std::size_t k = 1; k <= 1000; ++k) {
    const double lr = cosine_lr(cfg.max_iters * k / 1000, cfg);
    REQUIRE(lr <= prev);
    prev = lr;
  }
  CHECK_THROWS_AS(cosine_lr(cfg.max_iters + 1, cfg), Error);
}

TEST_CASE("Adam matches a hand-rolled reference") {
  std::vector<double> p{1.0, -2.0, 0.5, 3.0}, g{0.5, -0.25, 0.0, 1e-3};
  AdamState<double> st(p.size());
  adam_step<double>(st, p, g, 0.1);
  // first bias-corrected step moves by lr * g / (|g| + eps)
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-7));
  CHECK(p[1] == doctest::Approx(-1.9).epsilon(1e-7));
  CHECK(p[2] == 0.5);
  CHECK(p[3] == doctest::Approx(3.0 - 0.1 * 1e-3 / (1e-3 + 1e-8)).epsilon(1e-12));

  // three more steps with changing gradients vs an independent implementation
  double m = 0.5 * 0.1, v = 0.25 * 0.001, x = p[0];
  for (int t = 2; t <= 4; ++t) {
    const double gt = 0.5 / t;
    m = 0.9 * m + 0.1 * gt;
    v = 0.999 * v + 0.001 * gt * gt;
    x -= 0.01 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    std::vector<double> gg{gt, 0.0, 0.0, 0.0};
    adam_step<double>(st, p, gg, 0.01);
  }
  CHECK(st.step == 4);
  CHECK(p[0] == doctest::Approx(x).epsilon(1e-12));
  std::vector<double> bad{std::nan(""), 0, 0, 0};
  CHECK_THROWS_AS(adam_step<double>(st, p, bad, 0.1), Error);
}

TEST_CASE("early stopping counts validations without improvement") {
  EarlyStopping es(2);
  CHECK(es.observe(1.0));
  CHECK_FALSE(es.observe(1.0));
  CHECK_FALSE(es.stop());
  CHECK(es.observe(0.5));
  CHECK_FALSE(es.observe(0.7));
  CHECK_FALSE(es.observe(0.6));
  CHECK(es.stop());
  CHECK(es.best() == 0.5);
}

TEST_CASE("training is deterministic and keeps the best validation model") {
  const auto samples = toy_samples(12, 3);
  const std::vector<std::size_t> tr{0, 1, 2, 3, 4, 5, 6, 7}, va{8, 9, 10, 11};
  TrainConfig cfg;
  cfg.max_iters = 60;
  cfg.val_every = 10;
  cfg.batch_size = 4;
  cfg.lr_max = 1e-3;
  cfg.patience = 100;
  const SrModelConfig mc{1, 8, 1, 2, 4};
  const auto a = train(init_model<float>(mc, 1), samples, tr, va, cfg);
  const auto b = train(init_model<float>(mc, 1), samples, tr, va, cfg);
  CHECK(a.best_model.params() == b.best_model.params());
  REQUIRE(a.history.size() == 6);
  std::size_t argmin = 0;
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].iter == 10 * (i + 1));
    if (a.history[i].val_loss < a.history[argmin].val_loss) argmin = i;
  }
  CHECK(a.best_iter == a.history[argmin].iter);
  CHECK(a.best_val == a.history[argmin].val_loss);
  CHECK(a.best_val == doctest::Approx(mean_loss(a.best_model, samples, va, 3)).epsilon(1e-6));
  CHECK(a.history.back().val_loss < a.history.front().val_loss + 1e-12);
  CHECK(a.optimizer.step == 60);

  cfg.patience = 1;
  cfg.lr_max = 5.0;  // diverging steps make validation worse quickly
  const auto c = train(init_model<float>(mc, 1), samples, tr, va, cfg);
  if (c.stopped_early) CHECK(c.iterations < cfg.max_iters);
}

TEST_CASE("non-finite input aborts with the history so far") {
  auto samples = toy_samples(12, 4);
  samples[3].input[17] = std::nan("");
  TrainConfig cfg;
  cfg.max_iters = 50;
  cfg.val_every = 1;
  cfg.batch_size = 12;
  std::vector<std::size_t> tr{0, 1, 2, 3}, va{8, 9};
  CHECK_THROWS_AS(train(init_model<float>({1, 4, 1, 2, 4}, 1), samples, tr, va, cfg), TrainingDiverged);
}

TEST_CASE("checkpoint round trip restores parameters, optimizer and iteration") {
  testutil::TempDir dir("ckpt");
  Checkpoint<float> ck{init_model<float>({3, 8, 2, 4, 4}, 5), AdamState<float>(0), 1234};
  ck.optimizer = AdamState<float>(ck.model.params().size());
  for (std::size_t i = 0; i < ck.optimizer.m.size(); ++i) {
    ck.optimizer.m[i] = float(i) * 1e-3f;
    ck.optimizer.v[i] = float(i) * 1e-6f;
  }
  ck.optimizer.step = 77;
  save_checkpoint(ck, dir / "c.bin");
  const auto back = load_checkpoint<float>(dir / "c.bin");
  CHECK(back.model.config() == ck.model.config());
  CHECK(back.model.params() == ck.model.params());
  CHECK(back.optimizer.m == ck.optimizer.m);
  CHECK(back.optimizer.v == ck.optimizer.v);
  CHECK(back.optimizer.step == 77);
  CHECK(back.iteration == 1234);
  CHECK_THROWS_AS(load_checkpoint<double>(dir / "c.bin"), Error);

  {
    std::ofstream(dir / "bad.bin", std::ios::binary) << "NOTACKPT";
  }
  CHECK_THROWS_AS(load_checkpoint<float>(dir / "bad.bin"), Error);
}

TEST_CASE("history CSV") {
  testutil::TempDir dir("hist");
  write_history_csv({{1000, 0.5, 0.25, 1e-4}, {2000, 0.125, 0.0625, 5e-5}}, dir / "h.csv");
  CHECK(slurp(dir / "h.csv") == "iter,train_loss,val_loss,lr\n1000,0.5,0.25,0.0001\n2000,0.125,0.0625,5.0000000000000002e-05\n");
}
