#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"
#include "concept_circuits/common.hpp"
#include "concept_circuits/train.hpp"
#include "doctest.h"

using namespace cc;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cc_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

}  // namespace

TEST_CASE("parameter count follows the block layout") {
  const auto c = fixture::tiny_config(2, 2, 8, 16, 5, 11);
  const std::size_t d = 8, m = 16, V = 11, T = 5, L = 2;
  const std::size_t per_layer = 2 * d + 3 * (d * d + d) + d * d + 2 * d + d * m + m + m * d + d;
  CHECK(Parameters(c).size() == V * d + T * d + L * per_layer + 2 * d + d * V);
}

TEST_CASE("forward matches a straight-line implementation") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 4; ++trial) {
    const auto cfg = fixture::tiny_config(1 + trial % 3, 1 + trial % 2 * 3, 12, 10, 8, 9);
    const auto p = fixture::random_parameters(cfg, 100 + trial);
    const auto tokens = fixture::random_tokens(1 + trial * 2, cfg.vocab_size, rng);
    const auto acts = forward(p, tokens);
    const auto expect = oracle::forward_logits(p, tokens);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      for (int v = 0; v < cfg.vocab_size; ++v) {
        CHECK(acts.logits(static_cast<int>(t), v) == doctest::Approx(expect[t][static_cast<std::size_t>(v)]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("forward is causal") {
  const auto cfg = fixture::tiny_config(2, 2, 8, 8, 6, 9);
  const auto p = fixture::random_parameters(cfg, 5);
  std::vector<int> a = {1, 3, 4, 5, 6}, b = a;
  b[3] = 8;
  const auto la = forward(p, a).logits, lb = forward(p, b).logits;
  for (int t = 0; t < 3; ++t) {
    for (int v = 0; v < 9; ++v) CHECK(la(t, v) == lb(t, v));
  }
  bool changed = false;
  for (int v = 0; v < 9; ++v) changed |= la(3, v) != lb(3, v);
  CHECK(changed);
}

TEST_CASE("all-zero parameters give uniform predictions with loss ln V") {
  const auto cfg = fixture::tiny_config(1, 1, 4, 4, 5, 13);
  const Parameters p(cfg);
  const std::vector<TokenSeq> batch = {{1, 4, 5, 6}, {1, 7, 8}};
  CHECK(loss_and_grads(p, batch).loss == doctest::Approx(std::log(13.0)).epsilon(1e-14));
}

TEST_CASE("forward rejects bad input") {
  const auto cfg = fixture::tiny_config();
  const Parameters p(cfg);
  CHECK_THROWS_AS(forward(p, std::vector<int>{}), InvalidArgument);
  CHECK_THROWS_AS(forward(p, std::vector<int>{1, 99}), InvalidArgument);
  CHECK_THROWS_AS(forward(p, std::vector<int>(7, 1)), InvalidArgument);
}

TEST_CASE("reverse-mode gradients match central differences") {
  const auto cfg = fixture::tiny_config(1, 2, 4, 6, 5, 6);
  auto p = fixture::random_parameters(cfg, 17);
  REQUIRE(p.size() <= 1000);
  const std::vector<TokenSeq> batch = {{1, 3, 4, 5, 2}, {1, 5, 0, 3}};
  const auto g = loss_and_grads(p, batch);
  CHECK(g.loss == doctest::Approx(oracle::sequence_set_loss(p, {batch[0], batch[1]})).epsilon(1e-12));
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double x = p.values()[i];
    p.values()[i] = x + h;
    const double up = oracle::sequence_set_loss(p, {batch[0], batch[1]});
    p.values()[i] = x - h;
    const double dn = oracle::sequence_set_loss(p, {batch[0], batch[1]});
    p.values()[i] = x;
    worst = std::max(worst, rel_err(g.grads[i], (up - dn) / (2 * h)));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("grouped parallel gradients equal the serial reference") {
  const auto cfg = fixture::tiny_config(2, 2, 8, 8, 8, 12);
  const auto p = fixture::random_parameters(cfg, 4, 0.2);
  std::mt19937_64 rng(1);
  std::vector<TokenSeq> batch;
  for (int i = 0; i < 13; ++i) batch.push_back(fixture::random_tokens(3 + i % 5, 12, rng));
  const auto a = loss_and_grads(p, batch);
  const auto b = reference::loss_and_grads(p, batch);
  CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-13));
  for (std::size_t i = 0; i < a.grads.size(); ++i) CHECK(a.grads[i] == doctest::Approx(b.grads[i]).epsilon(1e-10));
  CHECK(a.predictions == b.predictions);
}

TEST_CASE("training is deterministic and checkpoints on schedule") {
  const auto cfg = fixture::tiny_config(1, 2, 8, 8, 8, 10);
  const auto init = init_parameters(cfg, 3);
  std::mt19937_64 rng(2);
  std::vector<TokenSeq> data;
  for (int i = 0; i < 20; ++i) data.push_back(fixture::random_tokens(5, 10, rng));
  TrainConfig tc;
  tc.steps = 10;
  tc.batch_size = 4;
  tc.checkpoint_every = 4;
  tc.lr = 1e-2;
  tc.seed = 9;
  const auto a = train_stage(init, data, tc, Stage::Stage1);
  const auto b = train_stage(init, data, tc, Stage::Stage1);
  REQUIRE(a.size() == 4);  // steps 0, 4, 8, 10
  CHECK(a[0].step == 0);
  CHECK(a[1].step == 4);
  CHECK(a[2].step == 8);
  CHECK(a[3].step == 10);
  CHECK(*a[0].params == init);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i].params == *b[i].params);
  CHECK(a.back().loss < a.front().loss);

  tc.steps = 0;
  const auto z = train_stage(init, data, tc, Stage::Stage1);
  REQUIRE(z.size() == 1);
  CHECK(*z[0].params == init);
}

TEST_CASE("checkpoints round-trip and corrupt files are rejected") {
  const auto dir = temp_dir("ckpt");
  const auto cfg = fixture::tiny_config();
  Checkpoint ck;
  ck.params = std::make_shared<Parameters>(fixture::random_parameters(cfg, 1));
  ck.stage = Stage::Stage2;
  ck.step = 50;
  ck.loss = 1.25;
  save_checkpoint(dir / "a.ckpt", ck);
  const auto back = load_checkpoint(dir / "a.ckpt");
  CHECK(*back.params == *ck.params);
  CHECK(back.stage == Stage::Stage2);
  CHECK(back.step == 50);
  CHECK(back.loss == 1.25);

  {
    std::ofstream os(dir / "bad.ckpt", std::ios::binary);
    os << "NOTACKPT";
  }
  CHECK_THROWS_AS(load_parameters(dir / "bad.ckpt"), InvalidArgument);

  const auto size = fs::file_size(dir / "a.ckpt");
  fs::copy_file(dir / "a.ckpt", dir / "short.ckpt");
  fs::resize_file(dir / "short.ckpt", size - 8);
  CHECK_THROWS_AS(load_parameters(dir / "short.ckpt"), InvalidArgument);

  fs::copy_file(dir / "a.ckpt", dir / "long.ckpt");
  {
    std::ofstream os(dir / "long.ckpt", std::ios::binary | std::ios::app);
    os << 'x';
  }
  CHECK_THROWS_AS(load_parameters(dir / "long.ckpt"), InvalidArgument);
  fs::remove_all(dir);
}

TEST_CASE("knowledge probes read the first target token at the last prefix position") {
  const auto vocab = Vocabulary::from_tokens({"<pad>", "<bos>", "<unk>", "blick", "is", "a", "kind", "of", "animal", "tool"});
  const auto cfg = fixture::tiny_config(1, 1, 4, 4, 10, vocab.size());
  const auto p = fixture::random_parameters(cfg, 8);
  Sample s;
  s.prefix = "blick is a kind of";
  s.target = " animal";
  const auto probe = make_probe(vocab, s, cfg.context_len);
  CHECK(probe.prefix_len == 6);
  CHECK(probe.valid);
  const auto logits = oracle::forward_logits(p, probe.tokens);
  const int target = vocab.id("animal");
  CHECK(target_logit(p, s, vocab) == doctest::Approx(logits[5][static_cast<std::size_t>(target)]).epsilon(1e-12));

  Sample unk = s;
  unk.target = " zebra";
  CHECK_FALSE(make_probe(vocab, unk, cfg.context_len).valid);

  const std::vector<Sample> samples = {s, unk, s};
  const auto a = evaluate_knowledge(p, vocab, samples);
  const auto b = reference::evaluate_knowledge(p, vocab, samples);
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a[i].logit == b[i].logit);
    CHECK(a[i].logprob == b[i].logprob);
    CHECK(a[i].valid == b[i].valid);
  }
  CHECK(a[0].prob > 0.0);
  CHECK(a[0].prob < 1.0);
}
