#include <doctest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "spx/error.hpp"
#include "spx/trainer.hpp"

using namespace spx;

namespace {

std::vector<MixtureExample> tiny_set(int count, std::uint64_t seed) {
  static const CorpusIndex index =
      make_synthetic_corpus(test::temp_dir("trainer_corpus"), 4, 3, {1.2, 1.6}, 21);
  CorpusReader reader(index);
  std::mt19937_64 rng(seed);
  CleanMixOptions o;
  o.duration_range = {1.0, 1.0};
  o.batch_duration_s = 1.0;
  std::vector<MixtureExample> out;
  for (int i = 0; i < count; ++i) out.push_back(draw_clean_example(rng, reader, o));
  return out;
}

ModelConfig tiny_model() { return ModelConfig::standard().scaled(64); }

TrainConfig tiny_config() {
  TrainConfig c;
  c.batch_size = 2;
  c.max_steps = 3;
  c.validate_every = 0;
  c.duration_range = {0.5, 1.0};
  c.seed = 5;
  return c;
}

std::vector<std::vector<float>> snapshot(Network<float>& net) {
  std::vector<std::vector<float>> out;
  for (const auto& p : net.parameters()) out.emplace_back(p.value.begin(), p.value.end());
  for (const auto& b : net.buffers()) out.emplace_back(b.value.begin(), b.value.end());
  return out;
}

}  // namespace

TEST_CASE("config validation") {
  auto c = tiny_config();
  CHECK_NOTHROW(c.validate());
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = tiny_config();
  c.learning_rate = -1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = tiny_config();
  c.weights = {0.5, 0.6};
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK_THROWS_AS(Trainer(tiny_model(), tiny_config(), {}), Error);
}

TEST_CASE("batches hold equal-length crops") {
  Trainer tr(tiny_model(), tiny_config(), tiny_set(3, 1));
  for (int k = 0; k < 4; ++k) {
    const auto batch = tr.next_batch();
    REQUIRE(batch.size() == 2);
    const std::size_t n = batch[0].mixture.size();
    CHECK(n >= 4000);
    CHECK(n <= 8000);
    for (const auto& it : batch) {
      CHECK(it.mixture.size() == n);
      CHECK(it.target_1.size() == n);
      CHECK(it.target_2.size() == n);
      CHECK(it.reference_1.size() == n);
      CHECK(it.reference_2.size() == n);
    }
  }
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  auto c = tiny_config();
  c.learning_rate = 0.0;
  Trainer tr(tiny_model(), c, tiny_set(2, 2));
  std::vector<std::vector<float>> before;
  for (const auto& p : tr.network().parameters()) before.emplace_back(p.value.begin(), p.value.end());
  tr.step();
  tr.step();
  std::size_t i = 0;
  for (const auto& p : tr.network().parameters())
    CHECK(std::equal(p.value.begin(), p.value.end(), before[i++].begin()));
  CHECK(tr.state().step == 2);
}

TEST_CASE("a step changes parameters and reports finite losses") {
  Trainer tr(tiny_model(), tiny_config(), tiny_set(2, 3));
  const auto before = snapshot(tr.network());
  const auto rec = tr.step();
  CHECK_FALSE(rec.rejected);
  CHECK(std::isfinite(rec.loss.combined));
  CHECK(rec.loss.combined == doctest::Approx(combined_loss(rec.loss.si_sdr_pair, rec.loss.mse_pair, {})));
  CHECK(snapshot(tr.network()) != before);
}

TEST_CASE("swapping the speaker labels gives the identical loss and gradients") {
  const auto set = tiny_set(1, 4);
  const auto& ex = set[0];
  Trainer a(tiny_model(), tiny_config(), set);
  Trainer b(tiny_model(), tiny_config(), set);
  const TrainItem it{ex.mixture, ex.target_1, ex.target_2, ex.reference_1, ex.reference_2};
  const TrainItem sw{ex.mixture, ex.target_2, ex.target_1, ex.reference_2, ex.reference_1};
  const auto la = a.loss_and_gradients({it});
  const auto lb = b.loss_and_gradients({sw});
  CHECK(la.combined == lb.combined);
  CHECK(la.si_sdr_pair == lb.si_sdr_pair);
  CHECK(la.mse_pair == lb.mse_pair);
  auto pa = a.network().parameters();
  auto pb = b.network().parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    CHECK(std::equal(pa[i].grad.begin(), pa[i].grad.end(), pb[i].grad.begin()));
}

TEST_CASE("two runs with one seed are identical; resume matches an uninterrupted run") {
  const auto set = tiny_set(3, 5);
  auto c = tiny_config();
  c.max_steps = 4;
  Trainer full(tiny_model(), c, set);
  full.run();
  Trainer again(tiny_model(), c, set);
  again.run();
  CHECK(full.network() == again.network());

  const auto dir = test::temp_dir("resume");
  auto half = c;
  half.max_steps = 2;
  half.checkpoint_dir = dir;
  Trainer first(tiny_model(), half, set);
  first.run();
  CHECK(std::filesystem::exists(dir / Trainer::kStateFile));
  CHECK(std::filesystem::exists(dir / Trainer::kLatestFile));
  CHECK(std::filesystem::exists(dir / Trainer::kLogFile));

  Trainer resumed(tiny_model(), c, set);
  resumed.load_state(dir / Trainer::kStateFile);
  CHECK(resumed.state().step == 2);
  resumed.run();
  CHECK(resumed.state().step == 4);
  CHECK(resumed.network() == full.network());
  CHECK(resumed.state().adam_m == full.state().adam_m);
  CHECK(resumed.state().adam_v == full.state().adam_v);
}

TEST_CASE("missing or corrupt checkpoints are reported") {
  Trainer tr(tiny_model(), tiny_config(), tiny_set(1, 6));
  const auto dir = test::temp_dir("badstate");
  try {
    tr.load_state(dir / "nope.spxt");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kCheckpoint);
  }
  tr.network().save(dir / "net.spxn");
  CHECK_THROWS_AS(tr.load_state(dir / "net.spxn"), Error);
}

TEST_CASE("non-finite losses are rejected, then abort") {
  auto c = tiny_config();
  c.max_rejected_steps = 3;
  const auto set = tiny_set(1, 7);
  Trainer tr(tiny_model(), c, set);
  const TrainItem item{set[0].mixture, set[0].target_1, set[0].target_2, set[0].reference_1, set[0].reference_2};
  auto& bias = tr.network().output_layer().bias;
  std::fill(bias.begin(), bias.end(), std::numeric_limits<float>::infinity());
  const auto before = snapshot(tr.network());
  CHECK(tr.step_on({item}).rejected);
  CHECK(tr.step_on({item}).rejected);
  CHECK(snapshot(tr.network()) == before);
  CHECK(tr.state().step == 0);
  try {
    tr.step_on({item});
    FAIL("expected an abort");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kTrainingStep);
  }
}

TEST_CASE("bad audio inside a batch surfaces as an error, not a crash") {
  const auto set = tiny_set(1, 7);
  Trainer tr(tiny_model(), tiny_config(), set);
  TrainItem item{set[0].mixture, set[0].target_1, set[0].target_2, set[0].reference_1, set[0].reference_2};
  item.mixture.samples[100] = std::nan("");
  CHECK_THROWS_AS(tr.step_on({item}), Error);
  TrainItem quiet{set[0].mixture, set[0].target_1, set[0].target_2, set[0].reference_1, set[0].reference_2};
  std::fill(quiet.target_2.samples.begin(), quiet.target_2.samples.end(), 0.0);
  CHECK_THROWS_AS(tr.step_on({quiet}), Error);
}

TEST_CASE("crops avoid segments where a speaker is silent") {
  auto set = tiny_set(2, 9);
  for (auto& ex : set) {
    // Speaker 2 only occupies the first quarter second.
    for (std::size_t i = 2000; i < ex.size(); ++i) ex.target_2.samples[i] = 0.0;
  }
  auto c = tiny_config();
  c.duration_range = {0.5, 0.5};
  Trainer tr(tiny_model(), c, set);
  for (int k = 0; k < 10; ++k)
    for (const auto& it : tr.next_batch()) {
      double e = 0.0;
      for (double v : it.target_2.samples) e += v * v;
      CHECK(e > 0.0);
    }
}

TEST_CASE("unequal lengths inside a batch are refused") {
  const auto set = tiny_set(2, 8);
  Trainer tr(tiny_model(), tiny_config(), set);
  TrainItem a{set[0].mixture, set[0].target_1, set[0].target_2, set[0].reference_1, set[0].reference_2};
  TrainItem b = a;
  b.mixture.samples.resize(b.mixture.size() - 10);
  CHECK_THROWS_AS(tr.loss_and_gradients({a, b}), Error);
}
