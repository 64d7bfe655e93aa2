#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "spx/error.hpp"
#include "spx/evaluation.hpp"
#include "spx/manifest.hpp"
#include "spx/objectives.hpp"

using namespace spx;

namespace {

double energy(const std::vector<double>& v) {
  double e = 0.0;
  for (double x : v) e += x * x;
  return e;
}

}  // namespace

TEST_CASE("decomposition of pure target, pure interference and their sum") {
  std::mt19937_64 rng(1);
  const auto s = test::noise(rng, 2000);
  auto i = test::noise(rng, 2000);
  // Orthogonalize so that pure interference has no target component.
  double si = 0.0, ss = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    si += s.samples[k] * i.samples[k];
    ss += s.samples[k] * s.samples[k];
  }
  for (std::size_t k = 0; k < s.size(); ++k) i.samples[k] -= si / ss * s.samples[k];

  const auto d1 = decompose(s.samples, s.samples, i.samples);
  CHECK(test::rel_error(d1.s_target, s.samples) < 1e-10);
  CHECK(energy(d1.e_interf) < 1e-18 * energy(s.samples));
  CHECK(sdr(d1) == kSiSdrCapDb);

  const auto d2 = decompose(i.samples, s.samples, i.samples);
  CHECK(energy(d2.s_target) < 1e-18 * energy(i.samples));
  CHECK(sir(d2) == -kSiSdrCapDb);

  std::vector<double> y(2000);
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = s.samples[k] + 0.1 * i.samples[k];
  const auto d3 = decompose(y, s.samples, i.samples);
  for (std::size_t k = 0; k < y.size(); ++k)
    CHECK(d3.s_target[k] + d3.e_interf[k] + d3.e_artif[k] == doctest::Approx(y[k]).epsilon(1e-12));
  const double expected = 20.0 + 10.0 * std::log10(energy(s.samples) / energy(i.samples));
  CHECK(sir(d3) == doctest::Approx(expected).epsilon(1e-8));
  CHECK(energy(d3.e_artif) < 1e-20 * energy(y));
}

TEST_CASE("sir of the mixture with equal-power orthogonal sources is 0 dB") {
  std::vector<double> s(400), i(400), y(400);
  for (int k = 0; k < 400; ++k) {
    s[k] = std::sin(2 * M_PI * 5 * k / 400.0);
    i[k] = std::cos(2 * M_PI * 5 * k / 400.0);
    y[k] = s[k] + i[k];
  }
  const auto d = decompose(y, s, i);
  CHECK(sir(d) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(sdr(d) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("artifacts lower sdr but not sir") {
  std::mt19937_64 rng(2);
  const auto s = test::noise(rng, 3000);
  const auto i = test::noise(rng, 3000);
  const auto a = test::noise(rng, 3000, 0.3);
  std::vector<double> y(3000);
  for (int k = 0; k < 3000; ++k) y[k] = s.samples[k] + 0.1 * i.samples[k] + a.samples[k];
  const auto d = decompose(y, s.samples, i.samples);
  CHECK(sir(d) >= sdr(d));
  CHECK(sir(d) == doctest::Approx(20.0).epsilon(0.05));
}

TEST_CASE("collinear references are rejected") {
  std::mt19937_64 rng(3);
  const auto s = test::noise(rng, 500);
  std::vector<double> i = s.samples;
  for (auto& v : i) v *= -2.0;
  try {
    decompose(s.samples, s.samples, i);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDecomposition);
  }
  std::vector<double> short_(10);
  CHECK_THROWS_AS(decompose(s.samples, s.samples, short_), Error);
}

TEST_CASE("si_sdri is zero for the mixture and positive for the target") {
  std::mt19937_64 rng(4);
  const auto s1 = test::noise(rng, 1000);
  const auto s2 = test::noise(rng, 1000);
  AudioBuffer mix(1000, 8000.0);
  for (int k = 0; k < 1000; ++k) mix.samples[k] = s1.samples[k] + s2.samples[k];
  CHECK(si_sdri(s1, mix, mix) == 0.0);
  CHECK(si_sdri(s1, s1, mix) > 90.0);
}

TEST_CASE("oracle baseline reproduces a signal from its own phase") {
  std::mt19937_64 rng(5);
  const auto s = test::bandlimited_noise(rng, 4000);
  const auto y = oracle_mask_baseline(s, s);
  REQUIRE(y.size() == s.size());
  CHECK(test::rel_error(y.samples, s.samples) < 1e-6);
}

TEST_CASE("system tags") {
  for (auto t : {SystemTag::kMixture, SystemTag::kOracle, SystemTag::kProposed, SystemTag::kProposedLs})
    CHECK(parse_system(to_string(t)) == t);
  try {
    parse_system("wiener");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfig);
  }
}

TEST_CASE("evaluation reports count both speakers and summarize") {
  const auto root = test::temp_dir("eval_corpus");
  const auto index = make_synthetic_corpus(root / "corpus", 3, 3, {1.0, 1.5}, 31);
  CorpusReader reader(index);
  ManifestHeader h;
  h.seed = 9;
  h.duration_range = {1.0, 1.0};
  const auto examples = synthesize_examples(reader, nullptr, h, 3);
  auto mix = evaluate_examples(SystemTag::kMixture, examples, nullptr);
  CHECK(mix.records.size() == 6);
  for (const auto& r : mix.records) CHECK(r.si_sdri == 0.0);
  CHECK(mix.si_sdri.mean == 0.0);
  auto oracle = evaluate_examples(SystemTag::kOracle, examples, nullptr);
  CHECK(oracle.si_sdri.mean > 0.0);
  CHECK_THROWS_AS(evaluate_examples(SystemTag::kProposed, examples, nullptr), Error);

  const auto path = root / "report.jsonl";
  write_report(oracle, path);
  std::ifstream is(path);
  int lines = 0;
  for (std::string line; std::getline(is, line);) ++lines;
  CHECK(lines == 7);
  CHECK(format_summary(oracle).find("oracle") != std::string::npos);
}
