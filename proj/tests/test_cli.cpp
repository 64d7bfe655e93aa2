#include <doctest.h>

#include <fstream>

#include "../tools/settings.hpp"
#include "helpers.hpp"
#include "spx/error.hpp"

using namespace spx;
using spx::cli::Settings;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::kInvalidArgument;
}

}  // namespace

TEST_CASE("defaults build the standard objects") {
  const Settings s;
  CHECK(s.model() == ModelConfig::standard());
  const auto t = s.train();
  CHECK(t.learning_rate == 0.001);
  CHECK(t.batch_size == 16);
  CHECK(t.weights.beta_sisdr == 0.75);
  CHECK(t.weights.beta_mse == 0.25);
  const auto st = s.stft();
  CHECK(st.frame_size == 256);
  CHECK(st.hop == 64);
  CHECK(st.keep_bins == 128);
}

TEST_CASE("assignments, files and precedence") {
  const auto dir = test::temp_dir("cli_settings");
  std::ofstream(dir / "run.cfg") << "# comment\n"
                                    "train.lr = 0.01   # trailing\n"
                                    "\n"
                                    "model.width_divisor = 16\n"
                                    "model.feature_mode = ls\n";
  Settings s;
  s.load_file(dir / "run.cfg");
  s.apply("train.lr=0.02");
  CHECK(s.num("train.lr") == 0.02);
  CHECK(s.model() == ModelConfig::standard(FeatureMode::kLS).scaled(16));
  CHECK(s.dump().find("train.lr = 0.02") != std::string::npos);
}

TEST_CASE("bad settings are configuration errors") {
  Settings s;
  CHECK(kind_of([&] { s.set("train.learning_rate", "1"); }) == ErrorKind::kConfig);
  CHECK(kind_of([&] { s.apply("no-equals-sign"); }) == ErrorKind::kConfig);
  s.set("train.batch_size", "many");
  CHECK(kind_of([&] { s.integer("train.batch_size"); }) == ErrorKind::kConfig);
  Settings f;
  f.set("model.feature_mode", "polar");
  CHECK(kind_of([&] { f.model(); }) == ErrorKind::kConfig);
  Settings g;
  g.set("train.clip", "maybe");
  CHECK(kind_of([&] { g.flag("train.clip"); }) == ErrorKind::kConfig);
  const auto dir = test::temp_dir("cli_bad");
  std::ofstream(dir / "bad.cfg") << "train.unknown = 3\n";
  Settings h;
  CHECK(kind_of([&] { h.load_file(dir / "bad.cfg"); }) == ErrorKind::kConfig);
}

TEST_CASE("every key is documented") {
  const auto help = cli::keys_help();
  for (const auto& k : cli::known_keys()) CHECK(help.find(k.key) != std::string::npos);
}
