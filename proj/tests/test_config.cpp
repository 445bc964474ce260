#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cetn/config.hpp"

using namespace cetn;

TEST_CASE("toml subset parsing") {
  auto flat = parse_toml(R"(
# experiment
[data]
dir = "out/frappe"   # prepared data

[model]
variant = "cetn"
hidden_dims = [400, 400, 400]
ablations = []
fusion_shared = true

[loss]
alpha = 0.2
tau = 0.2
)");
  CHECK(flat.at("data.dir").as_string("") == "out/frappe");
  CHECK(flat.at("model.hidden_dims").as_numbers("").size() == 3);
  CHECK(flat.at("model.fusion_shared").as_bool(""));
  CHECK(flat.at("loss.alpha").as_double("") == 0.2);
  CHECK_THROWS_AS(parse_toml("[x\nk = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_toml("novalue\n"), ConfigError);
}

TEST_CASE("defaults match the documented setup") {
  ExperimentConfig cfg = ExperimentConfig::resolve({});
  CHECK(cfg.trainer.lr == 0.001);
  CHECK(cfg.trainer.batch_size == 10000);
  CHECK(cfg.trainer.patience == 2);
  CHECK(cfg.trainer.max_epochs == 100);
  CHECK(cfg.model.embedding_dim == 20);
  CHECK(cfg.model.value_dim == 64);
  CHECK(cfg.model.hidden_dims == std::vector<int>{400, 400, 400});
  CHECK(cfg.loss.tau == 0.2);
  CHECK(cfg.min_count == 2);
  CHECK(cfg.split.ratios == std::array<double, 3>{0.7, 0.2, 0.1});
}

TEST_CASE("overrides take precedence and accept bare strings") {
  FlatConfig flat = parse_toml("[loss]\nalpha = 0.3\n");
  apply_override(flat, "loss.alpha=0");
  apply_override(flat, "model.variant=simmhn");
  apply_override(flat, "model.hidden_dims=[32,16]");
  ExperimentConfig cfg = ExperimentConfig::resolve(flat);
  CHECK(cfg.loss.alpha == 0.0);
  CHECK(cfg.model.kind == ModelKind::SimMhn);
  CHECK(cfg.model.hidden_dims == std::vector<int>{32, 16});
}

TEST_CASE("unknown keys are rejected") {
  FlatConfig flat = parse_toml("[loss]\nalhpa = 0.3\n");
  CHECK_THROWS_WITH_AS(ExperimentConfig::resolve(flat), doctest::Contains("alhpa"),
                       ConfigError);
}

TEST_CASE("echo round-trips exact values") {
  FlatConfig flat = parse_toml(R"(
[loss]
alpha = 0.15
beta_ep = 0.3
beta_ip = 0.2
tau = 0.2
[model]
ablations = ["CL", "T"]
activations = ["leaky_relu", "relu", "tanh"]
[train]
seed = 20240809
lr = 0.001
)");
  ExperimentConfig cfg = ExperimentConfig::resolve(flat);
  const std::string echo = cfg.echo_toml();
  ExperimentConfig again = ExperimentConfig::resolve(parse_toml(echo));
  CHECK(again.loss.alpha == cfg.loss.alpha);
  CHECK(again.loss.beta_ep == cfg.loss.beta_ep);
  CHECK(again.loss.beta_ip == cfg.loss.beta_ip);
  CHECK(again.loss.tau == cfg.loss.tau);
  CHECK(again.trainer.seed == cfg.trainer.seed);
  CHECK(again.trainer.lr == cfg.trainer.lr);
  CHECK(again.model.ablations == cfg.model.ablations);
  CHECK(again.model.space_acts == cfg.model.space_acts);
  // the echo of the echo is byte-identical
  CHECK(again.echo_toml() == echo);
}

TEST_CASE("non-trivial doubles round-trip bit-exactly through the echo") {
  ExperimentConfig cfg = ExperimentConfig::resolve({});
  cfg.loss.alpha = 0.1 + 0.2;  // 0.30000000000000004
  cfg.trainer.lr = 1.0 / 3.0;
  ExperimentConfig again = ExperimentConfig::resolve(parse_toml(cfg.echo_toml()));
  CHECK(again.loss.alpha == cfg.loss.alpha);
  CHECK(again.trainer.lr == cfg.trainer.lr);
}

TEST_CASE("invalid loss weights are rejected at resolve time") {
  FlatConfig flat = parse_toml("[loss]\ntau = 0.0\n");
  CHECK_THROWS_AS(ExperimentConfig::resolve(flat), ConfigError);
  FlatConfig neg = parse_toml("[loss]\nalpha = -0.5\n");
  CHECK_THROWS_AS(ExperimentConfig::resolve(neg), ConfigError);
}
