#include "airfc/config.hpp"

#include <catch_amalgamated.hpp>

using namespace airfc;

namespace {

ConfigError config_error_of(const std::string& yaml) {
    try {
        parse_config(yaml);
    } catch (const ConfigError& e) {
        return e;
    }
    FAIL("expected ConfigError");
    return ConfigError("", 0, "");
}

const char* kMinimal = R"(seed: 3
system:
  antennas: 4
  p_max_w: 4
  p_relay_w: 1
topology:
  d_max_m: 100
  groups: 2
  relays_per_group: 3
)";

}  // namespace

TEST_CASE("config: minimal explicit file") {
    const ExperimentConfig c = parse_config(kMinimal);
    CHECK(c.seed == 3);
    CHECK(c.antennas == 4);
    CHECK(c.groups == 2);
    CHECK(c.relays_per_group == 3);
    CHECK(c.ao.max_iters == 200);
    CHECK(c.ao.regularizer == RegularizerMode::NoiseAware);
    CHECK_FALSE(c.sweep);
}

TEST_CASE("config: table1 preset") {
    const ExperimentConfig c = parse_config("defaults: table1\n");
    CHECK(c.antennas == 49);
    CHECK(c.p_max_w == 49.0);
    CHECK(c.carrier_frequency_hz == 28e9);
    CHECK(c.d_max_m == 200.0);
    CHECK(c.groups == 5);
    CHECK(c.relays_per_group == 12);
    CHECK(c.p_relay_w == 1.0);
    CHECK(c.rician_kappa == 1.0);
    CHECK_FALSE(c.direct_link);
    // -174 dBm/Hz over 300 MHz
    CHECK(std::abs(10.0 * std::log10(c.thermal_noise_w()) + 30.0 - (-174.0 + 10.0 * std::log10(300e6))) < 1e-9);
    CHECK(parse_config("defaults: table1\nsystem: {antennas: 8}\n").p_max_w == 8.0);
}

TEST_CASE("config: unknown key reports field and line") {
    const ConfigError e = config_error_of("defaults: table1\nsystem:\n  antennas: 4\n  antenas: 5\n");
    CHECK(e.field() == "system.antenas");
    CHECK(e.line() == 4);
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
}

TEST_CASE("config: missing required fields are named") {
    CHECK(config_error_of("system: {p_max_w: 1, p_relay_w: 1}\n").field() == "system.antennas");
    CHECK(config_error_of("system: {antennas: 2, p_relay_w: 1}\n").field() == "system.p_max_w");
    CHECK(config_error_of("system: {antennas: 2, p_max_w: 1, p_relay_w: 1}\ntopology: {d_max_m: 50, groups: 1}\n")
              .field() == "topology.relays_per_group");
}

TEST_CASE("config: range checks") {
    CHECK(config_error_of("defaults: table1\ntopology: {rician_kappa: -0.5}\n").field() == "topology.rician_kappa");
    CHECK(config_error_of("defaults: table1\nsystem: {p_max_w: 0}\n").field() == "system.p_max_w");
    CHECK(config_error_of("defaults: table1\nsystem: {p_max_w: -2}\n").field() == "system.p_max_w");
    CHECK(config_error_of("defaults: table1\ntopology: {groups: 0}\n").field() == "topology.groups");
    CHECK(config_error_of("defaults: table1\ntopology: {rician_kappa: 1, rician_k_db: 0}\n").field().rfind("topology.", 0) == 0);
    CHECK(config_error_of("defaults: table1\ntask: {classes: 1}\n").field() == "task.classes");
    CHECK(config_error_of("defaults: table1\ntask: {spread: 0}\n").field() == "task.spread");
    CHECK(config_error_of("defaults: table1\nao: {regularizer: magic}\n").field() == "ao.regularizer");
    CHECK(config_error_of("defaults: table1\nsystem: {antennas: four}\n").field() == "system.antennas");
    CHECK(config_error_of("defaults: table2\n").field() == "defaults");
    CHECK(config_error_of("system: [1, 2\n").field() == "<syntax>");
    CHECK(parse_config("defaults: table1\ntopology: {rician_k_db: 10}\n").rician_kappa == Catch::Approx(10.0));
}

TEST_CASE("config: sweep grid fills the single-run topology") {
    const ExperimentConfig c = parse_config(R"(
system: {antennas: 4, p_max_w: 4}
sweep:
  groups: [1, 2]
  relays_per_group: [4, 8, 16]
  p_relay_w: [1]
  d_max_m: [200]
  direct_link: [false, true]
  trials: 5
)");
    REQUIRE(c.sweep);
    CHECK(c.sweep->trials == 5);
    const auto pts = c.sweep->points();
    CHECK(pts.size() == 12);
    CHECK(pts[0] == GridPoint{1, 4, 1.0, 200.0, false});
    CHECK(pts[1] == GridPoint{1, 8, 1.0, 200.0, false});
    CHECK(pts[3] == GridPoint{2, 4, 1.0, 200.0, false});
    CHECK(pts[6] == GridPoint{1, 4, 1.0, 200.0, true});
    CHECK(c.groups == 1);
    CHECK(c.p_relay_w == 1.0);
}

TEST_CASE("config: hash tracks semantic fields only") {
    const std::string base = config_hash(parse_config(kMinimal));
    CHECK(base.size() == 64);
    CHECK(config_hash(parse_config(kMinimal)) == base);
    CHECK(config_hash(parse_config(std::string(kMinimal) + "output: {dir: elsewhere, workers: 3, plots: false}\n")) == base);
    CHECK(config_hash(parse_config(std::string(kMinimal) + "ao: {max_iters: 50}\n")) != base);
    CHECK(config_hash(parse_config(std::string(kMinimal) + "task: {spread: 0.5}\n")) != base);
    std::string reseeded = kMinimal;
    reseeded.replace(reseeded.find("seed: 3"), 7, "seed: 4");
    CHECK(config_hash(parse_config(reseeded)) != base);
    // an explicit value equal to the default is the same configuration
    CHECK(config_hash(parse_config(std::string(kMinimal) + "ao: {max_iters: 200}\n")) == base);
}
