#include <doctest.h>

#include <sstream>

#include "npred/config.hpp"
#include "npred/errors.hpp"

using namespace npred;

namespace {

AppConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

}  // namespace

TEST_CASE("empty config keeps defaults") {
  const AppConfig c = parse("# nothing\n\n");
  const AppConfig d;
  CHECK(c.mpc.N == d.mpc.N);
  CHECK(c.train.K == d.train.K);
  CHECK(c.sim.reference.kind == RefKind::kCircle);
  CHECK(c.sim.events.empty());
}

TEST_CASE("settings apply") {
  const AppConfig c = parse(
      "mpc.N = 12   # shorter horizon\n"
      "train.hidden = 32, 16\n"
      "sim.reference = lemniscate\n"
      "sim.center = 1, 2, 3\n"
      "mpc.injection = discrete_add\n"
      "train.discount = trajectory\n"
      "cert.n_list = 1, 2\n"
      "mpc.state_boxes = false\n");
  CHECK(c.mpc.N == 12);
  CHECK(c.train.hidden == std::vector<int>{32, 16});
  CHECK(c.sim.reference.kind == RefKind::kLemniscate);
  CHECK(c.sim.reference.center.isApprox(Vec3(1, 2, 3)));
  CHECK(c.mpc.injection == WrenchInjection::kDiscreteAdd);
  CHECK(c.train.discount == DiscountMode::kTrajectoryIndex);
  CHECK(c.cert_n_list == std::vector<int>{1, 2});
  CHECK_FALSE(c.mpc.state_boxes);
}

TEST_CASE("unknown keys are hard errors with the line number") {
  try {
    parse("mpc.N = 10\n\ntrain.epoch = 5\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("train.epoch") != std::string::npos);
  }
}

TEST_CASE("malformed values and lines") {
  CHECK_THROWS_AS(parse("mpc.N = ten\n"), ConfigError);
  CHECK_THROWS_AS(parse("mpc.N\n"), ConfigError);
  CHECK_THROWS_AS(parse("mpc.Q = 1, 2\n"), ConfigError);
  CHECK_THROWS_AS(parse("sim.reference = square\n"), ConfigError);
  CHECK_THROWS_AS(parse("mpc.N = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("sim.event_mass = 0.1\n"), ConfigError);
}

TEST_CASE("event needs a time") {
  const AppConfig c = parse("sim.event_time = 5\nsim.event_mass = 0.1\n");
  REQUIRE(c.sim.events.size() == 1);
  CHECK(c.sim.events[0].time == 5.0);
  CHECK(c.sim.events[0].payload_mass_delta == 0.1);
}

TEST_CASE("every listed key is settable") {
  const auto keys = config_keys();
  CHECK(keys.size() > 50);
  CHECK(std::is_sorted(keys.begin(), keys.end()));
  AppConfig c;
  CHECK_THROWS_AS(apply_setting(c, "nope.nope", "1"), ConfigError);
}

TEST_CASE("seed reaches trainer and reference") {
  AppConfig c;
  c.set_seed(99);
  CHECK(c.train.seed == 99);
  CHECK(c.sim.reference.seed == 99);
}
