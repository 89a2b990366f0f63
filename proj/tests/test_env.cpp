#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "alix/env.hpp"

using namespace alix;

namespace {

std::array<double, 2> random_action(Rng& rng) { return {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)}; }

}  // namespace

TEST_CASE("reset") {
  DotReacher a, b;
  SUBCASE("same seed gives identical observations") { CHECK(a.reset(7).pixels == b.reset(7).pixels); }
  SUBCASE("different seeds move the goal") {
    std::set<std::pair<double, double>> goals;
    for (std::uint64_t s = 0; s < 50; ++s) {
      a.reset(s);
      goals.emplace(a.state().gx, a.state().gy);
    }
    CHECK(goals.size() == 50);
  }
  SUBCASE("observation layout and range") {
    auto o = a.reset(3);
    CHECK(o.pixels.size() == 2 * 32 * 32);
    std::vector<double> frame = a.render();
    for (double v : frame) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(*std::max_element(o.pixels.begin(), o.pixels.end()) == 255);
  }
}

TEST_CASE("step") {
  DotReacher env;
  env.reset(1);
  SUBCASE("agent on goal earns the sparse reward") {
    DotReacherState s = env.state();
    s.x = s.gx;
    s.y = s.gy;
    env.set_state(s);
    auto r = env.step({0.0, 0.0});
    CHECK(r.reward == 0.1);
  }
  SUBCASE("zero action from rest keeps the position") {
    const DotReacherState s0 = env.state();
    auto r = env.step({0.0, 0.0});
    CHECK(env.state().x == s0.x);
    CHECK(env.state().y == s0.y);
    CHECK(r.reward == (std::hypot(s0.x - s0.gx, s0.y - s0.gy) < 0.07 ? 0.1 : 0.0));
  }
  SUBCASE("dense mode pays negative scaled distance") {
    DotReacherConfig cfg;
    cfg.mode = RewardMode::dense;
    DotReacher d(cfg);
    d.reset(2);
    auto r = d.step({0.0, 0.0});
    CHECK(r.reward == doctest::Approx(-0.1 * d.distance()));
  }
  SUBCASE("out-of-box actions are clamped and flagged") {
    DotReacher a, b;
    a.reset(4);
    b.reset(4);
    auto ra = a.step({3.0, -2.0});
    auto rb = b.step({1.0, -1.0});
    CHECK(ra.clamped_action);
    CHECK_FALSE(rb.clamped_action);
    CHECK(ra.obs.pixels == rb.obs.pixels);
  }
  SUBCASE("episode ends at the step limit") {
    int steps = 0;
    bool done = false;
    while (!done) {
      done = env.step({0.1, 0.1}).done;
      ++steps;
    }
    CHECK(steps == 100);
  }
  SUBCASE("positions stay in the unit square") {
    Rng rng(5);
    for (int t = 0; t < 99; ++t) {
      env.step({1.0, -1.0});
      CHECK(env.state().x >= 0.0);
      CHECK(env.state().x <= 1.0);
      CHECK(env.state().y >= 0.0);
      CHECK(env.state().y <= 1.0);
    }
  }
  SUBCASE("frames stack oldest first") {
    auto before = env.observation();
    auto r = env.step({1.0, 1.0});
    CHECK(std::equal(before.pixels.begin() + 1024, before.pixels.end(), r.obs.pixels.begin()));
  }
}

TEST_CASE("trajectories are deterministic given seed and actions") {
  DotReacher a, b;
  a.reset(11);
  b.reset(11);
  Rng ra(3), rb(3);
  for (int t = 0; t < 100; ++t) {
    auto x = a.step(random_action(ra));
    auto y = b.step(random_action(rb));
    REQUIRE(x.obs.pixels == y.obs.pixels);
    REQUIRE(x.reward == y.reward);
  }
}

TEST_CASE("random policy reward is sparse") {
  DotReacher env;
  Rng rng(17);
  std::size_t nonzero = 0, total = 0;
  std::uint64_t episode = 0;
  env.reset(episode);
  while (total < 15000) {
    auto r = env.step(random_action(rng));
    nonzero += r.reward != 0.0;
    ++total;
    if (r.done) env.reset(++episode);
  }
  const double frac = double(nonzero) / double(total);
  MESSAGE("non-zero reward fraction " << frac);
  CHECK(frac < 0.10);
  CHECK(nonzero > 0);
}

TEST_CASE("proprio matches the rendered agent centroid") {
  DotReacher env;
  Rng rng(19);
  int checked = 0;
  for (int t = 0; t < 500; ++t) {
    DotReacherState s;
    s.x = rng.uniform(0.0, 1.0);
    s.y = rng.uniform(0.0, 1.0);
    s.gx = rng.uniform(0.0, 1.0);
    s.gy = rng.uniform(0.0, 1.0);
    if (std::hypot(s.x - s.gx, s.y - s.gy) * 31.0 < 5.0) continue;
    env.set_state(s);
    auto img = env.render();
    // Agent pixels are the only ones brighter than the goal dot.
    double wr = 0, wc = 0, w = 0;
    for (std::size_t i = 0; i < 32; ++i)
      for (std::size_t j = 0; j < 32; ++j) {
        const double v = std::max(img[i * 32 + j] - 0.5, 0.0);
        wr += v * double(i), wc += v * double(j), w += v;
      }
    REQUIRE(w > 0.0);
    const auto p = env.proprio();
    const auto [pr, pc] = to_pixel(p[0], p[1], 32);
    CHECK(std::abs(wr / w - pr) <= 1.0);
    CHECK(std::abs(wc / w - pc) <= 1.0);
    CHECK(p[4] == s.gx);
    CHECK(p[5] == s.gy);
    ++checked;
  }
  CHECK(checked > 300);
}

TEST_CASE("moving the agent one pixel changes a bounded neighbourhood") {
  DotReacher env;
  DotReacherState s{0.4, 0.5, 0, 0, 0.9, 0.1, 0};
  env.set_state(s);
  auto a = env.render();
  s.x += 1.0 / 31.0;
  env.set_state(s);
  auto b = env.render();
  const auto [r0, c0] = to_pixel(0.4, 0.5, 32);
  for (std::size_t i = 0; i < 32; ++i)
    for (std::size_t j = 0; j < 32; ++j)
      if (a[i * 32 + j] != b[i * 32 + j]) {
        CHECK(std::abs(double(i) - r0) <= 3.0);
        CHECK(std::abs(double(j) - c0) <= 4.0);
      }
}

TEST_CASE("proprio bounds over random rollouts") {
  DotReacher env;
  env.reset(23);
  Rng rng(29);
  const double vmax = 0.02 / (1.0 - 0.8);
  for (int t = 0; t < 99; ++t) {
    env.step(random_action(rng));
    auto p = env.proprio();
    for (int k : {0, 1, 4, 5}) CHECK((p[k] >= 0.0 && p[k] <= 1.0));
    for (int k : {2, 3}) CHECK(std::abs(p[k]) <= vmax + 1e-12);
  }
}
