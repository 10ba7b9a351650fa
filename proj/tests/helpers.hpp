#pragma once

#include <random>

#include "nodalbid/market/case.hpp"

namespace nodalbid::testutil {

struct RandomInstance {
  market::MarketCase c;
  Eigen::VectorXd strategic_bids;  // empty when no strategic unit
};

/// Random connected 2-6 bus case; p_min = 0 everywhere so the zero dispatch
/// is always feasible.
inline RandomInstance make_random_case(std::mt19937& rng) {
  std::uniform_int_distribution<int> nbus(2, 6);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> react(0.05, 0.5);
  std::uniform_real_distribution<double> cap(0.3, 1.5);
  std::uniform_real_distribution<double> gcap(0.5, 3.0);
  std::uniform_real_distribution<double> gbid(5.0, 50.0);
  std::uniform_real_distribution<double> lcap(0.2, 2.0);
  std::uniform_real_distribution<double> lbid(10.0, 80.0);

  market::MarketCase c;
  c.num_buses = nbus(rng);
  std::uniform_int_distribution<int> anybus(1, c.num_buses);
  // spanning tree keeps the network connected
  for (int b = 2; b <= c.num_buses; ++b) {
    market::Line ln;
    std::uniform_int_distribution<int> prev(1, b - 1);
    ln.from = prev(rng);
    ln.to = b;
    ln.reactance = react(rng);
    if (u01(rng) < 0.4) ln.capacity = cap(rng);
    c.lines.push_back(ln);
  }
  // a few redundant lines
  int extra = static_cast<int>(u01(rng) * 3);
  for (int e = 0; e < extra && c.num_buses > 2; ++e) {
    market::Line ln;
    ln.from = anybus(rng);
    ln.to = anybus(rng);
    if (ln.from == ln.to) continue;
    ln.reactance = react(rng);
    if (u01(rng) < 0.4) ln.capacity = cap(rng);
    c.lines.push_back(ln);
  }
  std::uniform_int_distribution<int> count(1, 3);
  int ng = count(rng), nd = count(rng);
  for (int g = 0; g < ng; ++g) {
    market::Generator gen;
    gen.bus = anybus(rng);
    gen.p_max = gcap(rng);
    gen.bid = gbid(rng);
    c.generators.push_back(gen);
  }
  for (int d = 0; d < nd; ++d) {
    market::Load ld;
    ld.bus = anybus(rng);
    ld.p_max = lcap(rng);
    ld.bid = {lbid(rng)};
    c.loads.push_back(ld);
  }
  RandomInstance inst;
  if (u01(rng) < 0.3) {
    auto& gen = c.generators[0];
    gen.strategic = true;
    gen.cost = 0.5 * gen.bid;
    inst.strategic_bids = Eigen::VectorXd::Constant(1, gbid(rng));
  } else {
    inst.strategic_bids = Eigen::VectorXd(0);
  }
  c.validate();
  inst.c = std::move(c);
  return inst;
}

/// Three-bus case with one strategic unit, one congestible line and one
/// unbounded line — small enough for dense cross-checks.
inline market::MarketCase small_strategic_case() {
  market::MarketCase c;
  c.num_buses = 3;
  auto line = [&](int f, int t, double x, double cap) {
    market::Line ln;
    ln.from = f;
    ln.to = t;
    ln.reactance = x;
    ln.capacity = cap;
    c.lines.push_back(ln);
  };
  line(1, 2, 0.1, 1.5);
  line(2, 3, 0.2, std::numeric_limits<double>::infinity());
  line(1, 3, 0.15, 2.0);
  market::Generator g1;
  g1.bus = 1;
  g1.p_max = 4;
  g1.strategic = true;
  g1.cost = 12;
  c.generators.push_back(g1);
  market::Generator g2;
  g2.bus = 2;
  g2.p_max = 2;
  g2.bid = 25;
  c.generators.push_back(g2);
  market::Load d1;
  d1.bus = 3;
  d1.p_max = 3;
  d1.bid = {40};
  c.loads.push_back(d1);
  market::Load d2;
  d2.bus = 2;
  d2.p_min = 0.2;
  d2.p_max = 1;
  d2.bid = {35};
  c.loads.push_back(d2);
  c.validate();
  return c;
}

}  // namespace nodalbid::testutil
