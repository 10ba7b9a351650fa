#include "nodalbid/market/case.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace nodalbid::market {

using nlohmann::json;

int MarketCase::num_strategic() const {
  int s = 0;
  for (const auto& g : generators) s += g.strategic ? 1 : 0;
  return s;
}

std::vector<int> MarketCase::strategic_idx() const {
  std::vector<int> out;
  for (size_t i = 0; i < generators.size(); ++i)
    if (generators[i].strategic) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> MarketCase::finite_line_idx() const {
  std::vector<int> out;
  for (size_t i = 0; i < lines.size(); ++i)
    if (lines[i].bounded()) out.push_back(static_cast<int>(i));
  return out;
}

double MarketCase::load_bid(int load, int slot) const {
  const auto& b = loads[load].bid;
  if (b.size() == 1) return b[0];
  int hour = hour_offset + slot;  // 1-based
  if (hour < 1 || hour > static_cast<int>(b.size()))
    throw std::invalid_argument("load_bid: hour " + std::to_string(hour) +
                                " outside bid series of load " + std::to_string(load));
  return b[hour - 1];
}

Eigen::MatrixXd MarketCase::incidence() const {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(num_buses, lines.size());
  for (size_t l = 0; l < lines.size(); ++l) {
    A(lines[l].from - 1, l) = 1.0;
    A(lines[l].to - 1, l) = -1.0;
  }
  return A;
}

void MarketCase::validate() const {
  auto bad = [](const std::string& msg) { throw std::invalid_argument("case: " + msg); };
  if (num_buses < 1) bad("no buses");
  auto check_bus = [&](int bus, const std::string& who) {
    if (bus < 1 || bus > num_buses) bad(who + " references unknown bus " + std::to_string(bus));
  };
  for (size_t l = 0; l < lines.size(); ++l) {
    const auto& ln = lines[l];
    check_bus(ln.from, "line " + std::to_string(l + 1));
    check_bus(ln.to, "line " + std::to_string(l + 1));
    if (ln.from == ln.to) bad("line " + std::to_string(l + 1) + " is a self-loop");
    if (!(ln.reactance > 0)) bad("line " + std::to_string(l + 1) + " has nonpositive reactance");
    if (!(ln.capacity > 0)) bad("line " + std::to_string(l + 1) + " has nonpositive capacity");
  }
  for (size_t g = 0; g < generators.size(); ++g) {
    check_bus(generators[g].bus, "generator " + std::to_string(g + 1));
    if (generators[g].p_min < 0 || generators[g].p_min > generators[g].p_max)
      bad("generator " + std::to_string(g + 1) + " has invalid limits");
  }
  for (size_t d = 0; d < loads.size(); ++d) {
    check_bus(loads[d].bus, "load " + std::to_string(d + 1));
    if (loads[d].p_min < 0 || loads[d].p_min > loads[d].p_max)
      bad("load " + std::to_string(d + 1) + " has invalid limits");
    size_t nb = loads[d].bid.size();
    if (nb != 1 && nb != 24)
      bad("load " + std::to_string(d + 1) + " bid series must have 1 or 24 entries");
  }
  if (horizon < 1) bad("horizon must be >= 1");
  if (scenarios.empty()) bad("at least one scenario required");
  for (double f : scenarios)
    if (!(f > 0)) bad("nonpositive scenario factor");
  if (!(ramp > 0)) bad("nonpositive ramp parameter");
}

MarketCase load_case(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("case parse error: ") + e.what());
  }
  MarketCase c;
  try {
    const auto& net = j.at("network");
    c.num_buses = net.at("buses").get<int>();
    for (const auto& jl : net.at("lines")) {
      Line ln;
      ln.from = jl.at("from").get<int>();
      ln.to = jl.at("to").get<int>();
      ln.reactance = jl.at("reactance").get<double>();
      if (jl.contains("capacity") && !jl["capacity"].is_string())
        ln.capacity = jl["capacity"].get<double>();
      c.lines.push_back(ln);
    }
    for (const auto& jg : j.at("generators")) {
      Generator g;
      g.bus = jg.at("bus").get<int>();
      g.p_min = jg.value("pmin", 0.0);
      g.p_max = jg.at("pmax").get<double>();
      g.strategic = jg.value("strategic", false);
      if (g.strategic)
        g.cost = jg.at("cost").get<double>();
      g.bid = jg.value("bid", g.strategic ? g.cost : 0.0);
      c.generators.push_back(g);
    }
    for (const auto& jd : j.at("loads")) {
      Load d;
      d.bus = jd.at("bus").get<int>();
      d.p_min = jd.value("pmin", 0.0);
      d.p_max = jd.at("pmax").get<double>();
      const auto& jb = jd.at("bid");
      if (jb.is_array())
        d.bid = jb.get<std::vector<double>>();
      else
        d.bid = {jb.get<double>()};
      c.loads.push_back(d);
    }
    if (j.contains("scenarios")) c.scenarios = j["scenarios"].get<std::vector<double>>();
    c.horizon = j.value("horizon", 1);
    c.ramp = j.value("ramp", 0.3);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("case field error: ") + e.what());
  }
  c.validate();
  return c;
}

MarketCase load_case_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open case file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_case(ss.str());
}

MarketCase extend_network(const MarketCase& base, int target_buses) {
  if (target_buses < base.num_buses)
    throw std::invalid_argument("extend_network: target below current size");
  MarketCase c = base;
  if (target_buses == base.num_buses) return c;
  // counts per added bus follow the study table shape: roughly one load per
  // two buses and one generator per four; exact counts for the tabulated
  // sizes are interpolated linearly between them.
  auto count_for = [](int buses, bool gens) {
    // (buses, generators, loads): 30/12/16, 40/15/21, 50/17/26, 60/19/31,
    // 70/21/35, 80/23/41
    static const int tab[6][3] = {{30, 12, 16}, {40, 15, 21}, {50, 17, 26},
                                  {60, 19, 31}, {70, 21, 35}, {80, 23, 41}};
    for (const auto& row : tab)
      if (row[0] == buses) return gens ? row[1] : row[2];
    // outside the table: extrapolate the roughly linear trend
    double per_bus = gens ? 0.22 : 0.5;
    return static_cast<int>(12 + (buses - 30) * per_bus + (gens ? 0 : 4));
  };
  int add_buses = target_buses - base.num_buses;
  int add_gens = count_for(target_buses, true) - static_cast<int>(base.generators.size());
  int add_loads = count_for(target_buses, false) - static_cast<int>(base.loads.size());
  add_gens = std::max(add_gens, 0);
  add_loads = std::max(add_loads, 0);

  c.num_buses = target_buses;
  // chain the new buses off the last original bus with nominal reactance
  for (int i = 0; i < add_buses; ++i) {
    Line ln;
    ln.from = (i == 0) ? base.num_buses : base.num_buses + i;
    ln.to = base.num_buses + i + 1;
    ln.reactance = 0.2;
    c.lines.push_back(ln);
  }
  // added generation equals added load in total; spread uniformly
  const double load_each = 0.2;
  double total_load = load_each * add_loads;
  double gen_each = add_gens > 0 ? total_load / add_gens : 0.0;
  for (int i = 0; i < add_gens; ++i) {
    Generator g;
    g.bus = base.num_buses + 1 + (i % std::max(add_buses, 1));
    g.p_max = gen_each;
    g.bid = 0.0;  // added generators bid zero
    c.generators.push_back(g);
  }
  for (int i = 0; i < add_loads; ++i) {
    Load d;
    d.bus = base.num_buses + 1 + (i % std::max(add_buses, 1));
    d.p_max = load_each;
    d.bid = {72.0};
    c.loads.push_back(d);
  }
  c.validate();
  return c;
}

}  // namespace nodalbid::market
