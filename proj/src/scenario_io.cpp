#include "geb/scenario_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "geb/csv.hpp"
#include "geb/errors.hpp"

namespace geb {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// A JSON value together with its location, so every error can say where.
class Field {
 public:
  Field(const json& value, std::string path) : v_(&value), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  bool has(const std::string& key) const { return v_->is_object() && v_->contains(key); }

  Field operator[](const std::string& key) const {
    if (!v_->is_object()) fail("expected an object");
    if (!v_->contains(key)) throw ConfigError(join(key) + ": required field missing");
    return {v_->at(key), join(key)};
  }
  Field at(std::size_t i) const { return {v_->at(i), path_ + "[" + std::to_string(i) + "]"}; }

  std::size_t size() const {
    if (!v_->is_array()) fail("expected an array");
    return v_->size();
  }
  double num() const {
    if (!v_->is_number()) fail("expected a number");
    return v_->get<double>();
  }
  int integer() const {
    if (!v_->is_number_integer()) fail("expected an integer");
    return v_->get<int>();
  }
  std::string str() const {
    if (!v_->is_string()) fail("expected a string");
    return v_->get<std::string>();
  }
  bool is_number() const { return v_->is_number(); }

  double num_or(const std::string& key, double fallback) const {
    return has(key) ? (*this)[key].num() : fallback;
  }
  std::optional<std::string> str_opt(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return (*this)[key].str();
  }

  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(path_ + ": " + what); }

 private:
  std::string join(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  const json* v_;
  std::string path_;
};

Trace read_time_series(const fs::path& file, const std::string& column, Eigen::Index horizon) {
  const csv::Table t = csv::read(file);
  const auto ti = t.column("time_index");
  const auto ci = t.column(column);
  if (static_cast<Eigen::Index>(t.rows.size()) != horizon) {
    throw ConfigError(file.string() + ": length mismatch, " + std::to_string(t.rows.size()) +
                      " rows for horizon T=" + std::to_string(horizon));
  }
  Trace out = Trace::Constant(horizon, std::nan(""));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const long k = csv::integer(t, r, ti);
    if (k < 0 || k >= horizon || !std::isnan(out[k])) {
      throw ConfigError(file.string() + ": row " + std::to_string(r + 1) + ": time_index " +
                        std::to_string(k) + " out of range or repeated");
    }
    out[k] = csv::number(t, r, ci);
  }
  return out;
}

RoomThermalParams parse_params(const Field& f) {
  RoomThermalParams p;
  p.c_w = f["c_w"].num();
  p.c_in = f["c_in"].num();
  p.c_m = f["c_m"].num();
  p.r_w1 = f["r_w1"].num();
  p.r_w2 = f["r_w2"].num();
  p.r_win = f["r_win"].num();
  p.r_m = f["r_m"].num();
  p.sp1 = f["sp1"].num();
  p.sp2 = f["sp2"].num();
  p.sp3 = f["sp3"].num();
  p.q_ac = f["q_ac"].num();
  p.q_ihl = f.num_or("q_ihl", 0.0);
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    f.fail(e.what());
  }
  return p;
}

json params_json(const RoomThermalParams& p) {
  return json{{"c_w", p.c_w},   {"c_in", p.c_in}, {"c_m", p.c_m}, {"r_w1", p.r_w1},
              {"r_w2", p.r_w2}, {"r_win", p.r_win}, {"r_m", p.r_m}, {"sp1", p.sp1},
              {"sp2", p.sp2},   {"sp3", p.sp3},   {"q_ac", p.q_ac}, {"q_ihl", p.q_ihl}};
}

StepSchedule parse_step_schedule(const Field& f) {
  const std::string s = f.str();
  if (s == "constant") return StepSchedule::Constant;
  if (s == "diminishing") return StepSchedule::Diminishing;
  f.fail("expected \"constant\" or \"diminishing\", got \"" + s + "\"");
}

DualMode parse_dual_mode(const Field& f) {
  const std::string s = f.str();
  if (s == "every-iteration") return DualMode::EveryIteration;
  if (s == "every-k-primal") return DualMode::EveryKPrimal;
  f.fail("expected \"every-iteration\" or \"every-k-primal\", got \"" + s + "\"");
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(dir.string() + ": cannot create directory: " + ec.message());
}

template <class F>
void wrap(const std::string& path, F&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace

ScenarioConfig load_scenario(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open scenario file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": parse error: " + e.what());
  }
  const Field root(doc, "");
  ScenarioConfig c;
  c.directory = path.parent_path();

  c.name = root.has("name") ? root["name"].str() : path.stem().string();
  c.horizon = root["horizon"].integer();
  if (c.horizon < 1) root["horizon"].fail("must be at least 1");
  c.dt_hours = root["dt_hours"].num();
  if (!(c.dt_hours > 0.0)) root["dt_hours"].fail("must be positive");
  c.base_kva = root.num_or("base_kva", 100.0);
  if (!(c.base_kva > 0.0)) root["base_kva"].fail("must be positive");

  const Field feeder = root["feeder"];
  c.head = feeder["head"].str();
  c.v0_pu = feeder.num_or("v0_pu", 1.0);
  const Field lines = feeder["lines"];
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const Field l = lines.at(i);
    c.lines.push_back({l["from"].str(), l["to"].str(), l["r"].num(), l["x"].num()});
  }
  FeederModel model;
  wrap(feeder.path(), [&] { model = build_feeder(c.head, c.lines, c.v0_pu); });
  const std::set<std::string> nodes(model.nodes.begin(), model.nodes.end());
  auto check_node = [&](const Field& f) {
    const std::string n = f.str();
    if (!nodes.count(n)) f.fail("dangling reference to unknown feeder node '" + n + "'");
    return n;
  };

  if (root.has("voltage_limits")) {
    const Field v = root["voltage_limits"];
    c.v_lower_frac = v.num_or("lower_fraction", c.v_lower_frac);
    c.v_upper_frac = v.num_or("upper_fraction", c.v_upper_frac);
    if (!(c.v_lower_frac > 0.0 && c.v_lower_frac < c.v_upper_frac)) {
      v.fail("need 0 < lower_fraction < upper_fraction");
    }
  }
  if (root.has("comfort")) {
    const Field f = root["comfort"];
    c.comfort_lower = f["lower_c"].num();
    c.comfort_upper = f["upper_c"].num();
    if (!(c.comfort_lower < c.comfort_upper)) f.fail("lower_c must be below upper_c");
  }

  if (root.has("weights")) {
    const Field w = root["weights"];
    c.weights.delta1 = w.num_or("delta1", c.weights.delta1);
    c.weights.delta2 = w.num_or("delta2", c.weights.delta2);
    c.weights.pv_curtailment = w.num_or("pv_curtailment", 0.0);
    c.weights.utility = w.num_or("utility", 0.0);
    for (const char* k : {"delta1", "delta2", "pv_curtailment", "utility"}) {
      if (w.has(k) && w[k].num() < 0.0) w[k].fail("must be nonnegative");
    }
  }

  if (root.has("solver")) {
    const Field s = root["solver"];
    auto& cfg = c.solver;
    cfg.tau_x = s.num_or("tau_x", cfg.tau_x);
    cfg.tau_y = s.num_or("tau_y", cfg.tau_y);
    if (s.has("alpha")) {
      const Field a = s["alpha"];
      if (a.is_number()) {
        cfg.alpha = {a.num(), a.num(), a.num(), a.num()};
      } else {
        cfg.alpha.ev = a["ev"].num();
        cfg.alpha.pv = a["pv"].num();
        cfg.alpha.ess = a["ess"].num();
        cfg.alpha.hvac = a["hvac"].num();
      }
    }
    cfg.beta = s.num_or("beta", cfg.beta);
    if (s.has("step_schedule")) cfg.schedule = parse_step_schedule(s["step_schedule"]);
    cfg.eps0 = s.num_or("eps0", cfg.eps0);
    if (s.has("l_max")) cfg.l_max = s["l_max"].integer();
    wrap(s.path(), [&] { cfg.validate(); });
  }

  if (root.has("files")) {
    const Field f = root["files"];
    c.files.weather = f.str_opt("weather").value_or(c.files.weather);
    c.files.baseline = f.str_opt("baseline").value_or(c.files.baseline);
    c.files.pv = f.str_opt("pv").value_or(c.files.pv);
    c.files.price = f.str_opt("price").value_or("");
  }

  std::set<std::string> ids;
  auto unique_id = [&](const Field& f) {
    const std::string id = f.str();
    if (!ids.insert(id).second) f.fail("duplicate id '" + id + "'");
    return id;
  };
  const Field buildings = root["buildings"];
  for (std::size_t j = 0; j < buildings.size(); ++j) {
    const Field b = buildings.at(j);
    BuildingConfig bc;
    bc.id = unique_id(b["id"]);
    bc.node = check_node(b["node"]);
    const Field m = b["aggregate"];
    bc.model.a = m["a"].num();
    bc.model.b = m["b"].num();
    bc.model.g = m["g"].num();
    bc.model.n_hvac = m["n_hvac"].integer();
    bc.model.p_rated = m["p_rated_kw"].num();
    bc.model.theta0 = m["theta0_c"].num();
    wrap(m.path(), [&] { bc.model.validate(); });

    if (b.has("rooms")) {
      const Field r = b["rooms"];
      bc.rooms.count = r["count"].integer();
      if (bc.rooms.count != bc.model.n_hvac) {
        r["count"].fail("room count " + std::to_string(bc.rooms.count) +
                        " differs from aggregate n_hvac " + std::to_string(bc.model.n_hvac));
      }
      bc.rooms.params = parse_params(r["params"]);
      const Field init = r["initial"];
      bc.rooms.initial = {init["theta_w"].num(), init["theta_in"].num(), init["theta_m"].num()};
      bc.rooms.floor_area_m2 = r.num_or("floor_area_m2", 0.0);
    }

    auto device_node = [&](const Field& d) -> std::optional<std::string> {
      if (!d.has("node")) return std::nullopt;
      return check_node(d["node"]);
    };
    if (b.has("evs")) {
      const Field evs = b["evs"];
      for (std::size_t k = 0; k < evs.size(); ++k) {
        const Field e = evs.at(k);
        bc.evs.push_back({unique_id(e["id"]), device_node(e), e["r_max_kw"].num(),
                          e["demand_kwh"].num()});
        const EvConfig& ev = bc.evs.back();
        wrap(e.path(), [&] {
          EvSpec{ev.id, Trace::Constant(c.horizon, ev.r_max_kw), ev.demand_kwh}.validate(c.dt_hours);
        });
      }
    }
    if (b.has("pvs")) {
      const Field pvs = b["pvs"];
      for (std::size_t k = 0; k < pvs.size(); ++k) {
        const Field p = pvs.at(k);
        bc.pvs.push_back({unique_id(p["id"]), device_node(p), p.num_or("scale", 1.0)});
        if (bc.pvs.back().scale < 0.0) p["scale"].fail("must be nonnegative");
      }
    }
    if (b.has("esss")) {
      const Field es = b["esss"];
      for (std::size_t k = 0; k < es.size(); ++k) {
        const Field e = es.at(k);
        EssConfig ec{unique_id(e["id"]),          device_node(e),
                     e["p_dis_max_kw"].num(),      e["p_chg_max_kw"].num(),
                     e["e_min_kwh"].num(),         e["e_max_kwh"].num(),
                     e["e0_kwh"].num()};
        wrap(e.path(), [&] {
          EssSpec{ec.id, ec.p_dis_max_kw, ec.p_chg_max_kw, ec.e_min_kwh, ec.e_max_kwh, ec.e0_kwh}
              .validate();
        });
        bc.esss.push_back(ec);
      }
    }
    c.buildings.push_back(std::move(bc));
  }

  c.schedule = AsyncSchedule::synchronous(c.buildings.size());
  if (root.has("schedule")) {
    const Field s = root["schedule"];
    if (s.has("cadence")) {
      const Field cad = s["cadence"];
      if (cad.size() != c.buildings.size()) {
        cad.fail("has " + std::to_string(cad.size()) + " entries for " +
                 std::to_string(c.buildings.size()) + " buildings");
      }
      for (std::size_t j = 0; j < cad.size(); ++j) c.schedule.cadence[j] = cad.at(j).integer();
    }
    if (s.has("K")) c.schedule.K = s["K"].integer();
    if (s.has("dual_mode")) c.schedule.dual_mode = parse_dual_mode(s["dual_mode"]);
    wrap(s.path(), [&] { c.schedule.validate(c.buildings.size()); });
  }

  // Side files.
  const auto T = c.horizon;
  const fs::path wf = c.directory / c.files.weather;
  c.weather.theta_amb = read_time_series(wf, "theta_amb_c", T);
  c.weather.theta_sol_w = read_time_series(wf, "theta_sol_w_c", T);
  c.weather.q_solar = read_time_series(wf, "q_solar_kw", T);
  c.pv_profile = read_time_series(c.directory / c.files.pv, "p_max_kw", T);
  if ((c.pv_profile.array() < 0.0).any()) throw ConfigError(c.files.pv + ": negative p_max_kw");
  if (!c.files.price.empty()) {
    c.weights.price = read_time_series(c.directory / c.files.price, "price", T);
  } else if (c.weights.utility > 0.0) {
    throw ConfigError("weights.utility: set without files.price");
  }

  {
    const fs::path bf = c.directory / c.files.baseline;
    const csv::Table t = csv::read(bf);
    const auto ni = t.column("node"), ti = t.column("time_index"), pi = t.column("p_kw"),
               qi = t.column("q_kvar");
    c.baseline_nodes = model.nodes;
    const auto n = static_cast<Eigen::Index>(model.size());
    c.baseline.p_kw = Eigen::MatrixXd::Constant(n, T, std::nan(""));
    c.baseline.q_kvar = Eigen::MatrixXd::Constant(n, T, std::nan(""));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const std::string& node = t.rows[r][ni];
      if (!nodes.count(node)) {
        throw ConfigError(bf.string() + ": row " + std::to_string(r + 1) + ": unknown node '" +
                          node + "'");
      }
      const auto i = static_cast<Eigen::Index>(model.node_index(node));
      const long k = csv::integer(t, r, ti);
      if (k < 0 || k >= T || !std::isnan(c.baseline.p_kw(i, k))) {
        throw ConfigError(bf.string() + ": row " + std::to_string(r + 1) + ": time_index " +
                          std::to_string(k) + " out of range or repeated for node " + node);
      }
      c.baseline.p_kw(i, k) = csv::number(t, r, pi);
      c.baseline.q_kvar(i, k) = csv::number(t, r, qi);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index k = 0; k < T; ++k) {
        if (std::isnan(c.baseline.p_kw(i, k))) {
          throw ConfigError(bf.string() + ": missing baseline trace for node " +
                            model.nodes[static_cast<std::size_t>(i)] + " at time_index " +
                            std::to_string(k) + " (length mismatch)");
        }
      }
    }
  }

  // Full cross-check through the solver view.
  wrap(path.string(), [&] { (void)to_problem(c); });
  return c;
}

Problem to_problem(const ScenarioConfig& c) {
  Problem p;
  p.horizon = c.horizon;
  p.dt_hours = c.dt_hours;
  p.base_kva = c.base_kva;
  p.feeder = build_feeder(c.head, c.lines, c.v0_pu);
  const auto T = c.horizon;

  // Baseline rows follow the feeder's own node order.
  const auto n = static_cast<Eigen::Index>(p.feeder.size());
  p.baseline.p_kw.resize(n, T);
  p.baseline.q_kvar.resize(n, T);
  for (std::size_t r = 0; r < c.baseline_nodes.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(p.feeder.node_index(c.baseline_nodes[r]));
    p.baseline.p_kw.row(i) = c.baseline.p_kw.row(static_cast<Eigen::Index>(r));
    p.baseline.q_kvar.row(i) = c.baseline.q_kvar.row(static_cast<Eigen::Index>(r));
  }
  if (c.baseline_nodes.size() != p.feeder.size()) {
    throw ConfigError("baseline load must provide a trace for each feeder node");
  }

  p.limits.v_l_sq = Trace::Constant(T, c.v_lower_frac * p.feeder.v0_sq);
  p.limits.v_u_sq = Trace::Constant(T, c.v_upper_frac * p.feeder.v0_sq);
  p.weights = c.weights;

  for (std::size_t j = 0; j < c.buildings.size(); ++j) {
    const auto& b = c.buildings[j];
    const std::size_t node = p.feeder.node_index(b.node);
    p.buildings.push_back({b.id, node, b.model,
                           ComfortBand{Trace::Constant(T, c.comfort_lower),
                                       Trace::Constant(T, c.comfort_upper)},
                           c.weather.theta_amb});
    auto where = [&](const std::optional<std::string>& n) {
      return n ? p.feeder.node_index(*n) : node;
    };
    for (const auto& e : b.evs) {
      p.evs.push_back({e.id, Trace::Constant(T, e.r_max_kw), e.demand_kwh, where(e.node), j});
    }
    for (const auto& pv : b.pvs) {
      p.pvs.push_back({pv.id, pv.scale * c.pv_profile, where(pv.node), j});
    }
    for (const auto& e : b.esss) {
      p.esss.push_back({e.id, e.p_dis_max_kw, e.p_chg_max_kw, e.e_min_kwh, e.e_max_kwh, e.e0_kwh,
                        where(e.node), j});
    }
  }
  p.finalize();
  return p;
}

std::vector<RoomFleet> room_fleets(const ScenarioConfig& c) {
  std::vector<RoomFleet> out;
  for (const auto& b : c.buildings) {
    RoomFleet f;
    const auto n = static_cast<std::size_t>(b.rooms.count);
    f.rooms.assign(n, b.rooms.params);
    f.initial.assign(n, b.rooms.initial);
    f.weather = c.weather;
    out.push_back(std::move(f));
  }
  return out;
}

void save_scenario(const ScenarioConfig& c, const fs::path& dir, const std::string& file_name) {
  make_dirs(dir);
  json doc;
  doc["name"] = c.name;
  doc["horizon"] = c.horizon;
  doc["dt_hours"] = c.dt_hours;
  doc["base_kva"] = c.base_kva;
  json lines = json::array();
  for (const auto& l : c.lines) lines.push_back({{"from", l.from}, {"to", l.to}, {"r", l.r}, {"x", l.x}});
  doc["feeder"] = {{"head", c.head}, {"v0_pu", c.v0_pu}, {"lines", lines}};
  doc["voltage_limits"] = {{"lower_fraction", c.v_lower_frac}, {"upper_fraction", c.v_upper_frac}};
  doc["comfort"] = {{"lower_c", c.comfort_lower}, {"upper_c", c.comfort_upper}};
  doc["weights"] = {{"delta1", c.weights.delta1},
                    {"delta2", c.weights.delta2},
                    {"pv_curtailment", c.weights.pv_curtailment},
                    {"utility", c.weights.utility}};
  const auto& s = c.solver;
  doc["solver"] = {{"tau_x", s.tau_x},
                   {"tau_y", s.tau_y},
                   {"alpha", {{"ev", s.alpha.ev}, {"pv", s.alpha.pv}, {"ess", s.alpha.ess},
                              {"hvac", s.alpha.hvac}}},
                   {"beta", s.beta},
                   {"step_schedule", s.schedule == StepSchedule::Constant ? "constant" : "diminishing"},
                   {"eps0", s.eps0},
                   {"l_max", s.l_max}};
  doc["schedule"] = {{"cadence", c.schedule.cadence},
                     {"K", c.schedule.K},
                     {"dual_mode", c.schedule.dual_mode == DualMode::EveryIteration
                                       ? "every-iteration"
                                       : "every-k-primal"}};
  json files = {{"weather", c.files.weather}, {"baseline", c.files.baseline}, {"pv", c.files.pv}};
  if (!c.files.price.empty()) files["price"] = c.files.price;
  doc["files"] = files;

  json buildings = json::array();
  auto with_node = [](json j, const std::optional<std::string>& node) {
    if (node) j["node"] = *node;
    return j;
  };
  for (const auto& b : c.buildings) {
    json jb = {{"id", b.id},
               {"node", b.node},
               {"aggregate",
                {{"a", b.model.a},
                 {"b", b.model.b},
                 {"g", b.model.g},
                 {"n_hvac", b.model.n_hvac},
                 {"p_rated_kw", b.model.p_rated},
                 {"theta0_c", b.model.theta0}}}};
    if (b.rooms.count > 0) {
      jb["rooms"] = {{"count", b.rooms.count},
                     {"params", params_json(b.rooms.params)},
                     {"initial",
                      {{"theta_w", b.rooms.initial.theta_w},
                       {"theta_in", b.rooms.initial.theta_in},
                       {"theta_m", b.rooms.initial.theta_m}}},
                     {"floor_area_m2", b.rooms.floor_area_m2}};
    }
    json evs = json::array(), pvs = json::array(), esss = json::array();
    for (const auto& e : b.evs) {
      evs.push_back(with_node({{"id", e.id}, {"r_max_kw", e.r_max_kw}, {"demand_kwh", e.demand_kwh}},
                              e.node));
    }
    for (const auto& p : b.pvs) pvs.push_back(with_node({{"id", p.id}, {"scale", p.scale}}, p.node));
    for (const auto& e : b.esss) {
      esss.push_back(with_node({{"id", e.id},
                                {"p_dis_max_kw", e.p_dis_max_kw},
                                {"p_chg_max_kw", e.p_chg_max_kw},
                                {"e_min_kwh", e.e_min_kwh},
                                {"e_max_kwh", e.e_max_kwh},
                                {"e0_kwh", e.e0_kwh}},
                               e.node));
    }
    jb["evs"] = evs;
    jb["pvs"] = pvs;
    jb["esss"] = esss;
    buildings.push_back(jb);
  }
  doc["buildings"] = buildings;

  {
    std::ofstream out(dir / file_name);
    if (!out) throw Error((dir / file_name).string() + ": cannot open for writing");
    out << doc.dump(2) << "\n";
  }

  const auto T = c.horizon;
  {
    csv::Writer w(dir / c.files.weather, {"time_index", "theta_amb_c", "theta_sol_w_c", "q_solar_kw"});
    for (Eigen::Index t = 0; t < T; ++t) {
      w.cell(static_cast<long>(t)).cell(c.weather.theta_amb[t]).cell(c.weather.theta_sol_w[t]);
      w.cell(c.weather.q_solar[t]).end_row();
    }
  }
  {
    csv::Writer w(dir / c.files.pv, {"time_index", "p_max_kw"});
    for (Eigen::Index t = 0; t < T; ++t) w.cell(static_cast<long>(t)).cell(c.pv_profile[t]).end_row();
  }
  if (!c.files.price.empty()) {
    csv::Writer w(dir / c.files.price, {"time_index", "price"});
    for (Eigen::Index t = 0; t < T; ++t) w.cell(static_cast<long>(t)).cell(c.weights.price[t]).end_row();
  }
  {
    csv::Writer w(dir / c.files.baseline, {"node", "time_index", "p_kw", "q_kvar"});
    for (std::size_t r = 0; r < c.baseline_nodes.size(); ++r) {
      for (Eigen::Index t = 0; t < T; ++t) {
        const auto i = static_cast<Eigen::Index>(r);
        w.cell(c.baseline_nodes[r]).cell(static_cast<long>(t)).cell(c.baseline.p_kw(i, t));
        w.cell(c.baseline.q_kvar(i, t)).end_row();
      }
    }
  }
}

std::string params_fragment(const RoomThermalParams& params) {
  return params_json(params).dump(2) + "\n";
}

RoomThermalParams parse_params_fragment(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("parameter fragment: parse error: ") + e.what());
  }
  // Also accepts the object wrapped as {"params": {...}}.
  const Field root(doc, "");
  return parse_params(doc.is_object() && doc.contains("params") ? root["params"] : root);
}

namespace {

std::vector<std::pair<std::string, const Trace*>> schedule_entities(const Problem& problem,
                                                                     const PrimalState& x) {
  std::vector<std::pair<std::string, const Trace*>> out;
  for (std::size_t k = 0; k < problem.evs.size(); ++k) out.emplace_back("ev:" + problem.evs[k].id, &x.ev[k]);
  for (std::size_t k = 0; k < problem.pvs.size(); ++k) out.emplace_back("pv:" + problem.pvs[k].id, &x.pv[k]);
  for (std::size_t k = 0; k < problem.esss.size(); ++k) {
    out.emplace_back("ess:" + problem.esss[k].id, &x.ess[k]);
  }
  for (std::size_t j = 0; j < problem.buildings.size(); ++j) {
    out.emplace_back("hvac_u:" + problem.buildings[j].id, &x.hvac[j]);
  }
  return out;
}

json terms_json(const ObjectiveTerms& t) {
  return {{"loss_kw", t.loss_kw},
          {"degradation_kw2", t.degradation},
          {"curtailment", t.curtailment},
          {"utility", t.utility},
          {"weighted_total", t.total}};
}

double hour_of(const Problem& p, Eigen::Index t) { return static_cast<double>(t) * p.dt_hours; }

}  // namespace

void export_results(const RunResult& result, const Problem& problem, const fs::path& out_dir) {
  make_dirs(out_dir);
  const auto T = problem.horizon;
  const PrimalState& x = result.primal;

  {
    csv::Writer w(out_dir / "schedules.csv", {"entity", "time_index", "value"});
    for (const auto& [name, trace] : schedule_entities(problem, x)) {
      for (Eigen::Index t = 0; t < T; ++t) w.cell(name).cell(static_cast<long>(t)).cell((*trace)[t]).end_row();
    }
  }

  const NetworkState net = evaluate_network(problem, x);
  {
    csv::Writer w(out_dir / "voltages.csv",
                  {"node", "time_index", "v_sq_pu", "v_pu", "v_l_sq_pu", "v_u_sq_pu", "lambda", "mu"});
    for (std::size_t i = 0; i < problem.feeder.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      for (Eigen::Index t = 0; t < T; ++t) {
        w.cell(problem.feeder.nodes[i]).cell(static_cast<long>(t)).cell(net.voltages(r, t));
        w.cell(std::sqrt(std::max(0.0, net.voltages(r, t))));
        w.cell(problem.limits.v_l_sq[t]).cell(problem.limits.v_u_sq[t]);
        w.cell(result.dual.lambda(r, t)).cell(result.dual.mu(r, t)).end_row();
      }
    }
  }

  {
    std::vector<std::string> header = {"iteration", "eps_max"};
    for (const auto& b : problem.buildings) header.push_back("eps_" + b.id);
    for (const char* h : {"dual_updated", "lambda_norm", "mu_norm", "loss_kw", "degradation_kw2",
                          "objective", "lagrangian"}) {
      header.emplace_back(h);
    }
    csv::Writer w(out_dir / "convergence.csv", header);
    for (const auto& log : result.log) {
      double emax = 0.0;
      for (double e : log.eps) emax = std::isnan(e) ? e : std::max(emax, e);
      w.cell(log.iteration).cell(emax);
      for (double e : log.eps) w.cell(e);
      w.cell(log.dual_updated ? 1L : 0L).cell(log.lambda_norm).cell(log.mu_norm);
      w.cell(log.objective.loss_kw).cell(log.objective.degradation).cell(log.objective.total);
      w.cell(log.lagrangian).end_row();
    }
  }

  {
    csv::Writer w(out_dir / "dispatch.csv",
                  {"building", "time_index", "u_opt", "u_realized", "n_on", "hvac_kw",
                   "aggregate_c", "room_min_c", "room_max_c", "on_rooms"});
    for (std::size_t j = 0; j < result.dispatch.size(); ++j) {
      const auto& d = result.dispatch[j];
      for (Eigen::Index t = 0; t < T; ++t) {
        const auto& step = d.steps[static_cast<std::size_t>(t)];
        std::string on;
        for (std::size_t r = 0; r < step.on_off.size(); ++r) {
          if (step.on_off[r]) on += (on.empty() ? "" : " ") + std::to_string(r);
        }
        w.cell(problem.buildings[j].id).cell(static_cast<long>(t)).cell(x.hvac[j][t]);
        w.cell(d.realized_u[t]).cell(static_cast<long>(step.n_on())).cell(d.hvac_power_kw[t]);
        w.cell(d.aggregate[t]).cell(d.room_temps.col(t + 1).minCoeff());
        w.cell(d.room_temps.col(t + 1).maxCoeff()).cell(on).end_row();
      }
    }
  }

  // Structured report.
  const ObjectiveTerms terms = objective_terms(problem, x);
  const auto& f = result.feasibility;
  double cs_upper = 0.0, cs_lower = 0.0;
  for (Eigen::Index i = 0; i < net.voltages.rows(); ++i) {
    for (Eigen::Index t = 0; t < T; ++t) {
      cs_upper = std::max(cs_upper, result.dual.lambda(i, t) *
                                        std::max(0.0, problem.limits.v_u_sq[t] - net.voltages(i, t)));
      cs_lower = std::max(cs_lower, result.dual.mu(i, t) *
                                        std::max(0.0, net.voltages(i, t) - problem.limits.v_l_sq[t]));
    }
  }
  json dispatch = json::array();
  for (std::size_t j = 0; j < result.dispatch.size(); ++j) {
    dispatch.push_back({{"building", problem.buildings[j].id},
                        {"max_room_deviation_c", result.dispatch[j].max_deviation}});
  }
  json probes = json::array();
  for (std::size_t k = 0; k < result.probes.size(); ++k) {
    probes.push_back({{"iteration", result.probe_iterations[k]},
                      {"ratio", result.probes[k].ratio},
                      {"contracting", result.probes[k].contracting}});
  }
  json report = {
      {"converged", result.converged},
      {"iterations", result.iterations},
      {"objective", terms_json(terms)},
      {"min_voltage_sq_pu", net.voltages.minCoeff()},
      {"max_voltage_sq_pu", net.voltages.maxCoeff()},
      {"max_lambda", result.dual.lambda.maxCoeff()},
      {"max_mu", result.dual.mu.maxCoeff()},
      {"complementary_slackness", {{"upper", cs_upper}, {"lower", cs_lower}}},
      {"feasibility",
       {{"pass", f.all_ok()},
        {"voltage", {{"pass", f.voltage_ok}, {"max_violation_pu2", f.max_voltage_violation}}},
        {"comfort", {{"pass", f.comfort_ok}, {"max_violation_c", f.max_comfort_violation}}},
        {"soc", {{"pass", f.soc_ok}, {"max_violation_kwh", f.max_soc_violation}}},
        {"ev_demand", {{"pass", f.ev_ok}, {"max_residual_kwh", f.max_ev_residual}}},
        {"device_bounds", {{"pass", f.bounds_ok}, {"max_violation", f.max_bound_violation}}}}},
      {"dispatch", dispatch},
      {"contraction_probes", probes}};
  {
    std::ofstream out(out_dir / "report.json");
    if (!out) throw Error((out_dir / "report.json").string() + ": cannot open for writing");
    out << report.dump(2) << "\n";
  }
  {
    std::ofstream out(out_dir / "report.txt");
    if (!out) throw Error((out_dir / "report.txt").string() + ": cannot open for writing");
    out << "converged   " << (result.converged ? "yes" : "no") << " after " << result.iterations
        << " iterations\n";
    out << "loss        " << terms.loss_kw << " kW\n";
    out << "degradation " << terms.degradation << " kW^2\n";
    out << format_report(f);
  }
}

PrimalState read_schedules(const fs::path& file, const Problem& problem) {
  const csv::Table t = csv::read(file);
  const auto ei = t.column("entity"), ti = t.column("time_index"), vi = t.column("value");
  const auto T = problem.horizon;
  PrimalState x;
  x.ev.assign(problem.evs.size(), Trace::Constant(T, std::nan("")));
  x.pv.assign(problem.pvs.size(), Trace::Constant(T, std::nan("")));
  x.ess.assign(problem.esss.size(), Trace::Constant(T, std::nan("")));
  x.hvac.assign(problem.buildings.size(), Trace::Constant(T, std::nan("")));
  std::map<std::string, Trace*> index;
  for (std::size_t k = 0; k < problem.evs.size(); ++k) index["ev:" + problem.evs[k].id] = &x.ev[k];
  for (std::size_t k = 0; k < problem.pvs.size(); ++k) index["pv:" + problem.pvs[k].id] = &x.pv[k];
  for (std::size_t k = 0; k < problem.esss.size(); ++k) index["ess:" + problem.esss[k].id] = &x.ess[k];
  for (std::size_t j = 0; j < problem.buildings.size(); ++j) {
    index["hvac_u:" + problem.buildings[j].id] = &x.hvac[j];
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    auto it = index.find(t.rows[r][ei]);
    if (it == index.end()) {
      throw ConfigError(file.string() + ": row " + std::to_string(r + 1) + ": unknown entity '" +
                        t.rows[r][ei] + "'");
    }
    const long k = csv::integer(t, r, ti);
    if (k < 0 || k >= T) {
      throw ConfigError(file.string() + ": row " + std::to_string(r + 1) + ": time_index out of range");
    }
    (*it->second)[k] = csv::number(t, r, vi);
  }
  for (const auto& [name, trace] : index) {
    if (trace->hasNaN()) throw ConfigError(file.string() + ": incomplete trace for " + name);
  }
  return x;
}

void export_plot_data(const RunResult& result, const Problem& problem, const fs::path& out_dir,
                      std::size_t focus_building) {
  make_dirs(out_dir);
  const auto T = problem.horizon;
  const PrimalState& x = result.primal;
  const NetworkState net = evaluate_network(problem, x);

  {
    csv::Writer w(out_dir / "fig3a.csv", {"time_index", "hour", "baseline_kw", "solar_available_kw",
                                          "solar_used_kw", "utility_supply_kw"});
    for (Eigen::Index t = 0; t < T; ++t) {
      double solar = 0.0, used = 0.0;
      for (std::size_t k = 0; k < problem.pvs.size(); ++k) {
        solar += problem.pvs[k].p_max[t];
        used += x.pv[k][t];
      }
      w.cell(static_cast<long>(t)).cell(hour_of(problem, t)).cell(problem.baseline.p_kw.col(t).sum());
      w.cell(solar).cell(used).cell(problem.base_kva * net.injection.p.col(t).sum()).end_row();
    }
  }

  if (focus_building < problem.buildings.size()) {
    const auto& b = problem.buildings[focus_building];
    const BuildingDispatch* d =
        focus_building < result.dispatch.size() ? &result.dispatch[focus_building] : nullptr;
    const Trace agg = d ? d->aggregate
                        : simulate_aggregate(b.model, b.theta_amb,
                                             x.hvac[focus_building].cwiseMax(0.0).cwiseMin(1.0));
    std::vector<std::string> header = {"time_index", "hour", "aggregate_c", "theta_l_c",
                                       "theta_u_c", "theta_amb_c", "u"};
    const Eigen::Index rooms = d ? d->room_temps.rows() : 0;
    for (Eigen::Index r = 0; r < rooms; ++r) header.push_back("room_" + std::to_string(r) + "_c");
    csv::Writer w(out_dir / "fig3b.csv", header);
    for (Eigen::Index t = 0; t < T; ++t) {
      // Temperatures are those reached at the end of step t.
      w.cell(static_cast<long>(t)).cell(hour_of(problem, t + 1)).cell(agg[t]);
      w.cell(b.comfort.theta_l[t]).cell(b.comfort.theta_u[t]).cell(b.theta_amb[t]);
      w.cell(x.hvac[focus_building][t]);
      for (Eigen::Index r = 0; r < rooms; ++r) w.cell(d->room_temps(r, t + 1));
      w.end_row();
    }
  }

  {
    std::vector<std::string> header = {"time_index", "hour"};
    for (const auto& ev : problem.evs) header.push_back(ev.id + "_kw");
    csv::Writer w(out_dir / "fig3c.csv", header);
    for (Eigen::Index t = 0; t < T; ++t) {
      w.cell(static_cast<long>(t)).cell(hour_of(problem, t));
      for (const auto& p : x.ev) w.cell(p[t]);
      w.end_row();
    }
  }

  {
    std::vector<std::string> header = {"time_index", "hour"};
    for (const auto& e : problem.esss) header.push_back(e.id + "_kw");
    for (const auto& e : problem.esss) header.push_back(e.id + "_soc_kwh");
    csv::Writer w(out_dir / "fig3d.csv", header);
    std::vector<Trace> soc;
    for (std::size_t k = 0; k < problem.esss.size(); ++k) {
      soc.push_back(ess_soc(x.ess[k], problem.esss[k], problem.dt_hours));
    }
    for (Eigen::Index t = 0; t < T; ++t) {
      w.cell(static_cast<long>(t)).cell(hour_of(problem, t));
      for (const auto& p : x.ess) w.cell(p[t]);
      for (const auto& s : soc) w.cell(s[t]);
      w.end_row();
    }
  }

  {
    std::vector<std::string> header = {"time_index", "hour"};
    for (const auto& n : problem.feeder.nodes) header.push_back("v_" + n + "_pu");
    header.emplace_back("v_lower_pu");
    header.emplace_back("v_upper_pu");
    csv::Writer w(out_dir / "fig4.csv", header);
    for (Eigen::Index t = 0; t < T; ++t) {
      w.cell(static_cast<long>(t)).cell(hour_of(problem, t));
      for (Eigen::Index i = 0; i < net.voltages.rows(); ++i) {
        w.cell(std::sqrt(std::max(0.0, net.voltages(i, t))));
      }
      w.cell(std::sqrt(problem.limits.v_l_sq[t])).cell(std::sqrt(problem.limits.v_u_sq[t])).end_row();
    }
  }
}

}  // namespace geb
