#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "geb/grid_network.hpp"
#include "geb/optimizer_core.hpp"
#include "geb/param_ident.hpp"
#include "geb/scenario_io.hpp"

namespace geb::testing {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
  double normal(double sigma) { return std::normal_distribution<double>(0.0, sigma)(gen_); }
  bool coin() { return integer(0, 1) == 1; }
  Eigen::VectorXd vector(Eigen::Index n, double lo, double hi) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = uniform(lo, hi);
    return v;
  }
  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

std::filesystem::path source_dir();
std::filesystem::path shipped_scenario();
std::filesystem::path scratch_dir(const std::string& name);

// Random radial tree: node k attaches to the head or an earlier node.
std::vector<LineSpec> random_tree(Rng& rng, int nodes, double r_lo = 0.001, double r_hi = 0.01);

struct ToyOptions {
  Eigen::Index horizon = 4;
  double dt_hours = 0.25;
  int nodes = 1;  // one building with one ESS per node
  double r = 0.05;
  double delta2 = 0.05;
  double baseline_kw = 30.0;
  double comfort_upper = 80.0;  // 21.5 or so makes cooling necessary
};

// Small feeder with wide voltage limits and a wide comfort band, so no
// voltage or comfort constraint binds.
Problem toy_problem(const ToyOptions& options = {});

// Random problem with every device family on a random tree; comfort band
// wide enough to be reachable.
Problem random_problem(Rng& rng, int nodes, Eigen::Index horizon);

// Arbitrary (not necessarily feasible) traces shaped like `problem`.
PrimalState random_state(Rng& rng, const Problem& problem);
DualState random_dual(Rng& rng, const Problem& problem, double scale);

SpdsConfig toy_config();

// Synthetic room identification data: a reference trace from known 3R3C
// parameters under a day of weather and a random On-Off trace.
struct IdentCase {
  RoomThermalParams truth;
  double floor_area_m2 = 60.0;
  RoomExperiment inputs;
  Trace reference;  // indoor temperature after each step
};
IdentCase ident_case(std::uint64_t seed, double noise_sigma, Eigen::Index T = 96);

}  // namespace geb::testing
