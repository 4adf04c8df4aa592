#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "evo/rng.hpp"

namespace evo {

enum class DimKind { continuous, integer, categorical };

struct ParamDim {
  std::string name;
  DimKind kind = DimKind::continuous;
  double lower = 0, upper = 1;
  std::vector<std::string> categories;  // categorical only
};

struct ParamSpace {
  std::vector<ParamDim> dims;
  Eigen::Index size() const { return static_cast<Eigen::Index>(dims.size()); }
  Eigen::VectorXd lower_bounds() const;
  Eigen::VectorXd upper_bounds() const;
  Eigen::VectorXd clamp(Eigen::VectorXd v) const;
  Eigen::VectorXd sample(Rng& rng) const;
};

void validate(const ParamSpace& space);

struct Candidate {
  Eigen::VectorXd values;
  double fitness = -std::numeric_limits<double>::infinity();
  bool evaluated = false;
};

enum class Algorithm { de, ga, pso, opo_ea, nelder_mead };

std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

// Fitness is always maximized; the budget counts fitness invocations exactly.
struct OptimizerConfig {
  Algorithm algorithm = Algorithm::de;
  int population = 25;
  int budget = 1000;
  std::uint64_t seed = 0;
  // DE
  double de_weight = 0.6;     // mutation factor
  double de_crossover = 0.9;  // C_R
  // GA
  double ga_alpha = 0.5;          // geometric-crossover blend / mutation side
  double ga_beta = 6.0;           // non-uniformity degree
  double ga_mutation_prob = 0.2;  // per-gene
  // PSO
  double pso_inertia = 0.72;
  double pso_c1 = 1.49, pso_c2 = 1.49;
  // 1+1EA
  double ea_sigma_frac = 0.2;  // of (upper-lower), per dimension
  // Nelder-Mead
  double nm_tolerance = 1e-9;  // simplex diameter stop
};

struct GenerationStat {
  int generation = 0;
  long evaluations = 0;
  double best = 0;  // best-so-far
  double mean = 0;  // population mean this generation
};

struct OptResult {
  Candidate best;
  std::vector<GenerationStat> trace;
  long evaluations = 0;
};

using FitnessFn = std::function<double(const Eigen::VectorXd&)>;

// Budget-gated fitness wrapper shared by all algorithm steps.
class Evaluator {
 public:
  Evaluator(const FitnessFn& fn, long budget) : fn_(fn), budget_(budget) {}
  bool exhausted() const { return used_ >= budget_; }
  long used() const { return used_; }
  double operator()(const Eigen::VectorXd& v) {
    ++used_;
    return fn_(v);
  }

 private:
  const FitnessFn& fn_;
  long used_ = 0;
  long budget_ = 0;
};

// DE/rand/1/bin generation: mutate, binomial crossover with a forced index,
// greedy replacement.
void de_step(std::vector<Candidate>& population, const ParamSpace& space,
             double weight, double crossover, Rng& rng, Evaluator& eval);

void ga_step(std::vector<Candidate>& population, const ParamSpace& space,
             const OptimizerConfig& config, int iter, int iter_max, Rng& rng,
             Evaluator& eval);

// Single 1+1EA step: Gaussian offspring, greedy acceptance (ties accepted).
void opo_ea_step(Candidate& x, const ParamSpace& space, double sigma_frac,
                 Rng& rng, Evaluator& eval);

struct Swarm {
  std::vector<Candidate> particles;
  std::vector<Eigen::VectorXd> velocities;
  std::vector<Candidate> personal_best;
  Candidate global_best;
};

void pso_step(Swarm& swarm, const ParamSpace& space,
              const OptimizerConfig& config, Rng& rng, Evaluator& eval);

OptResult nelder_mead(const Eigen::VectorXd& start, const ParamSpace& space,
                      const FitnessFn& fitness, int budget,
                      double tolerance = 1e-9);

OptResult optimize(const OptimizerConfig& config, const ParamSpace& space,
                   const FitnessFn& fitness);

// Integer dims round half-away-from-zero; categorical dims bucket the range
// into equal subintervals and decode to the bucket index.
std::map<std::string, double> decode(const ParamSpace& space,
                                     const Eigen::VectorXd& v);

// Building blocks exposed for direct verification.
Eigen::VectorXd de_mutant(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2,
                          const Eigen::VectorXd& r3, double weight);
double geometric_cross_gene(double a, double b, double alpha, double lower);
double nonuniform_shrink(double theta, int iter, int iter_max, double beta);

std::string trace_to_csv(const OptResult& result);

}  // namespace evo
