#include "evo/metaopt.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace evo {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

Eigen::VectorXd ParamSpace::lower_bounds() const {
  Eigen::VectorXd v(size());
  for (Eigen::Index i = 0; i < size(); ++i)
    v[i] = dims[static_cast<std::size_t>(i)].lower;
  return v;
}

Eigen::VectorXd ParamSpace::upper_bounds() const {
  Eigen::VectorXd v(size());
  for (Eigen::Index i = 0; i < size(); ++i)
    v[i] = dims[static_cast<std::size_t>(i)].upper;
  return v;
}

Eigen::VectorXd ParamSpace::clamp(Eigen::VectorXd v) const {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto& d = dims[static_cast<std::size_t>(i)];
    v[i] = std::min(std::max(v[i], d.lower), d.upper);
  }
  return v;
}

Eigen::VectorXd ParamSpace::sample(Rng& rng) const {
  Eigen::VectorXd v(size());
  for (Eigen::Index i = 0; i < size(); ++i) {
    const auto& d = dims[static_cast<std::size_t>(i)];
    v[i] = rng.uniform(d.lower, d.upper);
  }
  return v;
}

void validate(const ParamSpace& space) {
  if (space.dims.empty())
    throw std::invalid_argument("param space: no dimensions");
  for (std::size_t i = 0; i < space.dims.size(); ++i) {
    const auto& d = space.dims[i];
    if (!(d.lower < d.upper))
      throw std::invalid_argument("param space: dim '" + d.name +
                                  "' has empty range");
    if (d.kind == DimKind::categorical && d.categories.size() < 2)
      throw std::invalid_argument("param space: dim '" + d.name +
                                  "' needs >= 2 categories");
    for (std::size_t j = i + 1; j < space.dims.size(); ++j)
      if (space.dims[j].name == d.name)
        throw std::invalid_argument("param space: duplicate dim '" + d.name +
                                    "'");
  }
}

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::de: return "de";
    case Algorithm::ga: return "ga";
    case Algorithm::pso: return "pso";
    case Algorithm::opo_ea: return "opo_ea";
    case Algorithm::nelder_mead: return "nelder_mead";
  }
  throw std::logic_error("bad algorithm");
}

Algorithm algorithm_from_name(const std::string& name) {
  if (name == "de") return Algorithm::de;
  if (name == "ga") return Algorithm::ga;
  if (name == "pso") return Algorithm::pso;
  if (name == "opo_ea" || name == "1+1ea") return Algorithm::opo_ea;
  if (name == "nelder_mead") return Algorithm::nelder_mead;
  throw std::invalid_argument("unknown algorithm '" + name + "'");
}

Eigen::VectorXd de_mutant(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2,
                          const Eigen::VectorXd& r3, double weight) {
  return r1 + weight * (r2 - r3);
}

void de_step(std::vector<Candidate>& population, const ParamSpace& space,
             double weight, double crossover, Rng& rng, Evaluator& eval) {
  const auto n = population.size();
  if (n < 4)
    throw std::invalid_argument("de_step: population must be >= 4");
  const auto dims = static_cast<Eigen::Index>(space.dims.size());

  for (std::size_t i = 0; i < n && !eval.exhausted(); ++i) {
    // three distinct donors, all different from the target
    std::size_t r1, r2, r3;
    do r1 = rng.uniform_index(n); while (r1 == i);
    do r2 = rng.uniform_index(n); while (r2 == i || r2 == r1);
    do r3 = rng.uniform_index(n); while (r3 == i || r3 == r1 || r3 == r2);

    Eigen::VectorXd mutant = space.clamp(de_mutant(
        population[r1].values, population[r2].values, population[r3].values,
        weight));
    Eigen::VectorXd trial = population[i].values;
    const auto forced = static_cast<Eigen::Index>(
        rng.uniform_index(static_cast<std::uint64_t>(dims)));
    for (Eigen::Index j = 0; j < dims; ++j)
      if (rng.uniform() <= crossover || j == forced) trial[j] = mutant[j];

    const double f = eval(trial);
    if (f >= population[i].fitness) {
      population[i].values = std::move(trial);
      population[i].fitness = f;
    }
  }
}

double geometric_cross_gene(double a, double b, double alpha, double lower) {
  // shift into strictly positive territory when the bound allows zero or less
  const double shift = lower <= 0 ? -lower + 1e-9 : 0.0;
  const double child =
      std::pow(a + shift, alpha) * std::pow(b + shift, 1.0 - alpha);
  return child - shift;
}

double nonuniform_shrink(double theta, int iter, int iter_max, double beta) {
  const double base =
      theta * (1.0 - static_cast<double>(iter) / static_cast<double>(iter_max));
  return std::pow(base, beta);
}

void ga_step(std::vector<Candidate>& population, const ParamSpace& space,
             const OptimizerConfig& config, int iter, int iter_max, Rng& rng,
             Evaluator& eval) {
  const auto n = population.size();
  if (n < 2) throw std::invalid_argument("ga_step: population must be >= 2");
  const auto dims = static_cast<Eigen::Index>(space.dims.size());

  auto tournament = [&]() -> const Candidate& {
    const auto a = rng.uniform_index(n);
    const auto b = rng.uniform_index(n);
    return population[a].fitness >= population[b].fitness ? population[a]
                                                          : population[b];
  };

  std::size_t elite = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (population[i].fitness > population[elite].fitness) elite = i;

  std::vector<Candidate> next;
  next.reserve(n);
  next.push_back(population[elite]);

  while (next.size() < n && !eval.exhausted()) {
    const Candidate& a = tournament();
    const Candidate& b = tournament();
    Eigen::VectorXd children[2] = {Eigen::VectorXd(dims),
                                   Eigen::VectorXd(dims)};
    for (Eigen::Index j = 0; j < dims; ++j) {
      const double lo = space.dims[static_cast<std::size_t>(j)].lower;
      children[0][j] =
          geometric_cross_gene(a.values[j], b.values[j], config.ga_alpha, lo);
      children[1][j] =
          geometric_cross_gene(b.values[j], a.values[j], config.ga_alpha, lo);
    }
    for (auto& child : children) {
      for (Eigen::Index j = 0; j < dims; ++j) {
        if (rng.uniform() >= config.ga_mutation_prob) continue;
        const auto& d = space.dims[static_cast<std::size_t>(j)];
        const double shrink =
            nonuniform_shrink(rng.uniform(), iter, iter_max, config.ga_beta);
        if (rng.uniform() <= config.ga_alpha)
          child[j] += (d.upper - child[j]) * shrink;
        else
          child[j] -= (child[j] - d.lower) * shrink;
      }
      child = space.clamp(std::move(child));
      if (next.size() >= n || eval.exhausted()) break;
      Candidate c;
      c.values = child;
      c.fitness = eval(c.values);
      c.evaluated = true;
      next.push_back(std::move(c));
    }
  }
  // budget may cut a generation short; survivors keep their parents' slots
  for (std::size_t i = next.size(); i < n; ++i) next.push_back(population[i]);
  population = std::move(next);
}

void opo_ea_step(Candidate& x, const ParamSpace& space, double sigma_frac,
                 Rng& rng, Evaluator& eval) {
  if (eval.exhausted()) return;
  Eigen::VectorXd y = x.values;
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    const auto& d = space.dims[static_cast<std::size_t>(j)];
    y[j] += rng.normal() * sigma_frac * (d.upper - d.lower);
  }
  y = space.clamp(std::move(y));
  const double f = eval(y);
  if (f >= x.fitness) {
    x.values = std::move(y);
    x.fitness = f;
  }
}

void pso_step(Swarm& swarm, const ParamSpace& space,
              const OptimizerConfig& config, Rng& rng, Evaluator& eval) {
  const auto n = swarm.particles.size();
  if (n < 2) throw std::invalid_argument("pso_step: swarm must be >= 2");
  const auto dims = static_cast<Eigen::Index>(space.dims.size());

  for (std::size_t i = 0; i < n && !eval.exhausted(); ++i) {
    Candidate& p = swarm.particles[i];
    Eigen::VectorXd& v = swarm.velocities[i];
    for (Eigen::Index j = 0; j < dims; ++j) {
      const auto& d = space.dims[static_cast<std::size_t>(j)];
      const double vmax = 0.2 * (d.upper - d.lower);
      v[j] = config.pso_inertia * v[j] +
             config.pso_c1 * rng.uniform() *
                 (swarm.personal_best[i].values[j] - p.values[j]) +
             config.pso_c2 * rng.uniform() *
                 (swarm.global_best.values[j] - p.values[j]);
      v[j] = std::min(std::max(v[j], -vmax), vmax);
    }
    p.values = space.clamp(p.values + v);
    p.fitness = eval(p.values);
    if (p.fitness >= swarm.personal_best[i].fitness)
      swarm.personal_best[i] = p;
    if (p.fitness > swarm.global_best.fitness) swarm.global_best = p;
  }
}

OptResult nelder_mead(const Eigen::VectorXd& start, const ParamSpace& space,
                      const FitnessFn& fitness, int budget, double tolerance) {
  validate(space);
  const Eigen::Index dims = space.size();
  if (budget < dims + 2)
    throw std::invalid_argument("nelder_mead: budget too small for a simplex");
  Evaluator eval(fitness, budget);

  // maximize f == minimize -f, standard coefficients
  const double refl = 1.0, expand = 2.0, contract = 0.5, shrink = 0.5;

  std::vector<Candidate> simplex;
  {
    Candidate c;
    c.values = space.clamp(start);
    c.fitness = eval(c.values);
    simplex.push_back(c);
  }
  for (Eigen::Index j = 0; j < dims; ++j) {
    const auto& d = space.dims[static_cast<std::size_t>(j)];
    Eigen::VectorXd v = simplex[0].values;
    double step = 0.05 * (d.upper - d.lower);
    if (v[j] + step > d.upper) step = -step;
    v[j] += step;
    Candidate c;
    c.values = space.clamp(std::move(v));
    c.fitness = eval(c.values);
    simplex.push_back(std::move(c));
  }

  OptResult result;
  auto record = [&](int gen) {
    double best = simplex[0].fitness, mean = 0;
    for (const auto& c : simplex) {
      best = std::max(best, c.fitness);
      mean += c.fitness;
    }
    mean /= static_cast<double>(simplex.size());
    if (!result.trace.empty()) best = std::max(best, result.trace.back().best);
    result.trace.push_back({gen, eval.used(), best, mean});
  };

  auto by_fitness_desc = [](const Candidate& a, const Candidate& b) {
    return a.fitness > b.fitness;
  };
  std::sort(simplex.begin(), simplex.end(), by_fitness_desc);
  record(0);

  int gen = 0;
  while (!eval.exhausted()) {
    double diameter = 0;
    for (std::size_t i = 1; i < simplex.size(); ++i)
      diameter = std::max(diameter,
                          (simplex[i].values - simplex[0].values).norm());
    if (diameter < tolerance) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dims);
    for (std::size_t i = 0; i + 1 < simplex.size(); ++i)
      centroid += simplex[i].values;
    centroid /= static_cast<double>(simplex.size() - 1);
    const Candidate& worst = simplex.back();

    auto probe = [&](double coeff) {
      Candidate c;
      c.values = space.clamp(centroid + coeff * (centroid - worst.values));
      c.fitness = eval(c.values);
      return c;
    };

    Candidate reflected = probe(refl);
    if (eval.exhausted() && reflected.fitness <= worst.fitness) break;

    if (reflected.fitness > simplex[0].fitness && !eval.exhausted()) {
      Candidate expanded = probe(expand);
      simplex.back() = expanded.fitness > reflected.fitness ? expanded
                                                            : reflected;
    } else if (reflected.fitness >
               simplex[simplex.size() - 2].fitness) {
      simplex.back() = reflected;
    } else if (!eval.exhausted()) {
      Candidate contracted = probe(reflected.fitness > worst.fitness
                                       ? contract
                                       : -contract);
      if (contracted.fitness >
          std::max(reflected.fitness, worst.fitness)) {
        simplex.back() = contracted;
      } else {
        // shrink toward the best vertex
        for (std::size_t i = 1; i < simplex.size() && !eval.exhausted(); ++i) {
          simplex[i].values = space.clamp(
              simplex[0].values +
              shrink * (simplex[i].values - simplex[0].values));
          simplex[i].fitness = eval(simplex[i].values);
        }
      }
    } else {
      if (reflected.fitness > worst.fitness) simplex.back() = reflected;
    }
    std::sort(simplex.begin(), simplex.end(), by_fitness_desc);
    record(++gen);
  }

  result.best = simplex[0];
  for (const auto& c : simplex)
    if (c.fitness > result.best.fitness) result.best = c;
  result.evaluations = eval.used();
  return result;
}

OptResult optimize(const OptimizerConfig& config, const ParamSpace& space,
                   const FitnessFn& fitness) {
  validate(space);
  if (config.budget < 1) throw std::invalid_argument("optimize: empty budget");

  Rng rng(mix_seed(config.seed, 0x0b7a11ULL));

  if (config.algorithm == Algorithm::nelder_mead)
    return nelder_mead(space.sample(rng), space, fitness, config.budget,
                       config.nm_tolerance);

  const int pop_size =
      config.algorithm == Algorithm::opo_ea ? 1 : config.population;
  if (config.budget < pop_size)
    throw std::invalid_argument(
        "optimize: budget smaller than one generation");

  Evaluator eval(fitness, config.budget);
  std::vector<Candidate> population(static_cast<std::size_t>(pop_size));
  for (auto& c : population) {
    c.values = space.sample(rng);
    c.fitness = eval(c.values);
    c.evaluated = true;
  }

  OptResult result;
  double best_so_far = kNegInf;
  auto record = [&](int gen) {
    double mean = 0;
    for (const auto& c : population) {
      best_so_far = std::max(best_so_far, c.fitness);
      mean += c.fitness;
    }
    mean /= static_cast<double>(population.size());
    result.trace.push_back({gen, eval.used(), best_so_far, mean});
  };
  record(0);

  Swarm swarm;
  if (config.algorithm == Algorithm::pso) {
    swarm.particles = population;
    swarm.velocities.assign(population.size(),
                            Eigen::VectorXd::Zero(space.size()));
    swarm.personal_best = population;
    swarm.global_best = population[0];
    for (const auto& c : population)
      if (c.fitness > swarm.global_best.fitness) swarm.global_best = c;
  }

  int gen = 0;
  while (!eval.exhausted()) {
    ++gen;
    switch (config.algorithm) {
      case Algorithm::de:
        de_step(population, space, config.de_weight, config.de_crossover, rng,
                eval);
        break;
      case Algorithm::ga: {
        // generation count estimate for the non-uniform mutation schedule
        const int iter_max =
            std::max(1, (config.budget - pop_size) / std::max(1, pop_size));
        ga_step(population, space, config, std::min(gen - 1, iter_max),
                iter_max, rng, eval);
        break;
      }
      case Algorithm::pso:
        pso_step(swarm, space, config, rng, eval);
        population = swarm.particles;
        break;
      case Algorithm::opo_ea:
        opo_ea_step(population[0], space, config.ea_sigma_frac, rng, eval);
        break;
      case Algorithm::nelder_mead:
        throw std::logic_error("unreachable");
    }
    record(gen);
  }

  if (config.algorithm == Algorithm::pso) {
    result.best = swarm.global_best;
  } else {
    result.best = population[0];
    for (const auto& c : population)
      if (c.fitness > result.best.fitness) result.best = c;
  }
  result.evaluations = eval.used();
  return result;
}

std::map<std::string, double> decode(const ParamSpace& space,
                                     const Eigen::VectorXd& v) {
  if (v.size() != space.size())
    throw std::invalid_argument("decode: dimension mismatch");
  std::map<std::string, double> out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto& d = space.dims[static_cast<std::size_t>(i)];
    double value = std::min(std::max(v[i], d.lower), d.upper);
    switch (d.kind) {
      case DimKind::continuous:
        break;
      case DimKind::integer:
        value = std::round(value);  // half away from zero
        break;
      case DimKind::categorical: {
        const auto buckets = static_cast<double>(d.categories.size());
        auto idx = static_cast<Eigen::Index>(
            std::floor((value - d.lower) / (d.upper - d.lower) * buckets));
        idx = std::min<Eigen::Index>(
            std::max<Eigen::Index>(idx, 0),
            static_cast<Eigen::Index>(d.categories.size()) - 1);
        value = static_cast<double>(idx);
        break;
      }
    }
    out[d.name] = value;
  }
  return out;
}

std::string trace_to_csv(const OptResult& result) {
  auto fmt = [](double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
  };
  std::string out = "generation,evaluations,best_fitness,mean_fitness\n";
  for (const auto& g : result.trace) {
    out += std::to_string(g.generation) + ',' + std::to_string(g.evaluations) +
           ',' + fmt(g.best) + ',' + fmt(g.mean) + '\n';
  }
  return out;
}

}  // namespace evo
