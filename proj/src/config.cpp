#include <cstdlib>
#include <fstream>
#include <set>
#include <stdexcept>

#include "evo/runner.hpp"

namespace evo {

using nlohmann::json;

namespace {

void check_keys(const json& doc, const std::set<std::string>& allowed,
                const std::string& where) {
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (!allowed.count(it.key()))
      throw StageError("config",
                       "unknown key '" + it.key() + "' in " + where);
}

ParamDim dim_from_json(const json& doc) {
  check_keys(doc, {"name", "kind", "lower", "upper", "categories"},
             "tuning space dimension");
  ParamDim d;
  d.name = doc.at("name").get<std::string>();
  const std::string kind = doc.value("kind", "continuous");
  if (kind == "continuous")
    d.kind = DimKind::continuous;
  else if (kind == "integer")
    d.kind = DimKind::integer;
  else if (kind == "categorical")
    d.kind = DimKind::categorical;
  else
    throw StageError("config", "unknown dim kind '" + kind + "'");
  d.lower = doc.at("lower").get<double>();
  d.upper = doc.at("upper").get<double>();
  if (doc.contains("categories"))
    d.categories = doc["categories"].get<std::vector<std::string>>();
  return d;
}

json dim_to_json(const ParamDim& d) {
  json doc{{"name", d.name},
           {"lower", d.lower},
           {"upper", d.upper}};
  switch (d.kind) {
    case DimKind::continuous: doc["kind"] = "continuous"; break;
    case DimKind::integer: doc["kind"] = "integer"; break;
    case DimKind::categorical:
      doc["kind"] = "categorical";
      doc["categories"] = d.categories;
      break;
  }
  return doc;
}

OptimizerConfig optimizer_from_json(const json& doc) {
  check_keys(doc,
             {"algorithm", "population", "budget", "seed", "de_weight",
              "de_crossover", "ga_alpha", "ga_beta", "ga_mutation_prob",
              "pso_inertia", "pso_c1", "pso_c2", "ea_sigma_frac",
              "nm_tolerance"},
             "optimizer");
  OptimizerConfig c;
  if (doc.contains("algorithm"))
    c.algorithm = algorithm_from_name(doc["algorithm"].get<std::string>());
  c.population = doc.value("population", c.population);
  c.budget = doc.value("budget", c.budget);
  c.seed = doc.value("seed", c.seed);
  c.de_weight = doc.value("de_weight", c.de_weight);
  c.de_crossover = doc.value("de_crossover", c.de_crossover);
  c.ga_alpha = doc.value("ga_alpha", c.ga_alpha);
  c.ga_beta = doc.value("ga_beta", c.ga_beta);
  c.ga_mutation_prob = doc.value("ga_mutation_prob", c.ga_mutation_prob);
  c.pso_inertia = doc.value("pso_inertia", c.pso_inertia);
  c.pso_c1 = doc.value("pso_c1", c.pso_c1);
  c.pso_c2 = doc.value("pso_c2", c.pso_c2);
  c.ea_sigma_frac = doc.value("ea_sigma_frac", c.ea_sigma_frac);
  c.nm_tolerance = doc.value("nm_tolerance", c.nm_tolerance);
  return c;
}

json optimizer_to_json(const OptimizerConfig& c) {
  return json{{"algorithm", algorithm_name(c.algorithm)},
              {"population", c.population},
              {"budget", c.budget},
              {"seed", c.seed},
              {"de_weight", c.de_weight},
              {"de_crossover", c.de_crossover},
              {"ga_alpha", c.ga_alpha},
              {"ga_beta", c.ga_beta},
              {"ga_mutation_prob", c.ga_mutation_prob},
              {"pso_inertia", c.pso_inertia},
              {"pso_c1", c.pso_c1},
              {"pso_c2", c.pso_c2},
              {"ea_sigma_frac", c.ea_sigma_frac},
              {"nm_tolerance", c.nm_tolerance}};
}

// ---- preset building blocks ---------------------------------------------

LearnerSpec learner(LearnerFamily family,
                    std::map<std::string, double> hyper = {}) {
  LearnerSpec s;
  s.family = family;
  s.hyperparams = std::move(hyper);
  return s;
}

ModelSpec bag_of(ModelSpec base, int members, double max_features,
                 double max_samples) {
  BaggingSpec s;
  s.base = std::make_shared<ModelSpec>(std::move(base));
  s.members = members;
  s.max_features = max_features;
  s.max_samples = max_samples;
  return ModelSpec(std::move(s));
}

LearnerSpec gbt_xgb_like() {
  return learner(LearnerFamily::gbt, {{"N_est", 100},
                                      {"Max_d", 6},
                                      {"eta", 0.3},
                                      {"lambda", 1},
                                      {"Min_cw", 1},
                                      {"sub_s", 1}});
}

// Leaf-heavy, shallow-learning-rate configuration standing in for the
// external histogram booster.
LearnerSpec gbt_lgbm_like() {
  return learner(LearnerFamily::gbt, {{"N_est", 150},
                                      {"Max_d", 10},
                                      {"eta", 0.1},
                                      {"lambda", 1},
                                      {"Min_cw", 3},
                                      {"sub_s", 0.9}});
}

LearnerSpec cart_default() {
  return learner(LearnerFamily::cart,
                 {{"max_depth", 16}, {"min_samples_leaf", 5}});
}

ModelSpec rf_like(int members) {
  return bag_of(ModelSpec(cart_default()), members, 0.34, 1.0);
}

ExperimentConfig preset_common() {
  ExperimentConfig c;
  c.lof.enabled = true;
  c.lof.k = 20;
  c.lof.threshold = 1.5;
  c.folds = {10, 1, 42};
  c.jobs = 8;
  c.output_dir = ".";
  return c;
}

ParamSpace gbt_table_space() {
  ParamSpace space;
  space.dims = {
      {"N_est", DimKind::integer, 1, 150, {}},
      {"Max_d", DimKind::integer, 6, 150, {}},
      {"B", DimKind::categorical, 0, 1, {"gbtree", "dart"}},
      {"eta", DimKind::continuous, 0, 1, {}},
      {"gamma", DimKind::continuous, 0, 1, {}},
      {"Min_cw", DimKind::continuous, 1, 10, {}},
      {"sub_s", DimKind::continuous, 0, 1, {}},
      {"lambda", DimKind::continuous, 0, 1, {}},
      {"alpha", DimKind::continuous, 0, 1, {}},
  };
  return space;
}

ParamSpace bagging_et_space() {
  ParamSpace space;
  space.dims = {
      {"members", DimKind::integer, 5, 100, {}},
      {"max_features", DimKind::continuous, 0.05, 1, {}},
      {"max_samples", DimKind::continuous, 0.05, 1, {}},
      {"et_estimators", DimKind::integer, 10, 120, {}},
  };
  return space;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"paper-baselines", "paper-bagging", "paper-stacking",
          "paper-voting"};
}

ExperimentConfig make_preset(const std::string& name) {
  ExperimentConfig c = preset_common();
  c.preset = name;
  if (name == "paper-baselines") {
    c.roster.push_back({"linear", ModelSpec(learner(LearnerFamily::linear)),
                        false, false});
    c.roster.push_back(
        {"knn", ModelSpec(learner(LearnerFamily::knn, {{"K", 5}})), false,
         false});
    c.roster.push_back({"cart", ModelSpec(cart_default()), false, false});
    c.roster.push_back(
        {"extratree", ModelSpec(learner(LearnerFamily::extratree)), false,
         false});
    c.roster.push_back({"gbt", ModelSpec(gbt_xgb_like()), false, false});
    c.roster.push_back({"rf", rf_like(30), false, false});
    TuningBlock block;
    block.name = "gbt-space";
    block.target = "gbt";
    block.space = gbt_table_space();
    block.optimizer.algorithm = Algorithm::de;
    block.optimizer.population = 25;
    block.optimizer.budget = 1000;
    c.tuning.push_back(std::move(block));
    return c;
  }
  if (name == "paper-bagging") {
    c.roster.push_back(
        {"bag-extratree",
         bag_of(ModelSpec(learner(LearnerFamily::extratree)), 60, 0.4, 1.0),
         false, false});
    c.roster.push_back({"bag-cart", bag_of(ModelSpec(cart_default()), 30, 0.7,
                                           1.0),
                        false, false});
    TuningBlock block;
    block.name = "bagging-et-space";
    block.target = "bag-extratree";
    block.space = bagging_et_space();
    block.optimizer.algorithm = Algorithm::opo_ea;
    block.optimizer.population = 25;
    block.optimizer.budget = 1000;
    c.tuning.push_back(std::move(block));
    return c;
  }
  if (name == "paper-stacking") {
    StackingSpec stack;
    stack.sub_learners = {ModelSpec(learner(LearnerFamily::extratree)),
                          ModelSpec(gbt_lgbm_like()), rf_like(20),
                          ModelSpec(learner(LearnerFamily::knn, {{"K", 5}}))};
    stack.meta =
        std::make_shared<ModelSpec>(ModelSpec(learner(LearnerFamily::linear)));
    stack.oof_folds = 5;
    c.roster.push_back({"stacking", ModelSpec(std::move(stack)), false, false});
    c.roster.push_back(
        {"extratree", ModelSpec(learner(LearnerFamily::extratree)), false,
         false});
    c.roster.push_back({"gbt-shallow", ModelSpec(gbt_lgbm_like()), false,
                        false});
    c.roster.push_back({"rf", rf_like(20), false, false});
    c.roster.push_back(
        {"knn", ModelSpec(learner(LearnerFamily::knn, {{"K", 5}})), false,
         false});
    return c;
  }
  if (name == "paper-voting") {
    VotingSpec voting;
    voting.members = {ModelSpec(gbt_xgb_like()),
                      ModelSpec(gbt_lgbm_like()),
                      ModelSpec(learner(LearnerFamily::extratree)),
                      rf_like(20),
                      ModelSpec(learner(LearnerFamily::knn, {{"K", 5}})),
                      ModelSpec(cart_default())};
    voting.weights = Eigen::VectorXd::Ones(6);
    c.roster.push_back({"voting", ModelSpec(std::move(voting)), true, false});
    return c;
  }
  throw StageError("config", "unknown preset '" + name + "'");
}

ExperimentConfig config_from_json(const json& doc) {
  check_keys(doc,
             {"preset", "dataset", "exclude_random_controls", "lof", "folds",
              "models", "tuning", "output_dir", "jobs"},
             "config");
  ExperimentConfig c;
  if (doc.contains("preset"))
    c = make_preset(doc["preset"].get<std::string>());

  if (doc.contains("dataset")) c.dataset = doc["dataset"].get<std::string>();
  if (doc.contains("exclude_random_controls"))
    c.exclude_random_controls = doc["exclude_random_controls"].get<bool>();
  if (doc.contains("output_dir"))
    c.output_dir = doc["output_dir"].get<std::string>();
  if (doc.contains("jobs")) c.jobs = doc["jobs"].get<int>();

  if (doc.contains("lof")) {
    const json& l = doc["lof"];
    check_keys(l, {"enabled", "k", "threshold", "columns"}, "lof");
    c.lof.enabled = l.value("enabled", c.lof.enabled);
    c.lof.k = l.value("k", c.lof.k);
    c.lof.threshold = l.value("threshold", c.lof.threshold);
    if (l.contains("columns"))
      c.lof.columns = l["columns"].get<std::vector<std::string>>();
  }
  if (doc.contains("folds")) {
    const json& f = doc["folds"];
    check_keys(f, {"k", "repeats", "seed"}, "folds");
    c.folds.k = f.value("k", c.folds.k);
    c.folds.repeats = f.value("repeats", c.folds.repeats);
    c.folds.seed = f.value("seed", c.folds.seed);
  }
  if (doc.contains("models")) {
    c.roster.clear();
    for (const auto& m : doc["models"]) {
      check_keys(m, {"name", "spec", "prune_voting", "greedy_stack"}, "model");
      RosterModel rm;
      rm.name = m.at("name").get<std::string>();
      rm.spec = model_spec_from_json(m.at("spec"));
      rm.prune_voting = m.value("prune_voting", false);
      rm.greedy_stack = m.value("greedy_stack", false);
      c.roster.push_back(std::move(rm));
    }
  }
  if (doc.contains("tuning")) {
    c.tuning.clear();
    for (const auto& t : doc["tuning"]) {
      check_keys(t, {"name", "target", "space", "optimizer"}, "tuning block");
      TuningBlock block;
      block.name = t.value("name", std::string("tuning"));
      block.target = t.at("target").get<std::string>();
      for (const auto& d : t.at("space")) block.space.dims.push_back(dim_from_json(d));
      if (t.contains("optimizer"))
        block.optimizer = optimizer_from_json(t["optimizer"]);
      c.tuning.push_back(std::move(block));
    }
  }

  std::set<std::string> names;
  for (const auto& m : c.roster) {
    if (!names.insert(m.name).second)
      throw StageError("config", "duplicate model name '" + m.name + "'");
    validate(m.spec);
  }
  for (const auto& t : c.tuning) {
    if (!names.count(t.target))
      throw StageError("config", "tuning block '" + t.name +
                                     "' references unknown model '" +
                                     t.target + "'");
    validate(t.space);
  }
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json models = json::array();
  for (const auto& m : c.roster) {
    json doc{{"name", m.name}, {"spec", model_spec_to_json(m.spec)}};
    if (m.prune_voting) doc["prune_voting"] = true;
    if (m.greedy_stack) doc["greedy_stack"] = true;
    models.push_back(std::move(doc));
  }
  json tuning = json::array();
  for (const auto& t : c.tuning) {
    json dims = json::array();
    for (const auto& d : t.space.dims) dims.push_back(dim_to_json(d));
    tuning.push_back(json{{"name", t.name},
                          {"target", t.target},
                          {"space", dims},
                          {"optimizer", optimizer_to_json(t.optimizer)}});
  }
  json doc{{"dataset", c.dataset},
           {"exclude_random_controls", c.exclude_random_controls},
           {"lof",
            {{"enabled", c.lof.enabled},
             {"k", c.lof.k},
             {"threshold", c.lof.threshold},
             {"columns", c.lof.columns}}},
           {"folds",
            {{"k", c.folds.k},
             {"repeats", c.folds.repeats},
             {"seed", c.folds.seed}}},
           {"models", models},
           {"tuning", tuning},
           {"output_dir", c.output_dir},
           {"jobs", c.jobs}};
  if (!c.preset.empty()) doc["preset"] = c.preset;
  return doc;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StageError("config", "cannot open '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw StageError("config", "invalid JSON in '" + path + "': " + e.what());
  }
  return config_from_json(doc);
}

std::string resolve_dataset_path(const ExperimentConfig& config) {
  if (!config.dataset.empty()) return config.dataset;
  if (const char* env = std::getenv("EVOENSEMBLE_DATA"); env && *env)
    return env;
  throw StageError("load",
                   "no dataset path: set \"dataset\" in the config or the "
                   "EVOENSEMBLE_DATA environment variable");
}

}  // namespace evo
