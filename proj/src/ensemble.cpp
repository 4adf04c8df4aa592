#include "evo/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "evo/metaopt.hpp"

namespace evo {

using nlohmann::json;

namespace {

class BaggingModel final : public Model {
 public:
  BaggingModel(std::vector<ModelPtr> members,
               std::vector<std::vector<int>> features, Eigen::Index p)
      : members_(std::move(members)), features_(std::move(features)) {
    n_features_ = p;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    check_width(x);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(x.rows());
    for (std::size_t m = 0; m < members_.size(); ++m) {
      Eigen::MatrixXd xm = x(Eigen::all, features_[m]);
      acc += members_[m]->predict(xm);
    }
    return acc / static_cast<double>(members_.size());
  }

  json to_json() const override {
    json members = json::array();
    for (const auto& m : members_) members.push_back(m->to_json());
    json feats = json::array();
    for (const auto& f : features_) feats.push_back(f);
    return json{{"format", "evoensemble-model"},
                {"family", "bagging"},
                {"state",
                 {{"n_features", n_features_},
                  {"features", feats},
                  {"members", members}}}};
  }

 private:
  std::vector<ModelPtr> members_;
  std::vector<std::vector<int>> features_;
};

class StackingModel final : public Model {
 public:
  StackingModel(std::vector<ModelPtr> subs, ModelPtr meta, Eigen::Index p,
                StackingAudit audit)
      : subs_(std::move(subs)), meta_(std::move(meta)),
        audit_(std::move(audit)) {
    n_features_ = p;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    check_width(x);
    Eigen::MatrixXd z(x.rows(), static_cast<Eigen::Index>(subs_.size()));
    for (std::size_t j = 0; j < subs_.size(); ++j)
      z.col(static_cast<Eigen::Index>(j)) = subs_[j]->predict(x);
    return meta_->predict(z);
  }

  json to_json() const override {
    json subs = json::array();
    for (const auto& s : subs_) subs.push_back(s->to_json());
    return json{{"format", "evoensemble-model"},
                {"family", "stacking"},
                {"state",
                 {{"n_features", n_features_},
                  {"subs", subs},
                  {"meta", meta_->to_json()}}}};
  }

  const StackingAudit& audit() const { return audit_; }

 private:
  std::vector<ModelPtr> subs_;
  ModelPtr meta_;
  StackingAudit audit_;
};

class VotingModel final : public Model {
 public:
  VotingModel(std::vector<ModelPtr> members, Eigen::VectorXd weights,
              Eigen::Index p)
      : members_(std::move(members)), weights_(std::move(weights)) {
    n_features_ = p;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    check_width(x);
    Eigen::MatrixXd preds(x.rows(), static_cast<Eigen::Index>(members_.size()));
    for (std::size_t m = 0; m < members_.size(); ++m)
      preds.col(static_cast<Eigen::Index>(m)) = members_[m]->predict(x);
    return vote_average(weights_, preds);
  }

  json to_json() const override {
    json members = json::array();
    for (const auto& m : members_) members.push_back(m->to_json());
    json w = json::array();
    for (Eigen::Index i = 0; i < weights_.size(); ++i) w.push_back(weights_[i]);
    return json{{"format", "evoensemble-model"},
                {"family", "voting"},
                {"state",
                 {{"n_features", n_features_},
                  {"weights", w},
                  {"members", members}}}};
  }

 private:
  std::vector<ModelPtr> members_;
  Eigen::VectorXd weights_;
};

void validate_weights(const Eigen::VectorXd& w, std::size_t members) {
  if (static_cast<std::size_t>(w.size()) != members)
    throw std::invalid_argument("voting: weight count != member count");
  double sum = 0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] < 0) throw std::invalid_argument("voting: negative weight");
    sum += w[i];
  }
  if (!(sum > 0)) throw std::invalid_argument("voting: weights sum to zero");
}

}  // namespace

void validate(const ModelSpec& spec) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, LearnerSpec>) {
          validate(s);
        } else if constexpr (std::is_same_v<T, BaggingSpec>) {
          if (!s.base) throw std::invalid_argument("bagging: missing base");
          if (s.members < 1)
            throw std::invalid_argument("bagging: members must be >= 1");
          if (!(s.max_samples > 0 && s.max_samples <= 1))
            throw std::invalid_argument("bagging: max_samples not in (0,1]");
          if (!(s.max_features > 0 && s.max_features <= 1))
            throw std::invalid_argument("bagging: max_features not in (0,1]");
          validate(*s.base);
        } else if constexpr (std::is_same_v<T, StackingSpec>) {
          if (s.sub_learners.empty())
            throw std::invalid_argument("stacking: needs sub-learners");
          if (!s.meta) throw std::invalid_argument("stacking: missing meta");
          if (s.oof_folds < 2)
            throw std::invalid_argument("stacking: oof_folds must be >= 2");
          for (const auto& sub : s.sub_learners) validate(sub);
          validate(*s.meta);
        } else {
          if (s.members.empty())
            throw std::invalid_argument("voting: needs members");
          validate_weights(s.weights, s.members.size());
          for (const auto& m : s.members) validate(m);
        }
      },
      spec.value);
}

ModelSpec with_seed(const ModelSpec& spec, std::uint64_t seed) {
  ModelSpec out = spec;
  std::visit(
      [&](auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, LearnerSpec>) {
          s.seed = seed;
        } else if constexpr (std::is_same_v<T, BaggingSpec>) {
          s.seed = seed;
        } else if constexpr (std::is_same_v<T, StackingSpec>) {
          s.seed = seed;
        } else {
          for (std::size_t i = 0; i < s.members.size(); ++i)
            s.members[i] = with_seed(s.members[i], mix_seed(seed, i));
        }
      },
      out.value);
  return out;
}

std::vector<Eigen::Index> bootstrap_sample(Eigen::Index n, double rate,
                                           Rng& rng) {
  if (n < 1) throw std::invalid_argument("bootstrap_sample: empty population");
  if (!(rate > 0 && rate <= 1))
    throw std::invalid_argument("bootstrap_sample: rate not in (0,1]");
  const auto m = static_cast<std::size_t>(
      std::ceil(rate * static_cast<double>(n)));
  std::vector<Eigen::Index> ids(m);
  for (auto& id : ids)
    id = static_cast<Eigen::Index>(
        rng.uniform_index(static_cast<std::uint64_t>(n)));
  return ids;
}

ModelPtr fit_bagging(const BaggingSpec& spec, const Eigen::MatrixXd& x,
                     const Eigen::VectorXd& y) {
  validate(ModelSpec(spec));
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const auto p_sub = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(
             std::ceil(spec.max_features * static_cast<double>(p))));

  std::vector<ModelPtr> members;
  std::vector<std::vector<int>> feature_sets;
  members.reserve(static_cast<std::size_t>(spec.members));
  for (int m = 0; m < spec.members; ++m) {
    Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(m), 0xBA66ULL));
    std::vector<Eigen::Index> rows = bootstrap_sample(n, spec.max_samples, rng);

    std::vector<int> feats(static_cast<std::size_t>(p));
    std::iota(feats.begin(), feats.end(), 0);
    for (Eigen::Index i = 0; i < p_sub; ++i) {
      const auto j = static_cast<std::size_t>(i) +
                     static_cast<std::size_t>(rng.uniform_index(
                         static_cast<std::uint64_t>(p - i)));
      std::swap(feats[static_cast<std::size_t>(i)], feats[j]);
    }
    feats.resize(static_cast<std::size_t>(p_sub));
    std::sort(feats.begin(), feats.end());

    Eigen::MatrixXd xm(static_cast<Eigen::Index>(rows.size()), p_sub);
    Eigen::VectorXd ym(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (Eigen::Index j = 0; j < p_sub; ++j)
        xm(static_cast<Eigen::Index>(i), j) =
            x(rows[i], feats[static_cast<std::size_t>(j)]);
      ym[static_cast<Eigen::Index>(i)] = y[rows[i]];
    }
    ModelSpec member_spec =
        with_seed(*spec.base, mix_seed(spec.seed, static_cast<std::uint64_t>(m)));
    members.push_back(fit_model(member_spec, xm, ym));
    feature_sets.push_back(std::move(feats));
  }
  return std::make_shared<BaggingModel>(std::move(members),
                                        std::move(feature_sets), p);
}

ModelPtr fit_stacking(const StackingSpec& spec, const Eigen::MatrixXd& x,
                      const Eigen::VectorXd& y) {
  validate(ModelSpec(spec));
  const Eigen::Index n = x.rows();
  if (n < spec.oof_folds)
    throw std::invalid_argument("fit_stacking: fewer rows than oof folds");

  // Shuffled fold assignment for the out-of-fold meta features.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(spec.seed, 0x00FULL));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.uniform_index(i));
    std::swap(order[i - 1], order[j]);
  }
  StackingAudit audit;
  audit.fold_of_row.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t pos = 0; pos < order.size(); ++pos)
    audit.fold_of_row[static_cast<std::size_t>(order[pos])] =
        static_cast<int>(pos % static_cast<std::size_t>(spec.oof_folds));
  audit.train_rows_per_fold.resize(static_cast<std::size_t>(spec.oof_folds));

  const auto n_subs = static_cast<Eigen::Index>(spec.sub_learners.size());
  Eigen::MatrixXd z(n, n_subs);
  for (int f = 0; f < spec.oof_folds; ++f) {
    std::vector<Eigen::Index> train, held;
    for (Eigen::Index i = 0; i < n; ++i)
      (audit.fold_of_row[static_cast<std::size_t>(i)] == f ? held : train)
          .push_back(i);
    audit.train_rows_per_fold[static_cast<std::size_t>(f)] = train;

    Eigen::MatrixXd xt = x(train, Eigen::all);
    Eigen::VectorXd yt(static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i)
      yt[static_cast<Eigen::Index>(i)] = y[train[i]];
    Eigen::MatrixXd xh = x(held, Eigen::all);

    for (Eigen::Index j = 0; j < n_subs; ++j) {
      ModelSpec sub = with_seed(
          spec.sub_learners[static_cast<std::size_t>(j)],
          mix_seed(spec.seed, static_cast<std::uint64_t>(j),
                   static_cast<std::uint64_t>(f)));
      ModelPtr model = fit_model(sub, xt, yt);
      Eigen::VectorXd pred = model->predict(xh);
      for (std::size_t i = 0; i < held.size(); ++i)
        z(held[i], j) = pred[static_cast<Eigen::Index>(i)];
    }
  }

  ModelSpec meta_spec = with_seed(*spec.meta, mix_seed(spec.seed, 0x3E7AULL));
  ModelPtr meta = fit_model(meta_spec, z, y);

  std::vector<ModelPtr> subs;
  for (Eigen::Index j = 0; j < n_subs; ++j) {
    ModelSpec sub = with_seed(
        spec.sub_learners[static_cast<std::size_t>(j)],
        mix_seed(spec.seed, static_cast<std::uint64_t>(j),
                 static_cast<std::uint64_t>(spec.oof_folds)));
    subs.push_back(fit_model(sub, x, y));
  }
  return std::make_shared<StackingModel>(std::move(subs), std::move(meta),
                                         x.cols(), std::move(audit));
}

ModelPtr fit_voting(const VotingSpec& spec, const Eigen::MatrixXd& x,
                    const Eigen::VectorXd& y) {
  validate(ModelSpec(spec));
  std::vector<ModelPtr> members;
  for (const auto& m : spec.members) members.push_back(fit_model(m, x, y));
  return std::make_shared<VotingModel>(std::move(members), spec.weights,
                                       x.cols());
}

ModelPtr fit_model(const ModelSpec& spec, const Eigen::MatrixXd& x,
                   const Eigen::VectorXd& y) {
  return std::visit(
      [&](const auto& s) -> ModelPtr {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, LearnerSpec>)
          return fit(s, x, y);
        else if constexpr (std::is_same_v<T, BaggingSpec>)
          return fit_bagging(s, x, y);
        else if constexpr (std::is_same_v<T, StackingSpec>)
          return fit_stacking(s, x, y);
        else
          return fit_voting(s, x, y);
      },
      spec.value);
}

Eigen::VectorXd vote_average(const Eigen::VectorXd& weights,
                             const Eigen::MatrixXd& member_predictions) {
  validate_weights(weights,
                   static_cast<std::size_t>(member_predictions.cols()));
  bool all_equal = true;
  for (Eigen::Index i = 1; i < weights.size(); ++i)
    if (weights[i] != weights[0]) all_equal = false;
  if (all_equal)
    return member_predictions.rowwise().sum() /
           static_cast<double>(member_predictions.cols());
  return member_predictions * weights / weights.sum();
}

double vote_average(const Eigen::VectorXd& weights,
                    const Eigen::VectorXd& member_predictions) {
  return vote_average(weights, Eigen::MatrixXd(member_predictions.transpose()))[0];
}

int vote_majority(const std::vector<int>& labels,
                  const Eigen::VectorXd& weights) {
  if (labels.empty()) throw std::invalid_argument("vote_majority: empty votes");
  validate_weights(weights, labels.size());
  std::set<int> classes(labels.begin(), labels.end());
  int best_class = *classes.begin();
  double best_score = -1;
  for (int c : classes) {
    double score = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) score += weights[static_cast<Eigen::Index>(i)];
    if (score > best_score) {  // ties keep the lowest label (set is ordered)
      best_score = score;
      best_class = c;
    }
  }
  return best_class;
}

GreedyResult greedy_forward_select(
    std::size_t n_candidates,
    const std::function<double(const std::vector<std::size_t>&)>& evaluate,
    std::size_t min_keep) {
  if (n_candidates == 0)
    throw std::invalid_argument("greedy_forward_select: no candidates");
  if (min_keep < 1) min_keep = 1;

  GreedyResult result;
  result.selected.push_back(0);
  double score = evaluate(result.selected);
  result.scores.push_back(score);
  for (std::size_t i = 1; i < n_candidates; ++i) {
    std::vector<std::size_t> trial = result.selected;
    trial.push_back(i);
    const double s = evaluate(trial);
    const double delta = s - score;
    const bool accept = delta > 0 || result.selected.size() < min_keep;
    result.steps.push_back({i, delta, accept});
    if (accept) {
      result.selected = std::move(trial);
      score = s;
      result.scores.push_back(score);
    }
  }
  return result;
}

VotingSpec backward_prune_voting(
    const VotingSpec& spec,
    const std::function<double(const VotingSpec&)>& evaluate,
    bool refine_weights, int refine_budget) {
  if (spec.members.size() < 2)
    throw std::invalid_argument("backward_prune_voting: needs >= 2 members");

  VotingSpec current = spec;
  double score = evaluate(current);
  while (current.members.size() >= 2) {
    double best_score = score;
    int best_drop = -1;
    for (std::size_t i = 0; i < current.members.size(); ++i) {
      VotingSpec reduced;
      reduced.weights.resize(static_cast<Eigen::Index>(
          current.members.size() - 1));
      Eigen::Index w = 0;
      for (std::size_t j = 0; j < current.members.size(); ++j) {
        if (j == i) continue;
        reduced.members.push_back(current.members[j]);
        reduced.weights[w++] = current.weights[static_cast<Eigen::Index>(j)];
      }
      const double s = evaluate(reduced);
      if (s > best_score) {
        best_score = s;
        best_drop = static_cast<int>(i);
      }
    }
    if (best_drop < 0) break;
    VotingSpec reduced;
    reduced.weights.resize(static_cast<Eigen::Index>(current.members.size() - 1));
    Eigen::Index w = 0;
    for (std::size_t j = 0; j < current.members.size(); ++j) {
      if (j == static_cast<std::size_t>(best_drop)) continue;
      reduced.members.push_back(current.members[j]);
      reduced.weights[w++] = current.weights[static_cast<Eigen::Index>(j)];
    }
    current = std::move(reduced);
    score = best_score;
  }

  if (refine_weights && current.members.size() >= 2) {
    ParamSpace space;
    for (std::size_t i = 0; i < current.members.size(); ++i)
      space.dims.push_back({"w" + std::to_string(i), DimKind::continuous, 0.05,
                            1.0, {}});
    Eigen::VectorXd start = current.weights / current.weights.maxCoeff();
    start = space.clamp(start);
    OptResult refined = nelder_mead(
        start, space,
        [&](const Eigen::VectorXd& w) {
          VotingSpec trial = current;
          trial.weights = w;
          return evaluate(trial);
        },
        refine_budget);
    current.weights = refined.best.values / refined.best.values.sum();
  }
  return current;
}

const StackingAudit* stacking_audit(const Model& model) {
  const auto* stacking = dynamic_cast<const StackingModel*>(&model);
  return stacking ? &stacking->audit() : nullptr;
}

json model_spec_to_json(const ModelSpec& spec) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, LearnerSpec>) {
          json doc = spec_to_json(s);
          doc["kind"] = "learner";
          return doc;
        } else if constexpr (std::is_same_v<T, BaggingSpec>) {
          return json{{"kind", "bagging"},
                      {"base", model_spec_to_json(*s.base)},
                      {"members", s.members},
                      {"max_samples", s.max_samples},
                      {"max_features", s.max_features},
                      {"seed", s.seed}};
        } else if constexpr (std::is_same_v<T, StackingSpec>) {
          json subs = json::array();
          for (const auto& sub : s.sub_learners)
            subs.push_back(model_spec_to_json(sub));
          return json{{"kind", "stacking"},
                      {"subs", subs},
                      {"meta", model_spec_to_json(*s.meta)},
                      {"oof_folds", s.oof_folds},
                      {"seed", s.seed}};
        } else {
          json members = json::array();
          for (const auto& m : s.members)
            members.push_back(model_spec_to_json(m));
          json w = json::array();
          for (Eigen::Index i = 0; i < s.weights.size(); ++i)
            w.push_back(s.weights[i]);
          return json{{"kind", "voting"}, {"members", members}, {"weights", w}};
        }
      },
      spec.value);
}

ModelSpec model_spec_from_json(const json& doc) {
  const std::string kind = doc.value("kind", "learner");
  if (kind == "learner") return ModelSpec(spec_from_json(doc));
  if (kind == "bagging") {
    BaggingSpec s;
    s.base = std::make_shared<ModelSpec>(model_spec_from_json(doc.at("base")));
    s.members = doc.at("members").get<int>();
    s.max_samples = doc.value("max_samples", 1.0);
    s.max_features = doc.value("max_features", 1.0);
    s.seed = doc.value("seed", std::uint64_t{0});
    return ModelSpec(std::move(s));
  }
  if (kind == "stacking") {
    StackingSpec s;
    for (const auto& sub : doc.at("subs"))
      s.sub_learners.push_back(model_spec_from_json(sub));
    s.meta = std::make_shared<ModelSpec>(model_spec_from_json(doc.at("meta")));
    s.oof_folds = doc.value("oof_folds", 5);
    s.seed = doc.value("seed", std::uint64_t{0});
    return ModelSpec(std::move(s));
  }
  if (kind == "voting") {
    VotingSpec s;
    for (const auto& m : doc.at("members"))
      s.members.push_back(model_spec_from_json(m));
    const auto& w = doc.at("weights");
    s.weights.resize(static_cast<Eigen::Index>(w.size()));
    for (Eigen::Index i = 0; i < s.weights.size(); ++i)
      s.weights[i] = w[static_cast<std::size_t>(i)].get<double>();
    return ModelSpec(std::move(s));
  }
  throw std::invalid_argument("unknown spec kind '" + kind + "'");
}

ModelPtr model_from_json(const json& doc) {
  const std::string family = doc.at("family");
  const json& state = doc.contains("state") ? doc.at("state") : doc;
  if (family == "bagging") {
    std::vector<ModelPtr> members;
    for (const auto& m : state.at("members"))
      members.push_back(model_from_json(m));
    std::vector<std::vector<int>> feats;
    for (const auto& f : state.at("features"))
      feats.push_back(f.get<std::vector<int>>());
    return std::make_shared<BaggingModel>(
        std::move(members), std::move(feats),
        state.at("n_features").get<Eigen::Index>());
  }
  if (family == "stacking") {
    std::vector<ModelPtr> subs;
    for (const auto& s : state.at("subs")) subs.push_back(model_from_json(s));
    return std::make_shared<StackingModel>(
        std::move(subs), model_from_json(state.at("meta")),
        state.at("n_features").get<Eigen::Index>(), StackingAudit{});
  }
  if (family == "voting") {
    std::vector<ModelPtr> members;
    for (const auto& m : state.at("members"))
      members.push_back(model_from_json(m));
    const auto& w = state.at("weights");
    Eigen::VectorXd weights(static_cast<Eigen::Index>(w.size()));
    for (Eigen::Index i = 0; i < weights.size(); ++i)
      weights[i] = w[static_cast<std::size_t>(i)].get<double>();
    return std::make_shared<VotingModel>(std::move(members), std::move(weights),
                                         state.at("n_features").get<Eigen::Index>());
  }
  return base_model_from_json(doc);
}

}  // namespace evo
