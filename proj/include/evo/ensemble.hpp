#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "evo/learners.hpp"
#include "evo/rng.hpp"

namespace evo {

struct ModelSpec;

// Bootstrap-aggregated ensemble. base is usually a single learner; nesting an
// ensemble spec is allowed so tuned forests can serve as members.
struct BaggingSpec {
  std::shared_ptr<const ModelSpec> base;
  int members = 10;
  double max_samples = 1.0;   // fraction of rows, drawn with replacement
  double max_features = 1.0;  // fraction of columns, drawn without replacement
  std::uint64_t seed = 0;
};

// Level-0 sub-learners plus a level-1 meta-learner trained on out-of-fold
// predictions.
struct StackingSpec {
  std::vector<ModelSpec> sub_learners;
  std::shared_ptr<const ModelSpec> meta;
  int oof_folds = 5;
  std::uint64_t seed = 0;
};

struct VotingSpec {
  std::vector<ModelSpec> members;
  Eigen::VectorXd weights;  // non-negative, at least one positive
};

struct ModelSpec {
  std::variant<LearnerSpec, BaggingSpec, StackingSpec, VotingSpec> value;

  ModelSpec() = default;
  ModelSpec(LearnerSpec s) : value(std::move(s)) {}
  ModelSpec(BaggingSpec s) : value(std::move(s)) {}
  ModelSpec(StackingSpec s) : value(std::move(s)) {}
  ModelSpec(VotingSpec s) : value(std::move(s)) {}
};

void validate(const ModelSpec& spec);

// Re-seeds a spec tree deterministically; nested members get derived streams.
ModelSpec with_seed(const ModelSpec& spec, std::uint64_t seed);

// ceil(rate*n) ids drawn uniformly with replacement.
std::vector<Eigen::Index> bootstrap_sample(Eigen::Index n, double rate,
                                           Rng& rng);

ModelPtr fit_bagging(const BaggingSpec& spec, const Eigen::MatrixXd& x,
                     const Eigen::VectorXd& y);
ModelPtr fit_stacking(const StackingSpec& spec, const Eigen::MatrixXd& x,
                      const Eigen::VectorXd& y);
ModelPtr fit_voting(const VotingSpec& spec, const Eigen::MatrixXd& x,
                    const Eigen::VectorXd& y);
ModelPtr fit_model(const ModelSpec& spec, const Eigen::MatrixXd& x,
                   const Eigen::VectorXd& y);

// Weighted average of member predictions (columns = members). Equal weights
// reduce to the arithmetic mean; otherwise sum(w h)/sum(w).
Eigen::VectorXd vote_average(const Eigen::VectorXd& weights,
                             const Eigen::MatrixXd& member_predictions);
double vote_average(const Eigen::VectorXd& weights,
                    const Eigen::VectorXd& member_predictions);

// Weighted majority vote over integer class labels; ties resolve to the
// lowest label.
int vote_majority(const std::vector<int>& labels,
                  const Eigen::VectorXd& weights);

struct GreedyStep {
  std::size_t candidate = 0;
  double delta = 0;
  bool accepted = false;
};

struct GreedyResult {
  std::vector<std::size_t> selected;    // indices into the candidate list
  std::vector<double> scores;           // score after each accepted step
  std::vector<GreedyStep> steps;
};

// Candidates must be ordered best-first. Starts from the head, keeps the
// next candidate only when it strictly improves the evaluation score.
GreedyResult greedy_forward_select(
    std::size_t n_candidates,
    const std::function<double(const std::vector<std::size_t>&)>& evaluate,
    std::size_t min_keep = 1);

// Repeatedly drops the member whose removal most improves the score, then
// refines the surviving weights with Nelder-Mead on the same evaluator.
VotingSpec backward_prune_voting(
    const VotingSpec& spec,
    const std::function<double(const VotingSpec&)>& evaluate,
    bool refine_weights = true, int refine_budget = 200);

// Fitted-stacking leakage bookkeeping: which out-of-fold partition each
// training row sat in, and the train rows each fold's models saw.
struct StackingAudit {
  std::vector<int> fold_of_row;
  std::vector<std::vector<Eigen::Index>> train_rows_per_fold;
};
const StackingAudit* stacking_audit(const Model& model);

nlohmann::json model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& doc);

// Loads any serialized model document (base learner or ensemble).
ModelPtr model_from_json(const nlohmann::json& doc);

}  // namespace evo
