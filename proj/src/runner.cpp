#include "evo/runner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <unordered_map>

#include "evo/pool.hpp"

namespace evo {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

std::uint64_t file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StageError("load", "cannot open '" + path + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
  return h;
}

struct TaskGrid {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  FoldPlan plan;
  int repeats = 1;

  std::size_t n_pairs() const { return plan.repeats.size(); }
  std::size_t runs_per_model() const {
    return static_cast<std::size_t>(repeats) * n_pairs();
  }
};

std::uint64_t model_stream(std::uint64_t seed, const std::string& name,
                           std::uint64_t repeat, std::uint64_t pair) {
  return mix_seed(seed, fnv1a(name.data(), name.size()), repeat, pair);
}

// Fits each voting member once per fold pair and caches validation/test
// predictions, so pruning and weight refinement never refit members.
struct VotingWorkspace {
  std::vector<std::string> member_keys;
  // member -> run -> predictions
  std::vector<std::vector<Eigen::VectorXd>> val_preds, test_preds;
  std::vector<Eigen::VectorXd> y_val, y_test;

  double score_subset(const std::vector<std::size_t>& members,
                      const Eigen::VectorXd& weights) const {
    double sum = 0;
    for (std::size_t run = 0; run < y_val.size(); ++run) {
      Eigen::MatrixXd preds(y_val[run].size(),
                            static_cast<Eigen::Index>(members.size()));
      for (std::size_t m = 0; m < members.size(); ++m)
        preds.col(static_cast<Eigen::Index>(m)) = val_preds[members[m]][run];
      MetricReport rep = evaluate(y_val[run], vote_average(weights, preds));
      if (!rep.r_defined) return -std::numeric_limits<double>::infinity();
      sum += rep.r_value;
    }
    return sum / static_cast<double>(y_val.size());
  }
};

void run_plain_model(const RosterModel& model, const TaskGrid& grid,
                     std::uint64_t seed, int jobs, ModelOutcome& out) {
  const std::size_t n_runs = grid.runs_per_model();
  out.fold_reports.resize(n_runs);
  std::vector<std::string> errors(n_runs);

  run_parallel(n_runs, jobs, [&](std::size_t run) {
    const auto rep = static_cast<int>(run / grid.n_pairs());
    const auto pair = static_cast<int>(run % grid.n_pairs());
    const auto [test_fold, val_fold] = grid.plan.repeats[static_cast<std::size_t>(pair)];
    try {
      ModelSpec seeded = with_seed(
          model.spec, model_stream(seed, model.name,
                                   static_cast<std::uint64_t>(rep),
                                   static_cast<std::uint64_t>(pair)));
      out.fold_reports[run] = fit_and_score(
          seeded, grid.x, grid.y, grid.plan.rows_excluding(test_fold, val_fold),
          grid.plan.rows_in_fold(test_fold));
    } catch (const std::exception& e) {
      errors[run] = e.what();
    }
  });

  for (std::size_t run = 0; run < n_runs; ++run) {
    const auto rep = static_cast<int>(run / grid.n_pairs());
    const auto pair = static_cast<int>(run % grid.n_pairs());
    const auto [test_fold, val_fold] = grid.plan.repeats[static_cast<std::size_t>(pair)];
    out.runs.push_back({rep, pair, test_fold, val_fold});
    if (!errors[run].empty() && !out.failed) {
      out.failed = true;
      out.error = errors[run];
    }
  }
  if (!out.failed) out.summary = summarize(out.fold_reports);
}

void run_prune_voting_model(const RosterModel& model, const TaskGrid& grid,
                            std::uint64_t seed, int jobs, ModelOutcome& out) {
  const auto* voting = std::get_if<VotingSpec>(&model.spec.value);
  if (!voting)
    throw StageError("train",
                     "model '" + model.name + "' flagged prune_voting is not "
                     "a voting spec");
  const std::size_t n_members = voting->members.size();
  const std::size_t n_runs = grid.runs_per_model();

  VotingWorkspace ws;
  ws.member_keys.resize(n_members);
  for (std::size_t m = 0; m < n_members; ++m)
    ws.member_keys[m] = model_spec_to_json(voting->members[m]).dump();
  ws.val_preds.assign(n_members, std::vector<Eigen::VectorXd>(n_runs));
  ws.test_preds.assign(n_members, std::vector<Eigen::VectorXd>(n_runs));
  ws.y_val.resize(n_runs);
  ws.y_test.resize(n_runs);

  // member x run fit tasks
  run_parallel(n_members * n_runs, jobs, [&](std::size_t task) {
    const std::size_t m = task / n_runs;
    const std::size_t run = task % n_runs;
    const auto rep = static_cast<std::uint64_t>(run / grid.n_pairs());
    const auto pair = run % grid.n_pairs();
    const auto [test_fold, val_fold] = grid.plan.repeats[pair];
    auto train = grid.plan.rows_excluding(test_fold, val_fold);
    auto val_rows = grid.plan.rows_in_fold(val_fold);
    auto test_rows = grid.plan.rows_in_fold(test_fold);

    ModelSpec seeded = with_seed(
        voting->members[m],
        mix_seed(model_stream(seed, model.name, rep, pair), 0x33ULL, m));
    Eigen::MatrixXd xt = grid.x(train, Eigen::all);
    Eigen::VectorXd yt(static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i)
      yt[static_cast<Eigen::Index>(i)] = grid.y[train[i]];
    ModelPtr fitted = fit_model(seeded, xt, yt);
    ws.val_preds[m][run] = fitted->predict(grid.x(val_rows, Eigen::all));
    ws.test_preds[m][run] = fitted->predict(grid.x(test_rows, Eigen::all));
    if (m == 0) {
      Eigen::VectorXd yv(static_cast<Eigen::Index>(val_rows.size()));
      for (std::size_t i = 0; i < val_rows.size(); ++i)
        yv[static_cast<Eigen::Index>(i)] = grid.y[val_rows[i]];
      Eigen::VectorXd ys(static_cast<Eigen::Index>(test_rows.size()));
      for (std::size_t i = 0; i < test_rows.size(); ++i)
        ys[static_cast<Eigen::Index>(i)] = grid.y[test_rows[i]];
      ws.y_val[run] = std::move(yv);
      ws.y_test[run] = std::move(ys);
    }
  });

  auto member_index = [&](const ModelSpec& spec) -> std::size_t {
    const std::string key = model_spec_to_json(spec).dump();
    for (std::size_t m = 0; m < n_members; ++m)
      if (ws.member_keys[m] == key) return m;
    throw std::logic_error("prune_voting: unknown member spec");
  };

  auto evaluate_spec = [&](const VotingSpec& trial) -> double {
    std::vector<std::size_t> ids;
    ids.reserve(trial.members.size());
    for (const auto& m : trial.members) ids.push_back(member_index(m));
    return ws.score_subset(ids, trial.weights);
  };

  VotingSpec pruned = backward_prune_voting(*voting, evaluate_spec, true);

  std::vector<std::size_t> selected;
  for (const auto& m : pruned.members) selected.push_back(member_index(m));

  out.has_final_voting = true;
  out.final_weights = pruned.weights;
  for (std::size_t m : selected)
    out.final_members.push_back(model.name + ".member" + std::to_string(m));

  // test-fold reports of the pruned, weight-refined ensemble
  for (std::size_t run = 0; run < n_runs; ++run) {
    const auto rep = static_cast<int>(run / grid.n_pairs());
    const auto pair = static_cast<int>(run % grid.n_pairs());
    const auto [test_fold, val_fold] = grid.plan.repeats[static_cast<std::size_t>(pair)];
    Eigen::MatrixXd preds(ws.y_test[run].size(),
                          static_cast<Eigen::Index>(selected.size()));
    for (std::size_t m = 0; m < selected.size(); ++m)
      preds.col(static_cast<Eigen::Index>(m)) = ws.test_preds[selected[m]][run];
    out.fold_reports.push_back(
        evaluate(ws.y_test[run], vote_average(pruned.weights, preds)));
    out.runs.push_back({rep, pair, test_fold, val_fold});
  }
  out.summary = summarize(out.fold_reports);

  for (std::size_t m = 0; m < n_members; ++m) {
    std::vector<MetricReport> solo;
    for (std::size_t run = 0; run < n_runs; ++run)
      solo.push_back(evaluate(ws.y_test[run], ws.test_preds[m][run]));
    out.member_solo.push_back(
        {model.name + ".member" + std::to_string(m), summarize(solo)});
  }
}

void run_greedy_stack_model(const RosterModel& model, const TaskGrid& grid,
                            std::uint64_t seed, int jobs, ModelOutcome& out) {
  const auto* stacking = std::get_if<StackingSpec>(&model.spec.value);
  if (!stacking)
    throw StageError("train",
                     "model '" + model.name + "' flagged greedy_stack is not "
                     "a stacking spec");
  const std::size_t n_subs = stacking->sub_learners.size();
  const std::size_t n_runs = grid.runs_per_model();

  // Per run and sub-learner: out-of-fold meta column over the train rows,
  // plus validation/test predictions of the sub refit on the full train set.
  struct RunCache {
    std::vector<Eigen::Index> train, val_rows, test_rows;
    Eigen::VectorXd y_train, y_val, y_test;
    Eigen::MatrixXd z_train, p_val, p_test;
  };
  std::vector<RunCache> caches(n_runs);

  run_parallel(n_runs, jobs, [&](std::size_t run) {
    const auto rep = static_cast<std::uint64_t>(run / grid.n_pairs());
    const auto pair = run % grid.n_pairs();
    const auto [test_fold, val_fold] = grid.plan.repeats[pair];
    RunCache& c = caches[run];
    c.train = grid.plan.rows_excluding(test_fold, val_fold);
    c.val_rows = grid.plan.rows_in_fold(val_fold);
    c.test_rows = grid.plan.rows_in_fold(test_fold);
    const auto nt = static_cast<Eigen::Index>(c.train.size());
    c.y_train.resize(nt);
    for (std::size_t i = 0; i < c.train.size(); ++i)
      c.y_train[static_cast<Eigen::Index>(i)] = grid.y[c.train[i]];
    c.y_val.resize(static_cast<Eigen::Index>(c.val_rows.size()));
    for (std::size_t i = 0; i < c.val_rows.size(); ++i)
      c.y_val[static_cast<Eigen::Index>(i)] = grid.y[c.val_rows[i]];
    c.y_test.resize(static_cast<Eigen::Index>(c.test_rows.size()));
    for (std::size_t i = 0; i < c.test_rows.size(); ++i)
      c.y_test[static_cast<Eigen::Index>(i)] = grid.y[c.test_rows[i]];

    Eigen::MatrixXd xt = grid.x(c.train, Eigen::all);
    Eigen::MatrixXd xv = grid.x(c.val_rows, Eigen::all);
    Eigen::MatrixXd xs = grid.x(c.test_rows, Eigen::all);
    const std::uint64_t base = model_stream(seed, model.name, rep, pair);

    // out-of-fold partition of the train rows
    std::vector<int> fold_of(static_cast<std::size_t>(nt));
    {
      std::vector<Eigen::Index> order(static_cast<std::size_t>(nt));
      std::iota(order.begin(), order.end(), 0);
      Rng rng(mix_seed(base, 0x57ULL));
      for (std::size_t i = order.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.uniform_index(i));
        std::swap(order[i - 1], order[j]);
      }
      for (std::size_t pos = 0; pos < order.size(); ++pos)
        fold_of[static_cast<std::size_t>(order[pos])] =
            static_cast<int>(pos % static_cast<std::size_t>(stacking->oof_folds));
    }

    c.z_train.resize(nt, static_cast<Eigen::Index>(n_subs));
    c.p_val.resize(xv.rows(), static_cast<Eigen::Index>(n_subs));
    c.p_test.resize(xs.rows(), static_cast<Eigen::Index>(n_subs));
    for (std::size_t j = 0; j < n_subs; ++j) {
      for (int f = 0; f < stacking->oof_folds; ++f) {
        std::vector<Eigen::Index> in, held;
        for (Eigen::Index i = 0; i < nt; ++i)
          (fold_of[static_cast<std::size_t>(i)] == f ? held : in).push_back(i);
        ModelSpec sub = with_seed(stacking->sub_learners[j],
                                  mix_seed(base, j, static_cast<std::uint64_t>(f)));
        Eigen::MatrixXd xin = xt(in, Eigen::all);
        Eigen::VectorXd yin(static_cast<Eigen::Index>(in.size()));
        for (std::size_t i = 0; i < in.size(); ++i)
          yin[static_cast<Eigen::Index>(i)] = c.y_train[in[i]];
        ModelPtr fitted = fit_model(sub, xin, yin);
        Eigen::VectorXd pred = fitted->predict(xt(held, Eigen::all));
        for (std::size_t i = 0; i < held.size(); ++i)
          c.z_train(held[i], static_cast<Eigen::Index>(j)) =
              pred[static_cast<Eigen::Index>(i)];
      }
      ModelSpec sub_full = with_seed(
          stacking->sub_learners[j],
          mix_seed(base, j, static_cast<std::uint64_t>(stacking->oof_folds)));
      ModelPtr fitted = fit_model(sub_full, xt, c.y_train);
      c.p_val.col(static_cast<Eigen::Index>(j)) = fitted->predict(xv);
      c.p_test.col(static_cast<Eigen::Index>(j)) = fitted->predict(xs);
    }
  });

  auto subset_cols = [](const Eigen::MatrixXd& m,
                        const std::vector<std::size_t>& ids) {
    Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(ids.size()));
    for (std::size_t j = 0; j < ids.size(); ++j)
      out.col(static_cast<Eigen::Index>(j)) =
          m.col(static_cast<Eigen::Index>(ids[j]));
    return out;
  };

  auto evaluate_subset = [&](const std::vector<std::size_t>& ids) -> double {
    double sum = 0;
    for (std::size_t run = 0; run < n_runs; ++run) {
      const RunCache& c = caches[run];
      ModelPtr meta = fit_model(*stacking->meta, subset_cols(c.z_train, ids),
                                c.y_train);
      MetricReport rep =
          evaluate(c.y_val, meta->predict(subset_cols(c.p_val, ids)));
      if (!rep.r_defined) return -std::numeric_limits<double>::infinity();
      sum += rep.r_value;
    }
    return sum / static_cast<double>(n_runs);
  };

  GreedyResult greedy = greedy_forward_select(n_subs, evaluate_subset, 1);
  out.greedy_selected = greedy.selected;
  out.greedy_scores = greedy.scores;

  for (std::size_t run = 0; run < n_runs; ++run) {
    const auto rep = static_cast<int>(run / grid.n_pairs());
    const auto pair = static_cast<int>(run % grid.n_pairs());
    const auto [test_fold, val_fold] = grid.plan.repeats[static_cast<std::size_t>(pair)];
    const RunCache& c = caches[run];
    ModelPtr meta = fit_model(*stacking->meta,
                              subset_cols(c.z_train, greedy.selected),
                              c.y_train);
    out.fold_reports.push_back(evaluate(
        c.y_test, meta->predict(subset_cols(c.p_test, greedy.selected))));
    out.runs.push_back({rep, pair, test_fold, val_fold});
  }
  out.summary = summarize(out.fold_reports);
}

}  // namespace

std::string checksum_hex(std::uint64_t checksum) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(checksum));
  return buf;
}

ModelSpec apply_params(const ModelSpec& target,
                       const std::map<std::string, double>& params) {
  ModelSpec out = target;
  if (auto* learner = std::get_if<LearnerSpec>(&out.value)) {
    for (const auto& [name, value] : params) learner->hyperparams[name] = value;
    validate(*learner);
    return out;
  }
  if (auto* bagging = std::get_if<BaggingSpec>(&out.value)) {
    ModelSpec base = *bagging->base;
    for (const auto& [name, value] : params) {
      if (name == "members") {
        bagging->members = static_cast<int>(value);
      } else if (name == "max_features") {
        bagging->max_features = value;
      } else if (name == "max_samples") {
        bagging->max_samples = value;
      } else if (name == "et_estimators") {
        // Inner forest: equal-weight vote over clones of the base learner.
        ModelSpec proto = base;
        if (const auto* v = std::get_if<VotingSpec>(&proto.value)) {
          if (v->members.empty())
            throw std::invalid_argument("et_estimators: empty inner forest");
          proto = v->members[0];
        }
        const int count = std::max(1, static_cast<int>(value));
        VotingSpec forest;
        for (int i = 0; i < count; ++i) forest.members.push_back(proto);
        forest.weights = Eigen::VectorXd::Ones(count);
        base = ModelSpec(std::move(forest));
      } else if (name.rfind("base.", 0) == 0) {
        const std::string sub = name.substr(5);
        if (auto* bl = std::get_if<LearnerSpec>(&base.value)) {
          bl->hyperparams[sub] = value;
        } else if (auto* bv = std::get_if<VotingSpec>(&base.value)) {
          for (auto& member : bv->members)
            if (auto* ml = std::get_if<LearnerSpec>(&member.value))
              ml->hyperparams[sub] = value;
        } else {
          throw std::invalid_argument("base.* applies to learner bases only");
        }
      } else {
        throw std::invalid_argument("unknown bagging tuning parameter '" +
                                    name + "'");
      }
    }
    bagging->base = std::make_shared<ModelSpec>(std::move(base));
    validate(out);
    return out;
  }
  throw std::invalid_argument(
      "tuning targets must be learner or bagging specs");
}

BenchmarkReport run_on_frame(const ExperimentConfig& config, Frame frame,
                             std::uint64_t dataset_checksum) {
  const auto t0 = std::chrono::steady_clock::now();
  BenchmarkReport report;
  report.seed = config.folds.seed;
  report.dataset_checksum = checksum_hex(dataset_checksum);
  report.config_hash =
      checksum_hex(fnv1a(config_to_json(config).dump().data(),
                         config_to_json(config).dump().size()));
  report.n_rows_loaded = frame.n_rows();

  try {
    frame = derive_calendar(frame);
  } catch (const std::exception& e) {
    throw StageError("calendar", e.what());
  }

  if (config.lof.enabled) {
    try {
      std::vector<std::string> cols = config.lof.columns;
      if (cols.empty()) {
        cols = frame.feature_columns(false);
        cols.push_back(frame.target_column());
      }
      FilterResult filtered = filter_outliers(frame, cols, config.lof.k,
                                              config.lof.threshold, config.jobs);
      report.lof_removed = filtered.removed;
      frame = std::move(filtered.frame);
    } catch (const std::exception& e) {
      throw StageError("clean", e.what());
    }
  }
  report.n_rows_active = frame.n_active();

  TaskGrid grid;
  try {
    auto rows = frame.active_rows();
    auto features = frame.feature_columns(!config.exclude_random_controls);
    grid.x = frame.matrix(features, rows);
    grid.y = frame.gather(frame.target_column(), rows);
    grid.plan = make_folds(static_cast<Eigen::Index>(rows.size()),
                           config.folds.k, config.folds.seed);
    grid.repeats = std::max(1, config.folds.repeats);
  } catch (const std::exception& e) {
    throw StageError("folds", e.what());
  }

  for (const auto& model : config.roster) {
    ModelOutcome out;
    out.name = model.name;
    try {
      if (model.prune_voting)
        run_prune_voting_model(model, grid, config.folds.seed, config.jobs,
                               out);
      else if (model.greedy_stack)
        run_greedy_stack_model(model, grid, config.folds.seed, config.jobs,
                               out);
      else
        run_plain_model(model, grid, config.folds.seed, config.jobs, out);
    } catch (const std::exception& e) {
      out.failed = true;
      out.error = e.what();
    }
    report.models.push_back(std::move(out));
  }

  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

BenchmarkReport run(const ExperimentConfig& config) {
  const std::string path = resolve_dataset_path(config);
  Frame frame;
  std::uint64_t checksum = 0;
  try {
    checksum = file_checksum(path);
    frame = load_csv(path, SchemaMode::strict);
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("load", e.what());
  }
  return run_on_frame(config, std::move(frame), checksum);
}

TuneResult run_tuning_block(const ExperimentConfig& config,
                            const TuningBlock& block, const Frame& frame) {
  const RosterModel* target = nullptr;
  for (const auto& m : config.roster)
    if (m.name == block.target) target = &m;
  if (!target)
    throw StageError("tune", "unknown tuning target '" + block.target + "'");

  auto rows = frame.active_rows();
  auto features = frame.feature_columns(!config.exclude_random_controls);
  Eigen::MatrixXd x = frame.matrix(features, rows);
  Eigen::VectorXd y = frame.gather(frame.target_column(), rows);
  FoldPlan plan = make_folds(static_cast<Eigen::Index>(rows.size()),
                             config.folds.k, config.folds.seed);

  SpecBuilder builder = [&](const std::map<std::string, double>& params) {
    return apply_params(target->spec, params);
  };
  try {
    return tune(builder, block.space, x, y, plan, block.optimizer,
                config.jobs);
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("tune", e.what());
  }
}

// ---- report serialization ------------------------------------------------

namespace {

json metric_report_to_json(const MetricReport& r) {
  return json{{"n_samples", r.n_samples}, {"mse", r.mse},
              {"rmse", r.rmse},           {"mae", r.mae},
              {"msle", r.msle},           {"smape", r.smape},
              {"evs", r.evs},             {"r_value", r.r_value},
              {"r_defined", r.r_defined}, {"msle_clamped", r.msle_clamped}};
}

MetricReport metric_report_from_json(const json& doc) {
  MetricReport r;
  r.n_samples = doc.at("n_samples").get<Eigen::Index>();
  r.mse = doc.at("mse").get<double>();
  r.rmse = doc.at("rmse").get<double>();
  r.mae = doc.at("mae").get<double>();
  r.msle = doc.at("msle").get<double>();
  r.smape = doc.at("smape").get<double>();
  r.evs = doc.at("evs").get<double>();
  r.r_value = doc.at("r_value").get<double>();
  r.r_defined = doc.value("r_defined", true);
  r.msle_clamped = doc.value("msle_clamped", Eigen::Index{0});
  return r;
}

json stat_to_json(const StatFive& s) {
  return json{{"min", s.min},
              {"max", s.max},
              {"mean", s.mean},
              {"median", s.median},
              {"std", s.std}};
}

StatFive stat_from_json(const json& doc) {
  StatFive s;
  s.min = doc.at("min").get<double>();
  s.max = doc.at("max").get<double>();
  s.mean = doc.at("mean").get<double>();
  s.median = doc.at("median").get<double>();
  s.std = doc.at("std").get<double>();
  return s;
}

json summary_to_json(const RunSummary& s) {
  json doc;
  const StatFive* fields[7] = {&s.mse, &s.rmse,    &s.mae, &s.msle,
                               &s.smape, &s.evs, &s.r_value};
  for (int m = 0; m < 7; ++m)
    doc[kMetricNames[static_cast<std::size_t>(m)]] = stat_to_json(*fields[m]);
  doc["n_runs"] = s.n_runs;
  return doc;
}

RunSummary summary_from_json(const json& doc) {
  RunSummary s;
  StatFive* fields[7] = {&s.mse, &s.rmse,    &s.mae, &s.msle,
                         &s.smape, &s.evs, &s.r_value};
  for (int m = 0; m < 7; ++m)
    *fields[m] = stat_from_json(doc.at(kMetricNames[static_cast<std::size_t>(m)]));
  s.n_runs = doc.value("n_runs", 0);
  return s;
}

}  // namespace

json report_to_json(const BenchmarkReport& report) {
  json models = json::array();
  for (const auto& m : report.models) {
    json doc{{"name", m.name}, {"failed", m.failed}};
    if (m.failed) {
      doc["error"] = m.error;
      models.push_back(std::move(doc));
      continue;
    }
    json runs = json::array();
    for (const auto& r : m.runs)
      runs.push_back(json::array(
          {r.repeat, r.pair, r.test_fold, r.validation_fold}));
    json reports = json::array();
    for (const auto& r : m.fold_reports)
      reports.push_back(metric_report_to_json(r));
    doc["runs"] = runs;
    doc["fold_reports"] = reports;
    doc["summary"] = summary_to_json(m.summary);
    if (m.has_final_voting) {
      doc["final_members"] = m.final_members;
      json w = json::array();
      for (Eigen::Index i = 0; i < m.final_weights.size(); ++i)
        w.push_back(m.final_weights[i]);
      doc["final_weights"] = w;
      json solos = json::array();
      for (const auto& solo : m.member_solo)
        solos.push_back(json{{"name", solo.name},
                             {"summary", summary_to_json(solo.summary)}});
      doc["member_solo"] = solos;
    }
    if (!m.greedy_selected.empty()) {
      doc["greedy_selected"] = m.greedy_selected;
      doc["greedy_scores"] = m.greedy_scores;
    }
    models.push_back(std::move(doc));
  }
  return json{{"format", "evoensemble-report"},
              {"dataset_checksum", report.dataset_checksum},
              {"config_hash", report.config_hash},
              {"seed", report.seed},
              {"wall_clock_seconds", report.wall_clock_seconds},
              {"n_rows_loaded", report.n_rows_loaded},
              {"n_rows_active", report.n_rows_active},
              {"lof_removed", report.lof_removed},
              {"models", models}};
}

BenchmarkReport report_from_json(const json& doc) {
  if (doc.value("format", "") != "evoensemble-report")
    throw StageError("report", "not an evoensemble report document");
  BenchmarkReport report;
  report.dataset_checksum = doc.at("dataset_checksum").get<std::string>();
  report.config_hash = doc.at("config_hash").get<std::string>();
  report.seed = doc.at("seed").get<std::uint64_t>();
  report.wall_clock_seconds = doc.value("wall_clock_seconds", 0.0);
  report.n_rows_loaded = doc.value("n_rows_loaded", Eigen::Index{0});
  report.n_rows_active = doc.value("n_rows_active", Eigen::Index{0});
  report.lof_removed = doc.value("lof_removed", Eigen::Index{0});
  for (const auto& m : doc.at("models")) {
    ModelOutcome out;
    out.name = m.at("name").get<std::string>();
    out.failed = m.value("failed", false);
    if (out.failed) {
      out.error = m.value("error", "");
      report.models.push_back(std::move(out));
      continue;
    }
    for (const auto& r : m.at("runs"))
      out.runs.push_back({r[0].get<int>(), r[1].get<int>(), r[2].get<int>(),
                          r[3].get<int>()});
    for (const auto& r : m.at("fold_reports"))
      out.fold_reports.push_back(metric_report_from_json(r));
    out.summary = summary_from_json(m.at("summary"));
    if (m.contains("final_members")) {
      out.has_final_voting = true;
      out.final_members = m["final_members"].get<std::vector<std::string>>();
      const auto& w = m.at("final_weights");
      out.final_weights.resize(static_cast<Eigen::Index>(w.size()));
      for (Eigen::Index i = 0; i < out.final_weights.size(); ++i)
        out.final_weights[i] = w[static_cast<std::size_t>(i)].get<double>();
      for (const auto& solo : m.at("member_solo"))
        out.member_solo.push_back(
            {solo.at("name").get<std::string>(),
             summary_from_json(solo.at("summary"))});
    }
    if (m.contains("greedy_selected")) {
      out.greedy_selected =
          m["greedy_selected"].get<std::vector<std::size_t>>();
      out.greedy_scores = m["greedy_scores"].get<std::vector<double>>();
    }
    report.models.push_back(std::move(out));
  }
  return report;
}

std::string summary_csv(const BenchmarkReport& report) {
  std::string out = "model,stat";
  for (auto name : kMetricNames) out += std::string(",") + name;
  out += '\n';
  for (const auto& m : report.models) {
    if (m.failed) {
      out += m.name + ",FAILED,,,,,,,\n";
      continue;
    }
    for (int st = 0; st < 5; ++st) {
      out += m.name + ',' + kStatNames[static_cast<std::size_t>(st)];
      for (int metric = 0; metric < 7; ++metric)
        out += ',' + fmt(stat_value(summary_stat(m.summary, metric), st));
      out += '\n';
    }
  }
  return out;
}

std::string folds_csv(const BenchmarkReport& report) {
  std::string out = "model,repeat,test_fold,validation_fold,n_samples";
  for (auto name : kMetricNames) out += std::string(",") + name;
  out += '\n';
  for (const auto& m : report.models) {
    if (m.failed) continue;
    for (std::size_t i = 0; i < m.runs.size(); ++i) {
      const auto& r = m.runs[i];
      const auto& rep = m.fold_reports[i];
      out += m.name + ',' + std::to_string(r.repeat) + ',' +
             std::to_string(r.test_fold) + ',' +
             std::to_string(r.validation_fold) + ',' +
             std::to_string(rep.n_samples);
      for (int metric = 0; metric < 7; ++metric)
        out += ',' + fmt(metric_value(rep, metric));
      out += '\n';
    }
  }
  return out;
}

std::string render_report_text(const BenchmarkReport& report) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line),
                "dataset %s  config %s  seed %llu  rows %lld -> %lld (lof -%lld)\n",
                report.dataset_checksum.c_str(), report.config_hash.c_str(),
                static_cast<unsigned long long>(report.seed),
                static_cast<long long>(report.n_rows_loaded),
                static_cast<long long>(report.n_rows_active),
                static_cast<long long>(report.lof_removed));
  out += line;
  for (const auto& m : report.models) {
    out += "\n== " + m.name + " ==\n";
    if (m.failed) {
      out += "  FAILED: " + m.error + '\n';
      continue;
    }
    std::snprintf(line, sizeof(line), "  %-8s", "stat");
    out += line;
    for (auto name : kMetricNames) {
      std::snprintf(line, sizeof(line), " %12s", name);
      out += line;
    }
    out += '\n';
    for (int st = 0; st < 5; ++st) {
      std::snprintf(line, sizeof(line), "  %-8s",
                    kStatNames[static_cast<std::size_t>(st)]);
      out += line;
      for (int metric = 0; metric < 7; ++metric) {
        std::snprintf(line, sizeof(line), " %12.5g",
                      stat_value(summary_stat(m.summary, metric), st));
        out += line;
      }
      out += '\n';
    }
    if (m.has_final_voting) {
      out += "  final voting members:";
      for (std::size_t i = 0; i < m.final_members.size(); ++i) {
        std::snprintf(line, sizeof(line), " %s(w=%.4f)",
                      m.final_members[i].c_str(),
                      m.final_weights[static_cast<Eigen::Index>(i)]);
        out += line;
      }
      out += '\n';
    }
  }
  return out;
}

}  // namespace evo
