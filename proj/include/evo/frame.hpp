#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace evo {

enum class ColumnKind { feature, target, timestamp, random_control };

struct ColumnSchema {
  std::string name;
  std::string unit;  // e.g. "Wh", "C", "%", "mm Hg", "m/s", "km", ""
  ColumnKind kind = ColumnKind::feature;
};

struct ColumnStats {
  double min = 0, max = 0, mean = 0, median = 0, std = 0;
};

// Cross-validation plan: per-row fold id plus the (test, validation) pairs
// evaluated per repeat. With k=10 each repeat trains on 8 folds, giving the
// 80/10/10 split.
struct FoldPlan {
  int k = 0;
  std::vector<int> assignments;
  std::vector<std::pair<int, int>> repeats;  // (test_fold, validation_fold)

  std::vector<Eigen::Index> rows_in_fold(int fold) const;
  std::vector<Eigen::Index> rows_excluding(int fold_a, int fold_b) const;
};

// Named-column numeric table. Columns are immutable after load; filtering
// produces a new frame with a shrunk active mask, rows are never reordered.
class Frame {
 public:
  Frame() = default;
  Frame(std::vector<ColumnSchema> schema, std::vector<Eigen::VectorXd> columns);

  Eigen::Index n_rows() const { return n_rows_; }
  Eigen::Index n_cols() const { return static_cast<Eigen::Index>(columns_.size()); }
  Eigen::Index n_active() const;

  const std::vector<ColumnSchema>& schema() const { return schema_; }
  bool has_column(const std::string& name) const;
  Eigen::Index column_index(const std::string& name) const;  // throws if unknown
  const Eigen::VectorXd& column(const std::string& name) const;
  const Eigen::VectorXd& column(Eigen::Index idx) const { return columns_[idx]; }

  const std::vector<std::uint8_t>& active_mask() const { return mask_; }
  std::vector<Eigen::Index> active_rows() const;
  Frame with_mask(std::vector<std::uint8_t> mask) const;

  // Dense gather of the given columns over the given rows.
  Eigen::MatrixXd matrix(const std::vector<std::string>& cols,
                         const std::vector<Eigen::Index>& rows) const;
  Eigen::VectorXd gather(const std::string& col,
                         const std::vector<Eigen::Index>& rows) const;

  std::vector<std::string> columns_of_kind(ColumnKind kind) const;
  // Feature columns in schema order; random-control columns included only on
  // request.
  std::vector<std::string> feature_columns(bool include_random_controls) const;
  std::string target_column() const;
  std::string timestamp_column() const;

  Frame append_column(ColumnSchema schema, Eigen::VectorXd values) const;

 private:
  std::vector<ColumnSchema> schema_;
  std::vector<Eigen::VectorXd> columns_;
  std::vector<std::uint8_t> mask_;
  Eigen::Index n_rows_ = 0;
};

enum class SchemaMode { strict, infer };

// Loads the sensor CSV. Strict mode requires the full published header
// (date, Appliances, lights, T1..RH_9, weather block, rv1, rv2); infer mode
// accepts any header and classifies columns by name.
Frame load_csv(const std::string& path, SchemaMode mode);

// Writes active rows back out; numeric cells use shortest round-trip
// formatting so reload reproduces bit-identical columns.
void save_csv(const Frame& frame, const std::string& path);

// Adds Ws (weekday=1, weekend=0) and Day (Monday=1 .. Sunday=7) derived from
// the timestamp column.
Frame derive_calendar(const Frame& frame);

ColumnStats describe(const Frame& frame, const std::string& column);

Eigen::MatrixXd pearson_matrix(const Frame& frame,
                               const std::vector<std::string>& columns);

FoldPlan make_folds(Eigen::Index n_rows, int k, std::uint64_t seed);

// "YYYY-MM-DD HH:MM:SS" <-> seconds since the Unix epoch (UTC, no locale).
double parse_timestamp(const std::string& text);
std::string format_timestamp(double epoch_seconds);
// ISO weekday, Monday=1 .. Sunday=7.
int weekday_from_epoch(double epoch_seconds);

}  // namespace evo
