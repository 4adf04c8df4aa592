#include "evo/frame.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "evo/rng.hpp"

namespace evo {

namespace {

const char* kStrictHeader[] = {
    "date",     "Appliances", "lights",       "T1",     "RH_1",
    "T2",       "RH_2",       "T3",           "RH_3",   "T4",
    "RH_4",     "T5",         "RH_5",         "T6",     "RH_6",
    "T7",       "RH_7",       "T8",           "RH_8",   "T9",
    "RH_9",     "T_out",      "Press_mm_hg",  "RH_out", "Windspeed",
    "Visibility", "Tdewpoint", "rv1",         "rv2"};

std::string unit_for(const std::string& name) {
  if (name == "Appliances" || name == "lights") return "Wh";
  if (name == "Press_mm_hg") return "mm Hg";
  if (name == "Windspeed") return "m/s";
  if (name == "Visibility") return "km";
  if (name == "Tdewpoint" || name == "T_out" ||
      (name.size() >= 2 && name[0] == 'T' && std::isdigit(name[1])))
    return "C";
  if (name.rfind("RH", 0) == 0) return "%";
  return "";
}

ColumnKind kind_for(const std::string& name) {
  if (name == "date") return ColumnKind::timestamp;
  if (name == "Appliances") return ColumnKind::target;
  if (name == "rv1" || name == "rv2") return ColumnKind::random_control;
  return ColumnKind::feature;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  for (auto& f : fields) {
    while (!f.empty() && (f.back() == '\r' || f.back() == '\n')) f.pop_back();
  }
  return fields;
}

// Howard Hinnant's civil-date algorithm; avoids locale and timezone state.
long long days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const long long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long long>(doe) - 719468;
}

void civil_from_days(long long z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const long long era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long long yy = static_cast<long long>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y = static_cast<int>(yy + (m <= 2));
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  while (b != e && (*b == ' ' || *b == '\t')) ++b;
  auto [ptr, ec] = std::from_chars(b, e, out);
  if (ec != std::errc()) return false;
  while (ptr != e && (*ptr == ' ' || *ptr == '\t')) ++ptr;
  return ptr == e;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

double parse_timestamp(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  if (std::sscanf(text.c_str(), "%d-%d-%d %d:%d:%d", &y, &mo, &d, &h, &mi,
                  &s) != 6 ||
      mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 ||
      mi > 59 || s < 0 || s > 60) {
    throw std::runtime_error("malformed timestamp '" + text +
                             "' (expected YYYY-MM-DD HH:MM:SS)");
  }
  return static_cast<double>(days_from_civil(y, mo, d)) * 86400.0 +
         h * 3600.0 + mi * 60.0 + s;
}

std::string format_timestamp(double epoch_seconds) {
  long long t = static_cast<long long>(std::llround(epoch_seconds));
  long long days = t / 86400;
  long long rem = t % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  int y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u %02lld:%02lld:%02lld", y, m,
                d, rem / 3600, (rem / 60) % 60, rem % 60);
  return buf;
}

int weekday_from_epoch(double epoch_seconds) {
  long long t = static_cast<long long>(std::llround(epoch_seconds));
  long long days = t / 86400;
  if (t % 86400 < 0) days -= 1;
  // 1970-01-01 was a Thursday (ISO weekday 4).
  long long w = (days + 3) % 7;
  if (w < 0) w += 7;
  return static_cast<int>(w) + 1;
}

std::vector<Eigen::Index> FoldPlan::rows_in_fold(int fold) const {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] == fold) out.push_back(static_cast<Eigen::Index>(i));
  return out;
}

std::vector<Eigen::Index> FoldPlan::rows_excluding(int fold_a,
                                                   int fold_b) const {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] != fold_a && assignments[i] != fold_b)
      out.push_back(static_cast<Eigen::Index>(i));
  return out;
}

Frame::Frame(std::vector<ColumnSchema> schema,
             std::vector<Eigen::VectorXd> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {
  if (schema_.size() != columns_.size())
    throw std::invalid_argument("frame: schema/column count mismatch");
  n_rows_ = columns_.empty() ? 0 : columns_[0].size();
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].size() != n_rows_)
      throw std::invalid_argument("frame: column '" + schema_[i].name +
                                  "' has inconsistent length");
  }
  for (std::size_t i = 0; i < schema_.size(); ++i)
    for (std::size_t j = i + 1; j < schema_.size(); ++j)
      if (schema_[i].name == schema_[j].name)
        throw std::invalid_argument("frame: duplicate column name '" +
                                    schema_[i].name + "'");
  mask_.assign(static_cast<std::size_t>(n_rows_), 1);
}

Eigen::Index Frame::n_active() const {
  return static_cast<Eigen::Index>(
      std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

bool Frame::has_column(const std::string& name) const {
  for (const auto& c : schema_)
    if (c.name == name) return true;
  return false;
}

Eigen::Index Frame::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < schema_.size(); ++i)
    if (schema_[i].name == name) return static_cast<Eigen::Index>(i);
  throw std::invalid_argument("unknown column '" + name + "'");
}

const Eigen::VectorXd& Frame::column(const std::string& name) const {
  return columns_[static_cast<std::size_t>(column_index(name))];
}

std::vector<Eigen::Index> Frame::active_rows() const {
  std::vector<Eigen::Index> out;
  out.reserve(mask_.size());
  for (std::size_t i = 0; i < mask_.size(); ++i)
    if (mask_[i]) out.push_back(static_cast<Eigen::Index>(i));
  return out;
}

Frame Frame::with_mask(std::vector<std::uint8_t> mask) const {
  if (mask.size() != mask_.size())
    throw std::invalid_argument("mask length mismatch");
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i] && !mask_[i])
      throw std::invalid_argument("mask may only shrink the active set");
  Frame out = *this;
  out.mask_ = std::move(mask);
  return out;
}

Eigen::MatrixXd Frame::matrix(const std::vector<std::string>& cols,
                              const std::vector<Eigen::Index>& rows) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const Eigen::VectorXd& col = column(cols[j]);
    for (std::size_t i = 0; i < rows.size(); ++i)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          col[rows[i]];
  }
  return out;
}

Eigen::VectorXd Frame::gather(const std::string& col,
                              const std::vector<Eigen::Index>& rows) const {
  const Eigen::VectorXd& c = column(col);
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = c[rows[i]];
  return out;
}

std::vector<std::string> Frame::columns_of_kind(ColumnKind kind) const {
  std::vector<std::string> out;
  for (const auto& c : schema_)
    if (c.kind == kind) out.push_back(c.name);
  return out;
}

std::vector<std::string> Frame::feature_columns(
    bool include_random_controls) const {
  std::vector<std::string> out = columns_of_kind(ColumnKind::feature);
  if (include_random_controls)
    for (const auto& c : schema_)
      if (c.kind == ColumnKind::random_control) out.push_back(c.name);
  return out;
}

std::string Frame::target_column() const {
  auto t = columns_of_kind(ColumnKind::target);
  if (t.size() != 1)
    throw std::runtime_error("frame must have exactly one target column");
  return t[0];
}

std::string Frame::timestamp_column() const {
  auto t = columns_of_kind(ColumnKind::timestamp);
  if (t.size() != 1)
    throw std::runtime_error("frame must have exactly one timestamp column");
  return t[0];
}

Frame Frame::append_column(ColumnSchema schema, Eigen::VectorXd values) const {
  if (values.size() != n_rows_)
    throw std::invalid_argument("appended column length mismatch");
  std::vector<ColumnSchema> s = schema_;
  std::vector<Eigen::VectorXd> c = columns_;
  s.push_back(std::move(schema));
  c.push_back(std::move(values));
  Frame out(std::move(s), std::move(c));
  out.mask_ = mask_;
  return out;
}

Frame load_csv(const std::string& path, SchemaMode mode) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw std::runtime_error("empty file '" + path + "'");
  std::vector<std::string> names = split_csv_line(line);

  if (mode == SchemaMode::strict) {
    const std::size_t want = sizeof(kStrictHeader) / sizeof(kStrictHeader[0]);
    for (std::size_t i = 0; i < want; ++i) {
      if (i >= names.size() || names[i] != kStrictHeader[i]) {
        throw std::runtime_error(
            "missing or misplaced header column '" +
            std::string(kStrictHeader[i]) + "' in '" + path + "'");
      }
    }
    if (names.size() != want)
      throw std::runtime_error("unexpected extra header columns in '" + path +
                               "'");
  }

  std::vector<ColumnSchema> schema;
  schema.reserve(names.size());
  int target_count = 0;
  for (const auto& n : names) {
    ColumnSchema c{n, unit_for(n), kind_for(n)};
    if (c.kind == ColumnKind::target) ++target_count;
    schema.push_back(c);
  }
  if (mode == SchemaMode::infer && target_count == 0 && !schema.empty()) {
    // No recognized target name; fall back to the last numeric column.
    schema.back().kind = ColumnKind::target;
  }

  std::vector<std::vector<double>> cols(names.size());
  std::size_t row = 1;  // header was row 1
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != names.size())
      throw std::runtime_error("row " + std::to_string(row) + " has " +
                               std::to_string(fields.size()) +
                               " fields, expected " +
                               std::to_string(names.size()));
    for (std::size_t j = 0; j < fields.size(); ++j) {
      double v;
      if (schema[j].kind == ColumnKind::timestamp) {
        v = parse_timestamp(fields[j]);
      } else if (!parse_double(fields[j], v) || std::isnan(v)) {
        throw std::runtime_error("unparseable numeric cell at row " +
                                 std::to_string(row) + ", column '" +
                                 names[j] + "'");
      }
      cols[j].push_back(v);
    }
  }
  if (cols.empty() || cols[0].empty())
    throw std::runtime_error("no data rows in '" + path + "'");

  std::vector<Eigen::VectorXd> columns;
  columns.reserve(cols.size());
  for (auto& c : cols)
    columns.push_back(Eigen::Map<Eigen::VectorXd>(
        c.data(), static_cast<Eigen::Index>(c.size())));
  return Frame(std::move(schema), std::move(columns));
}

void save_csv(const Frame& frame, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  const auto& schema = frame.schema();
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (j) out << ',';
    out << schema[j].name;
  }
  out << '\n';
  auto rows = frame.active_rows();
  for (Eigen::Index r : rows) {
    for (std::size_t j = 0; j < schema.size(); ++j) {
      if (j) out << ',';
      double v = frame.column(static_cast<Eigen::Index>(j))[r];
      if (schema[j].kind == ColumnKind::timestamp)
        out << format_timestamp(v);
      else
        out << format_double(v);
    }
    out << '\n';
  }
}

Frame derive_calendar(const Frame& frame) {
  const Eigen::VectorXd& ts = frame.column(frame.timestamp_column());
  Eigen::VectorXd day(frame.n_rows()), ws(frame.n_rows());
  for (Eigen::Index i = 0; i < frame.n_rows(); ++i) {
    int d = weekday_from_epoch(ts[i]);
    day[i] = d;
    ws[i] = d <= 5 ? 1.0 : 0.0;
  }
  return frame.append_column({"Ws", "", ColumnKind::feature}, std::move(ws))
      .append_column({"Day", "", ColumnKind::feature}, std::move(day));
}

ColumnStats describe(const Frame& frame, const std::string& column) {
  const Eigen::VectorXd& col = frame.column(column);
  std::vector<double> v;
  v.reserve(frame.active_mask().size());
  for (std::size_t i = 0; i < frame.active_mask().size(); ++i)
    if (frame.active_mask()[i]) v.push_back(col[static_cast<Eigen::Index>(i)]);
  if (v.empty()) throw std::runtime_error("describe: zero active rows");

  ColumnStats s;
  const auto n = static_cast<double>(v.size());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  s.median = v.size() % 2 ? v[v.size() / 2]
                          : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  return s;
}

Eigen::MatrixXd pearson_matrix(const Frame& frame,
                               const std::vector<std::string>& columns) {
  auto rows = frame.active_rows();
  if (rows.size() < 2)
    throw std::runtime_error("pearson_matrix: need at least 2 active rows");
  Eigen::MatrixXd x = frame.matrix(columns, rows);
  const Eigen::Index n = x.rows();
  Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - mean;
  Eigen::VectorXd norm = centered.colwise().norm();
  for (Eigen::Index j = 0; j < norm.size(); ++j) {
    if (norm[j] == 0.0)
      throw std::runtime_error("pearson_matrix: column '" +
                               columns[static_cast<std::size_t>(j)] +
                               "' is constant");
  }
  Eigen::MatrixXd cov = centered.transpose() * centered / double(n);
  Eigen::MatrixXd corr =
      cov.array() /
      ((norm / std::sqrt(double(n))) * (norm / std::sqrt(double(n))).transpose())
          .array();
  corr.diagonal().setOnes();
  // Enforce exact symmetry against rounding drift in the products.
  corr = 0.5 * (corr + corr.transpose()).eval();
  return corr;
}

FoldPlan make_folds(Eigen::Index n_rows, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("make_folds: k must be at least 2");
  if (static_cast<Eigen::Index>(k) > n_rows)
    throw std::invalid_argument("make_folds: k exceeds row count");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n_rows));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0x6f6c64735ULL));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.uniform_index(i));
    std::swap(order[i - 1], order[j]);
  }
  FoldPlan plan;
  plan.k = k;
  plan.assignments.assign(static_cast<std::size_t>(n_rows), 0);
  for (std::size_t pos = 0; pos < order.size(); ++pos)
    plan.assignments[static_cast<std::size_t>(order[pos])] =
        static_cast<int>(pos % static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) plan.repeats.emplace_back(i, (i + 1) % k);
  return plan;
}

}  // namespace evo
