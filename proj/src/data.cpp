#include "mixcx/data.hpp"

#include "mixcx/errors.hpp"
#include "mixcx/format.hpp"
#include "mixcx/seeding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace mixcx {

void StreamSpec::validate() const {
  if (t_count < 1) throw InvalidInputError("stream spec: T must be >= 1");
  if (n_per_t < 1) throw InvalidInputError("stream spec: N must be >= 1");
  if (dimension < 1) throw InvalidInputError("stream spec: dimension must be >= 1");
}

double move_alpha(std::size_t t) {
  if (t <= 50) return 0.0;
  if (t <= 100) return 0.12 * (static_cast<double>(t) - 50.0);
  return 6.0;
}

std::array<std::size_t, 3> move_counts(std::size_t n_per_t) {
  const std::size_t third = n_per_t / 3;
  return {third, third, n_per_t - 2 * third};
}

std::array<double, 3> move_centers(std::size_t t) { return {0.0, 10.0, 10.0 + move_alpha(t)}; }

double imbalance_alpha(std::size_t t) {
  if (t <= 50) return 0.0;
  if (t <= 100) return 5.0 * (static_cast<double>(t) - 51.0);
  return 250.0;
}

std::array<std::size_t, 4> imbalance_counts(std::size_t t, std::size_t n_per_t) {
  const std::size_t quarter = n_per_t / 4;
  const std::size_t last = n_per_t - 3 * quarter;
  // alpha is defined for N = 1000; other sizes move the same fraction.
  const double scaled = imbalance_alpha(t) * static_cast<double>(n_per_t) / 1000.0;
  const auto moved = std::min(last, static_cast<std::size_t>(std::llround(scaled)));
  return {quarter, quarter, quarter + moved, last - moved};
}

namespace {

template <std::size_t C>
WeightedDataset blocked_window(const StreamSpec& spec, std::size_t t,
                               const std::array<std::size_t, C>& counts,
                               const std::array<double, C>& centers) {
  PointMatrix points(static_cast<Eigen::Index>(spec.n_per_t), spec.dimension);
  std::mt19937_64 rng(derive_seed(spec.rng_seed, {t}));
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < counts[c]; ++i, ++row) {
      for (Eigen::Index j = 0; j < spec.dimension; ++j) {
        points(row, j) = (j == 0 ? centers[c] : 0.0) + normal(rng);
      }
    }
  }
  return WeightedDataset(std::move(points));
}

template <typename Window>
LabeledStream generate(const StreamSpec& spec, Window window) {
  spec.validate();
  LabeledStream stream;
  for (std::size_t i = 1; i <= spec.t_count; ++i) {
    const std::size_t t = spec.reversed ? spec.t_count + 1 - i : i;
    stream.times.push_back(static_cast<long long>(i));
    stream.windows.push_back(window(spec, t));
  }
  return stream;
}

}  // namespace

WeightedDataset move_gaussian_window(const StreamSpec& spec, std::size_t t) {
  spec.validate();
  return blocked_window(spec, t, move_counts(spec.n_per_t), move_centers(t));
}

WeightedDataset imbalance_gaussian_window(const StreamSpec& spec, std::size_t t) {
  spec.validate();
  return blocked_window(spec, t, imbalance_counts(t, spec.n_per_t), kImbalanceCenters);
}

LabeledStream gen_move_gaussian(const StreamSpec& spec) {
  return generate(spec, move_gaussian_window);
}

LabeledStream gen_imbalance_gaussian(const StreamSpec& spec) {
  return generate(spec, imbalance_gaussian_window);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  for (auto& f : fields) {
    const auto begin = f.find_first_not_of(" \t");
    const auto end = f.find_last_not_of(" \t");
    f = begin == std::string::npos ? std::string() : f.substr(begin, end - begin + 1);
  }
  return fields;
}

namespace {

double parse_double(const std::string& text, std::size_t line, const std::string& column) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw ParseError("column '" + column + "': '" + text + "' is not a finite number", line);
  }
  return value;
}

long long parse_integer(const std::string& text, std::size_t line, const std::string& column) {
  long long value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw ParseError("column '" + column + "': '" + text + "' is not an integer", line);
  }
  return value;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw SchemaError("missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

LabeledStream ingest_csv(std::istream& in, const CsvIngestOptions& options) {
  if (options.window_length < 1) throw InvalidInputError("ingest: window length must be >= 1");
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    header = split_csv_line(line);
    break;
  }
  if (header.empty()) return {};

  const std::size_t entity_col = column_index(header, options.entity_column);
  const std::size_t time_col = column_index(header, options.time_column);
  std::vector<std::size_t> feature_cols;
  std::vector<std::string> feature_names = options.feature_columns;
  if (feature_names.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c != entity_col && c != time_col) feature_names.push_back(header[c]);
    }
  }
  if (feature_names.empty()) throw SchemaError("no feature columns");
  for (const auto& name : feature_names) feature_cols.push_back(column_index(header, name));
  const auto dim = static_cast<Eigen::Index>(feature_cols.size());

  // (entity, time) -> summed feature vector; duplicate rows accumulate.
  std::map<std::string, std::map<long long, Vector>> cells;
  long long t_min = 0;
  long long t_max = 0;
  bool any = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    const long long t = parse_integer(fields[time_col], line_no, options.time_column);
    Vector x(dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
      const std::size_t c = feature_cols[static_cast<std::size_t>(j)];
      x(j) = parse_double(fields[c], line_no, header[c]);
    }
    auto& slot = cells[fields[entity_col]];
    auto [it, inserted] = slot.try_emplace(t, x);
    if (!inserted) it->second += x;
    t_min = any ? std::min(t_min, t) : t;
    t_max = any ? std::max(t_max, t) : t;
    any = true;
  }
  if (!any) return {};

  const auto tau = static_cast<long long>(options.window_length);
  LabeledStream stream;
  const auto entity_count = static_cast<Eigen::Index>(cells.size());
  for (long long t = t_min + tau - 1; t <= t_max; ++t) {
    PointMatrix points = PointMatrix::Zero(entity_count, dim);
    Eigen::Index row = 0;
    for (const auto& [entity, series] : cells) {
      for (auto it = series.lower_bound(t - tau + 1); it != series.end() && it->first <= t; ++it) {
        points.row(row) += it->second.transpose();
      }
      ++row;
    }
    stream.times.push_back(t);
    stream.windows.emplace_back(std::move(points));
  }
  return stream;
}

LabeledStream ingest_csv(const std::filesystem::path& path, const CsvIngestOptions& options) {
  auto in = open_input(path);
  return ingest_csv(in, options);
}

void write_stream_csv(std::ostream& out, const LabeledStream& stream) {
  if (stream.times.size() != stream.windows.size()) {
    throw InvalidInputError("stream: time labels and windows differ in length");
  }
  const Eigen::Index dim = stream.empty() ? 0 : stream.windows.front().dimension();
  out << "t";
  for (Eigen::Index j = 1; j <= dim; ++j) out << ",x" << j;
  out << '\n';
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const auto& w = stream.windows[i];
    if (w.dimension() != dim) throw InvalidInputError("stream: windows differ in dimension");
    for (std::size_t n = 0; n < w.size(); ++n) {
      out << stream.times[i];
      for (Eigen::Index j = 0; j < dim; ++j) out << ',' << format_real(w.point(n)(j));
      out << '\n';
    }
  }
}

LabeledStream read_stream_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    header = split_csv_line(line);
    break;
  }
  if (header.empty()) throw SchemaError("stream file is empty");
  if (header.front() != "t") throw SchemaError("stream file must start with a 't' column");
  if (header.size() < 2) throw SchemaError("stream file has no coordinate columns");
  const std::size_t dim = header.size() - 1;

  LabeledStream stream;
  std::vector<std::vector<double>> rows;
  auto flush = [&] {
    if (rows.empty()) return;
    PointMatrix points(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t j = 0; j < dim; ++j) {
        points(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = rows[r][j];
      }
    }
    stream.windows.emplace_back(std::move(points));
    rows.clear();
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    const long long t = parse_integer(fields[0], line_no, "t");
    if (stream.times.empty() || stream.times.back() != t) {
      if (!stream.times.empty() && t < stream.times.back()) {
        throw ParseError("t must be non-decreasing", line_no);
      }
      flush();
      stream.times.push_back(t);
    }
    std::vector<double> row(dim);
    for (std::size_t j = 0; j < dim; ++j) row[j] = parse_double(fields[j + 1], line_no, header[j + 1]);
    rows.push_back(std::move(row));
  }
  flush();
  return stream;
}

LabeledStream read_stream_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_stream_csv(in);
}

}  // namespace mixcx
