#include "gka/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gka/error.hpp"
#include "gka/rng.hpp"

namespace gka {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.x = x.gather_rows(rows);
  out.y.reserve(rows.size());
  for (std::size_t r : rows) out.y.push_back(y.at(r));
  out.feature_names = feature_names;
  out.target_name = target_name;
  out.groups = groups;
  out.scaler = scaler;
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Dataset parse_csv(std::string_view text, std::string_view target_column, std::string_view source) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw DataError(std::string(source) + ": empty file");
  if (lines[0].size() >= 3 && lines[0].substr(0, 3) == "\xEF\xBB\xBF") lines[0].remove_prefix(3);

  const auto header = split_line(lines[0]);
  std::size_t target = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == target_column) target = c;
  }
  if (target == header.size()) {
    throw DataError(std::string(source) + ": target column '" + std::string(target_column) + "' not in header");
  }
  if (header.size() < 2) throw DataError(std::string(source) + ": need at least one feature column");

  Dataset ds;
  ds.target_name = std::string(target_column);
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != target) ds.feature_names.emplace_back(header[c]);
  }
  const std::size_t p = ds.feature_names.size();
  std::vector<double> values;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    if (trim(lines[l]).empty()) continue;
    const auto cells = split_line(lines[l]);
    if (cells.size() != header.size()) {
      throw DataError(std::string(source) + ": line " + std::to_string(l + 1) + " has " +
                      std::to_string(cells.size()) + " cells, header has " + std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      const char* first = cells[c].data();
      const char* last = first + cells[c].size();
      if (!cells[c].empty() && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (cells[c].empty() || ec != std::errc{} || ptr != last || !std::isfinite(v)) {
        throw DataError(std::string(source) + ": non-numeric cell '" + std::string(cells[c]) + "' at line " +
                        std::to_string(l + 1) + ", column '" + std::string(header[c]) + "'");
      }
      if (c == target) {
        ds.y.push_back(v);
      } else {
        values.push_back(v);
      }
    }
  }
  if (ds.y.empty()) throw DataError(std::string(source) + ": no data rows");
  ds.x = Tensor(Shape{ds.y.size(), p}, std::move(values));
  ds.groups = FeatureGroupSpec::single(p);
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, std::string_view target_column,
                 const std::optional<std::filesystem::path>& groups_path, const WarningSink& warn) {
  Dataset ds = parse_csv(read_text_file(path), target_column, path.string());
  if (groups_path) {
    ds.groups = load_groups_json(*groups_path);
    ds.groups.require_covers(ds.features());
  } else {
    const std::string msg = "no groups file given; treating all " + std::to_string(ds.features()) +
                            " features as a single group";
    if (warn) {
      warn(msg);
    } else {
      std::cerr << "warning: " << msg << '\n';
    }
  }
  return ds;
}

std::string format_csv(const Dataset& ds) {
  std::string out;
  for (const auto& name : ds.feature_names) out += name + ",";
  out += ds.target_name + "\n";
  const std::size_t p = ds.features();
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    for (std::size_t j = 0; j < p; ++j) out += format_double(ds.x(i, j)) + ",";
    out += format_double(ds.y[i]) + "\n";
  }
  return out;
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << format_csv(ds);
}

FeatureGroupSpec parse_groups_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("groups file is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ConfigError("groups file must be a JSON array of [start, end] pairs");
  std::vector<GroupRange> groups;
  for (const auto& item : doc) {
    if (!item.is_array() || item.size() != 2 || !item[0].is_number_unsigned() || !item[1].is_number_unsigned()) {
      throw ConfigError("each group must be a [start, end] pair of non-negative integers, got " + item.dump());
    }
    groups.push_back({item[0].get<std::size_t>(), item[1].get<std::size_t>()});
  }
  return FeatureGroupSpec(std::move(groups));
}

FeatureGroupSpec load_groups_json(const std::filesystem::path& path) {
  return parse_groups_json(read_text_file(path));
}

Scaler fit_scaler(const Dataset& ds) {
  const std::size_t n = ds.rows(), p = ds.features();
  if (n == 0) throw DataError("cannot fit a scaler on an empty dataset");
  Scaler s;
  s.x_mean.assign(p, 0.0);
  s.x_std.assign(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += ds.x(i, j);
    m /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (ds.x(i, j) - m) * (ds.x(i, j) - m);
    const double sd = std::sqrt(var / static_cast<double>(n));
    s.x_mean[j] = m;
    s.x_std[j] = sd > 0.0 ? sd : 1.0;
  }
  double m = 0.0;
  for (double v : ds.y) m += v;
  m /= static_cast<double>(n);
  double var = 0.0;
  for (double v : ds.y) var += (v - m) * (v - m);
  const double sd = std::sqrt(var / static_cast<double>(n));
  s.y_mean = m;
  s.y_std = sd > 0.0 ? sd : 1.0;
  return s;
}

Dataset apply_scaler(const Dataset& ds, const Scaler& scaler) {
  const std::size_t p = ds.features();
  if (scaler.x_mean.size() != p || scaler.x_std.size() != p) {
    throw DataError("scaler fitted on " + std::to_string(scaler.x_mean.size()) + " features, dataset has " +
                    std::to_string(p));
  }
  Dataset out = ds;
  for (std::size_t i = 0; i < ds.rows(); ++i)
    for (std::size_t j = 0; j < p; ++j) out.x(i, j) = (ds.x(i, j) - scaler.x_mean[j]) / scaler.x_std[j];
  for (double& v : out.y) v = (v - scaler.y_mean) / scaler.y_std;
  out.scaler = scaler;
  return out;
}

Dataset standardize(const Dataset& ds) { return apply_scaler(ds, fit_scaler(ds)); }

std::vector<double> destandardize_predictions(std::span<const double> predicted, const Scaler& scaler) {
  std::vector<double> out(predicted.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = predicted[i] * scaler.y_std + scaler.y_mean;
  return out;
}

namespace {

std::vector<double> random_direction(std::size_t n, double norm, Rng& rng) {
  std::vector<double> v(n);
  double ss = 0.0;
  for (double& x : v) {
    x = rng.normal();
    ss += x * x;
  }
  const double f = norm / std::sqrt(ss);
  for (double& x : v) x *= f;
  return v;
}

double dot_range(const Tensor& x, std::size_t row, const GroupRange& g, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t j = g.begin; j < g.end; ++j) s += x(row, j) * w[j - g.begin];
  return s;
}

}  // namespace

SynthCoefficients default_synth_coefficients(const FeatureGroupSpec& spec, std::uint64_t seed) {
  if (spec.size() < 2) throw ConfigError("synthetic data needs at least two feature groups");
  Rng rng = Rng::derive(seed, 101);
  SynthCoefficients c;
  for (std::size_t g = 0; g < spec.size(); ++g) {
    const double sign = g % 2 == 0 ? 1.0 : -1.0;
    c.amplitude.push_back(sign * rng.uniform(0.8, 1.2));
    c.slope.push_back(random_direction(spec[g].width(), 2.0, rng));
  }
  c.interaction = 1.0;
  c.left = random_direction(spec[0].width(), 1.0, rng);
  c.right = random_direction(spec[1].width(), 1.0, rng);
  return c;
}

std::vector<double> synth_response(const Tensor& x, const FeatureGroupSpec& spec, const SynthCoefficients& coef) {
  if (spec.size() < 2) throw ConfigError("synthetic data needs at least two feature groups");
  spec.require_covers(x.cols());
  if (coef.amplitude.size() != spec.size() || coef.slope.size() != spec.size() ||
      coef.left.size() != spec[0].width() || coef.right.size() != spec[1].width()) {
    throw ConfigError("synthetic coefficients do not match the group spec");
  }
  std::vector<double> y(x.rows(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t g = 0; g < spec.size(); ++g) {
      if (coef.slope[g].size() != spec[g].width()) throw ConfigError("slope width mismatch in group " + std::to_string(g));
      y[i] += coef.amplitude[g] * std::tanh(dot_range(x, i, spec[g], coef.slope[g]));
    }
    y[i] += coef.interaction * dot_range(x, i, spec[0], coef.left) * dot_range(x, i, spec[1], coef.right);
  }
  return y;
}

Dataset synth_nonlinear(std::size_t n, const FeatureGroupSpec& spec, double noise_sigma, std::uint64_t seed,
                        const std::optional<SynthCoefficients>& coefficients) {
  if (spec.size() < 2) throw ConfigError("synthetic data needs at least two feature groups");
  if (n == 0) throw ConfigError("synthetic data needs n >= 1");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise sigma must be >= 0");
  const SynthCoefficients coef = coefficients ? *coefficients : default_synth_coefficients(spec, seed);
  Rng x_rng = Rng::derive(seed, 102);
  Rng noise_rng = Rng::derive(seed, 103);
  const std::size_t p = spec.feature_count();

  Dataset ds;
  ds.x = x_rng.normal_tensor(Shape{n, p});
  ds.y = synth_response(ds.x, spec, coef);
  if (noise_sigma > 0.0) {
    for (double& v : ds.y) v += noise_sigma * noise_rng.normal();
  }
  for (std::size_t j = 0; j < p; ++j) ds.feature_names.push_back("x" + std::to_string(j));
  ds.groups = spec;
  return ds;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng = Rng::derive(seed, 201);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

std::vector<std::vector<std::size_t>> make_folds(std::span<const std::size_t> rows, std::size_t k) {
  if (k < 2) throw ConfigError("need at least 2 folds");
  if (rows.size() < k) {
    throw ConfigError("cannot make " + std::to_string(k) + " folds from " + std::to_string(rows.size()) + " rows");
  }
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = rows.size() / k + (f < rows.size() % k ? 1 : 0);
    folds[f].assign(rows.begin() + static_cast<std::ptrdiff_t>(pos), rows.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return folds;
}

SplitPlan split(std::size_t n, double test_fraction, std::optional<std::size_t> k_folds, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test fraction must lie in (0, 1)");
  if (n < 2) throw ConfigError("need at least 2 rows to split");
  std::size_t n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
  const auto order = shuffled_indices(n, seed);
  SplitPlan plan;
  plan.seed = seed;
  plan.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  plan.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  if (k_folds) plan.folds = make_folds(plan.train, *k_folds);
  return plan;
}

}  // namespace gka
