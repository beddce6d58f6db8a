#include "bakr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "bakr/rng.hpp"

namespace bakr {

namespace {

char delimiter_of(TableFormat format) {
  return format == TableFormat::Csv ? ',' : '\t';
}

bool is_na_token(const std::string& token) {
  return token.empty() || token == "NA" || token == "na" || token == "NaN" ||
         token == "nan" || token == "N/A";
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

double parse_cell(const std::string& token, std::size_t row, std::size_t col) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto result = std::from_chars(begin, end, value);
  if (result.ec != std::errc{} || result.ptr != end) {
    throw DataError("non-numeric cell \"" + token + "\" at row " +
                    std::to_string(row + 1) + ", column " + std::to_string(col + 1));
  }
  return value;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

DesignMatrix load_matrix(const std::string& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open " + path);
  }
  const char delim = delimiter_of(options.format);

  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.peek() == std::ifstream::traits_type::eof()) break;
    lines.push_back(line);
  }
  if (lines.empty()) {
    throw DataError("empty file: " + path);
  }

  DesignMatrix dm;
  std::size_t first_data = 0;
  std::size_t width = split_line(lines[0], delim).size();
  if (options.header_row) {
    auto header = split_line(lines[0], delim);
    if (options.row_labels && !header.empty()) header.erase(header.begin());
    dm.col_ids = header;
    first_data = 1;
    if (lines.size() == 1) {
      throw DataError("file has a header but no data rows: " + path);
    }
    width = split_line(lines[1], delim).size();
  }

  const std::size_t n_rows = lines.size() - first_data;
  const std::size_t label_offset = options.row_labels ? 1 : 0;
  if (width <= label_offset) {
    throw DataError("no data columns in " + path);
  }
  const std::size_t n_cols = width - label_offset;

  dm.values.resize(static_cast<Index>(n_rows), static_cast<Index>(n_cols));
  std::vector<std::pair<Index, Index>> missing;
  for (std::size_t r = 0; r < n_rows; ++r) {
    const auto fields = split_line(lines[first_data + r], delim);
    if (fields.size() != width) {
      throw DataError("ragged row " + std::to_string(first_data + r + 1) + " in " +
                      path + ": expected " + std::to_string(width) + " fields, got " +
                      std::to_string(fields.size()));
    }
    if (options.row_labels) dm.row_ids.push_back(fields[0]);
    for (std::size_t c = 0; c < n_cols; ++c) {
      const std::string& token = fields[c + label_offset];
      if (is_na_token(token)) {
        if (options.na_policy == NaPolicy::Error) {
          throw DataError("missing value at row " + std::to_string(r + 1) +
                          ", column " + std::to_string(c + 1) + " of " + path);
        }
        missing.emplace_back(static_cast<Index>(r), static_cast<Index>(c));
        dm.values(static_cast<Index>(r), static_cast<Index>(c)) =
            std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      dm.values(static_cast<Index>(r), static_cast<Index>(c)) = parse_cell(token, r, c);
    }
  }

  if (!missing.empty()) {
    // Mean imputation per column over the observed entries.
    for (Index c = 0; c < dm.values.cols(); ++c) {
      double sum = 0.0;
      Index count = 0;
      for (Index r = 0; r < dm.values.rows(); ++r) {
        if (std::isfinite(dm.values(r, c))) {
          sum += dm.values(r, c);
          ++count;
        }
      }
      if (count == 0) {
        throw DataError("column " + std::to_string(c + 1) + " of " + path +
                        " has no observed values to impute from");
      }
      const double mean = sum / static_cast<double>(count);
      for (Index r = 0; r < dm.values.rows(); ++r) {
        if (!std::isfinite(dm.values(r, c))) dm.values(r, c) = mean;
      }
    }
  }

  if (!dm.values.allFinite()) {
    throw DataError("non-finite entries in " + path);
  }
  if (dm.col_ids.empty()) {
    for (Index c = 0; c < dm.values.cols(); ++c) {
      dm.col_ids.push_back("v" + std::to_string(c + 1));
    }
  } else if (static_cast<Index>(dm.col_ids.size()) != dm.values.cols()) {
    throw DataError("header width does not match data width in " + path);
  }
  if (dm.row_ids.empty()) {
    for (Index r = 0; r < dm.values.rows(); ++r) {
      dm.row_ids.push_back("s" + std::to_string(r + 1));
    }
  }
  return dm;
}

void save_matrix(const std::string& path, const Matrix& values, TableFormat format) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write " + path);
  }
  const char delim = delimiter_of(format);
  for (Index r = 0; r < values.rows(); ++r) {
    for (Index c = 0; c < values.cols(); ++c) {
      if (c > 0) out << delim;
      out << format_double(values(r, c));
    }
    out << '\n';
  }
  if (!out) {
    throw DataError("failed while writing " + path);
  }
}

Vector load_vector(const std::string& path, const LoadOptions& options) {
  const DesignMatrix dm = load_matrix(path, options);
  if (dm.values.cols() != 1) {
    throw DataError("expected a single-column vector in " + path + ", got " +
                    std::to_string(dm.values.cols()) + " columns");
  }
  return dm.values.col(0);
}

void save_vector(const std::string& path, const Vector& values) {
  save_matrix(path, values, TableFormat::Csv);
}

DesignMatrix standardize(const DesignMatrix& x) {
  const Index n = x.n();
  if (n < 2) {
    throw UsageError("standardize requires at least 2 rows");
  }

  Standardization record;
  std::vector<Index> kept;
  for (Index c = 0; c < x.p(); ++c) {
    const double mean = x.values.col(c).mean();
    const double var = (x.values.col(c).array() - mean).square().sum() /
                       static_cast<double>(n);
    if (var > 0.0) {
      kept.push_back(c);
    } else {
      record.dropped_columns.push_back(
          c < static_cast<Index>(x.col_ids.size()) ? x.col_ids[c]
                                                   : "v" + std::to_string(c + 1));
    }
  }
  if (kept.empty()) {
    throw DataError("standardize: all columns are constant");
  }

  DesignMatrix out;
  out.row_ids = x.row_ids;
  out.values.resize(n, static_cast<Index>(kept.size()));
  record.mean.resize(static_cast<Index>(kept.size()));
  record.sd.resize(static_cast<Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const Index c = kept[i];
    const double mean = x.values.col(c).mean();
    const double sd = std::sqrt((x.values.col(c).array() - mean).square().sum() /
                                static_cast<double>(n));
    record.mean(static_cast<Index>(i)) = mean;
    record.sd(static_cast<Index>(i)) = sd;
    out.values.col(static_cast<Index>(i)) = (x.values.col(c).array() - mean) / sd;
    out.col_ids.push_back(c < static_cast<Index>(x.col_ids.size())
                              ? x.col_ids[c]
                              : "v" + std::to_string(c + 1));
  }
  record.kept = std::move(kept);
  out.standardization = std::move(record);
  return out;
}

Matrix apply_standardization(const Matrix& x, const Standardization& record) {
  const Index kept_count = static_cast<Index>(record.kept.size());
  for (Index c : record.kept) {
    if (c >= x.cols()) {
      throw DataError("apply_standardization: matrix has " +
                      std::to_string(x.cols()) + " columns, expected at least " +
                      std::to_string(record.kept.back() + 1));
    }
  }
  Matrix out(x.rows(), kept_count);
  for (Index i = 0; i < kept_count; ++i) {
    out.col(i) = (x.col(record.kept[i]).array() - record.mean(i)) / record.sd(i);
  }
  return out;
}

namespace {

// Acklam's rational approximation to the standard normal quantile.
double probit(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
           q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const double q = std::sqrt(-2.0 * std::log(1.0 - p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

// Linkage structure of the simulated genotypes: haplotype blocks span this
// many adjacent SNPs and share a latent factor with this loading, giving the
// dense-panel LD that makes kernel methods informative at n << p.
constexpr Index kLdBlockSize = 200;
constexpr double kLdLatentCorrelation = 0.97;

// Genotype matrix with entries in {0, 1, 2} and haplotype-block linkage
// disequilibrium: per column maf ~ U[0.05, 0.5]; per individual, each of two
// haplotypes draws a shared block factor plus SNP-level noise, thresholded at
// probit(maf). Margins stay binomial(2, maf) while SNPs within a block are
// strongly correlated, as on a dense genotyping panel. Constant columns
// (possible at small n with rare alleles) are redrawn independently so
// standardization never drops covariates and causal indices stay aligned.
Matrix simulate_genotypes(Index n, Index p, Rng& rng) {
  Matrix x = Matrix::Zero(n, p);
  std::vector<double> thresholds(p);
  for (Index j = 0; j < p; ++j) thresholds[j] = probit(rng.uniform(0.05, 0.5));

  const double shared_loading = std::sqrt(kLdLatentCorrelation);
  const double noise_loading = std::sqrt(1.0 - kLdLatentCorrelation);
  for (Index i = 0; i < n; ++i) {
    for (Index j0 = 0; j0 < p; j0 += kLdBlockSize) {
      const Index width = std::min(kLdBlockSize, p - j0);
      for (int hap = 0; hap < 2; ++hap) {
        const double block_factor = rng.normal();
        for (Index k = 0; k < width; ++k) {
          const double z = shared_loading * block_factor + noise_loading * rng.normal();
          if (z < thresholds[j0 + k]) x(i, j0 + k) += 1.0;
        }
      }
    }
  }

  for (Index j = 0; j < p; ++j) {
    while ((x.col(j).array() == x(0, j)).all()) {
      const double maf = rng.uniform(0.05, 0.5);
      for (Index i = 0; i < n; ++i) {
        x(i, j) = static_cast<double>(rng.binomial(2, maf));
      }
    }
  }
  return x;
}

DesignMatrix standardized_genotypes(Index n, Index p, Rng& rng) {
  DesignMatrix raw;
  raw.values = simulate_genotypes(n, p, rng);
  for (Index r = 0; r < n; ++r) raw.row_ids.push_back("s" + std::to_string(r + 1));
  for (Index c = 0; c < p; ++c) raw.col_ids.push_back("v" + std::to_string(c + 1));
  return standardize(raw);
}

void center(Vector& v) { v.array() -= v.mean(); }

// Removes the components of v along previously finished (already centered)
// directions, then rescales to the target population sd.
void orthogonalize_and_scale(Vector& v, const std::vector<const Vector*>& basis,
                             double target_sd) {
  center(v);
  for (const Vector* b : basis) {
    const double denom = b->squaredNorm();
    if (denom > 0.0) v -= (v.dot(*b) / denom) * (*b);
  }
  const double n = static_cast<double>(v.size());
  const double sd = std::sqrt(v.squaredNorm() / n);
  if (!(sd > 0.0)) {
    throw NumericalError("simulate_scenario: degenerate component variance");
  }
  v *= target_sd / sd;
}

}  // namespace

SimulatedDataset simulate_scenario(Index n, Index p, double h2, double rho,
                                   std::uint64_t seed) {
  if (p < 50) {
    throw UsageError("simulate_scenario needs p >= 50 to place 50 causal columns");
  }
  if (n < 3) {
    throw UsageError("simulate_scenario needs n >= 3");
  }
  if (!(h2 > 0.0) || !(h2 < 1.0)) {
    throw UsageError("h2 must lie in (0, 1)");
  }
  if (!(rho > 0.0) || !(rho < 1.0)) {
    throw UsageError("rho must lie in (0, 1)");
  }

  Rng rng(seed);
  SimulatedDataset ds;
  ds.x = standardized_genotypes(n, p, rng);

  std::vector<Index> order(p);
  for (Index i = 0; i < p; ++i) order[i] = i;
  rng.shuffle(order);
  ds.causal_group1.assign(order.begin(), order.begin() + 25);
  ds.causal_group2.assign(order.begin() + 25, order.begin() + 50);
  std::sort(ds.causal_group1.begin(), ds.causal_group1.end());
  std::sort(ds.causal_group2.begin(), ds.causal_group2.end());

  Vector b25(25);
  for (Index i = 0; i < 25; ++i) b25(i) = rng.normal();
  const Index n_pairs = 25 * 24 / 2;
  ds.true_a.resize(n_pairs);
  for (Index i = 0; i < n_pairs; ++i) ds.true_a(i) = rng.normal();
  Vector noise(n);
  for (Index i = 0; i < n; ++i) noise(i) = rng.normal();

  Vector additive = Vector::Zero(n);
  for (Index i = 0; i < 25; ++i) {
    additive += b25(i) * ds.x.values.col(ds.causal_group1[i]);
  }
  Vector interaction = Vector::Zero(n);
  Index pair = 0;
  for (Index i = 0; i < 25; ++i) {
    for (Index j = i + 1; j < 25; ++j) {
      interaction += ds.true_a(pair) *
                     ds.x.values.col(ds.causal_group2[i])
                         .cwiseProduct(ds.x.values.col(ds.causal_group2[j]));
      ++pair;
    }
  }

  // Total variance 1; exact fractions rho*h2 : (1-rho)*h2 : 1-h2.
  const double sd_add = std::sqrt(rho * h2);
  const double sd_int = std::sqrt((1.0 - rho) * h2);
  const double sd_noise = std::sqrt(1.0 - h2);
  const double add_raw_sd =
      std::sqrt((additive.array() - additive.mean()).square().sum() /
                static_cast<double>(n));
  orthogonalize_and_scale(additive, {}, sd_add);
  orthogonalize_and_scale(interaction, {&additive}, sd_int);
  orthogonalize_and_scale(noise, {&additive, &interaction}, sd_noise);
  ds.y = additive + interaction + noise;
  ds.component_additive = additive;
  ds.component_interaction = interaction;
  ds.component_noise = noise;

  ds.true_b = Vector::Zero(p);
  const double b_scale = add_raw_sd > 0.0 ? sd_add / add_raw_sd : 0.0;
  for (Index i = 0; i < 25; ++i) {
    ds.true_b(ds.causal_group1[i]) = b25(i) * b_scale;
  }
  ds.true_a *= sd_int;  // up to the orthogonalization adjustment

  const double var_y = ds.y.squaredNorm() / static_cast<double>(n) -
                       ds.y.mean() * ds.y.mean();
  ds.achieved_h2 = (sd_add * sd_add + sd_int * sd_int) / var_y;
  ds.achieved_rho = (sd_add * sd_add) / (var_y * ds.achieved_h2);
  return ds;
}

Matrix elementwise_cube(const Matrix& x) {
  return x.array().cube();
}

SimulatedDataset simulate_polynomial(Index n, Index p, Index n_causal,
                                     std::uint64_t seed) {
  if (n_causal > p) {
    throw UsageError("simulate_polynomial: n_causal exceeds covariate count");
  }
  if (n_causal < 0 || p < 1 || n < 3) {
    throw UsageError("simulate_polynomial: invalid sizes");
  }

  Rng rng(seed);
  SimulatedDataset ds;
  ds.x = standardized_genotypes(n, p, rng);

  ds.true_b = Vector::Zero(p);
  for (Index i = 0; i < n_causal; ++i) {
    ds.true_b(i) = rng.normal();
    ds.causal_group1.push_back(i);
  }
  Vector noise(n);
  for (Index i = 0; i < n; ++i) noise(i) = rng.normal();

  const Vector signal = elementwise_cube(ds.x.values) * ds.true_b;
  ds.y = signal + noise;
  ds.component_additive = signal;
  ds.component_interaction = Vector::Zero(n);
  ds.component_noise = noise;

  const double n_d = static_cast<double>(n);
  const double var_signal =
      (signal.array() - signal.mean()).square().sum() / n_d;
  const double var_y = (ds.y.array() - ds.y.mean()).square().sum() / n_d;
  ds.achieved_h2 = var_y > 0.0 ? var_signal / var_y : 0.0;
  ds.achieved_rho = 1.0;
  ds.true_a.resize(0);
  return ds;
}

Split split_rows(Index n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0) || !(train_fraction < 1.0)) {
    throw UsageError("train fraction must lie in (0, 1)");
  }
  const Index n_train = static_cast<Index>(std::lround(train_fraction * n));
  if (n_train == 0 || n_train == n) {
    throw UsageError("train fraction yields an empty split side");
  }
  std::vector<Index> order(n);
  for (Index i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  Split split;
  split.train_rows.assign(order.begin(), order.begin() + n_train);
  split.test_rows.assign(order.begin() + n_train, order.end());
  std::sort(split.train_rows.begin(), split.train_rows.end());
  std::sort(split.test_rows.begin(), split.test_rows.end());
  return split;
}

Matrix select_rows(const Matrix& x, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Index>(i)) = x.row(rows[i]);
  }
  return out;
}

Vector select_rows(const Vector& y, const std::vector<Index>& rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out(static_cast<Index>(i)) = y(rows[i]);
  }
  return out;
}

}  // namespace bakr
