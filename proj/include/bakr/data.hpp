#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bakr/common.hpp"

namespace bakr {

// Per-column centering/scaling parameters learned on training data.
// `kept` maps retained columns back to positions in the original matrix so
// a test set with the full column layout can be transformed consistently.
struct Standardization {
  Vector mean;  // per retained column
  Vector sd;    // population sd (divisor n)
  std::vector<Index> kept;
  std::vector<std::string> dropped_columns;
};

struct DesignMatrix {
  Matrix values;
  std::vector<std::string> row_ids;
  std::vector<std::string> col_ids;
  std::optional<Standardization> standardization;

  Index n() const { return values.rows(); }
  Index p() const { return values.cols(); }
};

enum class TableFormat { Csv, Tsv };
enum class NaPolicy { Error, MeanImpute };

struct LoadOptions {
  TableFormat format = TableFormat::Csv;
  bool header_row = false;
  bool row_labels = false;
  NaPolicy na_policy = NaPolicy::Error;
};

DesignMatrix load_matrix(const std::string& path, const LoadOptions& options = {});
void save_matrix(const std::string& path, const Matrix& values,
                 TableFormat format = TableFormat::Csv);

Vector load_vector(const std::string& path, const LoadOptions& options = {});
void save_vector(const std::string& path, const Vector& values);

// Centers each column and scales to unit population sd. Constant columns are
// dropped and reported in the returned standardization record.
DesignMatrix standardize(const DesignMatrix& x);

// Applies training-set parameters to new data laid out like the original
// (pre-drop) matrix.
Matrix apply_standardization(const Matrix& x, const Standardization& record);

struct SimulatedDataset {
  DesignMatrix x;  // standardized genotype matrix
  Vector y;
  std::vector<Index> causal_group1;  // additive
  std::vector<Index> causal_group2;  // interacting
  Vector true_b;  // length p, scaled additive effects
  Vector true_a;  // interaction effects, one per distinct group-2 pair
  // Realized response components; y is exactly their sum.
  Vector component_additive;
  Vector component_interaction;
  Vector component_noise;
  double achieved_h2 = 0.0;
  double achieved_rho = 0.0;
};

// Genetic-architecture generator: y = Xb + Wa + e with 25 additive and 25
// interacting causal columns, W holding the 300 distinct pairwise products
// of the group-2 columns. Components are centered, mutually orthogonalized,
// and rescaled so the realized variance fractions are exactly
// rho*h2 : (1-rho)*h2 : 1-h2 with total variance 1.
SimulatedDataset simulate_scenario(Index n, Index p, double h2, double rho,
                                   std::uint64_t seed);

// Polynomial generator: y = (X o X o X) b + e with b supported on the first
// n_causal columns and standard normal noise; no variance rescaling.
SimulatedDataset simulate_polynomial(Index n, Index p, Index n_causal,
                                     std::uint64_t seed);

Matrix elementwise_cube(const Matrix& x);

struct Split {
  std::vector<Index> train_rows;
  std::vector<Index> test_rows;
};

Split split_rows(Index n, double train_fraction, std::uint64_t seed);

Matrix select_rows(const Matrix& x, const std::vector<Index>& rows);
Vector select_rows(const Vector& y, const std::vector<Index>& rows);

}  // namespace bakr
