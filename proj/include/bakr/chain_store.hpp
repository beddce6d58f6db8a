#pragma once

#include <string>
#include <vector>

#include "bakr/common.hpp"
#include "bakr/kernel.hpp"
#include "bakr/model.hpp"
#include "bakr/pipeline.hpp"

namespace bakr {

// On-disk chain layout: sidecar.json (dimensions, seeds, kernel spec,
// hyperparameters, preprocessing) plus raw column-major double blocks for
// theta, projection, factorization, sigma2/tau2, and the training response.
// The stored factorization and response let `associate --perms` refit
// permutations without touching the original covariate file.
struct StoredChain {
  PosteriorChain chain;
  KernelFactorization factorization;
  Preprocessing preprocessing;
  Vector y_train;  // uncentered training response
  std::vector<std::string> column_ids;
};

void save_chain(const std::string& dir, const StoredChain& stored);
StoredChain load_chain(const std::string& dir);

void write_matrix_block(const std::string& path, const Matrix& values);
Matrix read_matrix_block(const std::string& path);

}  // namespace bakr
