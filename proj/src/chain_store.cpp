#include "bakr/chain_store.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace bakr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'B', 'A', 'K', 'R', 'B', 'I', 'N', '1'};

void atomic_rename(const fs::path& tmp, const fs::path& final_path) {
  std::error_code ec;
  fs::rename(tmp, final_path, ec);
  if (ec) {
    throw DataError("cannot move " + tmp.string() + " to " + final_path.string() +
                    ": " + ec.message());
  }
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Vector vector_from_json(const json& arr) {
  Vector v(static_cast<Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Index>(i)) = arr[i];
  return v;
}

}  // namespace

void write_matrix_block(const std::string& path, const Matrix& values) {
  const fs::path tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) {
      throw DataError("cannot write " + tmp.string());
    }
    out.write(kMagic, sizeof(kMagic));
    const std::int64_t rows = values.rows();
    const std::int64_t cols = values.cols();
    out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(sizeof(double) * values.size()));
    if (!out) {
      throw DataError("failed while writing " + tmp.string());
    }
  }
  atomic_rename(tmp, path);
}

Matrix read_matrix_block(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open " + path);
  }
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a chain block file: " + path);
  }
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  if (!in || rows < 0 || cols < 0) {
    throw DataError("corrupt chain block header in " + path);
  }
  Matrix values(rows, cols);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(sizeof(double) * values.size()));
  if (!in) {
    throw DataError("truncated chain block: " + path);
  }
  return values;
}

void save_chain(const std::string& dir, const StoredChain& stored) {
  fs::create_directories(dir);
  const fs::path base(dir);

  write_matrix_block((base / "theta.bin").string(), stored.chain.theta_draws);
  write_matrix_block((base / "projection.bin").string(), stored.chain.projection);
  write_matrix_block((base / "sigma2.bin").string(), stored.chain.sigma2_draws);
  write_matrix_block((base / "tau2.bin").string(), stored.chain.tau2_draws);
  write_matrix_block((base / "factor_u.bin").string(), stored.factorization.u);
  write_matrix_block((base / "factor_lambda.bin").string(), stored.factorization.lambda);
  write_matrix_block((base / "y_train.bin").string(), stored.y_train);

  const ChainInfo& info = stored.chain.info;
  json side;
  side["format_version"] = 1;
  side["n"] = info.n;
  side["p"] = stored.chain.covariate_count();
  side["q"] = stored.chain.factor_count();
  side["draws"] = stored.chain.draw_count();
  side["kernel"] = {{"family", to_string(info.kernel.family)},
                    {"bandwidth", info.kernel.bandwidth},
                    {"feature_count", info.kernel.feature_count},
                    {"seed", info.kernel.seed}};
  side["variance_threshold"] = info.variance_threshold;
  side["variance_explained"] = stored.factorization.variance_explained;
  side["hyper"] = {{"nu", info.hyper.nu}, {"phi", info.hyper.phi}};
  side["sampler"] = {{"total_iterations", info.sampler.total_iterations},
                     {"burn_in", info.sampler.burn_in},
                     {"thin", info.sampler.thin},
                     {"seed", info.sampler.seed}};
  side["projection_mode"] = to_string(info.projection_mode);
  side["y_offset"] = info.y_offset;
  side["kernel_scale"] = stored.preprocessing.kernel_scale;
  side["standardization"] = {
      {"mean", vector_to_json(stored.preprocessing.standardization.mean)},
      {"sd", vector_to_json(stored.preprocessing.standardization.sd)},
      {"kept", stored.preprocessing.standardization.kept},
      {"dropped", stored.preprocessing.standardization.dropped_columns}};
  side["column_ids"] = stored.column_ids;

  const fs::path tmp = base / "sidecar.json.tmp";
  {
    std::ofstream out(tmp);
    if (!out) {
      throw DataError("cannot write " + tmp.string());
    }
    out << side.dump(2) << '\n';
  }
  atomic_rename(tmp, base / "sidecar.json");
}

StoredChain load_chain(const std::string& dir) {
  const fs::path base(dir);
  const fs::path side_path = base / "sidecar.json";
  std::ifstream in(side_path);
  if (!in) {
    throw DataError("missing chain sidecar: " + side_path.string());
  }
  json side;
  try {
    in >> side;
  } catch (const json::exception& e) {
    throw DataError("corrupt chain sidecar " + side_path.string() + ": " + e.what());
  }

  StoredChain stored;
  stored.chain.theta_draws = read_matrix_block((base / "theta.bin").string());
  stored.chain.projection = read_matrix_block((base / "projection.bin").string());
  stored.chain.sigma2_draws = read_matrix_block((base / "sigma2.bin").string());
  stored.chain.tau2_draws = read_matrix_block((base / "tau2.bin").string());
  stored.factorization.u = read_matrix_block((base / "factor_u.bin").string());
  stored.factorization.lambda =
      read_matrix_block((base / "factor_lambda.bin").string());
  stored.y_train = read_matrix_block((base / "y_train.bin").string());

  try {
    ChainInfo& info = stored.chain.info;
    info.n = side.at("n");
    info.kernel.family = kernel_family_from_string(side.at("kernel").at("family"));
    info.kernel.bandwidth = side.at("kernel").at("bandwidth");
    info.kernel.feature_count = side.at("kernel").at("feature_count");
    info.kernel.seed = side.at("kernel").at("seed");
    info.variance_threshold = side.at("variance_threshold");
    info.hyper.nu = side.at("hyper").at("nu");
    info.hyper.phi = side.at("hyper").at("phi");
    info.sampler.total_iterations = side.at("sampler").at("total_iterations");
    info.sampler.burn_in = side.at("sampler").at("burn_in");
    info.sampler.thin = side.at("sampler").at("thin");
    info.sampler.seed = side.at("sampler").at("seed");
    info.projection_mode =
        projection_mode_from_string(side.at("projection_mode"));
    info.y_offset = side.at("y_offset");
    stored.factorization.variance_explained = side.at("variance_explained");
    stored.factorization.source = info.kernel;
    stored.preprocessing.kernel_scale = side.at("kernel_scale");
    stored.preprocessing.standardization.mean =
        vector_from_json(side.at("standardization").at("mean"));
    stored.preprocessing.standardization.sd =
        vector_from_json(side.at("standardization").at("sd"));
    stored.preprocessing.standardization.kept =
        side.at("standardization").at("kept").get<std::vector<Index>>();
    stored.preprocessing.standardization.dropped_columns =
        side.at("standardization").at("dropped").get<std::vector<std::string>>();
    stored.column_ids = side.at("column_ids").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError("chain sidecar " + side_path.string() +
                    " is missing fields: " + e.what());
  }
  return stored;
}

}  // namespace bakr
