#pragma once

// Dataset ingestion (IHDP-style CSV), simulation from oracle DGPs, seeded
// train/test/validation splits and covariate standardisation.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "energyate/oracle_dgp.hpp"

namespace energyate::data {

struct Dataset {
  Eigen::MatrixXd x;  // n x p
  Eigen::VectorXi a;
  Eigen::VectorXd y;
  std::optional<Eigen::VectorXd> y_cfactual;
  std::optional<Eigen::VectorXd> mu0;
  std::optional<Eigen::VectorXd> mu1;
  std::optional<double> tau_true;
  std::string provenance;

  Eigen::Index n() const noexcept { return x.rows(); }
  Eigen::Index p() const noexcept { return x.cols(); }
  Eigen::Index n_treated() const { return (a.array() == 1).count(); }
  Eigen::Index n_control() const { return (a.array() == 0).count(); }

  /// Rows `index` in the given order; recomputes tau_true from mu columns.
  Dataset subset(const std::vector<Eigen::Index>& index) const;
};

/// Throws InvalidDataError on inconsistent lengths, non-binary treatment,
/// non-finite values or (when requested) an empty arm.
void validate(const Dataset& d, bool require_both_arms = false);

/// Column positions of an IHDP-style replicate file. Negative entries mark
/// absent columns. Covariates span [covariate_begin, covariate_end); a
/// negative end means "through the last column".
struct ColumnLayout {
  int treatment = 0;
  int y_factual = 1;
  int y_cfactual = 2;
  int mu0 = 3;
  int mu1 = 4;
  int covariate_begin = 5;
  int covariate_end = 30;
  /// Exact column count every row must have; 0 accepts any count that
  /// covers the referenced columns.
  int expected_columns = 30;

  /// Parses "treatment=0,y=1,ycf=2,mu0=3,mu1=4,x=5:30,cols=30"; keys may be
  /// omitted and use -1 to drop a column.
  static ColumnLayout parse(const std::string& spec);
  std::string to_string() const;
};

Dataset parse_ihdp_csv(std::istream& in, const ColumnLayout& layout = {},
                       const std::string& provenance = "stream");
Dataset load_ihdp_csv(const std::filesystem::path& path, const ColumnLayout& layout = {});

/// Writes the default IHDP layout (treatment, y, y_cf, mu0, mu1, x...) with
/// 17 significant digits; absent optional columns are written as nan.
void write_ihdp_csv(const Dataset& d, std::ostream& out);
void write_ihdp_csv(const Dataset& d, const std::filesystem::path& path);

/// Draws n units. Throws InvalidDataError for n < 4, PositivityError when a
/// propensity leaves (0, 1) or an arm comes out empty.
Dataset simulate(const verify::OracleDgp& dgp, Eigen::Index n, std::uint64_t seed);

struct SplitSpec {
  double train = 1.0 / 3.0;
  double test = 1.0 / 3.0;
  double validation = 1.0 / 3.0;
  std::uint64_t seed = 0;
};

struct Split {
  Dataset train;
  Dataset test;
  Dataset validation;
  std::vector<Eigen::Index> train_index;
  std::vector<Eigen::Index> test_index;
  std::vector<Eigen::Index> validation_index;
};

/// Seeded permutation split. Retries up to ten permutations when the train
/// part misses an arm, then throws InvalidDataError.
Split split(const Dataset& d, const SplitSpec& spec);

/// Per-column mean/sd fitted on a training matrix; columns with sd < 1e-12
/// map to zero.
class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(Eigen::VectorXd mean, Eigen::VectorXd sd);

  static Standardizer fit(const Eigen::MatrixXd& train_x);

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd apply_row(const Eigen::VectorXd& x) const;
  double apply_feature(Eigen::Index j, double value) const;

  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  const Eigen::VectorXd& sd() const noexcept { return sd_; }
  Eigen::Index dim() const noexcept { return mean_.size(); }

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd sd_;
};

}  // namespace energyate::data
