#pragma once

// Plain-text artifacts: a versioned JSON model file and the CSV tables the
// command line writes.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "energyate/data.hpp"
#include "energyate/energy.hpp"
#include "energyate/estimators.hpp"
#include "energyate/models.hpp"
#include "energyate/training.hpp"

namespace energyate::serialize {

inline constexpr int kModelFormatVersion = 1;

/// Everything needed to evaluate a fitted model on raw covariates.
struct SavedModel {
  models::OutcomeModel model;
  data::Standardizer standardizer;
  double epsilon = 0.0;
  std::vector<Eigen::Index> train_index;
  std::uint64_t seed = 0;
};

std::string to_json(const SavedModel& m);
/// Throws ParseError on malformed input or an unknown format version.
SavedModel saved_model_from_json(const std::string& text);

void write_weights_csv(const energy::BalancingWeights& w, std::ostream& out);
void write_solver_trace_csv(const std::vector<energy::TracePoint>& trace, std::ostream& out);
void write_loss_trace_csv(const std::vector<training::EpochRecord>& trace, std::ostream& out);
/// One file per table: feature,x,delta_q (1-based feature index).
void write_shape_csv(const models::ShapeFunctionTable& table, std::ostream& out);

/// Sidecar: n, p, n1, n0, tau_true (null when unknown), provenance.
std::string dataset_metadata_json(const data::Dataset& d);

std::string ate_report_json(const estimators::AteReport& r);
/// Header tau_plugin,tau_weighted,tau_wreg,ee_residual,tau_true,abs_err_plugin,
/// abs_err_weighted,abs_err_wreg; absent values are left empty.
void write_ate_csv(const estimators::AteReport& r, std::ostream& out);

/// %.17g, or nan / inf spelled out.
std::string format_double(double v);

}  // namespace energyate::serialize
