#pragma once

#include "aoimix/dynamics.hpp"
#include "aoimix/types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace aoimix {

/// A multivariate time series: one row per time step.
struct TraceSeries {
  std::vector<std::string> columns;  ///< value column names
  std::vector<double> timestamps;
  Matrix values;  ///< steps x dim
};

/// CSV with a header row; the first column is the timestamp, the rest are
/// values. Timestamps must increase strictly; at least 10 rows are required.
TraceSeries read_trace_csv(std::istream& in);
TraceSeries read_trace_csv(const std::string& path);

struct KindFit {
  NonlinearityKind kind = NonlinearityKind::kZero;
  bool feasible = false;  ///< false when the design matrix is rank deficient
  ProcessModel model;
  double rms_residual = 0.0;
  double max_residual_norm = 0.0;
};

struct TraceFit {
  ProcessModel model;
  NonlinearityKind kind = NonlinearityKind::kZero;
  double disturbance_bound = 0.0;  ///< largest one-step residual norm
  double rms_residual = 0.0;
  bool ar1_fallback = false;
  std::vector<KindFit> candidates;
  std::vector<std::string> notes;
};

/// Least-squares one-step fit of x' = A x + f(x) for each catalog kind.
/// Candidates are ranked by parameter count (zero, cubic, tanh); a richer kind
/// replaces a simpler one only if it lowers the RMS residual by more than 1%.
/// A rank-deficient linear design falls back to independent scalar AR(1) fits.
TraceFit fit_trace(const TraceSeries& trace);

}  // namespace aoimix
