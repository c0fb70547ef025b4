#include "aoimix/trace_fit.hpp"

#include "aoimix/error.hpp"
#include "aoimix/format.hpp"

#include <Eigen/QR>

#include <cmath>
#include <fstream>
#include <istream>
#include <string>

namespace aoimix {
namespace {

struct Residuals {
  double rms = 0.0;
  double max_norm = 0.0;
};

Residuals residuals_of(const ProcessModel& model, const Matrix& x, const Matrix& y) {
  Residuals r;
  double sq = 0.0;
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    const Vector e = model.step(x.row(t).transpose()) - y.row(t).transpose();
    sq += e.squaredNorm();
    r.max_norm = std::max(r.max_norm, e.norm());
  }
  r.rms = std::sqrt(sq / static_cast<double>(x.rows() * x.cols()));
  return r;
}

KindFit finish(NonlinearityKind kind, ProcessModel model, const Matrix& x, const Matrix& y) {
  KindFit f;
  f.kind = kind;
  f.feasible = true;
  const auto r = residuals_of(model, x, y);
  f.model = std::move(model);
  f.rms_residual = r.rms;
  f.max_residual_norm = r.max_norm;
  return f;
}

KindFit fit_linear(const Matrix& x, const Matrix& y) {
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  if (qr.rank() < x.cols()) return KindFit{NonlinearityKind::kZero, false, {}, 0.0, 0.0};
  const Matrix coef = qr.solve(y);  // d x d, y = x * coef
  return finish(NonlinearityKind::kZero, ProcessModel{coef.transpose(), ZeroMap{}}, x, y);
}

KindFit fit_tanh(const Matrix& x, const Matrix& y) {
  const auto d = x.cols();
  Matrix design(x.rows(), 2 * d);
  design << x, x.array().tanh().matrix();
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  if (qr.rank() < design.cols()) return KindFit{NonlinearityKind::kTanh, false, {}, 0.0, 0.0};
  const Matrix coef = qr.solve(y);  // 2d x d
  ProcessModel m{coef.topRows(d).transpose(), TanhMap{coef.bottomRows(d).transpose()}};
  return finish(NonlinearityKind::kTanh, std::move(m), x, y);
}

KindFit fit_cubic(const Matrix& x, const Matrix& y) {
  const auto n = x.rows();
  const auto d = x.cols();
  // Unknowns: A row-major (d*d entries), then c. Row (t, i):
  // y_ti = sum_j A_ij x_tj - c x_ti^3.
  Matrix design = Matrix::Zero(n * d, d * d + 1);
  Vector rhs(n * d);
  for (Eigen::Index t = 0; t < n; ++t) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const auto row = t * d + i;
      design.block(row, i * d, 1, d) = x.row(t);
      design(row, d * d) = -std::pow(x(t, i), 3);
      rhs[row] = y(t, i);
    }
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  if (qr.rank() < design.cols()) return KindFit{NonlinearityKind::kCubic, false, {}, 0.0, 0.0};
  const Vector sol = qr.solve(rhs);
  Matrix a(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) a(i, j) = sol[i * d + j];
  return finish(NonlinearityKind::kCubic, ProcessModel{a, CubicDamping{sol[d * d]}}, x, y);
}

KindFit fit_ar1(const Matrix& x, const Matrix& y) {
  const auto d = x.cols();
  Matrix a = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double den = x.col(i).squaredNorm();
    a(i, i) = den > 0.0 ? x.col(i).dot(y.col(i)) / den : 1.0;
  }
  return finish(NonlinearityKind::kZero, ProcessModel{a, ZeroMap{}}, x, y);
}

}  // namespace

TraceSeries read_trace_csv(std::istream& in) {
  TraceSeries s;
  std::string line;
  if (!std::getline(in, line)) throw ContractViolation("trace csv: empty input");
  auto header = split_csv_line(line);
  if (header.size() < 2)
    throw ContractViolation("trace csv: need a timestamp column and at least one value column");
  s.columns.assign(header.begin() + 1, header.end());
  const auto dim = static_cast<Eigen::Index>(s.columns.size());
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (static_cast<Eigen::Index>(fields.size()) != dim + 1)
      throw ContractViolation("trace csv line " + std::to_string(line_no) + ": expected " +
                              std::to_string(dim + 1) + " fields");
    std::vector<double> row;
    try {
      for (const auto& f : fields) row.push_back(parse_double(f));
    } catch (const std::exception&) {
      throw ContractViolation("trace csv line " + std::to_string(line_no) + ": non-numeric field");
    }
    if (!s.timestamps.empty() && !(row[0] > s.timestamps.back()))
      throw ContractViolation("trace csv line " + std::to_string(line_no) +
                              ": timestamps must increase");
    s.timestamps.push_back(row[0]);
    rows.push_back(std::move(row));
  }
  if (rows.size() < 10) throw ContractViolation("trace csv: at least 10 rows are required");
  s.values.resize(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (Eigen::Index j = 0; j < dim; ++j) s.values(static_cast<Eigen::Index>(t), j) = rows[t][j + 1];
  if (!s.values.allFinite()) throw ContractViolation("trace csv: non-finite values");
  return s;
}

TraceSeries read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  return read_trace_csv(in);
}

TraceFit fit_trace(const TraceSeries& trace) {
  const auto n = trace.values.rows();
  if (n < 10) throw ContractViolation("fit_trace: at least 10 rows are required");
  const Matrix x = trace.values.topRows(n - 1);
  const Matrix y = trace.values.bottomRows(n - 1);
  const double scale = std::sqrt(y.squaredNorm() / static_cast<double>(y.size()));

  TraceFit out;
  KindFit linear = fit_linear(x, y);
  if (!linear.feasible) {
    out.ar1_fallback = true;
    out.notes.push_back("linear design is rank deficient; fell back to scalar AR(1) per column");
    linear = fit_ar1(x, y);
  }
  out.candidates.push_back(linear);
  if (!out.ar1_fallback) {
    out.candidates.push_back(fit_cubic(x, y));
    out.candidates.push_back(fit_tanh(x, y));
  }

  const KindFit* best = &out.candidates.front();
  for (const auto& c : out.candidates) {
    if (&c == best || !c.feasible) continue;
    if (c.rms_residual < 0.99 * best->rms_residual - 1e-12 * (1.0 + scale)) best = &c;
  }
  for (const auto& c : out.candidates)
    if (!c.feasible)
      out.notes.push_back(to_string(c.kind) + " design is rank deficient; candidate skipped");
  if ((x.rowwise() - x.row(0)).isZero(0.0))
    out.notes.push_back(
        "constant trace: A = 1 with f = 0 and A = 0 with an offset are indistinguishable; "
        "kept the linear fit");

  out.kind = best->kind;
  out.model = best->model;
  out.rms_residual = best->rms_residual;
  out.disturbance_bound = best->max_residual_norm;
  return out;
}

}  // namespace aoimix
