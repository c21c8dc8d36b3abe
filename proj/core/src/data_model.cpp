#include "drinfer/data_model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "drinfer/rkhs_basis.hpp"

namespace drinfer {

double rescale_to_unit(double a, double a_min, double a_max,
                       bool* out_of_range) {
  if (!(a_min < a_max)) {
    throw std::invalid_argument("degenerate exposure range: a_min >= a_max");
  }
  const double u = (a - a_min) / (a_max - a_min);
  if (out_of_range != nullptr) *out_of_range = (u < 0.0 || u > 1.0);
  return u;
}

double rescale_from_unit(double a01, double a_min, double a_max) {
  return a_min + a01 * (a_max - a_min);
}

ObservationSet ObservationSet::from_raw(Eigen::MatrixXd w, Eigen::VectorXd a,
                                        Eigen::VectorXd y) {
  const Eigen::Index n = a.size();
  if (n < 2) throw std::invalid_argument("need at least 2 observations");
  if (y.size() != n || (w.size() > 0 && w.rows() != n)) {
    throw std::invalid_argument("row count mismatch between W, A, Y");
  }
  if (!a.allFinite() || !y.allFinite() || !w.allFinite()) {
    throw std::invalid_argument("non-finite value in input data");
  }
  ObservationSet data;
  data.a_min = a.minCoeff();
  data.a_max = a.maxCoeff();
  if (!(data.a_min < data.a_max)) {
    throw std::invalid_argument("degenerate exposure range");
  }
  data.a01 = (a.array() - data.a_min) / (data.a_max - data.a_min);
  data.w = std::move(w);
  data.a = std::move(a);
  data.y = std::move(y);
  return data;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim whitespace and CR
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_number(const std::string& s, const std::string& column, int row) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("non-numeric value '" + s + "' in column '" +
                             column + "' at data row " + std::to_string(row));
  }
}

}  // namespace

ObservationSet load_csv(const std::string& path,
                        const std::vector<std::string>& covariate_columns,
                        const std::string& exposure_column,
                        const std::string& outcome_column) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);
  const std::vector<std::string> header = split_csv_line(line);

  auto column_index = [&](const std::string& name) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == name) return static_cast<int>(j);
    }
    throw std::runtime_error("missing column '" + name + "' in " + path);
  };
  std::vector<int> cov_idx;
  cov_idx.reserve(covariate_columns.size());
  for (const auto& name : covariate_columns) cov_idx.push_back(column_index(name));
  const int a_idx = column_index(exposure_column);
  const int y_idx = column_index(outcome_column);

  std::vector<double> a_vals, y_vals;
  std::vector<std::vector<double>> w_rows;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    ++row;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error("row " + std::to_string(row) +
                               " has wrong number of fields");
    }
    a_vals.push_back(parse_number(fields[a_idx], exposure_column, row));
    y_vals.push_back(parse_number(fields[y_idx], outcome_column, row));
    std::vector<double> wr(cov_idx.size());
    for (std::size_t j = 0; j < cov_idx.size(); ++j) {
      wr[j] = parse_number(fields[cov_idx[j]], covariate_columns[j], row);
    }
    w_rows.push_back(std::move(wr));
  }
  const int n = static_cast<int>(a_vals.size());
  if (n < 2) throw std::runtime_error("fewer than 2 data rows in " + path);

  Eigen::VectorXd a = Eigen::Map<Eigen::VectorXd>(a_vals.data(), n);
  Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(y_vals.data(), n);
  Eigen::MatrixXd w(n, static_cast<int>(cov_idx.size()));
  for (int i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < cov_idx.size(); ++j) {
      w(i, static_cast<int>(j)) = w_rows[i][j];
    }
  }
  if (!(a.minCoeff() < a.maxCoeff())) {
    throw std::runtime_error("degenerate exposure range in " + path);
  }
  return ObservationSet::from_raw(std::move(w), std::move(a), std::move(y));
}

void write_csv(const ObservationSet& data, const std::string& path,
               const std::vector<std::string>& covariate_columns,
               const std::string& exposure_column,
               const std::string& outcome_column) {
  if (static_cast<int>(covariate_columns.size()) != data.q()) {
    throw std::invalid_argument("covariate name count does not match q");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out.precision(17);
  for (const auto& name : covariate_columns) out << name << ',';
  out << exposure_column << ',' << outcome_column << '\n';
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.q(); ++j) out << data.w(i, j) << ',';
    out << data.a[i] << ',' << data.y[i] << '\n';
  }
}

NullCurve NullCurve::zero() {
  NullCurve c;
  c.eval_ = [](double) { return 0.0; };
  c.is_zero_ = true;
  return c;
}

NullCurve NullCurve::from_coefficients(Eigen::VectorXd coeffs,
                                       double intercept) {
  NullCurve c;
  const SobolevBasis basis(static_cast<int>(coeffs.size()));
  c.coeffs_ = coeffs;
  c.is_zero_ = coeffs.isZero(0.0) && intercept == 0.0;
  c.eval_ = [basis, coeffs = std::move(coeffs), intercept](double a01) {
    return intercept + basis.evaluate(a01).dot(coeffs);
  };
  return c;
}

NullCurve NullCurve::from_function(std::function<double(double)> f) {
  NullCurve c;
  c.eval_ = std::move(f);
  return c;
}

}  // namespace drinfer
