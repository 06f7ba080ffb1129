#include "energyate/data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "energyate/error.hpp"

namespace energyate::data {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::optional<double> mean_effect(const Dataset& d) {
  if (!d.mu0 || !d.mu1 || d.n() == 0) return std::nullopt;
  if (!d.mu0->allFinite() || !d.mu1->allFinite()) return std::nullopt;
  return (*d.mu1 - *d.mu0).mean();
}

}  // namespace

Dataset Dataset::subset(const std::vector<Eigen::Index>& index) const {
  const auto m = static_cast<Eigen::Index>(index.size());
  Dataset out;
  out.x.resize(m, p());
  out.a.resize(m);
  out.y.resize(m);
  auto take = [&](const std::optional<Eigen::VectorXd>& src) -> std::optional<Eigen::VectorXd> {
    if (!src) return std::nullopt;
    Eigen::VectorXd v(m);
    for (Eigen::Index k = 0; k < m; ++k) v(k) = (*src)(index[static_cast<std::size_t>(k)]);
    return v;
  };
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index i = index[static_cast<std::size_t>(k)];
    out.x.row(k) = x.row(i);
    out.a(k) = a(i);
    out.y(k) = y(i);
  }
  out.y_cfactual = take(y_cfactual);
  out.mu0 = take(mu0);
  out.mu1 = take(mu1);
  out.tau_true = mean_effect(out);
  if (!out.tau_true && tau_true && !mu0) out.tau_true = tau_true;
  out.provenance = provenance;
  return out;
}

void validate(const Dataset& d, bool require_both_arms) {
  const Eigen::Index n = d.n();
  if (d.a.size() != n || d.y.size() != n) throw InvalidDataError("dataset columns have inconsistent lengths");
  for (const auto* opt : {&d.y_cfactual, &d.mu0, &d.mu1}) {
    if (*opt && (*opt)->size() != n) throw InvalidDataError("dataset columns have inconsistent lengths");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d.a(i) != 0 && d.a(i) != 1) throw InvalidDataError("treatment entries must be 0 or 1");
  }
  if (!d.x.allFinite() || !d.y.allFinite()) throw InvalidDataError("dataset contains non-finite values");
  if (require_both_arms && (d.n_treated() == 0 || d.n_control() == 0)) {
    throw InvalidDataError("both treatment arms must be non-empty (n1=" +
                           std::to_string(d.n_treated()) + ", n0=" + std::to_string(d.n_control()) + ")");
  }
}

ColumnLayout ColumnLayout::parse(const std::string& spec) {
  ColumnLayout layout;
  std::stringstream ss(spec);
  std::string item;
  auto to_int = [&](std::string_view s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw LayoutError("bad column index '" + std::string(s) + "' in layout '" + spec + "'");
    }
    return v;
  };
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw LayoutError("layout entry '" + item + "' lacks '='");
    const std::string key = item.substr(0, eq);
    const std::string_view value = std::string_view(item).substr(eq + 1);
    if (key == "treatment" || key == "t") layout.treatment = to_int(value);
    else if (key == "y") layout.y_factual = to_int(value);
    else if (key == "ycf") layout.y_cfactual = to_int(value);
    else if (key == "mu0") layout.mu0 = to_int(value);
    else if (key == "mu1") layout.mu1 = to_int(value);
    else if (key == "cols") layout.expected_columns = to_int(value);
    else if (key == "x") {
      const auto colon = value.find(':');
      if (colon == std::string_view::npos) throw LayoutError("covariate range must look like x=5:30");
      layout.covariate_begin = to_int(value.substr(0, colon));
      const auto end = value.substr(colon + 1);
      layout.covariate_end = end.empty() ? -1 : to_int(end);
    } else {
      throw LayoutError("unknown layout key '" + key + "'");
    }
  }
  return layout;
}

std::string ColumnLayout::to_string() const {
  std::ostringstream os;
  os << "treatment=" << treatment << ",y=" << y_factual << ",ycf=" << y_cfactual << ",mu0=" << mu0
     << ",mu1=" << mu1 << ",x=" << covariate_begin << ":";
  if (covariate_end >= 0) os << covariate_end;
  os << ",cols=" << expected_columns;
  return os.str();
}

Dataset parse_ihdp_csv(std::istream& in, const ColumnLayout& layout, const std::string& provenance) {
  if (layout.treatment < 0 || layout.y_factual < 0) {
    throw LayoutError("layout must name treatment and factual outcome columns");
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  long line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    std::vector<double> values;
    values.reserve(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto v = parse_double(fields[c]);
      if (!v) {
        const std::string token(fields[c]);
        if (rows.empty()) {
          throw LayoutError("line " + std::to_string(line_no) + ": non-numeric token '" + token +
                            "' in column " + std::to_string(c) +
                            " (header rows are not part of the layout)");
        }
        throw ParseError("non-numeric token '" + token + "' in column " + std::to_string(c), line_no);
      }
      values.push_back(*v);
    }
    if (layout.expected_columns > 0 && values.size() != static_cast<std::size_t>(layout.expected_columns)) {
      throw LayoutError("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(layout.expected_columns) + " columns, found " +
                        std::to_string(values.size()));
    }
    if (width == 0) {
      width = values.size();
    } else if (values.size() != width) {
      throw ParseError("row has " + std::to_string(values.size()) + " fields, previous rows had " +
                       std::to_string(width), line_no);
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ParseError("no data rows in " + provenance, 0);

  const int cols = static_cast<int>(width);
  const int x_end = layout.covariate_end < 0 ? cols : layout.covariate_end;
  auto check_col = [&](int c, const char* name) {
    if (c >= cols) {
      throw LayoutError(std::string(name) + " column " + std::to_string(c) + " is beyond the " +
                        std::to_string(cols) + " columns present");
    }
  };
  check_col(layout.treatment, "treatment");
  check_col(layout.y_factual, "outcome");
  check_col(layout.y_cfactual, "counterfactual");
  check_col(layout.mu0, "mu0");
  check_col(layout.mu1, "mu1");
  if (layout.covariate_begin < 0 || x_end > cols || x_end <= layout.covariate_begin) {
    throw LayoutError("covariate range " + std::to_string(layout.covariate_begin) + ":" +
                      std::to_string(x_end) + " does not fit " + std::to_string(cols) + " columns");
  }

  const auto n = static_cast<Eigen::Index>(rows.size());
  const int p = x_end - layout.covariate_begin;
  Dataset d;
  d.provenance = provenance;
  d.x.resize(n, p);
  d.a.resize(n);
  d.y.resize(n);
  if (layout.y_cfactual >= 0) d.y_cfactual = Eigen::VectorXd(n);
  if (layout.mu0 >= 0) d.mu0 = Eigen::VectorXd(n);
  if (layout.mu1 >= 0) d.mu1 = Eigen::VectorXd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    const double t = r[static_cast<std::size_t>(layout.treatment)];
    if (t != 0.0 && t != 1.0) {
      throw ParseError("treatment value " + format_double(t) + " is not 0 or 1", static_cast<long>(i + 1));
    }
    d.a(i) = static_cast<int>(t);
    d.y(i) = r[static_cast<std::size_t>(layout.y_factual)];
    if (d.y_cfactual) (*d.y_cfactual)(i) = r[static_cast<std::size_t>(layout.y_cfactual)];
    if (d.mu0) (*d.mu0)(i) = r[static_cast<std::size_t>(layout.mu0)];
    if (d.mu1) (*d.mu1)(i) = r[static_cast<std::size_t>(layout.mu1)];
    for (int j = 0; j < p; ++j) d.x(i, j) = r[static_cast<std::size_t>(layout.covariate_begin + j)];
  }
  d.tau_true = mean_effect(d);
  validate(d);
  return d;
}

Dataset load_ihdp_csv(const std::filesystem::path& path, const ColumnLayout& layout) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return parse_ihdp_csv(in, layout, path.string());
}

void write_ihdp_csv(const Dataset& d, std::ostream& out) {
  validate(d);
  auto opt = [](const std::optional<Eigen::VectorXd>& v, Eigen::Index i) {
    return v ? format_double((*v)(i)) : std::string("nan");
  };
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    out << d.a(i) << ',' << format_double(d.y(i)) << ',' << opt(d.y_cfactual, i) << ','
        << opt(d.mu0, i) << ',' << opt(d.mu1, i);
    for (Eigen::Index j = 0; j < d.p(); ++j) out << ',' << format_double(d.x(i, j));
    out << '\n';
  }
}

void write_ihdp_csv(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidDataError("cannot write " + path.string());
  write_ihdp_csv(d, out);
}

Dataset simulate(const verify::OracleDgp& dgp, Eigen::Index n, std::uint64_t seed) {
  if (n < 4) throw InvalidDataError("simulate needs n >= 4 (got " + std::to_string(n) + ")");
  verify::Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset d;
  d.provenance = "simulate:" + dgp.name + ":seed=" + std::to_string(seed);
  d.x.resize(n, dgp.p);
  d.a.resize(n);
  d.y.resize(n);
  Eigen::VectorXd ycf(n), m0(n), m1(n);
  double effect_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd x = dgp.sample_covariates(rng);
    const double e = dgp.propensity(x);
    if (!(e > 0.0 && e < 1.0)) {
      throw PositivityError("propensity " + format_double(e) + " outside (0, 1) at unit " + std::to_string(i));
    }
    const int a = unit(rng) < e ? 1 : 0;
    const double base = dgp.mu0(x);
    const double effect = dgp.effect(x);
    const double y0 = base + dgp.noise_sd(x, 0) * normal(rng);
    const double y1 = base + effect + dgp.noise_sd(x, 1) * normal(rng);
    d.x.row(i) = x.transpose();
    d.a(i) = a;
    d.y(i) = a == 1 ? y1 : y0;
    ycf(i) = a == 1 ? y0 : y1;
    m0(i) = base;
    m1(i) = base + effect;
    effect_sum += effect;
  }
  d.y_cfactual = ycf;
  d.mu0 = m0;
  d.mu1 = m1;
  // Averaging the effect itself keeps a constant effect exact.
  d.tau_true = effect_sum / static_cast<double>(n);
  if (d.n_treated() == 0 || d.n_control() == 0) {
    throw PositivityError("simulated sample has an empty treatment arm (n=" + std::to_string(n) + ")");
  }
  return d;
}

Split split(const Dataset& d, const SplitSpec& spec) {
  const double fr[3] = {spec.train, spec.test, spec.validation};
  for (double f : fr) {
    if (!(f >= 0.0)) throw InvalidDataError("split fractions must be nonnegative");
  }
  if (std::abs(fr[0] + fr[1] + fr[2] - 1.0) > 1e-12) throw InvalidDataError("split fractions must sum to 1");
  const Eigen::Index n = d.n();

  // Largest-remainder apportionment keeps each size within 1 of n * fraction.
  std::array<Eigen::Index, 3> sizes{};
  std::array<double, 3> remainder{};
  Eigen::Index assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = fr[k] * static_cast<double>(n);
    sizes[static_cast<std::size_t>(k)] = static_cast<Eigen::Index>(std::floor(exact + 1e-9));
    remainder[static_cast<std::size_t>(k)] = exact - static_cast<double>(sizes[static_cast<std::size_t>(k)]);
    assigned += sizes[static_cast<std::size_t>(k)];
  }
  while (assigned < n) {
    const auto k = static_cast<std::size_t>(std::max_element(remainder.begin(), remainder.end()) - remainder.begin());
    ++sizes[k];
    remainder[k] = -1.0;
    ++assigned;
  }

  for (int attempt = 0; attempt < 10; ++attempt) {
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::mt19937_64 rng(spec.seed + static_cast<std::uint64_t>(attempt) * 0x9E3779B97F4A7C15ULL);
    std::shuffle(perm.begin(), perm.end(), rng);
    Split s;
    s.train_index.assign(perm.begin(), perm.begin() + sizes[0]);
    s.test_index.assign(perm.begin() + sizes[0], perm.begin() + sizes[0] + sizes[1]);
    s.validation_index.assign(perm.begin() + sizes[0] + sizes[1], perm.end());
    s.train = d.subset(s.train_index);
    if (s.train.n_treated() == 0 || s.train.n_control() == 0) continue;
    s.test = d.subset(s.test_index);
    s.validation = d.subset(s.validation_index);
    return s;
  }
  throw InvalidDataError("could not draw a training split containing both arms after 10 attempts");
}

Standardizer::Standardizer(Eigen::VectorXd mean, Eigen::VectorXd sd) : mean_(std::move(mean)), sd_(std::move(sd)) {
  if (mean_.size() != sd_.size()) throw ShapeError("standardizer mean/sd length mismatch");
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& train_x) {
  const Eigen::Index n = train_x.rows();
  if (n < 2) throw InvalidDataError("standardisation needs at least two rows");
  Eigen::VectorXd mean = train_x.colwise().mean().transpose();
  Eigen::VectorXd sd(train_x.cols());
  for (Eigen::Index j = 0; j < train_x.cols(); ++j) {
    sd(j) = std::sqrt((train_x.col(j).array() - mean(j)).square().sum() / static_cast<double>(n - 1));
  }
  return Standardizer(std::move(mean), std::move(sd));
}

double Standardizer::apply_feature(Eigen::Index j, double value) const {
  if (sd_(j) < 1e-12) return 0.0;
  return (value - mean_(j)) / sd_(j);
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  if (x.cols() != dim()) throw ShapeError("standardizer dimension does not match covariates");
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (sd_(j) < 1e-12) {
      out.col(j).setZero();
    } else {
      out.col(j) = (x.col(j).array() - mean_(j)) / sd_(j);
    }
  }
  return out;
}

Eigen::VectorXd Standardizer::apply_row(const Eigen::VectorXd& x) const {
  if (x.size() != dim()) throw ShapeError("standardizer dimension does not match covariates");
  Eigen::VectorXd out(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) out(j) = apply_feature(j, x(j));
  return out;
}

}  // namespace energyate::data
