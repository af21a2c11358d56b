#pragma once

// causal-kit command-line front end: gen, test, matrix, scan, reproduce.
//
// Exit codes: 0 success, 1 unexpected internal error, 2 configuration error,
// 3 data error, 4 numerical failure.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "causalkit/causalkit.hpp"

namespace causalkit::cli {

using nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { kOk = 0, kInternal = 1, kConfigError = 2, kDataError = 3, kNumericalError = 4 };

inline int exit_code_for(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Config: return kConfigError;
    case ErrorCategory::Data: return kDataError;
    case ErrorCategory::Numerical: return kNumericalError;
  }
  return kInternal;
}

// Shortest representation that reads back to the same double; empty for NaN.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline ordered_json json_number(double v) { return std::isnan(v) ? ordered_json(nullptr) : ordered_json(v); }

inline std::string join(const std::vector<std::string>& v, const std::string& sep = ",") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

inline std::vector<std::string> split(const std::string& s, char delim = ',') {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(s);
  while (std::getline(in, cell, delim))
    if (!cell.empty()) out.push_back(cell);
  return out;
}

inline int parse_int(const std::string& s, const std::string& what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) fail(Errc::InvalidArgument, "bad " + what + " '" + s + "'");
  return v;
}

inline double parse_positive(const std::string& s, const std::string& what) {
  auto v = causalkit::detail::parse_number(s);
  if (!v || !(*v > 0.0)) fail(Errc::InvalidArgument, what + " must be a positive number, got '" + s + "'");
  return *v;
}

// "1,2,5-7" -> {1,2,5,6,7}; token 0 requests the present value of the cause.
// A lone 0 keeps one lag of own past.
inline LagSpec parse_lags(const std::string& text) {
  std::vector<int> lags;
  bool present = false;
  for (const auto& tok : split(text)) {
    const auto dash = tok.find('-', 1);
    int lo = 0, hi = 0;
    if (dash == std::string::npos) {
      lo = hi = parse_int(tok, "lag");
    } else {
      lo = parse_int(tok.substr(0, dash), "lag");
      hi = parse_int(tok.substr(dash + 1), "lag");
    }
    if (lo < 0 || hi < lo) fail(Errc::InvalidArgument, "bad lag range '" + tok + "'");
    for (int l = lo; l <= hi; ++l) {
      if (l == 0)
        present = true;
      else
        lags.push_back(l);
    }
  }
  std::sort(lags.begin(), lags.end());
  if (std::adjacent_find(lags.begin(), lags.end()) != lags.end())
    fail(Errc::InvalidArgument, "duplicate lag in '" + text + "'");
  if (lags.empty() && !present) fail(Errc::InvalidArgument, "empty lag list");
  if (lags.empty()) lags = {1};
  return LagSpec{lags, present, false};
}

// "lo:hi" powers of two, inclusive.
inline std::vector<double> parse_exponent_range(const std::string& text) {
  const auto colon = text.find(':', 1);
  if (colon == std::string::npos) fail(Errc::InvalidArgument, "grid range must be LO:HI, got '" + text + "'");
  const int lo = parse_int(text.substr(0, colon), "grid exponent");
  const int hi = parse_int(text.substr(colon + 1), "grid exponent");
  if (hi < lo) fail(Errc::InvalidArgument, "grid range '" + text + "' is empty");
  return dyadic_range(lo, hi);
}

inline std::uint64_t entropy_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

// ---------------------------------------------------------------------------
// Option groups

struct DataOptions {
  std::string input;
  std::string delimiter = ",";
  bool index_column = false;
  std::vector<std::string> preprocess;
  std::vector<std::string> log_columns;

  void add(CLI::App* app) {
    app->add_option("-i,--input", input, "Input CSV file")->required();
    app->add_option("--delimiter", delimiter, "CSV delimiter")->capture_default_str();
    app->add_flag("--index-column", index_column, "First CSV column holds timestamps");
    app->add_option("--preprocess", preprocess, "Ordered steps: log-returns, difference, demean, detrend")
        ->delimiter(',');
    app->add_option("--log-columns", log_columns, "Columns for log-returns (default: all)")->delimiter(',');
  }

  ordered_json echo() const {
    return {{"input", input}, {"delimiter", delimiter}, {"index_column", index_column},
            {"preprocess", preprocess}, {"log_columns", log_columns}};
  }
};

inline TimeSeriesPanel apply_preprocessing(TimeSeriesPanel p, const std::vector<std::string>& steps,
                                           const std::vector<std::string>& log_columns = {}) {
  for (const auto& s : steps) {
    if (s == "log-returns")
      p = log_returns(p, log_columns);
    else if (s == "difference")
      p = difference(p);
    else if (s == "demean")
      p = demean(p);
    else if (s == "detrend")
      p = detrend(p);
    else
      fail(Errc::InvalidArgument, "unknown preprocessing step '" + s + "'");
  }
  return p;
}

inline TimeSeriesPanel load_input(const DataOptions& o) {
  if (o.delimiter.size() != 1) fail(Errc::InvalidArgument, "delimiter must be a single character");
  return apply_preprocessing(load_csv(o.input, CsvOptions{o.delimiter[0], o.index_column}), o.preprocess,
                             o.log_columns);
}

struct MeasureOptions {
  std::string measure = "geweke-linear";
  std::string lags;  // empty: measure default
  bool present_side = false;
  std::string kernel = "gaussian";
  std::string sigma = "cv";
  std::string gamma;  // empty: 1e-8 for geweke-linear, cv for geweke-kernel
  double lambda = kDefaultHsncicLambda;
  int bins = 4;
  std::string cv_gammas = "-40:-26";
  std::string cv_sigmas = "7:13";
  std::size_t cv_folds = 5;

  void add(CLI::App* app) {
    app->add_option("-m,--measure", measure,
                    "geweke-linear | geweke-kernel | hsncic | transfer-entropy | mutual-information")
        ->capture_default_str();
    app->add_option("-l,--lags", lags, "Lag list, e.g. 1 | 1-3 | 0,1 (0 = present value of the cause)");
    app->add_flag("--present-side", present_side, "Condition on the present value of side columns");
    app->add_option("--kernel", kernel, "Kernel for geweke-kernel: gaussian | linear")->capture_default_str();
    app->add_option("--sigma", sigma, "Gaussian width: number | median | cv")->capture_default_str();
    app->add_option("--gamma", gamma, "Ridge regulariser: number | cv");
    app->add_option("--lambda", lambda, "HSNCIC regulariser")->capture_default_str();
    app->add_option("--bins", bins, "Histogram bins per dimension")->capture_default_str();
    app->add_option("--cv-gammas", cv_gammas, "CV gamma grid as base-2 exponents LO:HI")->capture_default_str();
    app->add_option("--cv-sigmas", cv_sigmas, "CV sigma grid as base-2 exponents LO:HI")->capture_default_str();
    app->add_option("--cv-folds", cv_folds, "CV folds")->capture_default_str();
  }
};

struct PermutationOptions {
  std::size_t permutations = 200;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* app, bool seed_required = false) {
    app->add_option("-n,--permutations", permutations, "Permutation count")->capture_default_str();
    auto* opt = app->add_option("--seed", seed, "Master seed (default: from entropy)");
    if (seed_required) opt->required();
  }

  std::uint64_t resolved_seed() {
    if (!seed) seed = entropy_seed();
    return *seed;
  }
};

struct OutputOptions {
  std::string output;  // empty: stdout
  std::string format = "json";

  void add(CLI::App* app, const std::string& default_format) {
    format = default_format;
    app->add_option("-o,--output", output, "Output file (default: stdout)");
    app->add_option("--format", format, "json | csv")->capture_default_str();
  }

  void check() const {
    if (format != "json" && format != "csv") fail(Errc::InvalidArgument, "format must be json or csv");
  }
};

// ---------------------------------------------------------------------------
// Query resolution

inline Measure requested_measure(const MeasureOptions& o) { return parse_measure(o.measure); }

inline LagSpec resolved_lags(const MeasureOptions& o) {
  const Measure m = requested_measure(o);
  if (m == Measure::MutualInformation) {
    if (!o.lags.empty() && o.lags != "0") fail(Errc::InvalidArgument, "mutual-information implies lag 0");
    return LagSpec{{1}, true, false};
  }
  LagSpec s = parse_lags(o.lags.empty() ? "1" : o.lags);
  s.include_present_z = o.present_side;
  return s;
}

// Transfer entropy at lag 0 is answered by mutual information.
inline Measure effective_measure(const MeasureOptions& o) {
  const Measure m = requested_measure(o);
  if (m != Measure::TransferEntropy) return m;
  const LagSpec s = resolved_lags(o);
  if (s.include_present_y && s.lags == std::vector<int>{1} && (o.lags == "0")) return Measure::MutualInformation;
  if (s.include_present_y) fail(Errc::InvalidArgument, "transfer-entropy takes a single positive lag or 0 alone");
  return m;
}

struct KernelChoice {
  KernelSpec kernel = KernelSpec::linear();
  double gamma = kLinearGewekeGamma;
  ordered_json echo;
};

// Chooses (kernel, gamma) for a Geweke measure. Unset values are found by
// cross-validation on `design`, once per experiment.
inline KernelChoice resolve_kernel(const MeasureOptions& o, Measure m, const LagDesign& design, std::uint64_t seed) {
  KernelChoice c;
  if (m == Measure::GewekeLinear) {
    c.gamma = o.gamma.empty() ? kLinearGewekeGamma : parse_positive(o.gamma, "gamma");
    c.echo = {{"kind", "linear"}, {"gamma", c.gamma}, {"gamma_method", o.gamma.empty() ? "default" : "fixed"}};
    return c;
  }
  if (o.kernel != "gaussian" && o.kernel != "linear") fail(Errc::InvalidArgument, "kernel must be gaussian or linear");
  const KernelKind kind = o.kernel == "gaussian" ? KernelKind::Gaussian : KernelKind::Linear;
  const std::string gamma_text = o.gamma.empty() ? "cv" : o.gamma;
  std::string sigma_method = "unused";
  std::optional<double> sigma;
  if (kind == KernelKind::Gaussian) {
    if (o.sigma == "median") {
      sigma = median_heuristic(design.design);
      sigma_method = "median";
    } else if (o.sigma == "cv") {
      sigma_method = "cv";
    } else {
      sigma = parse_positive(o.sigma, "sigma");
      sigma_method = "fixed";
    }
  }
  std::optional<double> gamma;
  if (gamma_text != "cv") gamma = parse_positive(gamma_text, "gamma");

  const bool need_cv = !gamma || (kind == KernelKind::Gaussian && !sigma);
  if (need_cv) {
    CvGrid grid;
    grid.gammas = gamma ? std::vector<double>{*gamma} : parse_exponent_range(o.cv_gammas);
    grid.sigmas = sigma ? std::vector<double>{*sigma} : parse_exponent_range(o.cv_sigmas);
    grid.folds = o.cv_folds;
    grid.seed = derive_seed(seed, stable_hash("cv"));
    const CvReport rep = cross_validate(design, kind, grid);
    gamma = rep.best_gamma;
    if (kind == KernelKind::Gaussian) sigma = rep.best_sigma;
    c.echo["cv"] = {{"gammas", grid.gammas}, {"sigmas", kind == KernelKind::Gaussian ? grid.sigmas : std::vector<double>{}},
                    {"folds", grid.folds}, {"seed", grid.seed}, {"design_rows", design.rows()},
                    {"design_dims", design.dims()}};
  }
  c.kernel = kind == KernelKind::Gaussian ? KernelSpec::gaussian(*sigma) : KernelSpec::linear();
  c.gamma = *gamma;
  ordered_json e = {{"kind", to_string(kind)}};
  if (kind == KernelKind::Gaussian) {
    e["sigma"] = *sigma;
    e["sigma_method"] = sigma_method;
  }
  e["gamma"] = c.gamma;
  e["gamma_method"] = gamma_text == "cv" ? "cv" : "fixed";
  if (c.echo.contains("cv")) e["cv"] = c.echo["cv"];
  c.echo = e;
  return c;
}

inline CausalityQuery base_query(const MeasureOptions& o) {
  CausalityQuery q;
  q.measure = effective_measure(o);
  q.lags = resolved_lags(o);
  q.hsncic_reg = OperatorRegularizer{o.lambda};
  q.histogram.bins_per_dim = o.bins;
  return q;
}

inline LagDesign full_design_for(const CausalityQuery& q, const TimeSeriesPanel& panel) {
  const ModelVariant v = q.side.empty() ? ModelVariant::XAndY : ModelVariant::XYAndZ;
  return build_design(panel, q.target, q.cause, q.side, q.lags, v);
}

inline bool is_geweke(Measure m) { return m == Measure::GewekeLinear || m == Measure::GewekeKernel; }

inline ordered_json echo_query(const MeasureOptions& o, const CausalityQuery& q, const ordered_json& kernel) {
  ordered_json e = {{"measure", to_string(q.measure)}, {"measure_requested", o.measure}};
  if (!q.target.empty()) {
    e["target"] = q.target;
    e["cause"] = q.cause;
    e["side"] = q.side;
  }
  if (q.measure == Measure::MutualInformation) {
    e["lags"] = "0";
  } else {
    e["lags"] = q.lags.to_string();
    e["include_present_cause"] = q.lags.include_present_y;
    e["include_present_side"] = q.lags.include_present_z;
  }
  if (is_geweke(q.measure)) e["kernel"] = kernel;
  if (q.measure == Measure::Hsncic) e["lambda"] = q.hsncic_reg.lambda;
  if (q.measure == Measure::TransferEntropy || q.measure == Measure::MutualInformation) {
    e["bins"] = q.histogram.bins_per_dim;
    e["range_policy"] = "sample-min-max";
  }
  return e;
}

// ---------------------------------------------------------------------------
// Output helpers

class OutputSink {
 public:
  OutputSink(const std::string& path, std::ostream& fallback) : out_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) fail(Errc::InvalidArgument, "cannot open output file '" + path + "'");
      out_ = &file_;
    }
  }
  std::ostream& stream() { return *out_; }

 private:
  std::ofstream file_;
  std::ostream* out_;
};

// One "# key=value" line per config entry, flattened with dotted keys.
inline void write_comment_header(std::ostream& out, const ordered_json& config, const std::string& prefix = "") {
  for (auto it = config.begin(); it != config.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object())
      write_comment_header(out, *it, key);
    else
      out << "# " << key << "=" << (it->is_string() ? it->get<std::string>() : it->dump()) << '\n';
  }
}

inline std::ofstream open_in(const std::filesystem::path& dir, const std::string& name) {
  std::ofstream f(dir / name, std::ios::binary);
  if (!f) fail(Errc::InvalidArgument, "cannot write '" + (dir / name).string() + "'");
  return f;
}

// ---------------------------------------------------------------------------
// gen

struct GenOptions {
  std::string experiment;
  std::size_t length = 0;  // 0: generator default
  std::optional<std::uint64_t> seed;
  std::string output;
  double a = 0.2, b = 0.5, c = 0.8, d = 0.8, e = 0.7, noise_std = 1.0;
  std::size_t burn_in = 100;
};

inline TimeSeriesPanel generate(const GenOptions& o, std::uint64_t seed, ordered_json& echo) {
  echo = {{"schema_version", kSchemaVersion}, {"command", "gen"}, {"experiment", o.experiment}, {"seed", seed}};
  if (o.experiment == "linear-bench") {
    LinearBenchmarkSpec spec;
    spec.seed = seed;
    if (o.length) spec.length = o.length;
    echo["length"] = spec.length;
    return generate_linear_benchmark(spec);
  }
  if (o.experiment == "nonlinear-bench") {
    NonlinearBenchmarkSpec spec{o.length ? o.length : 500, o.a, o.b, o.c, o.d, o.e, o.noise_std, o.burn_in, seed};
    echo["length"] = spec.length;
    echo["a"] = spec.a;
    echo["b"] = spec.b;
    echo["c"] = spec.c;
    echo["d"] = spec.d;
    echo["e"] = spec.e;
    echo["noise_std"] = spec.noise_std;
    echo["burn_in"] = spec.burn_in;
    return generate_nonlinear_benchmark(spec);
  }
  fail(Errc::InvalidArgument, "unknown experiment '" + o.experiment + "' (linear-bench | nonlinear-bench)");
}

inline void write_panel_csv(std::ostream& out, const TimeSeriesPanel& p) {
  if (p.index()) out << "index,";
  out << join(p.names()) << '\n';
  for (std::size_t i = 0; i < p.length(); ++i) {
    if (p.index()) out << (*p.index())[i] << ',';
    for (std::size_t j = 0; j < p.width(); ++j) out << (j ? "," : "") << fmt(p.column(j)(static_cast<Eigen::Index>(i)));
    out << '\n';
  }
}

inline int cmd_gen(GenOptions& o, std::ostream& out) {
  const std::uint64_t seed = o.seed ? *o.seed : entropy_seed();
  ordered_json echo;
  const TimeSeriesPanel p = generate(o, seed, echo);
  OutputSink sink(o.output, out);
  write_comment_header(sink.stream(), echo);
  write_panel_csv(sink.stream(), p);
  return kOk;
}

// ---------------------------------------------------------------------------
// test

struct TestOptions {
  DataOptions data;
  MeasureOptions measure;
  PermutationOptions perm;
  OutputOptions output;
  std::string target;
  std::vector<std::string> cause;
  std::vector<std::string> side;
};

struct TestOutcome {
  ordered_json config;
  MeasureResult result;
};

inline TestOutcome run_test(TestOptions& o) {
  const std::uint64_t seed = o.perm.resolved_seed();
  const TimeSeriesPanel panel = load_input(o.data);
  CausalityQuery q = base_query(o.measure);
  q.target = o.target;
  q.cause = o.cause;
  q.side = o.side;
  q.validate();
  for (const auto& c : q.cause) panel.column_index(c);
  for (const auto& c : q.side) panel.column_index(c);
  ordered_json kernel;
  if (is_geweke(q.measure)) {
    const KernelChoice k = resolve_kernel(o.measure, q.measure, full_design_for(q, panel), seed);
    q.kernel = k.kernel;
    q.gamma = k.gamma;
    kernel = k.echo;
  }
  TestOutcome out;
  out.result = permutation_test(q, panel, PermutationPlan{o.perm.permutations, seed});
  ordered_json qe = echo_query(o.measure, q, kernel);
  if (q.measure == Measure::Hsncic) {
    const HsncicValue v = hsncic_causality(panel, q.target, q.cause, q.side, q.lags, q.hsncic_reg, q.hsncic_kernel);
    qe["sigma_xz"] = v.sigma_x;
    qe["sigma_yz"] = v.sigma_y;
    qe["sigma_z"] = v.sigma_z;
  }
  out.config = {{"schema_version", kSchemaVersion}, {"command", "test"}, {"seed", seed},
                {"permutations", o.perm.permutations}, {"data", o.data.echo()}, {"query", qe},
                {"rows", panel.length()}};
  return out;
}

inline int cmd_test(TestOptions& o, std::ostream& out) {
  o.output.check();
  const TestOutcome t = run_test(o);
  OutputSink sink(o.output.output, out);
  auto& s = sink.stream();
  if (o.output.format == "json") {
    ordered_json j = t.config;
    j["result"] = {{"observed", t.result.observed}, {"p_value", t.result.p_value},
                   {"surrogates", t.result.surrogates}};
    s << j.dump(2) << '\n';
  } else {
    write_comment_header(s, t.config);
    s << "field,index,value\n";
    s << "observed,," << fmt(t.result.observed) << '\n';
    s << "p_value,," << fmt(t.result.p_value) << '\n';
    for (std::size_t j = 0; j < t.result.surrogates.size(); ++j)
      s << "surrogate," << j << ',' << fmt(t.result.surrogates[j]) << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// matrix

struct MatrixOptions {
  DataOptions data;
  MeasureOptions measure;
  PermutationOptions perm;
  std::vector<std::string> columns;
  std::vector<std::string> measures;
  std::string output_dir;
  std::string prefix;
};

// CV for the whole matrix uses one design: the first column predicted from
// the lagged values of every selected column.
inline LagDesign matrix_cv_design(const TimeSeriesPanel& panel, const std::vector<std::string>& columns,
                                  const LagSpec& lags) {
  const std::vector<std::string> rest(columns.begin() + 1, columns.end());
  return build_design(panel, columns[0], rest, {}, lags, ModelVariant::XAndY);
}

struct MatrixOutcome {
  std::string measure;
  ordered_json config;
  PValueMatrix matrix;
};

inline MatrixOutcome run_matrix_measure(const TimeSeriesPanel& panel, const std::vector<std::string>& columns,
                                        const MeasureOptions& mo, std::size_t permutations, std::uint64_t seed,
                                        const ordered_json& data_echo) {
  CausalityQuery q = base_query(mo);
  ordered_json kernel;
  if (is_geweke(q.measure)) {
    const KernelChoice k = resolve_kernel(mo, q.measure, matrix_cv_design(panel, columns, q.lags), seed);
    q.kernel = k.kernel;
    q.gamma = k.gamma;
    kernel = k.echo;
  }
  const std::uint64_t mseed = derive_seed(seed, stable_hash(mo.measure));
  MatrixOutcome out;
  out.measure = to_string(q.measure);
  out.matrix = pvalue_matrix(panel, columns, q, PermutationPlan{permutations, mseed});
  out.config = {{"schema_version", kSchemaVersion}, {"command", "matrix"}, {"seed", seed},
                {"matrix_seed", mseed}, {"permutations", permutations}, {"data", data_echo},
                {"query", echo_query(mo, q, kernel)},
                {"convention", "entry (row i, column j) is the p-value for 'column j causes row i'"}};
  return out;
}

inline void write_matrix_csv(std::ostream& s, const MatrixOutcome& m) {
  write_comment_header(s, m.config);
  s << "target\\cause";
  for (const auto& n : m.matrix.names) s << ',' << n;
  s << '\n';
  for (std::size_t i = 0; i < m.matrix.names.size(); ++i) {
    s << m.matrix.names[i];
    for (std::size_t j = 0; j < m.matrix.names.size(); ++j)
      s << ',' << fmt(m.matrix.p_values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    s << '\n';
  }
}

inline ordered_json matrix_json(const MatrixOutcome& m) {
  ordered_json j = m.config;
  j["columns"] = m.matrix.names;
  auto grid = [&](const Eigen::MatrixXd& a) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      ordered_json r = ordered_json::array();
      for (Eigen::Index k = 0; k < a.cols(); ++k) r.push_back(json_number(a(i, k)));
      rows.push_back(r);
    }
    return rows;
  };
  j["p_values"] = grid(m.matrix.p_values);
  j["observed"] = grid(m.matrix.observed);
  return j;
}

inline PValueMatrix load_matrix_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::FileNotFound, path.string());
  const auto j = nlohmann::json::parse(in);
  PValueMatrix m;
  m.names = j.at("columns").get<std::vector<std::string>>();
  const auto k = static_cast<Eigen::Index>(m.names.size());
  auto read = [&](const nlohmann::json& rows) {
    Eigen::MatrixXd a(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index c = 0; c < k; ++c) {
        const auto& v = rows.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(c));
        a(i, c) = v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
      }
    return a;
  };
  m.p_values = read(j.at("p_values"));
  m.observed = read(j.at("observed"));
  return m;
}

inline void write_matrix_files(const std::filesystem::path& dir, const std::string& stem, const MatrixOutcome& m) {
  auto csv = open_in(dir, stem + ".csv");
  write_matrix_csv(csv, m);
  auto js = open_in(dir, stem + ".json");
  js << matrix_json(m).dump(2) << '\n';
}

inline std::vector<std::string> expand_measures(const std::vector<std::string>& given, const std::string& single) {
  if (given.empty()) return {single};
  if (given.size() == 1 && given[0] == "all") return {"geweke-linear", "geweke-kernel", "hsncic", "transfer-entropy"};
  return given;
}

inline int cmd_matrix(MatrixOptions& o, std::ostream& out) {
  const std::uint64_t seed = o.perm.resolved_seed();
  const TimeSeriesPanel panel = load_input(o.data);
  const std::vector<std::string> columns = o.columns.empty() ? panel.names() : o.columns;
  if (columns.size() < 2) fail(Errc::InvalidArgument, "matrix needs at least 2 columns");
  for (const auto& c : columns) panel.column_index(c);
  const std::filesystem::path dir(o.output_dir);
  std::filesystem::create_directories(dir);
  for (const auto& name : expand_measures(o.measures, o.measure.measure)) {
    MeasureOptions mo = o.measure;
    mo.measure = name;
    const MatrixOutcome m = run_matrix_measure(panel, columns, mo, o.perm.permutations, seed, o.data.echo());
    write_matrix_files(dir, o.prefix + name, m);
    out << (dir / (o.prefix + name + ".csv")).string() << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// scan

struct ScanOptions {
  DataOptions data;
  MeasureOptions measure;
  PermutationOptions perm;
  OutputOptions output;
  std::string target;
  std::string cause;
  std::vector<std::string> side;
  std::size_t window_length = 0;  // 0: whole panel
  std::size_t step = 25;
};

struct ScanRow {
  std::string window_start, window_end, dir;
  double value = 0.0, p_value = 0.0;
};

struct ScanOutcome {
  ordered_json config;
  std::vector<ScanRow> rows;
};

inline ScanOutcome run_scan(ScanOptions& o) {
  const std::uint64_t seed = o.perm.resolved_seed();
  const TimeSeriesPanel panel = load_input(o.data);
  const WindowPlan wplan{o.window_length ? o.window_length : panel.length(), o.step};
  const auto starts = window_starts(panel.length(), wplan);

  struct Direction {
    std::string label;
    CausalityQuery query;
  };
  std::vector<Direction> dirs;
  auto add_dir = [&](const std::string& effect, const std::string& cause, const std::vector<std::string>& side) {
    CausalityQuery q = base_query(o.measure);
    q.target = effect;
    q.cause = {cause};
    q.side = side;
    std::string label = cause + "->" + effect;
    if (!side.empty()) label += "|" + join(side);
    dirs.push_back({label, q});
  };
  add_dir(o.target, o.cause, {});
  add_dir(o.cause, o.target, {});
  if (!o.side.empty()) {
    add_dir(o.target, o.cause, o.side);
    add_dir(o.cause, o.target, o.side);
  }

  ScanOutcome out;
  ordered_json dir_echo = ordered_json::array();
  std::vector<std::vector<WindowResult>> results;
  for (std::size_t d = 0; d < dirs.size(); ++d) {
    auto& q = dirs[d].query;
    q.validate();
    ordered_json kernel;
    if (is_geweke(q.measure)) {
      const KernelChoice k = resolve_kernel(o.measure, q.measure, full_design_for(q, panel), derive_seed(seed, d));
      q.kernel = k.kernel;
      q.gamma = k.gamma;
      kernel = k.echo;
    }
    ordered_json e = echo_query(o.measure, q, kernel);
    e["dir"] = dirs[d].label;
    e["seed"] = derive_seed(seed, d);
    dir_echo.push_back(e);
    results.push_back(rolling_scan(q, panel, wplan, PermutationPlan{o.perm.permutations, derive_seed(seed, d)}));
  }
  auto label = [&](std::size_t row) {
    return panel.index() ? (*panel.index())[row] : std::to_string(row);
  };
  for (std::size_t k = 0; k < starts.size(); ++k)
    for (std::size_t d = 0; d < dirs.size(); ++d) {
      const auto& w = results[d][k];
      out.rows.push_back({label(w.start), label(w.start + w.length - 1), dirs[d].label, w.result.observed,
                          w.result.p_value});
    }
  out.config = {{"schema_version", kSchemaVersion}, {"command", "scan"}, {"seed", seed},
                {"permutations", o.perm.permutations}, {"window_length", wplan.window_length},
                {"step", wplan.step}, {"windows", starts.size()}, {"data", o.data.echo()},
                {"directions", dir_echo}};
  return out;
}

inline int cmd_scan(ScanOptions& o, std::ostream& out) {
  o.output.check();
  const ScanOutcome r = run_scan(o);
  OutputSink sink(o.output.output, out);
  auto& s = sink.stream();
  if (o.output.format == "csv") {
    ordered_json flat = r.config;
    ordered_json dirs = flat["directions"];
    flat.erase("directions");
    write_comment_header(s, flat);
    for (std::size_t d = 0; d < dirs.size(); ++d) write_comment_header(s, dirs[d], "direction" + std::to_string(d));
    s << "window_start,window_end,dir,value,p_value\n";
    for (const auto& row : r.rows)
      s << row.window_start << ',' << row.window_end << ',' << row.dir << ',' << fmt(row.value) << ','
        << fmt(row.p_value) << '\n';
  } else {
    ordered_json j = r.config;
    j["rows"] = ordered_json::array();
    for (const auto& row : r.rows)
      j["rows"].push_back({{"window_start", row.window_start}, {"window_end", row.window_end}, {"dir", row.dir},
                           {"value", row.value}, {"p_value", row.p_value}});
    s << j.dump(2) << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// reproduce

struct ReproduceOptions {
  std::string experiment;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  std::size_t permutations = 200;
  std::size_t length = 0;
  // linear-bench
  std::string single_lags = "0-4";
  std::vector<std::string> ranges{"1-10", "1-20", "1-5", "6-10", "11-15", "1-3", "4-6", "7-9"};
  std::vector<std::string> measures;
  // nonlinear-bench
  std::size_t realisations = 500;
  int te_lag = 2;
  MeasureOptions kernel;  // sigma / gamma / cv grid for the Gaussian Geweke cells
};

struct LagSet {
  std::string label;
  std::string lags;
  bool single = false;
};

inline std::vector<LagSet> linear_bench_lag_sets(const ReproduceOptions& o) {
  std::vector<LagSet> sets;
  if (o.single_lags != "none") {
    const LagSpec s = parse_lags(o.single_lags);
    if (s.include_present_y) sets.push_back({"lag0", "0", true});
    for (int l : s.lags)
      if (!(s.include_present_y && s.lags == std::vector<int>{1} && o.single_lags == "0"))
        sets.push_back({"lag" + std::to_string(l), std::to_string(l), true});
  }
  for (const auto& r : o.ranges)
    if (r != "none") sets.push_back({"lags" + r, r, false});
  return sets;
}

inline std::vector<std::string> linear_bench_measures(const LagSet& set, const std::vector<std::string>& wanted) {
  std::vector<std::string> all;
  if (set.lags == "0")
    all = {"geweke-linear", "geweke-kernel", "mutual-information"};
  else if (set.single)
    all = {"geweke-linear", "geweke-kernel", "hsncic", "transfer-entropy"};
  else
    all = {"geweke-linear", "geweke-kernel", "hsncic"};
  if (wanted.empty()) return all;
  std::vector<std::string> out;
  for (const auto& m : all)
    if (std::find(wanted.begin(), wanted.end(), m) != wanted.end()) out.push_back(m);
  return out;
}

inline int reproduce_linear(const ReproduceOptions& o, std::uint64_t seed, std::ostream& out) {
  LinearBenchmarkSpec spec;
  spec.seed = seed;
  if (o.length) spec.length = o.length;
  const TimeSeriesPanel panel = generate_linear_benchmark(spec);
  const std::filesystem::path dir(o.output_dir);
  std::filesystem::create_directories(dir);
  {
    auto f = open_in(dir, "panel.csv");
    write_comment_header(f, {{"schema_version", kSchemaVersion}, {"experiment", "linear-bench"}, {"seed", seed},
                             {"length", spec.length}});
    write_panel_csv(f, panel);
  }
  ordered_json files = ordered_json::array();
  const ordered_json data_echo = {{"generator", "linear-bench"}, {"seed", seed}, {"length", spec.length}};
  for (const auto& set : linear_bench_lag_sets(o)) {
    for (const auto& m : linear_bench_measures(set, o.measures)) {
      MeasureOptions mo = o.kernel;
      mo.measure = m;
      mo.lags = set.lags;
      const std::uint64_t set_seed = derive_seed(seed, stable_hash(set.label));
      const MatrixOutcome r = run_matrix_measure(panel, panel.names(), mo, o.permutations, set_seed, data_echo);
      const std::string stem = set.label + "_" + m;
      write_matrix_files(dir, stem, r);
      files.push_back(stem);
      out << (dir / (stem + ".csv")).string() << '\n';
    }
  }
  auto f = open_in(dir, "report.json");
  f << ordered_json{{"schema_version", kSchemaVersion}, {"experiment", "linear-bench"}, {"seed", seed},
                    {"length", spec.length}, {"permutations", o.permutations}, {"matrices", files}}
           .dump(2)
    << '\n';
  return kOk;
}

struct NonlinearRecord {
  std::size_t realisation = 0;
  std::string measure;
  std::string conditioning;  // "none" or "y"
  double value = 0.0;
  double p_value = std::numeric_limits<double>::quiet_NaN();
};

struct NonlinearSettings {
  std::size_t realisations = 500;
  std::size_t length = 500;
  std::size_t permutations = 200;
  int te_lag = 2;
  LagSpec lags = LagSpec::range(1, 2);
  std::vector<std::string> measures{"geweke-linear", "geweke-kernel", "hsncic", "transfer-entropy"};
};

// Gaussian-kernel settings are chosen once, on realisation 0's conditional
// design (x, y, z lags predicting z).
inline KernelChoice nonlinear_kernel(const MeasureOptions& mo, const NonlinearSettings& s, std::uint64_t seed) {
  NonlinearBenchmarkSpec spec;
  spec.length = s.length;
  spec.seed = derive_seed(seed, 0);
  const TimeSeriesPanel p = generate_nonlinear_benchmark(spec);
  const LagDesign d = build_design(p, "z", {"x"}, {}, s.lags, ModelVariant::XAndY);
  return resolve_kernel(mo, Measure::GewekeKernel, d, seed);
}

inline std::vector<NonlinearRecord> nonlinear_realisations(const NonlinearSettings& s, const KernelChoice& gauss,
                                                           std::uint64_t seed) {
  auto wants = [&](const std::string& m) { return std::find(s.measures.begin(), s.measures.end(), m) != s.measures.end(); };
  std::vector<std::vector<NonlinearRecord>> per(s.realisations);
  parallel_for(s.realisations, [&](std::size_t r) {
    NonlinearBenchmarkSpec spec;
    spec.length = s.length;
    spec.seed = derive_seed(seed, r);
    const TimeSeriesPanel p = generate_nonlinear_benchmark(spec);
    auto& rec = per[r];
    for (const auto& [name, kernel, gamma] :
         {std::tuple{std::string("geweke-linear"), KernelSpec::linear(), kLinearGewekeGamma},
          std::tuple{std::string("geweke-kernel"), gauss.kernel, gauss.gamma}}) {
      if (!wants(name)) continue;
      rec.push_back({r, name, "none", geweke_causality(p, "z", {"x"}, {}, s.lags, kernel, gamma).value});
      rec.push_back({r, name, "y", geweke_causality(p, "z", {"x"}, {"y"}, s.lags, kernel, gamma).value});
    }
    if (wants("hsncic")) {
      rec.push_back({r, "hsncic", "none", hsncic_causality(p, "z", {"x"}, {}, s.lags).value});
      rec.push_back({r, "hsncic", "y", hsncic_causality(p, "z", {"x"}, {"y"}, s.lags).value});
    }
    if (wants("transfer-entropy")) {
      CausalityQuery q;
      q.target = "z";
      q.cause = {"x"};
      q.measure = Measure::TransferEntropy;
      q.lags = LagSpec::single(s.te_lag);
      const MeasureResult m = permutation_test(q, p, {s.permutations, derive_seed(spec.seed, 1)});
      rec.push_back({r, "transfer-entropy", "none", m.observed, m.p_value});
    }
  });
  std::vector<NonlinearRecord> all;
  for (auto& v : per) all.insert(all.end(), v.begin(), v.end());
  return all;
}

inline int reproduce_nonlinear(const ReproduceOptions& o, std::uint64_t seed, std::ostream& out) {
  NonlinearSettings s;
  s.realisations = o.realisations;
  if (o.length) s.length = o.length;
  s.permutations = o.permutations;
  s.te_lag = o.te_lag;
  if (!o.measures.empty()) s.measures = o.measures;
  for (const auto& m : s.measures)
    if (m != "geweke-linear" && m != "geweke-kernel" && m != "hsncic" && m != "transfer-entropy")
      fail(Errc::InvalidArgument, "nonlinear-bench does not run measure '" + m + "'");
  const bool gaussian = std::find(s.measures.begin(), s.measures.end(), "geweke-kernel") != s.measures.end();
  const KernelChoice gauss = gaussian ? nonlinear_kernel(o.kernel, s, seed) : KernelChoice{};
  const auto records = nonlinear_realisations(s, gauss, seed);

  ordered_json config = {{"schema_version", kSchemaVersion}, {"experiment", "nonlinear-bench"}, {"seed", seed},
                         {"realisations", s.realisations}, {"length", s.length}, {"lags", s.lags.to_string()},
                         {"te_lag", s.te_lag}, {"te_bins", HistogramSpec{}.bins_per_dim},
                         {"permutations", s.permutations}, {"linear_gamma", kLinearGewekeGamma},
                         {"hsncic_lambda", kDefaultHsncicLambda}};
  if (gaussian) config["gaussian"] = gauss.echo;
  const std::filesystem::path dir(o.output_dir);
  std::filesystem::create_directories(dir);
  auto f = open_in(dir, "realisations.csv");
  write_comment_header(f, config);
  f << "realisation,measure,conditioning,value,p_value\n";
  for (const auto& r : records)
    f << r.realisation << ',' << r.measure << ',' << r.conditioning << ',' << fmt(r.value) << ',' << fmt(r.p_value)
      << '\n';
  auto rep = open_in(dir, "report.json");
  rep << config.dump(2) << '\n';
  out << (dir / "realisations.csv").string() << '\n';
  return kOk;
}

inline int cmd_reproduce(ReproduceOptions& o, std::ostream& out) {
  if (!o.seed) fail(Errc::InvalidArgument, "reproduce requires --seed");
  if (o.experiment == "linear-bench") return reproduce_linear(o, *o.seed, out);
  if (o.experiment == "nonlinear-bench") return reproduce_nonlinear(o, *o.seed, out);
  fail(Errc::InvalidArgument, "unknown experiment '" + o.experiment + "' (linear-bench | nonlinear-bench)");
}

// ---------------------------------------------------------------------------
// entry point

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"causal-kit: statistical causality between time series"};
  app.name("causal-kit");
  app.set_config("--config", "", "INI file; keys go in a section named after the command")->expected(1);
  app.require_subcommand(1);
  app.fallthrough();

  GenOptions gen;
  auto* g = app.add_subcommand("gen", "Generate a benchmark panel as CSV");
  g->add_option("experiment", gen.experiment, "linear-bench | nonlinear-bench")->required();
  g->add_option("--length", gen.length, "Sample count");
  g->add_option("--seed", gen.seed, "Seed (default: from entropy)");
  g->add_option("-o,--output", gen.output, "Output file (default: stdout)");
  g->add_option("--a", gen.a)->capture_default_str();
  g->add_option("--b", gen.b)->capture_default_str();
  g->add_option("--c", gen.c)->capture_default_str();
  g->add_option("--d", gen.d)->capture_default_str();
  g->add_option("--e", gen.e)->capture_default_str();
  g->add_option("--noise-std", gen.noise_std)->capture_default_str();
  g->add_option("--burn-in", gen.burn_in)->capture_default_str();

  TestOptions test;
  auto* t = app.add_subcommand("test", "One permutation test");
  test.data.add(t);
  test.measure.add(t);
  test.perm.add(t);
  test.output.add(t, "json");
  t->add_option("-t,--target", test.target, "Effect column")->required();
  t->add_option("-c,--cause", test.cause, "Cause column(s)")->required()->delimiter(',');
  t->add_option("-s,--side", test.side, "Side-information column(s)")->delimiter(',');

  MatrixOptions matrix;
  auto* m = app.add_subcommand("matrix", "P-value matrix over column pairs");
  matrix.data.add(m);
  matrix.measure.add(m);
  matrix.perm.add(m);
  m->add_option("--columns", matrix.columns, "Columns (default: all)")->delimiter(',');
  m->add_option("--measures", matrix.measures, "Several measures, or 'all'")->delimiter(',');
  m->add_option("--output-dir", matrix.output_dir, "Directory for <measure>.csv and .json")->required();
  m->add_option("--prefix", matrix.prefix, "File name prefix");

  ScanOptions scan;
  auto* s = app.add_subcommand("scan", "Rolling-window p-values in both directions");
  scan.data.add(s);
  scan.measure.add(s);
  scan.perm.add(s);
  scan.output.add(s, "csv");
  s->add_option("-t,--target", scan.target, "First series")->required();
  s->add_option("-c,--cause", scan.cause, "Second series")->required();
  s->add_option("-s,--side", scan.side, "Side-information column(s)")->delimiter(',');
  s->add_option("-w,--window", scan.window_length, "Window length (default: whole panel)");
  s->add_option("--step", scan.step, "Window step")->capture_default_str();

  ReproduceOptions repro;
  auto* r = app.add_subcommand("reproduce", "Run a benchmark experiment end to end");
  r->add_option("experiment", repro.experiment, "linear-bench | nonlinear-bench")->required();
  r->add_option("--seed", repro.seed, "Master seed")->required();
  r->add_option("--output-dir", repro.output_dir, "Report directory")->required();
  r->add_option("-n,--permutations", repro.permutations)->capture_default_str();
  r->add_option("--length", repro.length, "Series length (default: experiment default)");
  r->add_option("--single-lags", repro.single_lags, "linear-bench single lags, or 'none'")->capture_default_str();
  r->add_option("--ranges", repro.ranges, "linear-bench lag ranges, or 'none'")->delimiter(',');
  r->add_option("--measures", repro.measures, "Subset of measures")->delimiter(',');
  r->add_option("--realisations", repro.realisations, "nonlinear-bench realisations")->capture_default_str();
  r->add_option("--te-lag", repro.te_lag, "nonlinear-bench transfer-entropy lag")->capture_default_str();
  r->add_option("--sigma", repro.kernel.sigma, "Gaussian width: number | median | cv")->capture_default_str();
  r->add_option("--gamma", repro.kernel.gamma, "Ridge regulariser: number | cv");
  r->add_option("--cv-gammas", repro.kernel.cv_gammas)->capture_default_str();
  r->add_option("--cv-sigmas", repro.kernel.cv_sigmas)->capture_default_str();
  r->add_option("--cv-folds", repro.kernel.cv_folds)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*g) return cmd_gen(gen, out);
    if (*t) return cmd_test(test, out);
    if (*m) return cmd_matrix(matrix, out);
    if (*s) return cmd_scan(scan, out);
    if (*r) return cmd_reproduce(repro, out);
  } catch (const Error& e) {
    err << "causal-kit: " << e.what() << '\n';
    return exit_code_for(e.category());
  } catch (const nlohmann::json::exception& e) {
    err << "causal-kit: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "causal-kit: internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kConfigError;
}

}  // namespace causalkit::cli
