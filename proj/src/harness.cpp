#include "bcn/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <Eigen/Cholesky>

#include <json.hpp>

#include "bcn/baselines.hpp"
#include "bcn/rng.hpp"

namespace bcn {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

bool is_blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace

Dataset parse_libsvm(std::istream& in, int min_features) {
  std::vector<double> labels;
  std::vector<std::vector<std::pair<int, double>>> rows;
  int max_index = 0;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (is_blank(line)) continue;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) continue;
    std::size_t used = 0;
    double label;
    try {
      label = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size()) {
      throw std::invalid_argument("libsvm line " + std::to_string(line_no) +
                                  ": bad label '" + token + "'");
    }
    std::vector<std::pair<int, double>> row;
    while (ls >> token) {
      const auto colon = token.find(':');
      if (colon == std::string::npos) {
        throw std::invalid_argument("libsvm line " + std::to_string(line_no) +
                                    ": expected index:value, got '" + token +
                                    "'");
      }
      int index = 0;
      double value = 0.0;
      try {
        std::size_t u1 = 0, u2 = 0;
        index = std::stoi(token.substr(0, colon), &u1);
        value = std::stod(token.substr(colon + 1), &u2);
        if (u1 != colon || u2 != token.size() - colon - 1) {
          throw std::invalid_argument("trailing characters");
        }
      } catch (const std::exception&) {
        throw std::invalid_argument("libsvm line " + std::to_string(line_no) +
                                    ": non-numeric token '" + token + "'");
      }
      if (index < 1) {
        throw std::invalid_argument("libsvm line " + std::to_string(line_no) +
                                    ": indices are 1-based");
      }
      max_index = std::max(max_index, index);
      row.emplace_back(index - 1, value);
    }
    labels.push_back(label);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw std::invalid_argument("libsvm: no data rows");
  }
  Dataset ds;
  const int d = std::max(max_index, min_features);
  ds.B = Matrix::Zero(static_cast<int>(rows.size()), d);
  ds.labels.resize(static_cast<int>(labels.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ds.labels[static_cast<int>(i)] = labels[i];
    for (const auto& [j, v] : rows[i]) ds.B(static_cast<int>(i), j) = v;
  }
  return ds;
}

Dataset load_libsvm(const std::string& path, int min_features) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open dataset " + path);
  Dataset ds = parse_libsvm(in, min_features);
  ds.name = fs::path(path).filename().string();
  return ds;
}

void write_libsvm(const Dataset& dataset, std::ostream& out) {
  out << std::setprecision(17);
  for (int i = 0; i < dataset.m(); ++i) {
    out << dataset.labels[i];
    for (int j = 0; j < dataset.d(); ++j) {
      if (dataset.B(i, j) != 0.0) out << ' ' << j + 1 << ':' << dataset.B(i, j);
    }
    out << '\n';
  }
}

CompositeProblem gen_synthetic_cubic(int N, std::uint64_t seed) {
  if (N < 1) throw std::invalid_argument("gen_synthetic_cubic: N >= 1");
  Rng rng(seed);
  Matrix U(10, N);
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < N; ++j) U(i, j) = rng.normal();
  }
  Vector xi(10);
  for (int i = 0; i < 10; ++i) xi[i] = rng.normal();
  Vector c(N);
  for (int j = 0; j < N; ++j) c[j] = 1.0 + std::abs(rng.normal());

  const Matrix A = U.transpose() * U;
  const Vector b = -U.transpose() * xi;

  CompositeProblem problem;
  problem.partition = BlockPartition::uniform(N);
  // 0.5 ||A x - b||^2 expanded around x = 0.
  problem.g = SmoothTerm::quadratic(A * A, -A * b, 0.5 * b.squaredNorm());
  problem.phi.resize(static_cast<std::size_t>(N));
  for (int j = 0; j < N; ++j) {
    // (c_j / 6)|x_j|^3 has Hessian-Lipschitz constant c_j.
    problem.phi[static_cast<std::size_t>(j)] =
        BlockLoss::scalar(ScalarLoss::cubed_abs(0.5 * c[j]));
  }
  return problem;
}

Dataset gen_synthetic_poisson(int m, int d, std::uint64_t seed) {
  if (m < 1 || d < 1) {
    throw std::invalid_argument("gen_synthetic_poisson: need m, d >= 1");
  }
  Rng rng(seed);
  Dataset ds;
  ds.name = "poisson_synthetic";
  ds.B.resize(m, d);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < d; ++j) ds.B(i, j) = rng.normal();
  }
  ds.labels.resize(m);
  for (int i = 0; i < m; ++i) ds.labels[i] = rng.poisson(1.0);
  return ds;
}

ErmProblem erm_logistic(const Dataset& dataset, double lambda) {
  ErmProblem erm;
  erm.B = dataset.B;
  // Fold the class labels into the rows; the loss itself is label-free.
  for (int i = 0; i < dataset.m(); ++i) {
    const double y = dataset.labels[i];
    if (y != 1.0 && y != -1.0) {
      throw std::invalid_argument("erm_logistic: labels must be +-1");
    }
    erm.B.row(i) *= -y;
  }
  erm.losses.assign(static_cast<std::size_t>(dataset.m()),
                    ScalarLoss::logistic());
  erm.lambda = lambda > 0.0 ? lambda : 1.0 / dataset.m();
  return erm;
}

ErmProblem erm_poisson(const Dataset& dataset, double lambda) {
  ErmProblem erm;
  erm.B = dataset.B;
  erm.losses.reserve(static_cast<std::size_t>(dataset.m()));
  for (int i = 0; i < dataset.m(); ++i) {
    const double y = dataset.labels[i];
    if (y < 0.0 || y != std::floor(y)) {
      throw std::invalid_argument(
          "erm_poisson: counts must be nonnegative integers");
    }
    erm.losses.push_back(ScalarLoss::poisson(static_cast<int>(y)));
  }
  erm.lambda = lambda > 0.0 ? lambda : 1.0 / dataset.m();
  return erm;
}

Vector reference_primal_optimum(const ErmProblem& erm, double grad_tol,
                                int max_iterations) {
  const int m = erm.m();
  const int d = erm.d();
  Vector w = Vector::Zero(d);
  double value = erm.primal(w);
  for (int iter = 0; iter < max_iterations; ++iter) {
    const Vector margins = erm.B * w;
    Vector slopes(m), curvatures(m);
    for (int i = 0; i < m; ++i) {
      const Deriv012 der =
          eval012(erm.losses[static_cast<std::size_t>(i)], margins[i]);
      slopes[i] = der.d1;
      curvatures[i] = der.d2;
    }
    const Vector grad = erm.B.transpose() * slopes / m + erm.lambda * w;
    if (grad.norm() <= grad_tol) break;
    Matrix hess =
        erm.B.transpose() * curvatures.asDiagonal() * erm.B / m;
    hess.diagonal().array() += erm.lambda;
    const Vector dir = Eigen::LDLT<Matrix>(hess).solve(-grad);
    double t = 1.0;
    const double slope = grad.dot(dir);
    for (int trial = 0; trial < 60; ++trial) {
      const Vector w_try = w + t * dir;
      const double value_try = erm.primal(w_try);
      if (value_try <= value + 1e-4 * t * slope) {
        w = w_try;
        value = value_try;
        break;
      }
      t *= 0.5;
    }
  }
  return w;
}

void ExperimentConfig::validate() const {
  static const std::vector<std::string> tasks = {
      "synthetic_cubic", "logistic_constrained", "poisson_dual",
      "poisson_synthetic"};
  if (std::find(tasks.begin(), tasks.end(), task) == tasks.end()) {
    throw std::invalid_argument("config: unknown task '" + task + "'");
  }
  if (methods.empty()) {
    throw std::invalid_argument("config: methods list is empty");
  }
  static const std::vector<std::string> known = {"rbcn", "sdcna", "bcgd",
                                                 "sdca", "sdna"};
  for (const auto& method : methods) {
    if (std::find(known.begin(), known.end(), method) == known.end()) {
      throw std::invalid_argument("config: unknown method '" + method + "'");
    }
  }
  if (taus.empty()) {
    throw std::invalid_argument("config: tau list is empty");
  }
  const bool has_path = !data_path.empty();
  const bool has_gen = gen_n > 0 || (gen_m > 0 && gen_d > 0);
  if (has_path == has_gen) {
    throw std::invalid_argument(
        "config: exactly one of data path and generator dimensions");
  }
  if (!(target_accuracy > 0.0)) {
    throw std::invalid_argument("config: target_accuracy must be > 0");
  }
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& err) {
    throw std::invalid_argument("config " + path + ": " + err.what());
  }
  ExperimentConfig cfg;
  cfg.task = j.at("task").get<std::string>();
  if (j.contains("methods")) {
    cfg.methods = j.at("methods").get<std::vector<std::string>>();
  } else if (j.contains("method")) {
    cfg.methods = {j.at("method").get<std::string>()};
  }
  if (j.contains("data")) {
    const json& data = j.at("data");
    if (data.contains("path")) cfg.data_path = data.at("path").get<std::string>();
    cfg.gen_n = data.value("n", 0);
    cfg.gen_m = data.value("m", 0);
    cfg.gen_d = data.value("d", 0);
    cfg.gen_seed = data.value("seed", std::uint64_t{1});
  }
  cfg.taus = j.value("taus", std::vector<int>{});
  cfg.target_accuracy = j.value("target_accuracy", 1e-6);
  cfg.max_iterations = j.value("max_iterations", long{100000});
  cfg.max_epochs = j.value("max_epochs", long{200});
  cfg.seed = j.value("seed", std::uint64_t{1});
  cfg.output_dir = j.value("output_dir", std::string("out"));
  return cfg;
}

namespace {

std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_svg_plot(const std::string& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<PlotSeries>& series, bool log_y) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  const double width = 760, height = 500;
  const double ml = 75, mr = 180, mt = 45, mb = 55;

  double x_min = kInf, x_max = -kInf, y_min = kInf, y_max = -kInf;
  const auto ty = [&](double y) {
    return log_y ? std::log10(std::max(y, 1e-16)) : y;
  };
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(ty(s.y[i]))) continue;
      x_min = std::min(x_min, s.x[i]);
      x_max = std::max(x_max, s.x[i]);
      y_min = std::min(y_min, ty(s.y[i]));
      y_max = std::max(y_max, ty(s.y[i]));
    }
  }
  if (!(x_min < x_max)) x_max = x_min + 1.0;
  if (!(y_min < y_max)) y_max = y_min + 1.0;

  const auto px = [&](double x) {
    return ml + (x - x_min) / (x_max - x_min) * (width - ml - mr);
  };
  const auto py = [&](double y) {
    return height - mb - (ty(y) - y_min) / (y_max - y_min) * (height - mt - mb);
  };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open plot file " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
      << "' height='" << height << "'>\n"
      << "<rect width='100%' height='100%' fill='white'/>\n"
      << "<text x='" << width / 2 << "' y='24' text-anchor='middle' "
      << "font-size='16' font-family='sans-serif'>" << svg_escape(title)
      << "</text>\n";

  // axes
  out << "<line x1='" << ml << "' y1='" << height - mb << "' x2='"
      << width - mr << "' y2='" << height - mb
      << "' stroke='black' stroke-width='1'/>\n"
      << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='"
      << height - mb << "' stroke='black' stroke-width='1'/>\n";
  out << "<text x='" << (ml + width - mr) / 2 << "' y='" << height - 12
      << "' text-anchor='middle' font-size='13' font-family='sans-serif'>"
      << svg_escape(x_label) << "</text>\n";
  out << "<text x='18' y='" << (mt + height - mb) / 2
      << "' text-anchor='middle' font-size='13' font-family='sans-serif' "
      << "transform='rotate(-90 18 " << (mt + height - mb) / 2 << ")'>"
      << svg_escape(y_label) << "</text>\n";

  const int n_ticks = 5;
  for (int t = 0; t <= n_ticks; ++t) {
    const double fx = x_min + (x_max - x_min) * t / n_ticks;
    out << "<line x1='" << px(fx) << "' y1='" << height - mb << "' x2='"
        << px(fx) << "' y2='" << height - mb + 5 << "' stroke='black'/>\n"
        << "<text x='" << px(fx) << "' y='" << height - mb + 18
        << "' text-anchor='middle' font-size='11' font-family='sans-serif'>"
        << std::setprecision(4) << fx << "</text>\n";
    const double fy = y_min + (y_max - y_min) * t / n_ticks;
    out << "<line x1='" << ml - 5 << "' y1='"
        << height - mb - (fy - y_min) / (y_max - y_min) * (height - mt - mb)
        << "' x2='" << ml << "' y2='"
        << height - mb - (fy - y_min) / (y_max - y_min) * (height - mt - mb)
        << "' stroke='black'/>\n"
        << "<text x='" << ml - 8 << "' y='"
        << height - mb - (fy - y_min) / (y_max - y_min) * (height - mt - mb) + 4
        << "' text-anchor='end' font-size='11' font-family='sans-serif'>";
    if (log_y) {
      out << "1e" << std::setprecision(3) << fy;
    } else {
      out << std::setprecision(4) << fy;
    }
    out << "</text>\n";
  }

  int color = 0;
  double legend_y = mt + 10;
  for (const auto& s : series) {
    const char* stroke = palette[color % 8];
    out << "<polyline fill='none' stroke='" << stroke
        << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(ty(s.y[i]))) continue;
      out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    }
    out << "'/>\n";
    out << "<line x1='" << width - mr + 12 << "' y1='" << legend_y << "' x2='"
        << width - mr + 36 << "' y2='" << legend_y << "' stroke='" << stroke
        << "' stroke-width='2'/>\n"
        << "<text x='" << width - mr + 42 << "' y='" << legend_y + 4
        << "' font-size='12' font-family='sans-serif'>" << svg_escape(s.label)
        << "</text>\n";
    legend_y += 18;
    ++color;
  }
  out << "</svg>\n";
}

namespace {

struct PreparedRun {
  RunSummary summary;
  PlotSeries residual;
};

// Epoch coordinate for primal traces: data passes k tau / n.
PreparedRun summarize_primal(const std::string& method, int tau, int n_blocks,
                             const RunTrace& trace, double f_star,
                             double target, const std::string& trace_file) {
  PreparedRun out;
  RunSummary& s = out.summary;
  s.method = method;
  s.tau = tau;
  s.status = trace.status;
  s.iterations = trace.iterations;
  s.trace_file = trace_file;
  s.final_metric = trace.f_final - f_star;
  s.elapsed_ms = trace.rows.back().elapsed_ms;
  s.ok = trace.status == "target_reached" || s.final_metric <= target;
  out.residual.label = method + " tau=" + std::to_string(tau);
  for (const TraceRow& row : trace.rows) {
    out.residual.x.push_back(double(row.k) * tau / n_blocks);
    out.residual.y.push_back(std::max(row.objective - f_star, 1e-16));
    if (s.epochs_to_target < 0.0 && row.objective - f_star <= target) {
      s.epochs_to_target = double(row.k) * tau / n_blocks;
      s.elapsed_ms = row.elapsed_ms;
    }
  }
  return out;
}

PreparedRun summarize_dual(const std::string& method, int tau,
                           const DualTrace& trace, double target,
                           const std::string& trace_file) {
  PreparedRun out;
  RunSummary& s = out.summary;
  s.method = method;
  s.tau = tau;
  s.status = trace.status;
  s.iterations = trace.iterations;
  s.trace_file = trace_file;
  s.final_metric = trace.gap_final;
  s.elapsed_ms = trace.rows.back().elapsed_ms;
  s.ok = trace.status == "target_reached" || s.final_metric <= target;
  out.residual.label = method + " tau=" + std::to_string(tau);
  for (const DualTraceRow& row : trace.rows) {
    out.residual.x.push_back(row.epoch);
    out.residual.y.push_back(std::max(row.gap, 1e-16));
    if (s.epochs_to_target < 0.0 && row.gap <= target) {
      s.epochs_to_target = row.epoch;
      s.elapsed_ms = row.elapsed_ms;
    }
  }
  return out;
}

std::uint64_t run_key(const std::string& method, int tau) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : method) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  return h ^ static_cast<std::uint64_t>(tau);
}

}  // namespace

int run_experiment(const ExperimentConfig& config,
                   std::vector<RunSummary>* summaries_out) {
  config.validate();
  fs::create_directories(config.output_dir);

  std::vector<RunSummary> summaries;
  std::vector<PlotSeries> residual_series;
  std::vector<PlotSeries> time_series;

  const bool dual_task =
      config.task == "poisson_dual" || config.task == "poisson_synthetic";

  // Problem assembly.
  CompositeProblem cubic_problem;
  ErmProblem erm;
  int dimension = 0;
  if (config.task == "synthetic_cubic") {
    if (config.gen_n < 1) {
      throw std::invalid_argument("config: synthetic_cubic needs data.n");
    }
    cubic_problem = gen_synthetic_cubic(config.gen_n, config.gen_seed);
    dimension = config.gen_n;
  } else {
    Dataset ds;
    if (!config.data_path.empty()) {
      ds = load_libsvm(config.data_path);
    } else if (config.task == "poisson_synthetic" ||
               config.task == "poisson_dual") {
      ds = gen_synthetic_poisson(config.gen_m, config.gen_d, config.gen_seed);
    } else {
      // Logistic stand-in: normal design and random class labels.
      ds = gen_synthetic_poisson(config.gen_m, config.gen_d, config.gen_seed);
      Rng rng = Rng(config.gen_seed).split(17);
      for (int i = 0; i < ds.m(); ++i) {
        ds.labels[i] = rng.below(2) == 0 ? -1.0 : 1.0;
      }
      ds.name = "logistic_standin";
    }
    erm = dual_task ? erm_poisson(ds) : erm_logistic(ds);
    dimension = dual_task ? erm.m() : erm.d();
  }
  for (int tau : config.taus) {
    if (tau < 1 || tau > dimension) {
      throw std::invalid_argument("config: tau must be in [1, dimension]");
    }
  }

  // Reference optima for residual reporting.
  double f_star = 0.0;
  if (config.task == "synthetic_cubic") {
    RbcnConfig ref;
    ref.sampling = SamplingSpec::full(config.seed);
    ref.h_strategy = HStrategy::constant_blockwise();
    ref.max_iterations = 3000;
    ref.seed = config.seed;
    f_star = rbcn_run(cubic_problem, Vector::Zero(dimension), ref).f_final;
  } else if (!dual_task) {
    f_star = erm.primal(reference_primal_optimum(erm));
  }

  // BCGD view of the logistic primal: general smooth term with the standard
  // curvature bounds lambda I <= hess P <= lambda I + B'B / (4m).
  CompositeProblem bcgd_problem;
  if (config.task == "logistic_constrained") {
    const int d = erm.d();
    const ErmProblem erm_copy = erm;
    bcgd_problem.partition = BlockPartition::uniform(d);
    bcgd_problem.g = SmoothTerm::general(
        [erm_copy](const Vector& w) { return erm_copy.primal(w); },
        [erm_copy](const Vector& w) { return erm_copy.primal_gradient(w); },
        erm.lambda * Matrix::Identity(d, d),
        erm.lambda * Matrix::Identity(d, d) +
            erm.B.transpose() * erm.B / (4.0 * erm.m()));
  } else if (config.task == "synthetic_cubic") {
    bcgd_problem = cubic_problem;
  }

  for (const std::string& method : config.methods) {
    for (int tau : config.taus) {
      const std::string trace_file =
          method + "_tau" + std::to_string(tau) + ".csv";
      const std::string trace_path =
          (fs::path(config.output_dir) / trace_file).string();
      const std::uint64_t seed = Rng(config.seed).split(run_key(method, tau))
                                     .next_u64();
      PreparedRun run;
      try {
        if (method == "rbcn" && config.task == "synthetic_cubic") {
          RbcnConfig rc;
          rc.sampling = SamplingSpec::tau_nice(tau, config.seed);
          rc.h_strategy = HStrategy::constant_blockwise();
          rc.max_iterations = config.max_iterations;
          rc.target_accuracy = config.target_accuracy;
          rc.f_star_ref = f_star;
          rc.seed = seed;
          rc.record_every = std::max(1L, long(dimension / tau));
          const RunTrace trace =
              rbcn_run(cubic_problem, Vector::Zero(dimension), rc);
          trace.write_csv_file(trace_path);
          run = summarize_primal(method, tau, dimension, trace, f_star,
                                 config.target_accuracy, trace_file);
        } else if (method == "rbcn" &&
                   config.task == "logistic_constrained") {
          RbcnConfig rc;
          rc.sampling = SamplingSpec::tau_nice(tau, config.seed);
          rc.h_strategy = HStrategy::constant_global();
          rc.max_iterations = config.max_iterations;
          rc.target_accuracy = config.target_accuracy;
          rc.f_star_ref = f_star;
          rc.seed = seed;
          const ConstrainedRunResult res =
              constrained_rbcn_run(erm, Vector::Zero(erm.d()), rc);
          res.trace.write_csv_file(trace_path);
          run = summarize_primal(method, tau, erm.d(), res.trace, f_star,
                                 config.target_accuracy, trace_file);
        } else if (method == "bcgd" && !dual_task) {
          BaselineConfig bc;
          bc.method = BaselineConfig::Method::bcgd;
          bc.sampling = SamplingSpec::tau_nice(tau, config.seed);
          bc.max_iterations = config.max_iterations;
          bc.target_accuracy = config.target_accuracy;
          bc.f_star_ref = f_star;
          bc.seed = seed;
          bc.record_every = std::max(1L, long(dimension / tau));
          const RunTrace trace =
              bcgd_run(bcgd_problem, Vector::Zero(dimension), bc);
          trace.write_csv_file(trace_path);
          run = summarize_primal(method, tau, dimension, trace, f_star,
                                 config.target_accuracy, trace_file);
        } else if (method == "sdcna" && dual_task) {
          DualConfig dc;
          dc.sampling = SamplingSpec::tau_nice(tau, config.seed);
          dc.max_epochs = config.max_epochs;
          dc.target_gap = config.target_accuracy;
          dc.seed = seed;
          const DualRunResult res = sdcna_run(erm, dc);
          res.trace.write_csv_file(trace_path);
          run = summarize_dual(method, tau, res.trace,
                               config.target_accuracy, trace_file);
        } else if ((method == "sdca" || method == "sdna") && dual_task) {
          BaselineConfig bc;
          bc.method = method == "sdca" ? BaselineConfig::Method::sdca
                                       : BaselineConfig::Method::sdna;
          bc.sampling = SamplingSpec::tau_nice(tau, config.seed);
          bc.max_epochs = config.max_epochs;
          bc.target_gap = config.target_accuracy;
          bc.seed = seed;
          bc.record_every =
              method == "sdca" ? std::max(1L, long(erm.m() / 4)) : 1L;
          const DualRunResult res = method == "sdca" ? sdca_run(erm, bc)
                                                     : sdna_run(erm, bc);
          res.trace.write_csv_file(trace_path);
          run = summarize_dual(method, tau, res.trace,
                               config.target_accuracy, trace_file);
        } else {
          run.summary.method = method;
          run.summary.tau = tau;
          run.summary.status = "method not applicable to task";
          run.summary.trace_file = "-";
        }
      } catch (const std::exception& err) {
        run.summary.method = method;
        run.summary.tau = tau;
        run.summary.ok = false;
        run.summary.status = std::string("failed: ") + err.what();
        run.summary.trace_file = trace_file;
      }
      if (!run.residual.x.empty()) residual_series.push_back(run.residual);
      summaries.push_back(run.summary);
    }
  }

  // Time-to-target against block size, one series per method.
  for (const std::string& method : config.methods) {
    PlotSeries ts;
    ts.label = method;
    for (const RunSummary& s : summaries) {
      if (s.method == method && s.ok && s.epochs_to_target >= 0.0) {
        ts.x.push_back(s.tau);
        ts.y.push_back(std::max(s.elapsed_ms, 1e-16));
      }
    }
    if (!ts.x.empty()) time_series.push_back(ts);
  }

  const std::string metric_name = dual_task ? "gap" : "residual";
  if (!residual_series.empty()) {
    write_svg_plot(
        (fs::path(config.output_dir) / (metric_name + "_vs_epoch.svg")).string(),
        config.task + ": " + metric_name + " vs epochs", "epochs", metric_name,
        residual_series, true);
  }
  if (!time_series.empty()) {
    write_svg_plot((fs::path(config.output_dir) / "time_vs_tau.svg").string(),
                   config.task + ": time to target vs block size", "tau",
                   "time to target (ms)", time_series, true);
  }

  std::ofstream summary_file(fs::path(config.output_dir) / "summary.txt");
  summary_file << "task: " << config.task << "\n"
               << "target: " << config.target_accuracy << "\n"
               << "seed: " << config.seed << "\n";
  if (!dual_task) summary_file << "reference_optimum: " << std::setprecision(17) << f_star << "\n";
  summary_file << "\n"
               << std::left << std::setw(8) << "method" << std::setw(7)
               << "tau" << std::setw(10) << "reached" << std::setw(15)
               << metric_name << std::setw(18) << "epochs_to_target"
               << std::setw(14) << "iterations" << std::setw(13)
               << "elapsed_ms" << "status\n";
  bool any_ok = false;
  for (const RunSummary& s : summaries) {
    any_ok = any_ok || s.ok;
    summary_file << std::left << std::setw(8) << s.method << std::setw(7)
                 << s.tau << std::setw(10) << (s.ok ? "yes" : "no")
                 << std::setw(15) << std::setprecision(6) << s.final_metric
                 << std::setw(18) << s.epochs_to_target << std::setw(14)
                 << s.iterations << std::setw(13) << std::setprecision(6)
                 << s.elapsed_ms << s.status << "\n";
  }
  if (summaries_out) *summaries_out = summaries;
  return any_ok ? 0 : 1;
}

}  // namespace bcn
