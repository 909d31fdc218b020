#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bcn/erm.hpp"
#include "bcn/problem.hpp"

namespace bcn {

struct Dataset {
  std::string name;
  Matrix B;       // m x d
  Vector labels;  // class labels or counts, one per row

  int m() const { return static_cast<int>(B.rows()); }
  int d() const { return static_cast<int>(B.cols()); }
};

// Sparse text rows "<label> <index>:<value> ..." with 1-based indices.
// min_features overrides the width when known to exceed the largest index.
// Malformed input raises std::invalid_argument naming the line.
Dataset parse_libsvm(std::istream& in, int min_features = 0);
Dataset load_libsvm(const std::string& path, int min_features = 0);
void write_libsvm(const Dataset& dataset, std::ostream& out);

// Random low-rank least squares plus cubed-coordinate penalties:
//   min 0.5 ||A x - b||^2 + sum_j (c_j / 6) |x_j|^3
// with A = U'U from a 10 x N standard normal U, b = -U' xi, c_j = 1 + |v_j|.
// Unit blocks; block constants equal c_j.
CompositeProblem gen_synthetic_cubic(int N, std::uint64_t seed);

// Standard-normal design with Poisson(1) counts.
Dataset gen_synthetic_poisson(int m, int d, std::uint64_t seed);

// ERM instances from a dataset; lambda defaults to 1/m.
ErmProblem erm_logistic(const Dataset& dataset, double lambda = 0.0);
ErmProblem erm_poisson(const Dataset& dataset, double lambda = 0.0);

// Full damped-Newton minimization of the ERM primal; reference optima for
// gap and residual reporting.
Vector reference_primal_optimum(const ErmProblem& erm, double grad_tol = 1e-13,
                                int max_iterations = 200);

struct ExperimentConfig {
  std::string task;  // synthetic_cubic | logistic_constrained | poisson_dual |
                     // poisson_synthetic
  std::vector<std::string> methods;
  std::string data_path;  // exactly one of data_path / generator dims
  int gen_n = 0;
  int gen_m = 0;
  int gen_d = 0;
  std::uint64_t gen_seed = 1;
  std::vector<int> taus;
  double target_accuracy = 1e-6;
  long max_iterations = 100000;
  long max_epochs = 200;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  void validate() const;
  static ExperimentConfig from_json_file(const std::string& path);
};

struct RunSummary {
  std::string method;
  int tau = 0;
  bool ok = false;
  std::string status;
  double final_metric = 0.0;  // objective residual or duality gap
  double epochs_to_target = -1.0;
  long iterations = 0;
  double elapsed_ms = 0.0;
  std::string trace_file;
};

// Runs every (method, tau) pair of the config, writes one trace CSV per run,
// a summary text file and the SVG plots into output_dir. Returns 0 when at
// least one run succeeded.
int run_experiment(const ExperimentConfig& config,
                   std::vector<RunSummary>* summaries = nullptr);

// Minimal static SVG line plot (one polyline per series, log10 y).
struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};
void write_svg_plot(const std::string& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<PlotSeries>& series, bool log_y = true);

}  // namespace bcn
