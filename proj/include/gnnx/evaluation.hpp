#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gnnx/baselines.hpp"
#include "gnnx/explainer.hpp"
#include "gnnx/synthgen.hpp"

namespace gnnx {

struct NodeResult {
  int node = -1;  // parent-graph node id
  std::string method;
  double auc = 0.0;
  double accuracy_at_k = 0.0;
  bool skipped = false;  // degenerate ground truth at this node
};

struct EvalReport {
  std::string dataset;
  std::uint64_t seed = 0;
  std::vector<NodeResult> rows;
  std::map<std::string, double> mean_auc;
  std::map<std::string, double> mean_accuracy;
  int evaluated = 0;  // nodes scored per method
  int skipped = 0;    // nodes with degenerate ground truth
};

// Which motif-member nodes a benchmark walks.
enum class EvalNodes { test_split, all };

struct BenchmarkConfig {
  std::vector<std::string> methods;  // any of: gnnx, grad, att, random
  ExplainerConfig explainer;
  EvalNodes nodes = EvalNodes::test_split;
  int max_nodes = 0;  // 0 = no cap
};

// ROC-AUC of the scores against the ground-truth edge set, by pairwise
// comparison with half credit for ties. Negatives are the candidate edges not
// in the ground truth. Degenerate inputs (no positives or no negatives)
// return nullopt.
std::optional<double> explanation_auc(const ImportanceScores& scores,
                                      const std::vector<Edge>& gt,
                                      const std::vector<Edge>& candidates);

// |top-K candidate edges ∩ gt| / |gt|, with ties at the K-th score included.
double accuracy_at_k(const ImportanceScores& scores, const std::vector<Edge>& gt,
                     const std::vector<Edge>& candidates, int k);

// Score every motif-member node with each method and aggregate mean AUC and
// accuracy@|gt|. Ground truth is intersected with the node's computation-graph
// edges (a 3x3 grid corner can have motif edges beyond the receptive field).
// `att_model` is only consulted for the "att" method.
EvalReport run_benchmark(GnnModel& model, GnnModel* att_model,
                         const DatasetBundle& dataset, const BenchmarkConfig& config,
                         Rng& rng);

// CSV renderings (header included, LF line endings).
std::string eval_rows_csv(const EvalReport& report);
std::string eval_summary_csv(const EvalReport& report);

}  // namespace gnnx
