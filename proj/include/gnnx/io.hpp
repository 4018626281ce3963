#pragma once

#include <string>
#include <vector>

#include "gnnx/evaluation.hpp"
#include "gnnx/explainer.hpp"
#include "gnnx/gnn.hpp"
#include "gnnx/prototype.hpp"
#include "gnnx/synthgen.hpp"

namespace gnnx {

inline constexpr const char* kToolkitVersion = "gnnx 0.1.0";

// Everything a reproducible run needs; serializes to/from JSON losslessly.
struct ExperimentConfig {
  std::string dataset = "ba-shapes";
  std::uint64_t seed = 0;
  GnnConfig model;
  ExplainerConfig explainer;
  std::vector<std::string> methods = {"gnnx", "grad", "random"};
  std::string out_dir = ".";

  bool operator==(const ExperimentConfig&) const = default;
};

std::string experiment_to_json(const ExperimentConfig& config);
ExperimentConfig experiment_from_json(const std::string& text);

// Node-task dataset: graph + split + provenance in one JSON document.
std::string dataset_to_json(const DatasetBundle& dataset);
DatasetBundle dataset_from_json(const std::string& text);

// Graph-classification dataset.
std::string graphset_to_json(const GraphsetBundle& dataset);
GraphsetBundle graphset_from_json(const std::string& text);

// Checkpoint: JSON header (config, version, provenance) plus base64 row-major
// weight blobs. Bit-exact across save/load.
std::string model_to_json(const GnnModel& model, const std::string& provenance);
GnnModel model_from_json(const std::string& text);

// Explanation with scores, selections, and provenance.
std::string explanation_to_json(const Explanation& explanation,
                                const std::string& provenance);

// DOT rendering: ground-truth edges solid, selected edges colored with
// opacity proportional to score, the explained node double-circled.
std::string explanation_to_dot(const Explanation& explanation,
                               const std::vector<Edge>& gt_local);

std::string prototype_to_json(const Prototype& prototype,
                              const std::string& provenance);

// Prototype as DOT with edge opacity equal to the median weight.
std::string prototype_to_dot(const Prototype& prototype, double threshold);

// Base64 of raw bytes (standard alphabet, padded) and its inverse.
std::string base64_encode(const unsigned char* data, std::size_t size);
std::vector<unsigned char> base64_decode(const std::string& text);

// Whole-file helpers (throw on failure).
void write_file(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace gnnx
