#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "symml/data.hpp"
#include "symml/features.hpp"
#include "symml/mlp.hpp"

namespace symml {

// rows = true label, columns = predicted label
using Confusion = std::array<std::array<std::size_t, kClassCount>, kClassCount>;

struct AccuracyResult {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  Confusion confusion{};
};

// Throws PreconditionError on an empty dataset, ShapeError on a dimension mismatch.
AccuracyResult accuracy(const Mlp& mlp, const FeatureMap& map, const Dataset& dataset);

// Accuracy recomputed from a confusion matrix (trace / total).
double accuracy_from_confusion(const Confusion& confusion);

struct BoundCheck {
  double r = 0.0;
  double r_bar = 0.0;
  double sum = 0.0;
  bool holds = false;
  // Samples correct on both x and -x (the theorem says none exist).
  std::size_t correct_on_both = 0;
  // predict(-x) == unique argmin of logits(x), checked where the minimum is unique.
  std::size_t antisymmetry_checked = 0;
  std::size_t antisymmetry_failures = 0;
  std::size_t ties_skipped = 0;

  bool passed() const { return holds && correct_on_both == 0 && antisymmetry_failures == 0; }
};

// Evaluates R on `test` and R-bar on its inversion for a bias-free,
// identity-feature model. Any other model is a PreconditionError.
BoundCheck bound_check(const Mlp& mlp, const FeatureMap& map, const Dataset& test);

enum class TrainVariant { Original, Symmetrized };
std::string train_set_name(TrainVariant variant);  // "X_train" / "+-X_train"

struct EvalReport {
  std::string model_id;
  FeatureMap feature_map;
  bool bias = false;
  std::string train_set;
  AccuracyResult original;  // on X_test
  AccuracyResult inverted;  // on -X_test
  std::optional<BoundCheck> bound;

  double r() const { return original.accuracy; }
  double r_bar() const { return inverted.accuracy; }
  double bound_sum() const { return r() + r_bar(); }
};

nlohmann::json to_json(const EvalReport& report);

// Builds R and R-bar for a model; runs bound_check when its hypotheses hold.
EvalReport evaluate(const Mlp& mlp, const FeatureMap& map, const Dataset& test, std::string model_id,
                    std::string train_set);

struct RowSpec {
  TrainConfig config;  // carries bias mode and feature map
  TrainVariant variant = TrainVariant::Original;
  double test_fraction = 0.25;
  std::uint64_t split_seed = 0;
};

struct RowResult {
  RowSpec spec;
  TrainResult training;
  EvalReport report;
};

// Splits the (already shift-augmented) corpus by origin, builds the training
// set (symmetrized for +-X_train), trains and evaluates on X_test and -X_test.
RowResult run_row(const RowSpec& spec, const Dataset& augmented);

// ---------------------------------------------------------------------------
// Table reproduction

struct Band {
  std::optional<double> lo;
  std::optional<double> hi;
  bool contains(double v) const { return (!lo || v >= *lo) && (!hi || v <= *hi); }
  std::string describe() const;
};

// One accuracy cell of the reference tables.
struct CellSpec {
  int table = 1;
  bool bias = false;
  FeatureKind features = FeatureKind::Identity;
  TrainVariant variant = TrainVariant::Original;
  bool inverted_test = false;
  double reference_value = 0.0;
  Band band;

  std::string key() const;
};

// The 8 Table-1 cells followed by the 6 Table-2 cells.
std::vector<CellSpec> table_cells(int table);  // table = 1, 2, or 0 for both

struct CellResult {
  CellSpec cell;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  EvalReport report;  // of the trained model this cell was read from
};

struct CellSummary {
  CellSpec cell;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  bool in_band = false;
};

// Cross-cell checks that do not fit a single band.
struct TableCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct TableReport {
  std::vector<std::uint64_t> seeds;
  std::vector<CellResult> results;  // ordered by seed, then cell
  std::vector<CellSummary> summaries;
  std::vector<TableCheck> checks;

  bool all_passed() const;
  std::string results_csv() const;
  std::string summary_csv() const;
  nlohmann::json to_json() const;
  std::string svg_chart() const;
};

struct ReproduceOptions {
  int table = 0;  // 1, 2 or 0 for both
  TrainConfig base;  // seed, bias and feature map are overridden per cell
  double test_fraction = 0.25;
  // Permutation-product seed; unset means "same as the run seed".
  std::optional<std::uint64_t> perm_seed;
  int jobs = 1;
};

TableReport reproduce_tables(std::span<const std::uint64_t> seeds, const Dataset& augmented,
                             const ReproduceOptions& options);

}  // namespace symml
