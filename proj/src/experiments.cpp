#include "symml/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "symml/errors.hpp"
#include "symml/model_io.hpp"
#include "symml/svg.hpp"

namespace symml {

using nlohmann::json;

namespace {

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

json confusion_json(const Confusion& c) {
  json rows = json::array();
  for (const auto& row : c) rows.push_back(row);
  return rows;
}

json accuracy_json(const AccuracyResult& a) {
  return {{"accuracy", a.accuracy}, {"correct", a.correct}, {"total", a.total},
          {"confusion", confusion_json(a.confusion)}};
}

}  // namespace

AccuracyResult accuracy(const Mlp& mlp, const FeatureMap& map, const Dataset& dataset) {
  if (dataset.size() == 0) throw PreconditionError("accuracy of an empty dataset");
  if (map.output_dim() != mlp.input_dim()) throw ShapeError("feature map does not match the network input");
  AccuracyResult r;
  r.total = dataset.size();
  for (const auto& img : dataset.images) {
    const auto f = map.apply(img);
    const int p = predict(mlp, f);
    ++r.confusion[img.label][p];
    r.correct += p == img.label;
  }
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
  return r;
}

double accuracy_from_confusion(const Confusion& confusion) {
  std::size_t trace = 0, total = 0;
  for (std::size_t i = 0; i < confusion.size(); ++i) {
    trace += confusion[i][i];
    for (std::size_t v : confusion[i]) total += v;
  }
  return total == 0 ? 0.0 : static_cast<double>(trace) / static_cast<double>(total);
}

BoundCheck bound_check(const Mlp& mlp, const FeatureMap& map, const Dataset& test) {
  if (mlp.has_bias()) throw PreconditionError("bound_check requires a model without biases");
  if (map.kind() != FeatureKind::Identity) {
    throw PreconditionError("bound_check requires identity features; invariant features give R == R-bar");
  }
  if (test.size() == 0) throw PreconditionError("bound_check on an empty dataset");
  BoundCheck out;
  std::size_t correct = 0, correct_inv = 0;
  for (const auto& img : test.images) {
    const auto x = map.apply(img);
    const auto inv = map.apply(apply_group(Inversion{}, img));
    const auto logits = forward(mlp, x).logits;
    const int p = argmax(logits);
    const int p_inv = predict(mlp, inv);
    correct += p == img.label;
    correct_inv += p_inv == img.label;
    out.correct_on_both += (p == img.label && p_inv == img.label);
    const auto [lowest, unique] = argmin_unique(logits);
    if (unique) {
      ++out.antisymmetry_checked;
      out.antisymmetry_failures += p_inv != lowest;
    } else {
      ++out.ties_skipped;
    }
  }
  const auto n = static_cast<double>(test.size());
  out.r = static_cast<double>(correct) / n;
  out.r_bar = static_cast<double>(correct_inv) / n;
  out.sum = out.r + out.r_bar;
  // Compare counts, not the rounded sum.
  out.holds = correct + correct_inv <= test.size();
  return out;
}

std::string train_set_name(TrainVariant variant) {
  return variant == TrainVariant::Original ? "X_train" : "+-X_train";
}

EvalReport evaluate(const Mlp& mlp, const FeatureMap& map, const Dataset& test, std::string model_id,
                    std::string train_set) {
  EvalReport r;
  r.model_id = std::move(model_id);
  r.feature_map = map;
  r.bias = mlp.has_bias();
  r.train_set = std::move(train_set);
  r.original = accuracy(mlp, map, test);
  r.inverted = accuracy(mlp, map, invert(test));
  if (!mlp.has_bias() && map.kind() == FeatureKind::Identity) r.bound = bound_check(mlp, map, test);
  return r;
}

json to_json(const EvalReport& report) {
  json j;
  j["model_id"] = report.model_id;
  j["feature_map"] = to_json(report.feature_map);
  j["bias"] = report.bias;
  j["train_set"] = report.train_set;
  j["R"] = report.r();
  j["R_bar"] = report.r_bar();
  j["bound_sum"] = report.bound_sum();
  j["X_test"] = accuracy_json(report.original);
  j["-X_test"] = accuracy_json(report.inverted);
  if (report.bound) {
    const auto& b = *report.bound;
    j["bound_check"] = {{"R", b.r},
                        {"R_bar", b.r_bar},
                        {"sum", b.sum},
                        {"holds", b.holds},
                        {"correct_on_both", b.correct_on_both},
                        {"antisymmetry_checked", b.antisymmetry_checked},
                        {"antisymmetry_failures", b.antisymmetry_failures},
                        {"ties_skipped", b.ties_skipped}};
  } else {
    j["bound_check"] = nullptr;
  }
  return j;
}

RowResult run_row(const RowSpec& spec, const Dataset& augmented) {
  const SplitResult parts = split(augmented, spec.test_fraction, spec.split_seed);
  const Dataset train_set =
      spec.variant == TrainVariant::Symmetrized ? symmetrize(parts.train) : parts.train;
  RowResult out{spec, train(spec.config, to_features(train_set, spec.config.feature_map)), {}};
  const std::string id = std::string(spec.config.use_bias ? "bias" : "nobias") + "/" +
                         spec.config.feature_map.name() + "/" + train_set_name(spec.variant) +
                         "/seed=" + std::to_string(spec.config.seed);
  out.report = evaluate(out.training.model, spec.config.feature_map, parts.test, id, train_set_name(spec.variant));
  return out;
}

// ---------------------------------------------------------------------------

std::string Band::describe() const {
  if (lo && hi) return "[" + fixed(*lo, 2) + ", " + fixed(*hi, 2) + "]";
  if (lo) return ">= " + fixed(*lo, 2);
  if (hi) return "<= " + fixed(*hi, 2);
  return "any";
}

std::string CellSpec::key() const {
  return "T" + std::to_string(table) + "/" + (bias ? "bias" : "nobias") + "/" + std::string(to_string(features)) +
         "/" + train_set_name(variant) + "/" + (inverted_test ? "-X_test" : "X_test");
}

std::vector<CellSpec> table_cells(int table) {
  using FK = FeatureKind;
  using TV = TrainVariant;
  const auto at_least = [](double v) { return Band{v, std::nullopt}; };
  const auto at_most = [](double v) { return Band{std::nullopt, v}; };
  std::vector<CellSpec> cells;
  if (table == 0 || table == 1) {
    cells.push_back({1, false, FK::Identity, TV::Original, false, 0.84, at_least(0.75)});
    cells.push_back({1, false, FK::Identity, TV::Original, true, 0.001, at_most(0.05)});
    cells.push_back({1, false, FK::Identity, TV::Symmetrized, false, 0.12, at_most(0.55)});
    cells.push_back({1, false, FK::Identity, TV::Symmetrized, true, 0.09, at_most(0.55)});
    cells.push_back({1, true, FK::Identity, TV::Original, false, 0.81, at_least(0.72)});
    cells.push_back({1, true, FK::Identity, TV::Original, true, 0.02, at_most(0.10)});
    cells.push_back({1, true, FK::Identity, TV::Symmetrized, false, 0.68, Band{0.55, 0.80}});
    cells.push_back({1, true, FK::Identity, TV::Symmetrized, true, 0.69, Band{0.55, 0.80}});
  }
  if (table == 0 || table == 2) {
    cells.push_back({2, false, FK::Square, TV::Original, false, 0.65, Band{0.50, 0.75}});
    cells.push_back({2, false, FK::NeighborProduct, TV::Original, false, 0.84, at_least(0.78)});
    cells.push_back({2, false, FK::PermutationProduct, TV::Original, false, 0.81, at_least(0.72)});
    cells.push_back({2, true, FK::Square, TV::Original, false, 0.66, Band{0.50, 0.80}});
    cells.push_back({2, true, FK::NeighborProduct, TV::Original, false, 0.87, at_least(0.78)});
    cells.push_back({2, true, FK::PermutationProduct, TV::Original, false, 0.82, at_least(0.72)});
  }
  return cells;
}

bool TableReport::all_passed() const {
  return std::all_of(summaries.begin(), summaries.end(), [](const auto& s) { return s.in_band; }) &&
         std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

std::string TableReport::results_csv() const {
  std::ostringstream o;
  o << "table,bias_mode,features,train_set,test_set,seed,accuracy\n";
  for (const auto& r : results) {
    o << r.cell.table << ',' << (r.cell.bias ? "bias" : "no_bias") << ',' << to_string(r.cell.features) << ','
      << train_set_name(r.cell.variant) << ',' << (r.cell.inverted_test ? "-X_test" : "X_test") << ',' << r.seed
      << ',' << fixed(r.accuracy) << '\n';
  }
  return o.str();
}

std::string TableReport::summary_csv() const {
  std::ostringstream o;
  o << "cell,reference,mean,min,max,band,in_band\n";
  for (const auto& s : summaries) {
    o << s.cell.key() << ',' << s.cell.reference_value << ',' << fixed(s.mean) << ',' << fixed(s.min) << ','
      << fixed(s.max) << ",\"" << s.cell.band.describe() << "\"," << (s.in_band ? "pass" : "fail") << '\n';
  }
  for (const auto& c : checks) {
    o << c.name << ",,,,,\"" << c.detail << "\"," << (c.passed ? "pass" : "fail") << '\n';
  }
  return o.str();
}

json TableReport::to_json() const {
  json j;
  j["seeds"] = seeds;
  json cells = json::array();
  for (const auto& r : results) {
    cells.push_back({{"cell", r.cell.key()},
                     {"seed", r.seed},
                     {"accuracy", r.accuracy},
                     {"reference", r.cell.reference_value},
                     {"report", symml::to_json(r.report)}});
  }
  j["results"] = std::move(cells);
  json sums = json::array();
  for (const auto& s : summaries) {
    sums.push_back({{"cell", s.cell.key()},
                    {"reference", s.cell.reference_value},
                    {"mean", s.mean},
                    {"min", s.min},
                    {"max", s.max},
                    {"band", s.cell.band.describe()},
                    {"in_band", s.in_band}});
  }
  j["summaries"] = std::move(sums);
  json checks_j = json::array();
  for (const auto& c : checks) checks_j.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  j["checks"] = std::move(checks_j);
  j["all_passed"] = all_passed();
  return j;
}

std::string TableReport::svg_chart() const {
  std::vector<svg::BarGroup> groups;
  for (const auto& s : summaries) {
    const std::string label = std::string(s.cell.bias ? "b " : "nb ") + std::string(to_string(s.cell.features)) +
                              (s.cell.variant == TrainVariant::Symmetrized ? " +-X" : " X") +
                              (s.cell.inverted_test ? " | -Xt" : " | Xt");
    groups.push_back({label, {s.cell.reference_value, s.mean}});
  }
  return svg::bar_chart("Accuracy: reference vs measured (mean over seeds)", {"reference", "measured"}, groups);
}

// ---------------------------------------------------------------------------

namespace {

struct TrainingKey {
  std::uint64_t seed;
  bool bias;
  FeatureKind features;
  TrainVariant variant;
  auto tie() const { return std::tuple(seed, bias, features, variant); }
  bool operator<(const TrainingKey& o) const { return tie() < o.tie(); }
};

}  // namespace

TableReport reproduce_tables(std::span<const std::uint64_t> seeds, const Dataset& augmented,
                             const ReproduceOptions& options) {
  if (seeds.empty()) throw PreconditionError("reproduce_tables needs at least one seed");
  const auto cells = table_cells(options.table);

  std::vector<TrainingKey> keys;
  for (auto seed : seeds) {
    for (const auto& c : cells) {
      const TrainingKey k{seed, c.bias, c.features, c.variant};
      if (std::find_if(keys.begin(), keys.end(), [&](const auto& e) { return !(e < k) && !(k < e); }) == keys.end()) {
        keys.push_back(k);
      }
    }
  }

  std::vector<EvalReport> reports(keys.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  const auto worker = [&] {
    for (std::size_t i = next++; i < keys.size(); i = next++) {
      try {
        const auto& k = keys[i];
        RowSpec spec;
        spec.config = options.base;
        spec.config.seed = k.seed;
        spec.config.use_bias = k.bias;
        spec.config.feature_map = FeatureMap::make(k.features, options.perm_seed.value_or(k.seed));
        spec.variant = k.variant;
        spec.test_fraction = options.test_fraction;
        spec.split_seed = k.seed;
        reports[i] = run_row(spec, augmented).report;
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = keys.size();
      }
    }
  };
  const int jobs = std::max(1, options.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  const auto report_for = [&](std::uint64_t seed, const CellSpec& c) -> const EvalReport& {
    const TrainingKey k{seed, c.bias, c.features, c.variant};
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (!(keys[i] < k) && !(k < keys[i])) return reports[i];
    }
    throw std::logic_error("missing training for " + c.key());
  };

  TableReport out;
  out.seeds.assign(seeds.begin(), seeds.end());
  for (auto seed : seeds) {
    for (const auto& c : cells) {
      const auto& rep = report_for(seed, c);
      out.results.push_back({c, seed, c.inverted_test ? rep.r_bar() : rep.r(), rep});
    }
  }

  std::map<std::string, double> means;
  for (const auto& c : cells) {
    CellSummary s{c, 0.0, 1.0, 0.0, false};
    for (const auto& r : out.results) {
      if (r.cell.key() != c.key()) continue;
      s.mean += r.accuracy;
      s.min = std::min(s.min, r.accuracy);
      s.max = std::max(s.max, r.accuracy);
    }
    s.mean /= static_cast<double>(seeds.size());
    s.in_band = c.band.contains(s.mean);
    means[c.key()] = s.mean;
    out.summaries.push_back(s);
  }

  // Theorem on every bias-free identity model, every seed.
  {
    TableCheck check{"bound R+R_bar<=1 on every no-bias identity model", true, ""};
    std::size_t checked = 0;
    for (const auto& r : out.results) {
      if (!r.report.bound) continue;
      ++checked;
      if (!r.report.bound->passed()) {
        check.passed = false;
        check.detail += r.report.model_id + " ";
      }
    }
    if (checked > 0) {
      check.detail = check.passed ? std::to_string(checked) + " cell readings verified" : "violated: " + check.detail;
      out.checks.push_back(check);
    }
  }
  if (options.table == 0 || options.table == 1) {
    const double r = means["T1/bias/identity/+-X_train/X_test"];
    const double rb = means["T1/bias/identity/+-X_train/-X_test"];
    out.checks.push_back({"T1 bias +-X_train |R - R_bar| <= 0.10", std::abs(r - rb) <= 0.10,
                          "|" + fixed(r, 4) + " - " + fixed(rb, 4) + "| = " + fixed(std::abs(r - rb), 4)});
  }
  if (options.table == 0 || options.table == 2) {
    TableCheck eq{"T2 accuracy(X_test) == accuracy(-X_test) exactly", true, ""};
    std::size_t n = 0;
    for (const auto& r : out.results) {
      if (r.cell.table != 2) continue;
      ++n;
      if (r.report.original.correct != r.report.inverted.correct || r.report.original.confusion != r.report.inverted.confusion) {
        eq.passed = false;
        eq.detail += r.report.model_id + " ";
      }
    }
    eq.detail = eq.passed ? std::to_string(n) + " cell readings identical" : "differs: " + eq.detail;
    out.checks.push_back(eq);

    for (bool bias : {false, true}) {
      TableCheck order{std::string("T2 ") + (bias ? "bias" : "nobias") + " neighbor - square >= 0.08 every seed",
                       true, ""};
      double worst = 1.0;
      for (auto seed : seeds) {
        double sq = 0, nb = 0;
        for (const auto& r : out.results) {
          if (r.seed != seed || r.cell.table != 2 || r.cell.bias != bias) continue;
          if (r.cell.features == FeatureKind::Square) sq = r.accuracy;
          if (r.cell.features == FeatureKind::NeighborProduct) nb = r.accuracy;
        }
        worst = std::min(worst, nb - sq);
      }
      order.passed = worst >= 0.08;
      order.detail = "smallest gap " + fixed(worst, 4);
      out.checks.push_back(order);
    }
  }
  return out;
}

}  // namespace symml
