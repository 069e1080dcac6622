// symml: data preparation, training, evaluation, table reproduction and
// symmetry probes for inversion-symmetric digit classification.
//
// Exit status: 0 success, 1 usage/config error, 2 invariant or band failure.

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "symml/data.hpp"
#include "symml/errors.hpp"
#include "symml/experiments.hpp"
#include "symml/model_io.hpp"
#include "symml/svg.hpp"
#include "symml/symmetry_lab.hpp"

#ifdef SYMML_WITH_FETCH
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace symml;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInvariant = 2;

#ifndef SYMML_DEFAULT_DATA
#define SYMML_DEFAULT_DATA "data/optdigits.csv"
#endif

constexpr const char* kFetchUrl =
    "https://archive.ics.uci.edu/ml/machine-learning-databases/optdigits/optdigits.tes";

// Usage or configuration problem detected by the CLI itself.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string data = SYMML_DEFAULT_DATA;
  std::string out = "out";
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  bool use_bias = false;
  std::string features = "identity";
  std::optional<std::uint64_t> perm_seed;
  bool symmetrize = false;
  int epochs = 200;
  double lr = 0.05;
  int batch = 32;
  double momentum = 0.9;
  double test_fraction = 0.25;
  bool invert = false;
  int jobs = 1;
  std::string model;
  std::string input;
  std::string url = kFetchUrl;
  int group_order = 360;
  double mu = 0.5;
  int trials = 10000;
  std::string config;
};

json to_json(const RunConfig& c) {
  return {{"data", c.data},
          {"out", c.out},
          {"seed", c.seed},
          {"seeds", c.seeds},
          {"bias", c.use_bias},
          {"features", c.features},
          {"perm_seed", c.perm_seed ? json(*c.perm_seed) : json(nullptr)},
          {"symmetrize", c.symmetrize},
          {"epochs", c.epochs},
          {"lr", c.lr},
          {"batch", c.batch},
          {"momentum", c.momentum},
          {"test_fraction", c.test_fraction},
          {"invert", c.invert},
          {"jobs", c.jobs},
          {"model", c.model},
          {"n", c.group_order},
          {"mu", c.mu},
          {"trials", c.trials},
          {"config", c.config}};
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

fs::path prepare_out(const RunConfig& c) {
  fs::path out(c.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw UsageError("cannot create output directory " + c.out);
  return out;
}

void write_manifest(const fs::path& out, const std::string& command, const RunConfig& c, const json& extra = {}) {
  json m = {{"command", command}, {"config", to_json(c)}, {"timestamp", utc_timestamp()}};
  if (!extra.is_null()) m["outputs"] = extra;
  write_json(m, out / "manifest.json");
}

void require_data(const RunConfig& c) {
  if (!fs::exists(c.data)) throw UsageError("data file not found: " + c.data);
}

TrainConfig train_config(const RunConfig& c) {
  TrainConfig t;
  t.seed = c.seed;
  t.epochs = c.epochs;
  t.batch_size = c.batch;
  t.learning_rate = c.lr;
  t.momentum = c.momentum;
  t.use_bias = c.use_bias;
  t.feature_map = FeatureMap::make(parse_feature_kind(c.features), c.perm_seed.value_or(c.seed));
  return t;
}

Dataset load_augmented(const RunConfig& c) {
  require_data(c);
  const auto raw = load_optdigits(c.data);
  return augment_shifts(to_dataset(raw, "X"));
}

// ---------------------------------------------------------------------------
// Flat key=value config files. Command-line flags win over file values.

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::map<std::string, std::string> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

struct Setting {
  std::vector<CLI::Option*> options;  // the same flag may exist on several subcommands
  std::function<void(const std::string&)> assign;
};

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("bad seed '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("empty seed list");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError("bad boolean '" + v + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream ss(v);
  T out{};
  ss >> out;
  if (!ss || !ss.eof()) throw UsageError("config key '" + key + "': bad value '" + v + "'");
  return out;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_data_stats(const RunConfig& c) {
  require_data(c);
  const auto raw = load_optdigits(c.data);
  const auto stats = compute_stats(raw);
  json j = {{"file", c.data}, {"count", stats.count}, {"class_counts", stats.class_counts},
            {"pixel_histogram", stats.pixel_histogram}};
  std::cout << "images: " << stats.count << "\nclass counts:";
  for (std::size_t k = 0; k < stats.class_counts.size(); ++k) std::cout << ' ' << k << '=' << stats.class_counts[k];
  std::cout << '\n';
  const auto out = prepare_out(c);
  write_json(j, out / "data_stats.json");
  write_manifest(out, "data stats", c, {"data_stats.json"});
  return kExitOk;
}

int cmd_data_convert(const RunConfig& c) {
  if (c.input.empty()) throw UsageError("data convert needs --in");
  const fs::path target = c.data;
  const std::size_t n = convert_optdigits(c.input, target);
  std::cout << "wrote " << n << " records to " << target.string() << '\n';
  return kExitOk;
}

int cmd_data_fetch(const RunConfig& c) {
#ifdef SYMML_WITH_FETCH
  const std::string url = c.url;
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (scheme_end == std::string::npos || path_start == std::string::npos) throw UsageError("bad URL " + url);
  httplib::Client client(url.substr(0, path_start));
  client.set_connection_timeout(10);
  client.set_read_timeout(30);
  client.set_follow_location(true);
  auto res = client.Get(url.substr(path_start));
  if (!res || res->status != 200) {
    std::ostringstream msg;
    msg << "fetch of " << url << " failed ("
        << (res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error()))
        << "). The corpus is vendored in the repository; pass --data " << SYMML_DEFAULT_DATA
        << " or convert a local copy with 'symml data convert --in <file> --data <out>'.";
    throw DataError(msg.str());
  }
  std::istringstream body(res->body);
  const auto digits = parse_optdigits(body, url);
  std::ofstream out(c.data);
  if (!out) throw DataError("cannot write " + c.data);
  write_optdigits(out, digits);
  std::cout << "wrote " << digits.size() << " records to " << c.data << '\n';
  return kExitOk;
#else
  (void)c;
  throw DataError(std::string("this build has no network support; the corpus is vendored at ") + SYMML_DEFAULT_DATA);
#endif
}

int cmd_train(const RunConfig& c) {
  const TrainConfig tc = train_config(c);
  const Dataset augmented = load_augmented(c);
  const auto out = prepare_out(c);

  RowSpec spec;
  spec.config = tc;
  spec.variant = c.symmetrize ? TrainVariant::Symmetrized : TrainVariant::Original;
  spec.test_fraction = c.test_fraction;
  spec.split_seed = c.seed;
  const RowResult row = run_row(spec, augmented);

  ModelFile model{row.training.model, tc.feature_map, {}};
  model.metadata = {{"seed", c.seed},
                    {"split_seed", spec.split_seed},
                    {"test_fraction", c.test_fraction},
                    {"train_set", train_set_name(spec.variant)},
                    {"epochs", c.epochs},
                    {"learning_rate", c.lr},
                    {"batch_size", c.batch},
                    {"momentum", c.momentum},
                    {"R", row.report.r()},
                    {"R_bar", row.report.r_bar()}};
  save_model(model, out / "model.json");

  std::ostringstream curve;
  curve << "epoch,mean_loss\n";
  for (std::size_t e = 0; e < row.training.epoch_loss.size(); ++e) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", row.training.epoch_loss[e]);
    curve << e + 1 << ',' << buf << '\n';
  }
  write_text(out / "training_curve.csv", curve.str());
  write_json(symml::to_json(row.report), out / "report.json");
  write_manifest(out, "train", c, {"model.json", "training_curve.csv", "report.json"});

  std::cout << row.report.model_id << "  R=" << row.report.r() << "  R_bar=" << row.report.r_bar() << '\n';
  if (row.report.bound && !row.report.bound->passed()) {
    std::cerr << "bound check failed: R + R_bar = " << row.report.bound->sum << '\n';
    return kExitInvariant;
  }
  return kExitOk;
}

int cmd_eval(const RunConfig& c, bool split_seed_given, bool fraction_given) {
  if (c.model.empty()) throw UsageError("eval needs --model");
  const ModelFile model = load_model(c.model);
  const Dataset augmented = load_augmented(c);
  const auto out = prepare_out(c);

  std::uint64_t split_seed = c.seed;
  double fraction = c.test_fraction;
  if (!split_seed_given && model.metadata.contains("split_seed")) split_seed = model.metadata["split_seed"];
  if (!fraction_given && model.metadata.contains("test_fraction")) fraction = model.metadata["test_fraction"];
  const auto parts = split(augmented, fraction, split_seed);
  const Dataset test = c.invert ? invert(parts.test) : parts.test;

  const AccuracyResult acc = accuracy(model.mlp, model.feature_map, test);
  json report = {{"feature_map", symml::to_json(model.feature_map)},
                 {"bias", model.mlp.has_bias()},
                 {"accuracy", acc.accuracy},
                 {"correct", acc.correct},
                 {"total", acc.total}};
  json confusion = json::array();
  for (const auto& row : acc.confusion) confusion.push_back(row);
  report["confusion"] = confusion;
  int status = kExitOk;
  if (!model.mlp.has_bias() && model.feature_map.kind() == FeatureKind::Identity) {
    const BoundCheck b = bound_check(model.mlp, model.feature_map, test);
    report["bound_check"] = {{"sum", b.sum}, {"holds", b.holds}, {"antisymmetry_failures", b.antisymmetry_failures}};
    if (!b.passed()) status = kExitInvariant;
  }
  write_json(report, out / "eval_report.json");
  write_manifest(out, "eval", c,
                 {{"report", "eval_report.json"}, {"test_set", c.invert ? "-X_test" : "X_test"},
                  {"split_seed", split_seed}, {"test_fraction", fraction}});
  std::cout << (c.invert ? "-X_test" : "X_test") << " accuracy " << acc.accuracy << " (" << acc.correct << "/"
            << acc.total << ")\n";
  return status;
}

int reproduce_figure1(const RunConfig& c, const fs::path& out) {
  require_data(c);
  const Dataset ds = to_dataset(load_optdigits(c.data));
  const auto six = std::find_if(ds.images.begin(), ds.images.end(), [](const auto& img) { return img.label == 6; });
  if (six == ds.images.end()) throw DataError("no image labeled 6 in " + c.data);
  const GrayImage inverted = apply_group(Inversion{}, *six);
  const auto features = FeatureMap::neighbor_product().apply(*six);
  render_image(*six, out / "fig1_original.pgm");
  render_image(inverted, out / "fig1_inverted.pgm");
  render_image(std::span<const double, kPixelCount>(features), out / "fig1_neighbor.pgm");

  bool complement = true;
  bool invariant = FeatureMap::neighbor_product().apply(inverted) == features;
  for (std::size_t i = 0; i < kPixelCount; ++i) {
    complement = complement && gray_level(inverted.pixels[i]) == 255 - gray_level(six->pixels[i]);
  }
  json j = {{"origin_id", six->origin_id},
            {"label", six->label},
            {"inverted_is_255_complement", complement},
            {"neighbor_features_invariant", invariant},
            {"files", {"fig1_original.pgm", "fig1_inverted.pgm", "fig1_neighbor.pgm"}}};
  write_json(j, out / "figure1.json");
  std::cout << "figure1: sample " << six->origin_id << ", complement " << (complement ? "ok" : "FAILED")
            << ", invariance " << (invariant ? "ok" : "FAILED") << '\n';
  return complement && invariant ? kExitOk : kExitInvariant;
}

int cmd_reproduce(const RunConfig& c, const std::string& what) {
  const auto out = prepare_out(c);
  if (what == "figure1") {
    const int status = reproduce_figure1(c, out);
    write_manifest(out, "reproduce figure1", c, {"fig1_original.pgm", "fig1_inverted.pgm", "fig1_neighbor.pgm"});
    return status;
  }
  ReproduceOptions opt;
  opt.table = what == "table1" ? 1 : what == "table2" ? 2 : 0;
  opt.base = train_config(c);
  opt.test_fraction = c.test_fraction;
  opt.perm_seed = c.perm_seed;
  opt.jobs = c.jobs;
  const Dataset augmented = load_augmented(c);
  const TableReport report = reproduce_tables(c.seeds, augmented, opt);

  const std::string stem = what == "all" ? "tables" : what;
  write_text(out / (stem + "_results.csv"), report.results_csv());
  write_text(out / (stem + "_summary.csv"), report.summary_csv());
  write_json(report.to_json(), out / (stem + "_report.json"));
  write_text(out / (stem + "_chart.svg"), report.svg_chart());
  write_manifest(out, "reproduce " + what, c,
                 {stem + "_results.csv", stem + "_summary.csv", stem + "_report.json", stem + "_chart.svg"});

  std::cout << report.summary_csv();
  int status = report.all_passed() ? kExitOk : kExitInvariant;
  if (what == "all") {
    const int fig = reproduce_figure1(c, out);
    if (fig != kExitOk) status = fig;
  }
  return status;
}

// Random bias-free model on pixel inputs, or the model given by --model.
ModelFile probe_model(const RunConfig& c) {
  if (!c.model.empty()) return load_model(c.model);
  const std::vector<std::size_t> dims{kPixelCount, 10, 5, static_cast<std::size_t>(kClassCount)};
  return {Mlp::random(dims, false, c.seed), FeatureMap::identity(), {}};
}

int cmd_probe(const RunConfig& c, const std::string& what) {
  const auto out = prepare_out(c);
  json report;
  bool pass = true;

  if (what == "weight-flip") {
    const ModelFile m = probe_model(c);
    if (m.feature_map.kind() != FeatureKind::Identity) {
      throw UsageError("weight-flip probe needs an identity-feature model");
    }
    const Dataset augmented = load_augmented(c);
    const auto parts = split(augmented, c.test_fraction, c.seed);
    const auto sym = lab::weight_orbit_invariance(m.mlp, symmetrize(parts.train));
    const auto plain = lab::weight_flip_deviation(m.mlp, parts.train);
    pass = sym.deviation <= 1e-9;
    report = {{"symmetrized", {{"loss", sym.loss}, {"flipped_loss", sym.flipped_loss}, {"deviation", sym.deviation}}},
              {"unsymmetrized", {{"loss", plain.loss}, {"flipped_loss", plain.flipped_loss}, {"deviation", plain.deviation}}},
              {"tolerance", 1e-9},
              {"pass", pass}};
    std::cout << "weight-flip deviation " << sym.deviation << " (symmetrized), " << plain.deviation
              << " (unsymmetrized)\n";
  } else if (what == "orbit") {
    const auto task = lab::make_toy_task(c.group_order, c.seed);
    const auto fit = lab::fit_toy(task, c.seed);
    const auto profile = lab::orbit_loss_scan(task, fit.w);
    const double spread = lab::relative_spread(profile);
    pass = spread <= 1e-9;
    std::ostringstream csv;
    csv << "theta,loss\n";
    for (const auto& [theta, loss] : profile) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", theta, loss);
      csv << buf;
    }
    write_text(out / "orbit.csv", csv.str());
    write_text(out / "orbit.svg", svg::line_chart("Group-averaged loss along the weight orbit (n = " +
                                                      std::to_string(c.group_order) + ")",
                                                  "rotation angle (rad)", "loss", profile));
    report = {{"n", c.group_order}, {"w_star", {fit.w.x, fit.w.y}}, {"gradient_norm", fit.gradient_norm},
              {"relative_spread", spread}, {"tolerance", 1e-9}, {"pass", pass}};
    std::cout << "orbit n=" << c.group_order << " relative spread " << spread << '\n';
  } else if (what == "goldstone") {
    json rows = json::array();
    std::ostringstream csv;
    csv << "n,w_x,w_y,gradient_norm,directional_derivative,generator_curvature,radial_curvature,smallest_eigenvalue\n";
    double previous = INFINITY;
    bool monotone = true;
    lab::CurvatureReport last;
    for (int n : {4, 16, 64, 360}) {
      const auto task = lab::make_toy_task(n, c.seed);
      const auto fit = lab::fit_toy(task, c.seed);
      const auto r = lab::generator_curvature(task, fit.w);
      if (!r.at_minimum) std::cerr << "warning: n=" << n << " fit is not at a minimum (gradient " << r.gradient_norm << ")\n";
      const double resolution = 1e-12 * r.radial_curvature;
      monotone = monotone && r.generator_curvature <= previous + resolution;
      previous = r.generator_curvature;
      last = r;
      char buf[256];
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.6g,%.6g,%.6g,%.6g,%.6g\n", n, fit.w.x, fit.w.y, r.gradient_norm,
                    r.directional_derivative, r.generator_curvature, r.radial_curvature, r.smallest_eigenvalue);
      csv << buf;
      rows.push_back({{"n", n}, {"directional_derivative", r.directional_derivative},
                      {"generator_curvature", r.generator_curvature}, {"radial_curvature", r.radial_curvature},
                      {"smallest_eigenvalue", r.smallest_eigenvalue}, {"largest_eigenvalue", r.largest_eigenvalue},
                      {"at_minimum", r.at_minimum}});
    }
    const bool flat = std::abs(last.directional_derivative) <= 1e-8;
    const bool soft = last.generator_curvature <= last.radial_curvature / 100.0;
    pass = flat && soft && monotone;
    write_text(out / "goldstone.csv", csv.str());
    report = {{"sweep", rows}, {"directional_derivative_ok", flat}, {"curvature_ratio_ok", soft},
              {"non_increasing", monotone}, {"pass", pass}};
    std::cout << "goldstone: derivative " << (flat ? "ok" : "FAILED") << ", ratio " << (soft ? "ok" : "FAILED")
              << ", monotone " << (monotone ? "ok" : "FAILED") << '\n';
  } else if (what == "sampled-loss") {
    const ModelFile m = probe_model(c);
    const Dataset augmented = load_augmented(c);
    const auto parts = split(augmented, c.test_fraction, c.seed);
    const auto group = lab::inversion_group();
    const auto r = lab::sampled_loss_expectation(m.mlp, m.feature_map, parts.test, group, c.mu, c.trials, c.seed);
    if (c.mu == 1.0) {
      pass = std::all_of(r.trial_losses.begin(), r.trial_losses.end(), [&](double t) { return t == r.full_loss; });
    } else {
      pass = std::abs(r.z_score) <= 3.0;
    }
    report = {{"mu", r.mu}, {"trials", r.trials}, {"full_loss", r.full_loss}, {"mean", r.mean},
              {"std_error", r.std_error}, {"ratio", r.ratio}, {"z_score", r.z_score}, {"pass", pass}};
    std::cout << "sampled-loss mu=" << r.mu << " ratio " << r.ratio << " z " << r.z_score << '\n';
  } else {
    throw UsageError("unknown probe " + what);
  }
  const std::string file = "probe_" + what + ".json";
  write_json(report, out / file);
  write_manifest(out, "probe " + what, c, {file});
  return pass ? kExitOk : kExitInvariant;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symmetry-constrained digit classification: training, tables and probes"};
  app.require_subcommand(1);
  RunConfig c;
  std::string seeds_text;
  std::uint64_t perm_seed = 0;
  std::map<std::string, Setting> settings;

  const auto common = [&](CLI::App* sub, bool training) {
    auto reg = [&](const std::string& key, CLI::Option* opt, std::function<void(const std::string&)> assign) {
      auto& s = settings[key];
      s.options.push_back(opt);
      s.assign = std::move(assign);
    };
    reg("data", sub->add_option("--data", c.data, "optdigits CSV file"), [&](const std::string& v) { c.data = v; });
    reg("out", sub->add_option("--out", c.out, "output directory"), [&](const std::string& v) { c.out = v; });
    reg("seed", sub->add_option("--seed", c.seed, "seed for init, shuffling and the split"),
        [&](const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v); });
    reg("test_fraction", sub->add_option("--test-fraction", c.test_fraction, "fraction of origin groups held out"),
        [&](const std::string& v) { c.test_fraction = parse_number<double>("test_fraction", v); });
    reg("config", sub->add_option("--config", c.config, "flat key=value file; flags override it"),
        [](const std::string&) {});
    if (!training) return;
    reg("bias", sub->add_flag("--bias,!--no-bias", c.use_bias, "use bias terms (default: none)"),
        [&](const std::string& v) { c.use_bias = parse_bool(v); });
    reg("features", sub->add_option("--features", c.features, "identity|square|neighbor|perm")
                        ->check(CLI::IsMember({"identity", "square", "neighbor", "perm"})),
        [&](const std::string& v) { c.features = v; });
    reg("perm_seed", sub->add_option("--perm-seed", perm_seed, "permutation seed for perm features"),
        [&](const std::string& v) { c.perm_seed = parse_number<std::uint64_t>("perm_seed", v); });
    reg("epochs", sub->add_option("--epochs", c.epochs)->check(CLI::PositiveNumber),
        [&](const std::string& v) { c.epochs = parse_number<int>("epochs", v); });
    reg("lr", sub->add_option("--lr", c.lr, "learning rate"),
        [&](const std::string& v) { c.lr = parse_number<double>("lr", v); });
    reg("batch", sub->add_option("--batch", c.batch, "mini-batch size")->check(CLI::PositiveNumber),
        [&](const std::string& v) { c.batch = parse_number<int>("batch", v); });
    reg("momentum", sub->add_option("--momentum", c.momentum),
        [&](const std::string& v) { c.momentum = parse_number<double>("momentum", v); });
  };

  auto* data = app.add_subcommand("data", "fetch, convert or summarize the digit corpus");
  std::string data_action;
  data->add_option("action", data_action, "fetch|convert|stats")
      ->required()
      ->check(CLI::IsMember({"fetch", "convert", "stats"}));
  common(data, false);
  data->add_option("--in", c.input, "input file for convert");
  data->add_option("--url", c.url, "download location for fetch");

  auto* train = app.add_subcommand("train", "train one model and evaluate it on X_test and -X_test");
  common(train, true);
  train->add_flag("--symmetrize", c.symmetrize, "train on X_train plus its inversion");
  settings["symmetrize"] = {{train->get_option("--symmetrize")}, [&](const std::string& v) { c.symmetrize = parse_bool(v); }};

  auto* eval = app.add_subcommand("eval", "evaluate a saved model");
  common(eval, false);
  eval->add_option("--model", c.model, "model JSON file")->required();
  eval->add_flag("--invert", c.invert, "evaluate on the inverted test set");

  auto* reproduce = app.add_subcommand("reproduce", "regenerate the accuracy tables or the sample figure");
  std::string reproduce_what;
  reproduce->add_option("what", reproduce_what, "table1|table2|figure1|all")
      ->required()
      ->check(CLI::IsMember({"table1", "table2", "figure1", "all"}));
  common(reproduce, true);
  settings["seeds"].options.push_back(reproduce->add_option("--seeds", seeds_text, "comma-separated seed list"));
  settings["seeds"].assign = [&](const std::string& v) { seeds_text = v; };
  settings["jobs"].options.push_back(reproduce->add_option("--jobs", c.jobs, "parallel training jobs")->check(CLI::PositiveNumber));
  settings["jobs"].assign = [&](const std::string& v) { c.jobs = parse_number<int>("jobs", v); };

  auto* probe = app.add_subcommand("probe", "symmetry probes of the training utility");
  std::string probe_what;
  probe->add_option("what", probe_what, "weight-flip|orbit|goldstone|sampled-loss")
      ->required()
      ->check(CLI::IsMember({"weight-flip", "orbit", "goldstone", "sampled-loss"}));
  common(probe, false);
  probe->add_option("--model", c.model, "model JSON (default: random bias-free model)");
  settings["n"].options.push_back(probe->add_option("--n", c.group_order, "order of the cyclic rotation group")->check(CLI::Range(2, 100000)));
  settings["n"].assign = [&](const std::string& v) { c.group_order = parse_number<int>("n", v); };
  settings["mu"].options.push_back(probe->add_option("--mu", c.mu, "inclusion probability"));
  settings["mu"].assign = [&](const std::string& v) { c.mu = parse_number<double>("mu", v); };
  settings["trials"].options.push_back(probe->add_option("--trials", c.trials, "Monte Carlo trials"));
  settings["trials"].assign = [&](const std::string& v) { c.trials = parse_number<int>("trials", v); };

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (!c.config.empty()) {
      for (const auto& [key, value] : read_config_file(c.config)) {
        const auto it = settings.find(key);
        if (it == settings.end()) throw UsageError("unknown config key '" + key + "'");
        const bool given = std::any_of(it->second.options.begin(), it->second.options.end(),
                                       [](const CLI::Option* o) { return o->count() > 0; });
        if (!given) it->second.assign(value);
      }
    }
    for (auto* sub : {train, reproduce}) {
      if (sub->parsed() && sub->get_option("--perm-seed")->count() > 0) c.perm_seed = perm_seed;
    }
    if (!seeds_text.empty()) c.seeds = parse_seed_list(seeds_text);
    if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) throw UsageError("--test-fraction must be in (0, 1)");

    if (data->parsed()) {
      if (data_action == "stats") return cmd_data_stats(c);
      if (data_action == "convert") return cmd_data_convert(c);
      return cmd_data_fetch(c);
    }
    if (train->parsed()) return cmd_train(c);
    if (eval->parsed()) {
      return cmd_eval(c, eval->get_option("--seed")->count() > 0, eval->get_option("--test-fraction")->count() > 0);
    }
    if (reproduce->parsed()) return cmd_reproduce(c, reproduce_what);
    if (probe->parsed()) return cmd_probe(c, probe_what);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const PreconditionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ShapeError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvariant;
  }
  return kExitUsage;
}
