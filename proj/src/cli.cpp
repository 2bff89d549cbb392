#include "featspace/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <sstream>

#include "featspace/config.hpp"
#include "featspace/division.hpp"
#include "featspace/fusion.hpp"
#include "featspace/io.hpp"
#include "featspace/manifest.hpp"
#include "featspace/metrics.hpp"
#include "featspace/sensitivity.hpp"
#include "featspace/toytrain.hpp"

namespace featspace {

namespace {

using json = nlohmann::ordered_json;

// Everything a subcommand reports back besides its result.
struct Context {
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::vector<std::string> inputs;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> outputs;
  json params = json::object();
  std::string notes;

  std::string input(const std::string& path) {
    inputs.push_back(path);
    return path;
  }
};

struct Output {
  json result = json::object();
  std::string table;
};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + num(v[i]);
  return s;
}

// Left-aligned text columns separated by two spaces.
class TextTable {
 public:
  explicit TextTable(std::vector<std::string> header) { rows_.push_back(std::move(header)); }
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

  std::string str() const {
    std::vector<std::size_t> width;
    for (const auto& r : rows_) {
      width.resize(std::max(width.size(), r.size()), 0);
      for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
    }
    std::ostringstream os;
    for (const auto& r : rows_) {
      std::string line;
      for (std::size_t c = 0; c < r.size(); ++c) {
        line += r[c];
        if (c + 1 < r.size()) line += std::string(width[c] - r[c].size() + 2, ' ');
      }
      os << line << '\n';
    }
    return os.str();
  }

 private:
  std::vector<std::vector<std::string>> rows_;
};

json moments_json(const MomentSummary& m) { return {{"mean", m.mean}, {"stddev", m.stddev}}; }

json split_metrics_json(const SplitMetrics& m) {
  return {{"class_sizes", m.class_sizes}, {"centrality", m.centrality}, {"nearest", m.nearest},
          {"intra", m.intra},             {"inter", m.inter},           {"separability", m.separability}};
}

json metrics_report_json(const MetricsReport& r) {
  json j;
  j["divisor"] = r.divisor == PairDivisor::Literal ? "literal" : "exact";
  j["train"] = split_metrics_json(r.train);
  if (r.test) j["test"] = split_metrics_json(*r.test);
  if (r.ratio) {
    j["centrality_ratio"] = r.ratio->centrality_ratio;
    j["separability_ratio"] = r.ratio->separability_ratio;
    j["ratio_product"] = r.ratio->centrality_ratio * r.ratio->separability_ratio;
  }
  if (r.loss_ratio) j["loss_ratio"] = *r.loss_ratio;
  return j;
}

json distance_matrix_json(const DistanceMatrix& d) {
  json rows = json::array();
  for (std::size_t r = 0; r < d.values.rows(); ++r) {
    rows.push_back(std::vector<double>(d.values.row(r).begin(), d.values.row(r).end()));
  }
  return {{"order", d.order}, {"labels", d.labels}, {"values", rows}};
}

json head_summary(const ClassifierHead& head) {
  return {{"num_classes", head.num_classes()}, {"dim", head.dim()}, {"has_bias", head.has_bias()},
          {"class_names", head.class_names()}};
}

// One feature from --feature, or row --row of --features.
std::vector<double> pick_feature(Context& ctx, const std::vector<double>& inline_feature, const std::string& path,
                                 std::size_t row) {
  if (!inline_feature.empty()) return inline_feature;
  require(!path.empty(), ErrorCode::InvalidArgument, "give either --feature or --features");
  const LabeledFeatureSet set = io::read_feature_set(ctx.input(path));
  require(row < set.size(), ErrorCode::InvalidArgument,
          "--row " + std::to_string(row) + " is out of range for " + std::to_string(set.size()) + " rows");
  return {set.vectors.row(row).begin(), set.vectors.row(row).end()};
}

// ---------------------------------------------------------------------------

struct DivideArgs {
  std::string head, features, tie = "report";
  std::size_t samples = 1000;
  bool nonnegative = false;
};

Output run_divide(Context& ctx, const DivideArgs& a) {
  const ClassifierHead head = io::read_head(ctx.input(a.head));
  Output o;
  o.result["head"] = head_summary(head);

  const DifferentialVectorSet diffs = differential_vectors(head);
  json pairs = json::array();
  for (const auto& p : diffs.pairs()) pairs.push_back({{"i", p.i}, {"j", p.j}, {"w", p.w}});
  o.result["differential_vectors"] = {{"count", diffs.count()}, {"pairs", pairs}};

  std::ostringstream t;
  t << "classes " << head.num_classes() << ", dim " << head.dim() << (head.has_bias() ? ", with bias" : "")
    << "\ndifferential vectors: " << diffs.count() << "\n";

  if (head.num_classes() >= 3) {
    const ClassLocusReport locus = locus_angles(head);
    json classes = json::array();
    TextTable tt({"class", "mean_deg", "std_deg", "angles_deg"});
    for (const auto& c : locus.classes) {
      json pr = json::array();
      for (const auto& [j, k] : c.pairs) pr.push_back({j, k});
      classes.push_back({{"class", c.class_index},
                         {"pairs", pr},
                         {"angles_deg", c.angles_deg},
                         {"mean", c.mean},
                         {"stddev", c.stddev}});
      tt.add({head.class_names()[c.class_index], num(c.mean), num(c.stddev), join(c.angles_deg)});
    }
    o.result["locus_angles"] = classes;
    t << "\n" << tt.str();
  }

  const ConvexityReport conv = convexity_check(head, a.samples, ctx.seed);
  ctx.seeds.push_back(ctx.seed);
  o.result["convexity"] = {{"samples", a.samples},
                           {"pairs", conv.pairs},
                           {"interior_points", conv.interior_points},
                           {"violations", conv.violations},
                           {"regions_observed", conv.regions_observed},
                           {"skipped_pairs", conv.skipped_pairs}};
  t << "\nconvexity: " << conv.regions_observed << " regions observed, " << conv.pairs << " pairs, "
    << conv.interior_points << " interior points, " << conv.violations << " violations\n";

  if (!a.features.empty()) {
    require(a.tie == "report" || a.tie == "lowest", ErrorCode::InvalidArgument, "--tie must be report or lowest");
    const LabeledFeatureSet set = io::read_feature_set(ctx.input(a.features));
    RegionOptions opts;
    opts.tie = a.tie == "lowest" ? TiePolicy::LowestIndex : TiePolicy::Report;
    opts.domain = a.nonnegative ? InputDomain::NonNegative : InputDomain::Any;
    const RegionClassifier rc(head);
    json regions = json::array();
    std::size_t ties = 0;
    std::size_t agree = 0;
    for (std::size_t r = 0; r < set.size(); ++r) {
      try {
        const std::size_t region = rc.region_of(set.vectors.row(r), opts);
        regions.push_back(region);
        if (region == set.labels[r]) ++agree;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::BoundaryTie) throw;
        regions.push_back(nullptr);
        ++ties;
      }
    }
    o.result["membership"] = {{"regions", regions}, {"boundary_ties", ties}, {"label_agreement", agree}};
    t << "membership: " << set.size() << " rows, " << agree << " in the region of their label, " << ties
      << " on a boundary\n";
  }
  ctx.params = {{"head", a.head}, {"features", a.features}, {"samples", a.samples}, {"tie", a.tie},
                {"nonnegative", a.nonnegative}};
  o.table = t.str();
  return o;
}

struct SensitivityArgs {
  std::string head, features;
  std::vector<double> feature;
  bool fold_bias = false;
  int reference_class = -1;
};

Output run_sensitivity(Context& ctx, const SensitivityArgs& a) {
  const ClassifierHead head = io::read_head(ctx.input(a.head));
  SensitivityOptions opts;
  opts.fold_out_bias = a.fold_bias;
  if (a.reference_class >= 0) opts.reference_class = static_cast<std::size_t>(a.reference_class);

  std::vector<std::vector<double>> feats;
  if (!a.feature.empty()) {
    feats.push_back(a.feature);
  } else {
    require(!a.features.empty(), ErrorCode::InvalidArgument, "give either --feature or --features");
    const LabeledFeatureSet set = io::read_feature_set(ctx.input(a.features));
    for (std::size_t r = 0; r < set.size(); ++r) feats.emplace_back(set.vectors.row(r).begin(), set.vectors.row(r).end());
  }

  Output o;
  json rows = json::array();
  TextTable tt({"row", "class", "R", "theta", "S_i", "dS_i/dR", "dS_i/dtheta"});
  std::vector<std::string> warnings;
  for (std::size_t r = 0; r < feats.size(); ++r) {
    if (norm(feats[r]) == 0.0) {
      rows.push_back({{"row", r}, {"zero", true}});
      tt.add({std::to_string(r), "-", "0", "-", "-", "-", "-"});
      continue;
    }
    const SensitivityResult s = sensitivity(feats[r], head, opts);
    if (warnings.empty()) warnings = s.warnings;
    rows.push_back({{"row", r},
                    {"prevailing", s.prevailing},
                    {"radius", s.radius},
                    {"theta", s.theta},
                    {"theta_degenerate", s.theta_degenerate},
                    {"S", s.S},
                    {"dS_dR", s.dS_dR},
                    {"dS_dtheta", s.dS_dtheta}});
    tt.add({std::to_string(r), head.class_names()[s.prevailing], num(s.radius),
            s.theta_degenerate ? "collinear" : num(s.theta), num(s.S[s.prevailing]), num(s.dS_dR[s.prevailing]),
            num(s.dS_dtheta[s.prevailing])});
  }
  o.result["features"] = rows;
  o.result["warnings"] = warnings;
  std::ostringstream t;
  t << tt.str();
  try {
    const GradientMagnitudeSummary g = gradient_magnitude_summary(feats, head, opts);
    o.result["summary"] = {{"abs_dS_dR", moments_json(g.abs_dS_dR)},
                           {"abs_dS_dtheta", moments_json(g.abs_dS_dtheta)},
                           {"used", g.used},
                           {"skipped_collinear", g.skipped_collinear},
                           {"skipped_zero", g.skipped_zero}};
    t << "\nmean |dS/dR| " << num(g.abs_dS_dR.mean) << " (std " << num(g.abs_dS_dR.stddev) << "), mean |dS/dtheta| "
      << num(g.abs_dS_dtheta.mean) << " (std " << num(g.abs_dS_dtheta.stddev) << ") over " << g.used
      << " features\n";
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyBatch) throw;
    o.result["summary"] = nullptr;
  }
  for (const auto& w : warnings) t << "warning: " << w << "\n";
  ctx.params = {{"head", a.head},           {"features", a.features},          {"feature", a.feature},
                {"fold_bias", a.fold_bias}, {"reference_class", a.reference_class}};
  o.table = t.str();
  return o;
}

struct SurfaceArgs {
  std::string head, features;
  std::vector<double> feature;
  std::size_t row = 0;
  bool fold_bias = false;
  double theta_min = -std::numbers::pi, theta_max = std::numbers::pi;
  std::size_t theta_steps = 73;
  double radius_min = 0.0, radius_max = 0.0;  // 0: relative to the feature norm
  std::size_t radius_steps = 21;
};

Output run_surface(Context& ctx, const SurfaceArgs& a) {
  const ClassifierHead head = io::read_head(ctx.input(a.head));
  const std::vector<double> f = pick_feature(ctx, a.feature, a.features, a.row);
  const double r0 = norm(f);
  SurfaceGrid grid{a.theta_min, a.theta_max, a.theta_steps, a.radius_min > 0.0 ? a.radius_min : 0.1 * r0,
                   a.radius_max > 0.0 ? a.radius_max : 2.0 * r0, a.radius_steps};
  SensitivityOptions opts;
  opts.fold_out_bias = a.fold_bias;
  const ResponseSurface s = response_surface(f, head, grid, opts);

  Output o;
  json proj = json::array();
  for (const auto& p : s.projections) {
    proj.push_back({{"class", p.class_index}, {"norm_parallel", p.norm_parallel}, {"phase", p.phase}});
  }
  auto cube = [&](bool softmax_values) {
    json classes = json::array();
    for (std::size_t c = 0; c < s.num_classes; ++c) {
      json thetas = json::array();
      for (std::size_t t = 0; t < s.theta_grid.size(); ++t) {
        std::vector<double> row;
        for (std::size_t r = 0; r < s.radius_grid.size(); ++r) row.push_back(softmax_values ? s.s(c, t, r) : s.z(c, t, r));
        thetas.push_back(row);
      }
      classes.push_back(thetas);
    }
    return classes;
  };
  o.result["prevailing"] = s.prevailing;
  o.result["projections"] = proj;
  o.result["theta_grid"] = s.theta_grid;
  o.result["radius_grid"] = s.radius_grid;
  o.result["z"] = cube(false);
  o.result["S"] = cube(true);

  std::ostringstream t;
  t << "prevailing class " << head.class_names()[s.prevailing] << "; grid " << s.theta_grid.size() << " theta x "
    << s.radius_grid.size() << " R\n";
  TextTable pt({"class", "|w_par|", "phase"});
  for (const auto& p : s.projections) pt.add({head.class_names()[p.class_index], num(p.norm_parallel), num(p.phase)});
  t << pt.str() << "\nS of the prevailing class (rows theta, columns R)\n";
  std::vector<std::string> header{"theta\\R"};
  for (double r : s.radius_grid) header.push_back(num(r));
  TextTable st(header);
  for (std::size_t ti = 0; ti < s.theta_grid.size(); ++ti) {
    std::vector<std::string> row{num(s.theta_grid[ti])};
    for (std::size_t ri = 0; ri < s.radius_grid.size(); ++ri) row.push_back(num(s.s(s.prevailing, ti, ri)));
    st.add(row);
  }
  t << st.str();
  ctx.params = {{"head", a.head},
                {"features", a.features},
                {"feature", a.feature},
                {"row", a.row},
                {"grid",
                 {{"theta_min", grid.theta_min},
                  {"theta_max", grid.theta_max},
                  {"theta_steps", grid.theta_steps},
                  {"radius_min", grid.radius_min},
                  {"radius_max", grid.radius_max},
                  {"radius_steps", grid.radius_steps}}}};
  o.table = t.str();
  return o;
}

struct MetricsArgs {
  std::string train, test, divisor = "literal";
  double loss_ratio = 0.0;
  bool distance_matrix = false;
  bool drop_zero = false;
};

Output run_metrics(Context& ctx, const MetricsArgs& a) {
  require(a.divisor == "literal" || a.divisor == "exact", ErrorCode::InvalidArgument,
          "--divisor must be literal or exact");
  LabeledFeatureSet train = io::read_feature_set(ctx.input(a.train));
  std::optional<LabeledFeatureSet> test;
  if (!a.test.empty()) {
    test = io::read_feature_set(ctx.input(a.test), train.num_classes);
    test->split = Split::Test;
  }
  Output o;
  if (a.drop_zero) {
    json dropped = {{"train", drop_zero_vectors(train)}};
    if (test) dropped["test"] = drop_zero_vectors(*test);
    o.result["dropped_zero_vectors"] = dropped;
  }
  std::optional<double> lr;
  if (a.loss_ratio > 0.0) lr = a.loss_ratio;
  const PairDivisor div = a.divisor == "exact" ? PairDivisor::ExactMean : PairDivisor::Literal;
  const MetricsReport rep = metrics_report(train, test ? &*test : nullptr, lr, div);
  o.result["metrics"] = metrics_report_json(rep);

  std::ostringstream t;
  std::vector<std::string> header{"class", "C_train", "S_train"};
  if (rep.test) header.insert(header.end(), {"C_test", "S_test"});
  TextTable tt(header);
  for (std::size_t c = 0; c < rep.train.centrality.size(); ++c) {
    std::vector<std::string> row{std::to_string(c), num(rep.train.centrality[c]), num(rep.train.separability[c])};
    if (rep.test) row.insert(row.end(), {num(rep.test->centrality[c]), num(rep.test->separability[c])});
    tt.add(row);
  }
  t << tt.str();
  if (rep.ratio) {
    t << "\nC_R " << num(rep.ratio->centrality_ratio) << "  S_R " << num(rep.ratio->separability_ratio)
      << "  C_R*S_R " << num(rep.ratio->centrality_ratio * rep.ratio->separability_ratio) << "\n";
  }
  if (rep.loss_ratio) t << "L_R " << num(*rep.loss_ratio) << "\n";
  if (a.distance_matrix) {
    json dm = {{"train", distance_matrix_json(cosine_distance_matrix(train))}};
    if (test) dm["test"] = distance_matrix_json(cosine_distance_matrix(*test));
    o.result["distance_matrix"] = dm;
    t << "distance matrices: see the record output\n";
  }
  ctx.params = {{"train", a.train},         {"test", a.test},
                {"divisor", a.divisor},     {"loss_ratio", a.loss_ratio},
                {"distance_matrix", a.distance_matrix}, {"drop_zero", a.drop_zero}};
  o.table = t.str();
  return o;
}

struct KnnArgs {
  std::string features, test;
  std::vector<std::size_t> k{3, 5, 7, 9, 11, 13, 15, 17, 19, 21, 23, 25, 27, 29, 31, 33, 35, 37, 39};
};

Output run_knn(Context& ctx, const KnnArgs& a) {
  const LabeledFeatureSet set = io::read_feature_set(ctx.input(a.features));
  const auto acc = knn_angular_eval(set, a.k);
  std::vector<KnnAccuracy> test_acc;
  if (!a.test.empty()) {
    const LabeledFeatureSet test = io::read_feature_set(ctx.input(a.test), set.num_classes);
    test_acc = knn_angular_eval(test, a.k);
  }
  Output o;
  json rows = json::array();
  std::vector<std::string> header{"k", "accuracy"};
  if (!test_acc.empty()) header.insert(header.end(), {"test_accuracy", "gap"});
  TextTable tt(header);
  for (std::size_t i = 0; i < acc.size(); ++i) {
    json r = {{"k", acc[i].k}, {"accuracy", acc[i].accuracy}};
    std::vector<std::string> row{std::to_string(acc[i].k), num(acc[i].accuracy)};
    if (!test_acc.empty()) {
      r["test_accuracy"] = test_acc[i].accuracy;
      r["gap"] = acc[i].accuracy - test_acc[i].accuracy;
      row.insert(row.end(), {num(test_acc[i].accuracy), num(acc[i].accuracy - test_acc[i].accuracy)});
    }
    rows.push_back(r);
    tt.add(row);
  }
  o.result["knn"] = rows;
  ctx.params = {{"features", a.features}, {"test", a.test}, {"k", a.k}};
  o.table = tt.str();
  return o;
}

struct DivArgs {
  std::string clouds;
  std::vector<std::size_t> parts;
  double fraction = 1.0;
};

Output run_div(Context& ctx, const DivArgs& a) {
  const auto clouds = io::read_point_clouds(ctx.input(a.clouds));
  std::vector<std::size_t> parts = a.parts;
  if (parts.empty()) {
    for (const auto& c : clouds) parts.insert(parts.end(), c.part_labels.begin(), c.part_labels.end());
    std::sort(parts.begin(), parts.end());
    parts.erase(std::unique(parts.begin(), parts.end()), parts.end());
  }
  DivOptions opts{a.fraction, ctx.seed};
  if (a.fraction < 1.0) ctx.seeds.push_back(ctx.seed);
  Output o;
  json rows = json::array();
  TextTable tt({"part", "DIV", "presence", "instances"});
  for (std::size_t p : parts) {
    const DivResult r = div_statistic(clouds, p, opts);
    rows.push_back({{"part", p},
                    {"div", r.div},
                    {"presence", r.presence},
                    {"instances_with_class", r.instances_with_class},
                    {"instances_considered", r.instances_considered}});
    tt.add({std::to_string(p), num(r.div), num(r.presence),
            std::to_string(r.instances_with_class) + "/" + std::to_string(r.instances_considered)});
  }
  o.result["parts"] = rows;
  ctx.params = {{"clouds", a.clouds}, {"parts", a.parts}, {"fraction", a.fraction}};
  o.table = tt.str();
  return o;
}

struct CorrelateArgs {
  std::string table, x = "C_R", y = "S_R", target = "L_R";
};

Output run_correlate(Context& ctx, const CorrelateArgs& a) {
  const io::Table table = io::read_table(ctx.input(a.table));
  std::vector<double> metric = table.column(a.x);
  if (!a.y.empty()) {
    const std::vector<double> y = table.column(a.y);
    for (std::size_t i = 0; i < metric.size(); ++i) metric[i] *= y[i];
  }
  const std::vector<double> target = table.column(a.target);
  const double rho = pearson(metric, target);
  const std::vector<double> zm = zscore(metric);
  const std::vector<double> zt = zscore(target);

  Output o;
  const std::string name = a.y.empty() ? a.x : a.x + "*" + a.y;
  o.result["metric"] = name;
  o.result["target"] = a.target;
  o.result["n"] = metric.size();
  o.result["pearson"] = rho;
  o.result["values"] = metric;
  o.result["zscore_metric"] = zm;
  o.result["zscore_target"] = zt;

  TextTable tt({"row", name, a.target, "z(" + name + ")", "z(" + a.target + ")"});
  for (std::size_t i = 0; i < metric.size(); ++i) {
    tt.add({std::to_string(i), num(metric[i]), num(target[i]), num(zm[i]), num(zt[i])});
  }
  char rho_text[64];
  std::snprintf(rho_text, sizeof rho_text, "rho = %.4f\n", rho);
  o.table = tt.str() + "\n" + rho_text;
  ctx.params = {{"table", a.table}, {"x", a.x}, {"y", a.y}, {"target", a.target}};
  return o;
}

struct TrainArgs {
  std::string config, export_dir, loss;
  double scale = 0.0;
  std::size_t epochs = 0;
  double learning_rate = -1.0;
};

Output run_train(Context& ctx, const TrainArgs& a) {
  TrainExperiment e = a.config.empty() ? TrainExperiment{} : train_experiment_from_json(load_json(ctx.input(a.config)));
  if (a.config.empty()) {
    e.model.input_dim = e.data.input_dim;
    e.model.num_classes = e.data.num_classes;
  }
  if (ctx.seed_given) e.data.seed = e.train.seed = ctx.seed;
  if (!a.loss.empty()) {
    require(a.loss == "softmax" || a.loss == "l2_softmax", ErrorCode::InvalidArgument,
            "--loss must be softmax or l2_softmax");
    e.train.loss = a.loss == "softmax" ? LossKind::Softmax : LossKind::L2Softmax;
  }
  if (a.scale > 0.0) e.train.scale = a.scale;
  if (a.epochs > 0) e.train.epochs = a.epochs;
  if (a.learning_rate >= 0.0) e.train.learning_rate = a.learning_rate;
  validate(e.train);
  ctx.seeds = {e.data.seed, e.train.seed};

  const Dataset data = make_synthetic_dataset(e.data);
  const TrainResult res = train(e.model, e.train, data.train, &data.test);

  Output o;
  json epochs = json::array();
  TextTable tt({"epoch", "train_loss", "train_acc", "test_loss", "test_acc", "|dS/dR|", "|dS/dtheta|", "snapshot"});
  for (const auto& r : res.trace.epochs) {
    epochs.push_back({{"epoch", r.epoch},
                      {"train_loss", r.train_loss},
                      {"train_accuracy", r.train_accuracy},
                      {"test_loss", r.test_loss.value_or(std::nan(""))},
                      {"test_accuracy", r.test_accuracy.value_or(std::nan(""))},
                      {"abs_dS_dR", moments_json(r.probe.abs_dS_dR)},
                      {"abs_dS_dtheta", moments_json(r.probe.abs_dS_dtheta)},
                      {"probe_used", r.probe.used},
                      {"probe_skipped_collinear", r.probe.skipped_collinear},
                      {"probe_skipped_zero", r.probe.skipped_zero},
                      {"snapshot_id", r.snapshot_id}});
    tt.add({std::to_string(r.epoch), num(r.train_loss), num(r.train_accuracy), num(r.test_loss.value_or(0.0)),
            num(r.test_accuracy.value_or(0.0)), num(r.probe.abs_dS_dR.mean), num(r.probe.abs_dS_dtheta.mean),
            r.snapshot_id});
  }
  o.result["trace"] = {{"probe_size", res.trace.probe_size}, {"steps", res.trace.steps}, {"epochs", epochs}};
  const auto lr = res.trace.loss_ratio();
  if (lr) o.result["loss_ratio"] = *lr;

  const FeatureExport ftrain = export_features(res.model, e.train, data.train);
  const FeatureExport ftest = export_features(res.model, e.train, data.test);
  LabeledFeatureSet mt = ftrain.features;
  LabeledFeatureSet ms = ftest.features;
  drop_zero_vectors(mt);
  drop_zero_vectors(ms);
  try {
    o.result["metrics"] = metrics_report_json(metrics_report(mt, &ms, lr));
  } catch (const Error& err) {
    o.result["metrics_error"] = err.what();
  }
  o.result["mean_intra_class_distance"] = nullptr;
  try {
    o.result["mean_intra_class_distance"] = mean_intra_class_distance(mt);
  } catch (const Error&) {
  }

  if (!a.export_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(a.export_dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create '" + a.export_dir + "': " + ec.message());
    const std::string base = a.export_dir + "/";
    io::write_feature_set(base + "train_features.csv", ftrain.features);
    io::write_feature_set(base + "test_features.csv", ftest.features);
    io::write_head(base + "head.csv", ftrain.head);
    const json meta = {{"loss", to_string(ftrain.loss)},
                       {"scale", ftrain.scale},
                       {"feature_dim", ftrain.features.dim()},
                       {"final_snapshot", res.trace.epochs.back().snapshot_id}};
    io::write_file(base + "export.json", meta.dump(2) + "\n");
    for (const char* f : {"train_features.csv", "test_features.csv", "head.csv", "export.json"}) {
      ctx.outputs.push_back(base + f);
    }
    o.result["export"] = meta;
  }

  ctx.params = to_json(e);
  std::ostringstream t;
  t << tt.str();
  if (lr) t << "\nL_R " << num(*lr) << "\n";
  if (o.result.contains("metrics") && o.result["metrics"].contains("centrality_ratio")) {
    t << "C_R " << num(o.result["metrics"]["centrality_ratio"].get<double>()) << "  S_R "
      << num(o.result["metrics"]["separability_ratio"].get<double>()) << "\n";
  }
  o.table = t.str();
  return o;
}

struct FusionArgs {
  std::string config, strategy;
  std::size_t seeds = 10;
  bool details = false;
};

Output run_fusion(Context& ctx, const FusionArgs& a) {
  FusionExperimentConfig cfg = fusion_config_from_json(load_json(ctx.input(a.config)));
  const std::uint64_t first = ctx.seed_given ? ctx.seed : cfg.seed;
  require(a.seeds >= 1, ErrorCode::InvalidArgument, "--seeds must be >= 1");
  std::vector<FusionStrategy> strategies{FusionStrategy::S11, FusionStrategy::S12, FusionStrategy::Saa};
  if (!a.strategy.empty()) strategies = {parse_strategy(a.strategy)};

  Output o;
  std::vector<std::string> header{"seed"};
  for (auto s : strategies) header.push_back(to_string(s));
  TextTable tt(header);
  std::vector<double> mean(strategies.size(), 0.0);
  json runs = json::array();
  for (std::size_t k = 0; k < a.seeds; ++k) {
    cfg.seed = first + k;
    ctx.seeds.push_back(cfg.seed);
    const FusionRun run = run_strategies(cfg, strategies);
    json jr = {{"seed", cfg.seed}};
    std::vector<std::string> row{std::to_string(cfg.seed)};
    json acc = json::object();
    for (std::size_t i = 0; i < run.outcomes.size(); ++i) {
      const auto& out = run.outcomes[i];
      acc[to_string(out.strategy)] = out.held_out_accuracy;
      mean[i] += out.held_out_accuracy / static_cast<double>(a.seeds);
      row.push_back(num(out.held_out_accuracy));
    }
    jr["held_out_accuracy"] = acc;
    if (a.details) {
      json ex = json::array();
      for (const auto& out : run.outcomes) {
        for (const auto& r : out.extractors) {
          json e = {{"strategy", to_string(out.strategy)},
                    {"modality", r.modality},
                    {"training_split", r.training_split},
                    {"held_out_accuracy", r.held_out_accuracy}};
          if (r.metrics) e["metrics"] = metrics_report_json(*r.metrics);
          if (!r.metrics_error.empty()) e["metrics_error"] = r.metrics_error;
          ex.push_back(e);
        }
      }
      jr["extractors"] = ex;
    }
    runs.push_back(jr);
    tt.add(row);
  }
  std::vector<std::string> mrow{"mean"};
  json jm = json::object();
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    mrow.push_back(num(mean[i]));
    jm[to_string(strategies[i])] = mean[i];
  }
  tt.add(mrow);
  o.result["runs"] = runs;
  o.result["mean_held_out_accuracy"] = jm;
  cfg.seed = first;
  ctx.params = to_json(cfg);
  ctx.params["seeds"] = a.seeds;
  ctx.notes = "fused features are the raw V activations followed by the raw A activations";
  o.table = tt.str();
  return o;
}

struct ShatterArgs {
  std::size_t dim = 2;
};

Output run_shatter(Context& ctx, const ShatterArgs& a) {
  const ShatterReport r = shattering_check(a.dim, ctx.seed);
  ctx.seeds.push_back(ctx.seed);
  auto rows = [](const Matrix& m) {
    json j = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) j.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
    return j;
  };
  Output o;
  o.result = {{"dimension", r.dimension},
              {"attempts", r.attempts},
              {"points", rows(r.points)},
              {"dichotomies", r.dichotomies},
              {"separable_dichotomies", r.separable_dichotomies},
              {"shattered_n_plus_1", r.shattered_n_plus_1},
              {"witness", rows(r.witness)},
              {"failing_dichotomy", r.failing_dichotomy},
              {"witness_has_inseparable_dichotomy", r.witness_dichotomy_failure_n_plus_2}};
  std::ostringstream t;
  t << "dimension " << r.dimension << ": " << r.separable_dichotomies << "/" << r.dichotomies << " dichotomies of "
    << r.points.rows() << " points separable (" << (r.shattered_n_plus_1 ? "shattered" : "not shattered") << ", "
    << r.attempts << " attempt" << (r.attempts == 1 ? "" : "s") << ")\n"
    << r.witness.rows() << "-point witness: "
    << (r.witness_dichotomy_failure_n_plus_2 ? "inseparable dichotomy found" : "no inseparable dichotomy found");
  if (r.witness_dichotomy_failure_n_plus_2) {
    t << " (labels";
    for (int l : r.failing_dichotomy) t << ' ' << (l > 0 ? '+' : '-');
    t << ")";
  }
  t << "\n";
  ctx.params = {{"dim", a.dim}};
  o.table = t.str();
  return o;
}

// ---------------------------------------------------------------------------

bool is_flag(const std::string& arg, const std::string& name) {
  return arg == name || arg.rfind(name + "=", 0) == 0;
}

// Drops the flags that only say where results go, keeping what determines them.
std::vector<std::string> replayable_args(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    bool dropped = false;
    for (const char* f : {"--output", "-o", "--manifest", "--replay"}) {
      if (is_flag(args[i], f)) {
        if (args[i] == f) ++i;
        dropped = true;
        break;
      }
    }
    if (!dropped) out.push_back(args[i]);
  }
  return out;
}

int exit_code_for(const Error& e) { return e.code() == ErrorCode::Io ? kExitIo : kExitValidation; }

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Geometry of the pre-softmax feature space: division, sensitivity and overfitting metrics.",
               "featspace"};
  app.require_subcommand(0, 1);

  std::uint64_t seed = 0;
  std::string output, manifest, replay, format = "table";
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every randomized step");
  app.add_option("-o,--output", output, "Write results to this file instead of stdout");
  app.add_option("--format", format, "table or record")->check(CLI::IsMember({"table", "record"}));
  app.add_option("--manifest", manifest, "Also write a manifest describing this run");
  app.add_option("--replay", replay, "Re-run the manifest at this path");

  DivideArgs divide;
  auto* c_divide = app.add_subcommand("divide", "Differential vectors, locus angles, membership and convexity");
  c_divide->add_option("--head", divide.head, "Classifier head file")->required();
  c_divide->add_option("--features", divide.features, "Feature file to classify by region");
  c_divide->add_option("--samples", divide.samples, "Random samples for the convexity check");
  c_divide->add_option("--tie", divide.tie, "Boundary ties: report or lowest");
  c_divide->add_flag("--nonnegative", divide.nonnegative, "Reject features with negative coordinates");

  SensitivityArgs sens;
  auto* c_sens = app.add_subcommand("sensitivity", "Softmax partials with respect to feature norm and angle");
  c_sens->add_option("--head", sens.head, "Classifier head file")->required();
  c_sens->add_option("--features", sens.features, "Feature file");
  c_sens->add_option("--feature", sens.feature, "One feature vector, comma separated")->delimiter(',');
  c_sens->add_flag("--fold-bias", sens.fold_bias, "Drop the head bias instead of refusing");
  c_sens->add_option("--reference-class", sens.reference_class, "Use this class's plane");

  SurfaceArgs surf;
  auto* c_surf = app.add_subcommand("surface", "Logit and softmax grid over angle and norm");
  c_surf->add_option("--head", surf.head, "Classifier head file")->required();
  c_surf->add_option("--features", surf.features, "Feature file");
  c_surf->add_option("--row", surf.row, "Row of --features to use");
  c_surf->add_option("--feature", surf.feature, "One feature vector, comma separated")->delimiter(',');
  c_surf->add_flag("--fold-bias", surf.fold_bias, "Drop the head bias instead of refusing");
  c_surf->add_option("--theta-min", surf.theta_min);
  c_surf->add_option("--theta-max", surf.theta_max);
  c_surf->add_option("--theta-steps", surf.theta_steps);
  c_surf->add_option("--radius-min", surf.radius_min, "Default 0.1 |a|");
  c_surf->add_option("--radius-max", surf.radius_max, "Default 2 |a|");
  c_surf->add_option("--radius-steps", surf.radius_steps);

  MetricsArgs met;
  auto* c_met = app.add_subcommand("metrics", "Centrality, separability and their test/train ratios");
  c_met->add_option("--train", met.train, "Training feature file")->required();
  c_met->add_option("--test", met.test, "Test feature file");
  c_met->add_option("--loss-ratio", met.loss_ratio, "Test over train loss, reported alongside");
  c_met->add_option("--divisor", met.divisor, "Intra-class pair divisor: literal or exact");
  c_met->add_flag("--distance-matrix", met.distance_matrix, "Emit class-sorted cosine-distance matrices");
  c_met->add_flag("--drop-zero", met.drop_zero, "Drop all-zero feature rows first");

  KnnArgs knn;
  auto* c_knn = app.add_subcommand("knn", "Leave-one-out k-NN accuracy under the cosine distance");
  c_knn->add_option("--features", knn.features, "Feature file")->required();
  c_knn->add_option("--test", knn.test, "Second feature file evaluated the same way");
  c_knn->add_option("--k", knn.k, "Odd neighbour counts, comma separated")->delimiter(',');

  DivArgs divs;
  auto* c_div = app.add_subcommand("div", "Point-cloud part diversity statistic");
  c_div->add_option("--clouds", divs.clouds, "Point-cloud file")->required();
  c_div->add_option("--part", divs.parts, "Part labels (default: all)")->delimiter(',');
  c_div->add_option("--fraction", divs.fraction, "Share of instances to sample");

  CorrelateArgs cor;
  auto* c_cor = app.add_subcommand("correlate", "Pearson correlation and z-scores over a report table");
  c_cor->add_option("--table", cor.table, "CSV with named numeric columns")->required();
  c_cor->add_option("--x", cor.x, "First metric column");
  c_cor->add_option("--y", cor.y, "Second metric column multiplied into the first (empty: none)");
  c_cor->add_option("--target", cor.target, "Column correlated against");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train the toy network and trace its sensitivities");
  c_train->add_option("--config", tr.config, "Training experiment JSON");
  c_train->add_option("--export", tr.export_dir, "Directory for exported features and head");
  c_train->add_option("--loss", tr.loss, "softmax or l2_softmax");
  c_train->add_option("--scale", tr.scale, "L2-Softmax scale s");
  c_train->add_option("--epochs", tr.epochs);
  c_train->add_option("--lr", tr.learning_rate, "Learning rate");

  FusionArgs fu;
  auto* c_fusion = app.add_subcommand("fusion", "Compare the S_1-1, S_1-2 and S_a-a fusion strategies");
  c_fusion->add_option("--config", fu.config, "Fusion experiment JSON")->required();
  c_fusion->add_option("--seeds", fu.seeds, "Number of consecutive seeds");
  c_fusion->add_option("--strategy", fu.strategy, "Run only this strategy");
  c_fusion->add_flag("--details", fu.details, "Include per-extractor reports");

  ShatterArgs sh;
  auto* c_shatter = app.add_subcommand("shatter", "Check that n+1 points in R^n are shattered by hyperplanes");
  c_shatter->add_option("--dim", sh.dim, "Dimension n (1 to 4)")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  if (!replay.empty()) {
    if (app.get_subcommands().size() > 0) {
      err << "error: --replay cannot be combined with a subcommand\n";
      return kExitValidation;
    }
    try {
      const ExperimentManifest m = load_manifest(replay);
      verify_inputs(m);
      std::vector<std::string> again = m.args;
      if (!output.empty()) again.insert(again.begin(), {"--output", output});
      if (!manifest.empty()) again.insert(again.begin(), {"--manifest", manifest});
      return cli_dispatch(again, out, err);
    } catch (const Error& e) {
      err << "error: " << replay << ": " << e.what() << "\n";
      return exit_code_for(e);
    }
  }
  if (app.get_subcommands().empty()) {
    err << "error: a subcommand is required\n\n" << app.help();
    return kExitValidation;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  Context ctx;
  ctx.seed = seed;
  ctx.seed_given = seed_opt->count() > 0;
  Output result;
  try {
    if (sub == c_divide) result = run_divide(ctx, divide);
    else if (sub == c_sens) result = run_sensitivity(ctx, sens);
    else if (sub == c_surf) result = run_surface(ctx, surf);
    else if (sub == c_met) result = run_metrics(ctx, met);
    else if (sub == c_knn) result = run_knn(ctx, knn);
    else if (sub == c_div) result = run_div(ctx, divs);
    else if (sub == c_cor) result = run_correlate(ctx, cor);
    else if (sub == c_train) result = run_train(ctx, tr);
    else if (sub == c_fusion) result = run_fusion(ctx, fu);
    else result = run_shatter(ctx, sh);

    std::string text;
    if (format == "record") {
      json record;
      record["subcommand"] = name;
      record["seed"] = ctx.seed;
      record["result"] = result.result;
      text = record.dump(2) + "\n";
    } else {
      text = result.table;
    }
    if (output.empty()) {
      out << text;
    } else {
      io::write_file(output, text);
      ctx.outputs.insert(ctx.outputs.begin(), output);
    }

    if (!manifest.empty()) {
      ExperimentManifest m;
      m.subcommand = name;
      m.args = replayable_args(args);
      m.params = ctx.params;
      std::sort(ctx.inputs.begin(), ctx.inputs.end());
      ctx.inputs.erase(std::unique(ctx.inputs.begin(), ctx.inputs.end()), ctx.inputs.end());
      for (const auto& in : ctx.inputs) m.inputs.push_back({in, file_sha256(in)});
      m.seeds = ctx.seeds;
      m.outputs = ctx.outputs;
      m.notes = ctx.notes;
      save_manifest(manifest, m);
    }
  } catch (const ParseError& e) {
    err << "error: " << name << ": " << e.what() << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    err << "error: " << name << ": " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOk;
}

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_dispatch(args, out, err);
}

}  // namespace featspace
