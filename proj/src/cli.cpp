#include "morsenet/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "morsenet/expr.hpp"
#include "morsenet/io.hpp"
#include "morsenet/verify.hpp"

namespace morsenet::cli {

namespace {

struct Common {
  std::string input;
  std::string output = "-";
  std::vector<std::string> domain;
  std::uint64_t seed = 0;
  double tol = 1e-10;
  int starts = 64;
  bool timing = false;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double parse_double(const std::string& s, const std::string& what) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError(what + ": cannot parse '" + s + "' as a number");
  }
}

Vec parse_list(const std::string& s, const std::string& what) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) v.push_back(parse_double(tok, what));
  if (v.empty()) throw UsageError(what + ": empty list");
  return Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// One "lo,hi" per axis, or a single pair for every axis.
std::optional<Box> parse_domain(const std::vector<std::string>& specs) {
  if (specs.empty()) return std::nullopt;
  Box b{Vec(specs.size()), Vec(specs.size())};
  for (size_t i = 0; i < specs.size(); ++i) {
    Vec p = parse_list(specs[i], "--domain");
    if (p.size() != 2) throw UsageError("--domain expects \"lo,hi\", got '" + specs[i] + "'");
    if (!(p(0) < p(1))) throw UsageError("--domain: lo must be < hi in '" + specs[i] + "'");
    b.lo(i) = p(0);
    b.hi(i) = p(1);
  }
  return b;
}

Box resolve_domain(const std::optional<Box>& flag, const NetworkDocument& doc, int n) {
  if (flag) {
    if (flag->dim() == n) return *flag;
    if (flag->dim() == 1) return Box::cube(n, flag->lo(0), flag->hi(0));
    throw UsageError("--domain given for " + std::to_string(flag->dim()) +
                     " axes, input dimension is " + std::to_string(n));
  }
  if (doc.domain) return *doc.domain;
  return Box::cube(n, -1.0, 1.0);
}

int input_dim(const NetworkDocument& doc) {
  return doc.mlp ? doc.mlp->input_dim() : doc.node->n;
}

SearchConfig search_config(const Common& c, const Box& domain) {
  SearchConfig cfg;
  cfg.domain = domain;
  cfg.starts = c.starts;
  cfg.tol = c.tol;
  cfg.seed = c.seed;
  return cfg;
}

Json header(const char* command, const Common& c, const std::string& bytes,
            const NetworkDocument& doc) {
  Json j{{"command", command},
         {"input", c.input},
         {"input_digest", content_digest(bytes)},
         {"kind", doc.kind}};
  if (!doc.name.empty()) j["name"] = doc.name;
  j["seed"] = c.seed;
  return j;
}

void write(const Json& j, const std::string& path, std::ostream& out) {
  if (path == "-")
    out << dump_json(j);
  else
    write_file(path, dump_json(j));
}

Json bottleneck_json(const BottleneckAnalysis& b) {
  Json w = Json::array();
  for (const auto& x : b.witnesses) w.push_back(to_json(x));
  return Json{{"case", std::string(1, b.label)},
              {"flavor", to_string(b.flavor)},
              {"z_index", b.z_index},
              {"sample_based", b.sample_based},
              {"min_sampled_z_squared", b.min_sampled_z},
              {"witnesses", w}};
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

int cmd_classify(const Common& c, std::ostream& out, std::ostream& err) {
  Timer timer;
  std::string bytes = read_file(c.input);
  NetworkDocument doc = parse_network(bytes, c.input);
  Box dom = resolve_domain(parse_domain(c.domain), doc, input_dim(doc));
  Json j = header("classify", c, bytes, doc);
  std::string summary;
  if (doc.mlp) {
    MlpClassification r = classify_mlp(*doc.mlp, search_config(c, dom));
    NormalFormResult nf = normalize(*doc.mlp);
    j["architecture"] = to_json(r.original_arch);
    j["normal_form"] = Json{{"dims", nf.reduced.dims()},
                            {"coord_change", to_json(nf.coord_change)},
                            {"steps", static_cast<int>(nf.steps.size())}};
    if (nf.constant_value) j["normal_form"]["constant_value"] = *nf.constant_value;
    j["reduced_architecture"] = to_json(r.reduced_arch);
    if (r.bottleneck) j["bottleneck"] = bottleneck_json(*r.bottleneck);
    j["reduced_class"] = to_json(r.reduced);
    j["class"] = to_json(r.report);
    summary = (nf.constant_value ? std::string("Constant")
                                 : to_string(r.reduced_arch.verdict)) +
              " after normal form; original " + to_string(r.original_arch.verdict) +
              "; class " + to_string(r.report.verdict) + " (" +
              to_string(r.report.certification) + ")";
  } else {
    NodePartition p = classify_node(*doc.node);
    ClassReport rep = classify_node_map(*doc.node, search_config(c, dom));
    j["partition"] = Json{{"verdict", to_string(p.verdict)},
                          {"rank_W", p.rank_W},
                          {"rank_W_tilde", p.rank_Wt}};
    j["class"] = to_json(rep);
    summary = "node " + to_string(p.verdict) + "; class " + to_string(rep.verdict) +
              " (" + to_string(rep.certification) + ")";
  }
  j["summary"] = summary;
  if (c.timing) j["seconds"] = timer.seconds();
  write(j, c.output, out);
  err << summary << "\n";
  return kOk;
}

int cmd_normalize(const Common& c, const std::string& log, std::ostream& out,
                  std::ostream& err) {
  std::string bytes = read_file(c.input);
  NetworkDocument doc = parse_network(bytes, c.input);
  if (!doc.mlp) throw Error(ErrorKind::Unsupported, "normalize: input is not an mlp");
  Box dom = resolve_domain(parse_domain(c.domain), doc, doc.mlp->input_dim());
  NormalFormResult nf = normalize(*doc.mlp);
  double dev = verify_equivalence(*doc.mlp, nf, dom, 1000);

  NetworkDocument red;
  red.kind = "mlp";
  red.name = doc.name.empty() ? "normal form" : doc.name + " (normal form)";
  red.mlp = nf.reduced;
  Vec cc = nf.coord_change * dom.center();
  Vec rr = nf.coord_change.cwiseAbs() * (0.5 * dom.width());
  red.domain = Box{cc - rr, cc + rr};
  write(network_to_json(red), c.output, out);

  Json steps = Json::array();
  for (const auto& s : nf.steps) steps.push_back(to_json(s));
  Json j = header("normalize", c, bytes, doc);
  j["original_dims"] = doc.mlp->dims();
  j["reduced_dims"] = nf.reduced.dims();
  j["coord_change"] = to_json(nf.coord_change);
  if (nf.constant_value) j["constant_value"] = *nf.constant_value;
  j["steps"] = steps;
  j["equivalence_deviation"] = dev;
  j["equivalence_samples"] = 1000;
  if (!log.empty()) write(j, log, out);
  err << nf.steps.size() << " reduction steps, dims";
  for (int d : nf.reduced.dims()) err << " " << d;
  err << ", max deviation " << dev << "\n";
  return kOk;
}

int cmd_critical(const Common& c, std::ostream& out, std::ostream& err) {
  Timer timer;
  std::string bytes = read_file(c.input);
  NetworkDocument doc = parse_network(bytes, c.input);
  Box dom = resolve_domain(parse_domain(c.domain), doc, input_dim(doc));
  ScalarMap map = doc.mlp ? mlp_map(*doc.mlp) : node_map(*doc.node);
  SearchConfig cfg = search_config(c, dom);
  auto pts = find_critical_points(map, cfg);
  Json j = header("critical", c, bytes, doc);
  j["domain"] = to_json(dom);
  j["starts"] = cfg.starts;
  j["tol"] = cfg.tol;
  Json arr = Json::array();
  for (const auto& p : pts) arr.push_back(to_json(p));
  j["critical_points"] = arr;
  if (c.timing) j["seconds"] = timer.seconds();
  write(j, c.output, out);
  err << pts.size() << " critical point(s)";
  for (const auto& p : pts) {
    err << "\n  x =";
    for (Eigen::Index i = 0; i < p.x.size(); ++i) err << " " << p.x(i);
    err << "  eigenvalues =";
    for (Eigen::Index i = 0; i < p.eigenvalues.size(); ++i) err << " " << p.eigenvalues(i);
    err << "  " << to_string(p.regularity);
  }
  err << "\n";
  return kOk;
}

int cmd_morse_check(const Common& c, int samples, std::ostream& out, std::ostream& err) {
  std::string bytes = read_file(c.input);
  NetworkDocument doc = parse_network(bytes, c.input);
  Box dom = resolve_domain(parse_domain(c.domain), doc, input_dim(doc));
  Json j = header("morse-check", c, bytes, doc);
  SearchConfig cfg = search_config(c, dom);
  std::vector<CriticalPoint> pts;
  bool rank_ok = true;
  if (doc.mlp) {
    j["architecture"] = to_json(classify_architecture(*doc.mlp));
    Json ranks = Json::array();
    int min_rank = doc.mlp->input_dim();
    for (const Vec& x : quasi_random_points(dom, samples, c.seed)) {
      RankCondition rc = morse_rank_condition(*doc.mlp, x);
      min_rank = std::min(min_rank, rc.rank);
      rank_ok &= rc.satisfied;
      ranks.push_back(Json{{"x", to_json(x)}, {"rank", rc.rank}});
    }
    j["rank_condition"] = Json{{"n", doc.mlp->input_dim()},
                               {"min_rank", min_rank},
                               {"satisfied_everywhere", rank_ok},
                               {"samples", ranks}};
    pts = find_critical_points(mlp_map(*doc.mlp), cfg);
  } else {
    NodePartition p = classify_node(*doc.node);
    j["partition"] = Json{{"verdict", to_string(p.verdict)},
                          {"rank_W", p.rank_W},
                          {"rank_W_tilde", p.rank_Wt}};
    pts = find_critical_points(node_map(*doc.node), cfg);
  }
  int nondeg = 0, deg = 0, indet = 0;
  Json arr = Json::array();
  for (const auto& p : pts) {
    nondeg += p.regularity == Regularity::NonDegenerate;
    deg += p.regularity == Regularity::Degenerate;
    indet += p.regularity == Regularity::Indeterminate;
    arr.push_back(to_json(p));
  }
  j["regularity"] = Json{{"non_degenerate", nondeg},
                         {"degenerate", deg},
                         {"indeterminate", indet},
                         {"morse_on_domain", deg == 0 && indet == 0}};
  j["critical_points"] = arr;
  write(j, c.output, out);
  if (doc.mlp) err << "rank condition " << (rank_ok ? "satisfied" : "violated") << " on "
                   << samples << " samples; ";
  err << nondeg << " non-degenerate, " << deg << " degenerate, " << indet
      << " indeterminate critical point(s)\n";
  return kOk;
}

int cmd_ode_flow(const Common& c, const std::string& xs, const std::string& as,
                 std::ostream& out, std::ostream& err) {
  std::string bytes = read_file(c.input);
  NetworkDocument doc = parse_network(bytes, c.input);
  if (!doc.node) throw Error(ErrorKind::Unsupported, "ode-flow: input is not a node");
  const NeuralODE& nd = *doc.node;
  Vec a;
  Json j = header("ode-flow", c, bytes, doc);
  if (!as.empty()) {
    a = parse_list(as, "--a");
    if (a.size() != nd.m) throw UsageError("--a needs " + std::to_string(nd.m) + " values");
  } else {
    Vec x = xs.empty() ? Vec::Zero(nd.n) : parse_list(xs, "--x");
    if (x.size() != nd.n) throw UsageError("--x needs " + std::to_string(nd.n) + " values");
    a = nd.W * x + nd.b;
    j["x"] = to_json(x);
  }
  FlowResult fr = flow_with_jacobian(*nd.field, a, nd.T, nd.cfg);
  j["a"] = to_json(a);
  j["T"] = nd.T;
  j["flow"] = to_json(fr);
  j["output"] = nd.Wt.dot(fr.state) + nd.bt;
  j["liouville_ok"] = fr.liouville_residual() <= nd.cfg.liouville_tol;
  write(j, c.output, out);
  err << "flow to T = " << nd.T << " in " << fr.steps << " steps, Liouville residual "
      << fr.liouville_residual() << "\n";
  return kOk;
}

int cmd_embed(const Common& c, const std::string& target, int m, int n, double T,
              std::ostream& out, std::ostream& err) {
  Json spec;
  std::ifstream probe(target);
  if (probe.good()) {
    NetworkDocument t = load_network(target);
    if (!t.mlp) throw Error(ErrorKind::Unsupported, "embed: target file must be an mlp");
    spec = Json{{"mlp", to_json(*t.mlp)}};
    n = t.mlp->input_dim();
  } else {
    Expression e = Expression::parse(target, n);
    n = e.dim();
    spec = Json{{"expr", target}, {"n", n}};
  }
  if (m <= n) throw UsageError("--m must exceed the target dimension " + std::to_string(n));
  ScalarMap map = target_map(spec, "target");
  NetworkDocument doc;
  doc.kind = "node";
  doc.name = "embedding of " + target;
  doc.node = build_embedding_node(map, n, m, T, "target");
  doc.field = Json{{"kind", "embedding"}, {"target", "target"}};
  doc.targets = Json{{"target", spec}};
  doc.domain = parse_domain(c.domain);
  if (doc.domain && doc.domain->dim() != n) {
    if (doc.domain->dim() != 1) throw UsageError("--domain dimension mismatch");
    doc.domain = Box::cube(n, doc.domain->lo(0), doc.domain->hi(0));
  }
  write(network_to_json(doc), c.output, out);
  err << "embedded " << n << "-input target into a node with m = " << m << "\n";
  return kOk;
}

int cmd_verify(const Common& c, std::ostream& out, std::ostream&) {
  auto rows = run_property_suite(c.seed);
  print_table(rows, out);
  for (const auto& r : rows)
    if (!r.passed) return kAnalysisError;
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Critical points and regularity of MLPs and neural ODEs", "morsenet"};
  app.require_subcommand(1);
  Common c;
  auto common = [&c](CLI::App* s, bool needs_input) {
    auto* in = s->add_option("--input,-i", c.input, "network document (JSON)");
    if (needs_input) in->required()->check(CLI::ExistingFile);
    s->add_option("--output,-o", c.output, "output path, - for stdout");
    s->add_option("--domain", c.domain, "\"lo,hi\" per axis (one pair applies to all)");
    s->add_option("--seed", c.seed, "random seed");
    s->add_option("--tol", c.tol, "Newton gradient tolerance")->check(CLI::PositiveNumber);
    s->add_option("--starts", c.starts, "Newton starts")->check(CLI::PositiveNumber);
    s->add_flag("--timing", c.timing, "include wall time in reports");
  };
  auto* classify = app.add_subcommand("classify", "architecture and class report");
  common(classify, true);
  auto* normalize_cmd = app.add_subcommand("normalize", "full-rank normal form");
  common(normalize_cmd, true);
  std::string log;
  normalize_cmd->add_option("--log", log, "step log report path");
  auto* critical = app.add_subcommand("critical", "critical-point search");
  common(critical, true);
  auto* morse = app.add_subcommand("morse-check", "rank condition and regularity");
  common(morse, true);
  int samples = 16;
  morse->add_option("--samples", samples, "points for the rank condition")
      ->check(CLI::PositiveNumber);
  auto* flow = app.add_subcommand("ode-flow", "flow and variational Jacobian of a node");
  common(flow, true);
  std::string xs, as;
  flow->add_option("--x", xs, "input x, comma separated");
  flow->add_option("--a", as, "initial state a, comma separated (overrides --x)");
  auto* embed = app.add_subcommand("embed", "embed a scalar map into an augmented node");
  common(embed, false);
  std::string target;
  int m = 0, n = 0;
  double T = 1.0;
  embed->add_option("--target", target, "expression or mlp file")->required();
  embed->add_option("--m", m, "state dimension")->required();
  embed->add_option("--n", n, "input dimension of an expression target");
  embed->add_option("--T", T, "final time")->check(CLI::PositiveNumber);
  auto* verify = app.add_subcommand("verify", "run the property suite");
  common(verify, false);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsageError;
  }
  try {
    if (*classify) return cmd_classify(c, out, err);
    if (*normalize_cmd) return cmd_normalize(c, log, out, err);
    if (*critical) return cmd_critical(c, out, err);
    if (*morse) return cmd_morse_check(c, samples, out, err);
    if (*flow) return cmd_ode_flow(c, xs, as, out, err);
    if (*embed) return cmd_embed(c, target, m, n, T, out, err);
    if (*verify) return cmd_verify(c, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return kAnalysisError;
  }
  return kUsageError;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace morsenet::cli
