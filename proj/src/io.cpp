#include "morsenet/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "morsenet/expr.hpp"

namespace morsenet {

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::Schema, path + ": " + what);
}

const Json& require(const Json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(path, std::string("missing field '") + key + "'");
  return *it;
}

void check_object(const Json& obj, std::initializer_list<const char*> allowed,
                  const std::string& path) {
  if (!obj.is_object()) schema_error(path, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok |= it.key() == a;
    if (!ok) schema_error(path, "unknown field '" + it.key() + "'");
  }
}

double number(const Json& j, const std::string& path) {
  if (!j.is_number()) schema_error(path, "expected a number");
  return j.get<double>();
}

int integer(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) schema_error(path, "expected an integer");
  return j.get<int>();
}

std::string join(const std::string& a, const std::string& b) {
  return a.empty() ? b : a + "." + b;
}

}  // namespace

Mat matrix_from_json(const Json& j, const std::string& where) {
  check_object(j, {"rows", "cols", "data"}, where);
  int r = integer(require(j, "rows", where), where + ".rows");
  int c = integer(require(j, "cols", where), where + ".cols");
  const Json& d = require(j, "data", where);
  if (r < 0 || c < 0) throw Error(ErrorKind::Shape, where + ": negative shape");
  if (!d.is_array()) schema_error(where + ".data", "expected an array");
  if (d.size() != static_cast<size_t>(r) * static_cast<size_t>(c))
    throw Error(ErrorKind::Shape, where + ": data has " + std::to_string(d.size()) +
                                      " entries but rows x cols = " +
                                      std::to_string(r) + " x " + std::to_string(c));
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int k = 0; k < c; ++k)
      m(i, k) = number(d[static_cast<size_t>(i) * c + k],
                       where + " (row " + std::to_string(i + 1) + ", col " +
                           std::to_string(k + 1) + ")");
  return m;
}

Vec vector_from_json(const Json& j, const std::string& where) {
  if (!j.is_array()) schema_error(where, "expected an array of numbers");
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i)
    v(i) = number(j[i], where + "[" + std::to_string(i) + "]");
  return v;
}

namespace {

Box box_from_json(const Json& j, const std::string& where) {
  check_object(j, {"lo", "hi"}, where);
  Box b{vector_from_json(require(j, "lo", where), where + ".lo"),
        vector_from_json(require(j, "hi", where), where + ".hi")};
  b.validate(where);
  return b;
}

MLPNetwork mlp_from_json(const Json& j, const std::string& where,
                         std::initializer_list<const char*> extra = {}) {
  std::vector<const char*> allowed{"L", "layers"};
  allowed.insert(allowed.end(), extra.begin(), extra.end());
  if (!j.is_object()) schema_error(where, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok |= it.key() == a;
    if (!ok) schema_error(where, "unknown field '" + it.key() + "'");
  }
  int L = integer(require(j, "L", where), join(where, "L"));
  const Json& ls = require(j, "layers", where);
  if (!ls.is_array()) schema_error(join(where, "layers"), "expected an array");
  if (L < 1 || ls.size() != static_cast<size_t>(L))
    schema_error(join(where, "layers"), "expected " + std::to_string(L) + " layers, found " +
                                            std::to_string(ls.size()));
  std::vector<Layer> layers;
  for (int k = 0; k < L; ++k) {
    const std::string p = join(where, "layers[" + std::to_string(k) + "]");
    const std::string idx = std::to_string(k + 1);
    const Json& lj = ls[k];
    check_object(lj, {"W", "b", "W_tilde", "b_tilde", "activation"}, p);
    Layer ly;
    ly.W = matrix_from_json(require(lj, "W", p), "W" + idx);
    ly.b = vector_from_json(require(lj, "b", p), "b" + idx);
    ly.Wt = matrix_from_json(require(lj, "W_tilde", p), "W_tilde" + idx);
    ly.bt = vector_from_json(require(lj, "b_tilde", p), "b_tilde" + idx);
    const Json& act = require(lj, "activation", p);
    if (act.is_string()) {
      ly.act.assign(ly.W.rows(), Activation::parse(act.get<std::string>()));
    } else if (act.is_array()) {
      for (const auto& a : act) {
        if (!a.is_string()) schema_error(p + ".activation", "expected strings");
        ly.act.push_back(Activation::parse(a.get<std::string>()));
      }
    } else {
      schema_error(p + ".activation", "expected a name or an array of names");
    }
    layers.push_back(std::move(ly));
  }
  return MLPNetwork(std::move(layers));
}

FieldPtr field_from_json(const Json& f, const Json& targets, int m, double T) {
  const std::string p = "field";
  if (!f.is_object()) schema_error(p, "expected an object");
  const Json& kj = require(f, "kind", p);
  if (!kj.is_string()) schema_error(p + ".kind", "expected a string");
  const std::string kind = kj.get<std::string>();
  FieldPtr out;
  if (kind == "affine") {
    check_object(f, {"kind", "A", "c"}, p);
    out = std::make_shared<AffineField>(matrix_from_json(require(f, "A", p), "field.A"),
                                        vector_from_json(require(f, "c", p), "field.c"));
  } else if (kind == "exp_shear") {
    check_object(f, {"kind"}, p);
    out = std::make_shared<ExpShearField>();
  } else if (kind == "identity") {
    check_object(f, {"kind", "scale"}, p);
    double s = f.contains("scale") ? number(f["scale"], p + ".scale") : 1.0;
    out = std::make_shared<IdentityField>(m, s);
  } else if (kind == "mlp") {
    check_object(f, {"kind", "nets"}, p);
    const Json& nets = require(f, "nets", p);
    if (!nets.is_array()) schema_error(p + ".nets", "expected an array");
    std::vector<MLPNetwork> comps;
    for (size_t i = 0; i < nets.size(); ++i)
      comps.push_back(mlp_from_json(nets[i], p + ".nets[" + std::to_string(i) + "]"));
    out = std::make_shared<MLPField>(std::move(comps));
  } else if (kind == "embedding") {
    check_object(f, {"kind", "target"}, p);
    const Json& t = require(f, "target", p);
    if (!t.is_string()) schema_error(p + ".target", "expected a target name");
    const std::string name = t.get<std::string>();
    if (!targets.is_object() || !targets.contains(name))
      schema_error(p + ".target", "unknown target '" + name + "'");
    out = std::make_shared<EmbeddingField>(
        target_map(targets[name], "targets." + name), m, T, name);
  } else {
    schema_error(p + ".kind", "unknown field kind '" + kind + "'");
  }
  if (out->dim() != m)
    throw Error(ErrorKind::Shape, "field: dimension " + std::to_string(out->dim()) +
                                      " does not match m = " + std::to_string(m));
  return out;
}

IntegratorConfig integrator_from_json(const Json& j) {
  const std::string p = "integrator";
  check_object(j, {"method", "atol", "rtol", "max_steps", "fixed_steps"}, p);
  IntegratorConfig c;
  if (j.contains("method")) {
    std::string m = j["method"].is_string() ? j["method"].get<std::string>() : "";
    if (m == "rkf45") c.method = Method::RKF45;
    else if (m == "rk4") c.method = Method::RK4;
    else schema_error(p + ".method", "expected \"rkf45\" or \"rk4\"");
  }
  if (j.contains("atol")) c.atol = number(j["atol"], p + ".atol");
  if (j.contains("rtol")) c.rtol = number(j["rtol"], p + ".rtol");
  if (j.contains("max_steps")) c.max_steps = integer(j["max_steps"], p + ".max_steps");
  if (j.contains("fixed_steps")) c.fixed_steps = integer(j["fixed_steps"], p + ".fixed_steps");
  c.validate();
  return c;
}

std::string location(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

ScalarMap target_map(const Json& spec, const std::string& where) {
  if (!spec.is_object()) schema_error(where, "expected an object");
  if (spec.contains("expr")) {
    check_object(spec, {"expr", "n"}, where);
    const Json& e = spec["expr"];
    if (!e.is_string()) schema_error(where + ".expr", "expected a string");
    int n = spec.contains("n") ? integer(spec["n"], where + ".n") : 0;
    return expression_map(Expression::parse(e.get<std::string>(), n));
  }
  if (spec.contains("mlp")) {
    check_object(spec, {"mlp"}, where);
    return mlp_map(mlp_from_json(spec["mlp"], where + ".mlp"));
  }
  schema_error(where, "target needs 'expr' or 'mlp'");
}

NetworkDocument parse_network(const std::string& text, const std::string& origin) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Parse, origin + ": JSON syntax error at " +
                                      location(text, e.byte) + ": " + e.what());
  }
  if (!j.is_object()) schema_error("(root)", "expected an object");
  const Json& ver = require(j, "schema_version", "(root)");
  if (!ver.is_number_integer() || ver.get<int>() != kSchemaVersion)
    schema_error("schema_version", "only version 1 is supported");
  const Json& kj = require(j, "kind", "(root)");
  NetworkDocument doc;
  doc.kind = kj.is_string() ? kj.get<std::string>() : "";
  if (j.contains("name")) {
    if (!j["name"].is_string()) schema_error("name", "expected a string");
    doc.name = j["name"].get<std::string>();
  }
  if (j.contains("domain")) doc.domain = box_from_json(j["domain"], "domain");

  if (doc.kind == "mlp") {
    check_object(j, {"schema_version", "kind", "name", "L", "layers", "domain"}, "(root)");
    doc.mlp = mlp_from_json(j, "", {"schema_version", "kind", "name", "domain"});
    if (doc.domain && doc.domain->dim() != doc.mlp->input_dim())
      throw Error(ErrorKind::Shape, "domain: dimension does not match the network input");
    return doc;
  }
  if (doc.kind != "node") schema_error("kind", "expected \"mlp\" or \"node\"");

  check_object(j, {"schema_version", "kind", "name", "n", "m", "W", "b", "W_tilde",
                   "b_tilde", "T", "field", "targets", "domain", "integrator"},
               "(root)");
  NeuralODE node;
  node.n = integer(require(j, "n", "(root)"), "n");
  node.m = integer(require(j, "m", "(root)"), "m");
  node.W = matrix_from_json(require(j, "W", "(root)"), "W");
  node.b = vector_from_json(require(j, "b", "(root)"), "b");
  Mat wt = matrix_from_json(require(j, "W_tilde", "(root)"), "W_tilde");
  if (wt.rows() != 1 || wt.cols() != node.m)
    throw Error(ErrorKind::Shape, "W_tilde: must be 1 x " + std::to_string(node.m));
  node.Wt = wt.row(0);
  node.bt = number(require(j, "b_tilde", "(root)"), "b_tilde");
  node.T = number(require(j, "T", "(root)"), "T");
  if (j.contains("integrator")) node.cfg = integrator_from_json(j["integrator"]);
  doc.targets = j.contains("targets") ? j["targets"] : Json::object();
  if (!doc.targets.is_object()) schema_error("targets", "expected an object");
  doc.field = require(j, "field", "(root)");
  if (node.W.rows() != node.m || node.W.cols() != node.n)
    throw Error(ErrorKind::Shape, "W: expected " + std::to_string(node.m) + " x " +
                                      std::to_string(node.n) + ", found " +
                                      std::to_string(node.W.rows()) + " x " +
                                      std::to_string(node.W.cols()));
  if (!(node.T > 0)) schema_error("T", "must be > 0");
  node.field = field_from_json(doc.field, doc.targets, node.m, node.T);
  node.validate();
  if (doc.domain && doc.domain->dim() != node.n)
    throw Error(ErrorKind::Shape, "domain: dimension does not match n");
  doc.node = std::move(node);
  return doc;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path);
}

NetworkDocument load_network(const std::string& path) {
  return parse_network(read_file(path), path);
}

std::string content_digest(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json to_json(const Mat& m) {
  Json data = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) data.push_back(m(i, k));
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Json to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json to_json(const Box& b) { return Json{{"lo", to_json(b.lo)}, {"hi", to_json(b.hi)}}; }

Json to_json(const MLPNetwork& net) {
  Json layers = Json::array();
  for (const auto& ly : net.layers()) {
    bool uniform = true;
    for (const auto& a : ly.act) uniform &= a.kind == ly.act[0].kind;
    Json act;
    if (uniform) {
      act = ly.act[0].name();
    } else {
      act = Json::array();
      for (const auto& a : ly.act) act.push_back(a.name());
    }
    layers.push_back(Json{{"W", to_json(ly.W)},
                          {"b", to_json(ly.b)},
                          {"W_tilde", to_json(ly.Wt)},
                          {"b_tilde", to_json(ly.bt)},
                          {"activation", act}});
  }
  return Json{{"L", net.depth()}, {"layers", layers}};
}

Json network_to_json(const NetworkDocument& doc) {
  Json j{{"schema_version", kSchemaVersion}, {"kind", doc.kind}};
  if (!doc.name.empty()) j["name"] = doc.name;
  if (doc.kind == "mlp") {
    if (!doc.mlp) throw Error(ErrorKind::Internal, "mlp document without network");
    const Json net = to_json(*doc.mlp);
    for (auto it = net.begin(); it != net.end(); ++it) j[it.key()] = it.value();
  } else {
    if (!doc.node) throw Error(ErrorKind::Internal, "node document without node");
    const NeuralODE& nd = *doc.node;
    j["n"] = nd.n;
    j["m"] = nd.m;
    j["W"] = to_json(nd.W);
    j["b"] = to_json(nd.b);
    j["W_tilde"] = to_json(Mat(nd.Wt));
    j["b_tilde"] = nd.bt;
    j["T"] = nd.T;
    j["field"] = doc.field;
    if (doc.targets.is_object() && !doc.targets.empty()) j["targets"] = doc.targets;
  }
  if (doc.domain) j["domain"] = to_json(*doc.domain);
  return j;
}

void save_network(const NetworkDocument& doc, const std::string& path) {
  write_file(path, dump_json(network_to_json(doc)));
}

namespace {

std::string quote(const std::string& s) { return Json(s).dump(); }

std::string num(double d) {
  if (!std::isfinite(d)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

void write_value(const Json& j, int indent, std::string& out) {
  const std::string pad(indent, ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + "  " + quote(it.key()) + ": ";
        write_value(it.value(), indent + 2, out);
      }
      out += "\n" + pad + "}";
      return;
    }
    case Json::value_t::array: {
      bool flat = true;
      for (const auto& e : j) flat &= e.is_primitive();
      if (flat) {
        out += "[";
        for (size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          write_value(j[i], indent, out);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad + "  ";
        write_value(j[i], indent + 2, out);
      }
      out += "\n" + pad + "]";
      return;
    }
    case Json::value_t::number_float:
      out += num(j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump_json(const Json& j) {
  std::string out;
  write_value(j, 0, out);
  out += "\n";
  return out;
}

void emit_report(const Json& report, const std::string& path) {
  write_file(path, dump_json(report));
}

Json to_json(const ArchitectureReport& a) {
  Json j{{"verdict", to_string(a.verdict)}, {"dims", a.dims}};
  if (a.l_star >= 0) j["l_star"] = a.l_star;
  if (a.verdict == ArchVerdict::Bottleneck) {
    j["i_star"] = a.i_star;
    j["j_star"] = a.j_star;
    j["first_bottleneck"] = Json{{"flavor", to_string(*a.flavor)},
                                 {"layer", a.first_j},
                                 {"prefix", a.prefix}};
  }
  return j;
}

Json to_json(const CriticalPoint& p) {
  return Json{{"location", to_json(p.x)},
              {"grad_norm", p.grad_norm},
              {"eigenvalues", to_json(p.eigenvalues)},
              {"regularity", to_string(p.regularity)},
              {"morse_index", p.morse_index}};
}

Json to_json(const ClassReport& r) {
  Json pts = Json::array();
  for (const auto& p : r.points) pts.push_back(to_json(p));
  Json j{{"verdict", to_string(r.verdict)},
         {"certification", to_string(r.certification)},
         {"critical_points", pts}};
  if (r.domain) j["domain"] = to_json(*r.domain);
  j["notes"] = r.notes;
  return j;
}

Json to_json(const ReductionStep& s) {
  Json j{{"kind", to_string(s.kind)}, {"layer", s.layer}};
  if (s.removed >= 0) j["removed"] = s.removed + 1;
  j["alpha"] = to_json(s.alpha);
  j["dims"] = s.dims;
  return j;
}

Json to_json(const FlowResult& f) {
  return Json{{"state", to_json(f.state)},
              {"jacobian", to_json(f.Y)},
              {"trace_integral", f.trace_integral},
              {"det_jacobian", f.Y.determinant()},
              {"liouville_residual", f.liouville_residual()},
              {"steps", f.steps},
              {"local_error", f.error_estimate}};
}

namespace {

MapClass parse_class(const std::string& s) {
  if (s == "C1") return MapClass::C1;
  if (s == "C2") return MapClass::C2;
  if (s == "C3") return MapClass::C3;
  if (s == "Undetermined") return MapClass::Undetermined;
  schema_error("verdict", "unknown class '" + s + "'");
}

Regularity parse_regularity(const std::string& s) {
  if (s == "NonDegenerate") return Regularity::NonDegenerate;
  if (s == "Degenerate") return Regularity::Degenerate;
  if (s == "Indeterminate") return Regularity::Indeterminate;
  schema_error("regularity", "unknown value '" + s + "'");
}

}  // namespace

ClassReport class_report_from_json(const Json& j) {
  check_object(j, {"verdict", "certification", "critical_points", "domain", "notes"},
               "class report");
  ClassReport r;
  r.verdict = parse_class(require(j, "verdict", "class report").get<std::string>());
  const std::string cert = require(j, "certification", "class report").get<std::string>();
  if (cert == "TheoremCertified") r.certification = Certification::TheoremCertified;
  else if (cert == "SearchBased") r.certification = Certification::SearchBased;
  else schema_error("certification", "unknown value '" + cert + "'");
  for (const auto& pj : require(j, "critical_points", "class report")) {
    check_object(pj, {"location", "grad_norm", "eigenvalues", "regularity", "morse_index"},
                 "critical point");
    CriticalPoint p;
    p.x = vector_from_json(pj["location"], "location");
    p.grad_norm = number(pj["grad_norm"], "grad_norm");
    p.eigenvalues = vector_from_json(pj["eigenvalues"], "eigenvalues");
    p.regularity = parse_regularity(pj["regularity"].get<std::string>());
    p.morse_index = integer(pj["morse_index"], "morse_index");
    r.points.push_back(p);
  }
  if (j.contains("domain")) r.domain = box_from_json(j["domain"], "domain");
  if (j.contains("notes"))
    for (const auto& n : j["notes"]) r.notes.push_back(n.get<std::string>());
  return r;
}

}  // namespace morsenet
