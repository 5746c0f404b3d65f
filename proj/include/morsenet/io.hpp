#pragma once

#include <map>
#include <optional>
#include <string>

#include "json.hpp"
#include "morsenet/morse.hpp"
#include "morsenet/node.hpp"
#include "morsenet/normal_form.hpp"

namespace morsenet {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

struct NetworkDocument {
  std::string kind;  // "mlp" or "node"
  std::string name;
  std::optional<MLPNetwork> mlp;
  std::optional<NeuralODE> node;
  std::optional<Box> domain;
  Json field;    // node field description as written
  Json targets;  // named embedding targets (object), node documents only
};

NetworkDocument parse_network(const std::string& text,
                              const std::string& origin = "<input>");
NetworkDocument load_network(const std::string& path);

Json network_to_json(const NetworkDocument& doc);
void save_network(const NetworkDocument& doc, const std::string& path);

// Builds the map described by a target entry ({"expr": ..} or {"mlp": ..}).
ScalarMap target_map(const Json& spec, const std::string& where);

// Deterministic text: fixed key order, doubles with 17 significant digits.
std::string dump_json(const Json& j);
// "-" writes to standard output.
void emit_report(const Json& report, const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);
std::string content_digest(const std::string& bytes);  // FNV-1a 64, hex

Json to_json(const Mat& m);
Json to_json(const Vec& v);
Json to_json(const Box& b);
Json to_json(const ArchitectureReport& a);
Json to_json(const CriticalPoint& p);
Json to_json(const ClassReport& r);
Json to_json(const ReductionStep& s);
Json to_json(const FlowResult& f);
Json to_json(const MLPNetwork& net);

Mat matrix_from_json(const Json& j, const std::string& where);
Vec vector_from_json(const Json& j, const std::string& where);
ClassReport class_report_from_json(const Json& j);

}  // namespace morsenet
