#include "pdp/problem_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pdp/builtins.hpp"
#include "pdp/error.hpp"
#include "pdp/version.hpp"

#ifndef PDP_VERSION
#define PDP_VERSION "0.0.0"
#endif

namespace pdp {

std::string_view version() noexcept { return PDP_VERSION; }

namespace {

using nlohmann::json;

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key))
    throw InputError(where + ": missing field '" + key + "'");
  return obj.at(key);
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw InputError(where + ": expected a number");
  return v.get<double>();
}

std::string expr_source(const json& v, const std::string& where) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return format_real(v.get<double>());
  throw InputError(where + ": expected an expression string");
}

Expression expr(const json& v, const std::string& where, const ExprSymbols& sym) {
  try {
    return Expression::parse(expr_source(v, where), sym);
  } catch (const ExprSyntaxError& e) {
    throw ExprSyntaxError(where + ": " + e.what());
  }
}

}  // namespace

ProblemData problem_from_json(const json& doc) {
  if (!doc.is_object()) throw InputError("problem document must be a JSON object");
  static const char* known[] = {"name",    "dimension", "horizon",      "controls",
                                "default_control", "constants", "lift", "tables",
                                "drift",   "intensity", "running_cost", "terminal_cost",
                                "kernel"};
  for (const auto& [key, _] : doc.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw InputError("unknown field '" + key + "'");
  }
  ProblemData p;
  p.name = doc.value("name", std::string{});
  const json& dim = require(doc, "dimension", "problem");
  if (!dim.is_number_integer() || dim.get<long long>() < 1)
    throw InputError("dimension must be a positive integer");
  p.dimension = dim.get<std::size_t>();
  p.horizon = number(require(doc, "horizon", "problem"), "horizon");
  if (!(p.horizon > 0.0)) throw InputError("horizon must be positive");

  const json& controls = require(doc, "controls", "problem");
  if (!controls.is_array() || controls.empty())
    throw InputError("controls must be a non-empty array of labels");
  for (const auto& c : controls) {
    if (!c.is_string()) throw InputError("control labels must be strings");
    const auto label = c.get<std::string>();
    if (label.empty()) throw InputError("control labels must be non-empty");
    if (std::find(p.controls.begin(), p.controls.end(), label) != p.controls.end())
      throw InputError("duplicate control label '" + label + "'");
    p.controls.push_back(label);
  }
  const json& def = require(doc, "default_control", "problem");
  if (!def.is_string()) throw InputError("default_control must be a control label");
  p.default_control = p.control_index(def.get<std::string>());

  const json& k = require(doc, "constants", "problem");
  p.constants.Cf = number(require(k, "Cf", "constants"), "constants.Cf");
  p.constants.Clam = number(require(k, "Clam", "constants"), "constants.Clam");
  p.constants.Lf = number(require(k, "Lf", "constants"), "constants.Lf");
  p.constants.LQ = number(require(k, "LQ", "constants"), "constants.LQ");
  for (double c : {p.constants.Cf, p.constants.Clam, p.constants.Lf, p.constants.LQ})
    if (!(c >= 0.0)) throw InputError("declared constants must be nonnegative");

  const json& lift = require(doc, "lift", "problem");
  if (!lift.is_array()) throw InputError("lift must be an array");
  std::vector<PathFeature> feats;
  for (std::size_t i = 0; i < lift.size(); ++i) {
    const std::string where = "lift[" + std::to_string(i) + "]";
    const json& f = lift[i];
    PathFeature pf;
    const json& kind = require(f, "kind", where);
    if (!kind.is_string()) throw InputError(where + ".kind must be a string");
    pf.kind = feature_kind_from_string(kind.get<std::string>());
    const json& comp = require(f, "component", where);
    if (!comp.is_number_integer() || comp.get<long long>() < 0)
      throw InputError(where + ".component must be a non-negative integer");
    pf.component = comp.get<std::size_t>();
    const json& g = require(f, "grid", where);
    pf.grid.lo = number(require(g, "lo", where + ".grid"), where + ".grid.lo");
    pf.grid.hi = number(require(g, "hi", where + ".grid"), where + ".grid.hi");
    const json& n = require(g, "n", where + ".grid");
    if (!n.is_number_integer() || n.get<long long>() < 1)
      throw InputError(where + ".grid.n must be a positive integer");
    pf.grid.n = n.get<std::size_t>();
    feats.push_back(pf);
  }
  p.lift = Lift(p.dimension, std::move(feats));

  p.symbols.n_features = p.lift.size();
  p.symbols.n_controls = p.controls.size();
  if (doc.contains("tables")) {
    const json& tables = doc.at("tables");
    if (!tables.is_object()) throw InputError("tables must be an object");
    for (const auto& [name, row] : tables.items()) {
      if (!row.is_object()) throw InputError("tables." + name + " must map control labels to numbers");
      std::vector<double> values(p.controls.size());
      for (std::size_t c = 0; c < p.controls.size(); ++c) {
        if (!row.contains(p.controls[c]))
          throw InputError("tables." + name + " has no entry for control '" + p.controls[c] + "'");
        values[c] = number(row.at(p.controls[c]), "tables." + name);
      }
      for (const auto& [label, _] : row.items()) p.control_index(label);
      p.symbols.table_names.push_back(name);
      p.symbols.table_values.push_back(std::move(values));
    }
  }

  const json& drift = require(doc, "drift", "problem");
  if (!drift.is_array() || drift.size() != p.dimension)
    throw InputError("drift must be an array with one expression per component");
  for (std::size_t c = 0; c < p.dimension; ++c)
    p.drift.push_back(expr(drift[c], "drift[" + std::to_string(c) + "]", p.symbols));
  p.intensity = expr(require(doc, "intensity", "problem"), "intensity", p.symbols);
  p.running_cost = expr(require(doc, "running_cost", "problem"), "running_cost", p.symbols);
  p.terminal_cost = expr(require(doc, "terminal_cost", "problem"), "terminal_cost", p.symbols);

  const json& kernel = require(doc, "kernel", "problem");
  p.normalize_kernel = kernel.value("normalize", true);
  const json& atoms = require(kernel, "atoms", "kernel");
  if (!atoms.is_array() || atoms.empty()) throw InputError("kernel.atoms must be a non-empty array");
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const std::string where = "kernel.atoms[" + std::to_string(i) + "]";
    const json& mark = require(atoms[i], "mark", where);
    if (!mark.is_array() || mark.size() != p.dimension)
      throw InputError(where + ".mark must have one expression per component");
    KernelAtom atom;
    for (std::size_t c = 0; c < p.dimension; ++c)
      atom.mark.push_back(expr(mark[c], where + ".mark[" + std::to_string(c) + "]", p.symbols));
    atom.weight = expr(require(atoms[i], "weight", where), where + ".weight", p.symbols);
    bool is_state = true;
    for (std::size_t c = 0; c < p.dimension; ++c)
      is_state = is_state &&
                 atom.mark[c].bare_feature() == static_cast<int>(p.lift.terminal_index(c));
    if (is_state)
      throw InputError(where + " coincides with the current state x(s); the kernel must satisfy "
                               "Q(s,x,a,{x(s)}) = 0");
    p.atoms.push_back(std::move(atom));
  }
  return p;
}

ProblemData parse_problem_spec(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("problem document is not valid JSON: ") + e.what());
  }
  try {
    return problem_from_json(doc);
  } catch (const json::exception& e) {
    throw InputError(std::string("problem document: ") + e.what());
  }
}

json problem_to_json(const ProblemData& p) {
  json doc;
  if (!p.name.empty()) doc["name"] = p.name;
  doc["dimension"] = p.dimension;
  doc["horizon"] = p.horizon;
  doc["controls"] = p.controls;
  doc["default_control"] = p.controls[p.default_control];
  doc["constants"] = {{"Cf", p.constants.Cf},
                      {"Clam", p.constants.Clam},
                      {"Lf", p.constants.Lf},
                      {"LQ", p.constants.LQ}};
  json lift = json::array();
  for (const auto& f : p.lift.features())
    lift.push_back({{"kind", std::string(to_string(f.kind))},
                    {"component", f.component},
                    {"grid", {{"lo", f.grid.lo}, {"hi", f.grid.hi}, {"n", f.grid.n}}}});
  doc["lift"] = lift;
  if (!p.symbols.table_names.empty()) {
    json tables = json::object();
    for (std::size_t k = 0; k < p.symbols.table_names.size(); ++k) {
      json row = json::object();
      for (std::size_t c = 0; c < p.controls.size(); ++c)
        row[p.controls[c]] = p.symbols.table_values[k][c];
      tables[p.symbols.table_names[k]] = row;
    }
    doc["tables"] = tables;
  }
  json drift = json::array();
  for (const auto& e : p.drift) drift.push_back(e.canonical());
  doc["drift"] = drift;
  doc["intensity"] = p.intensity.canonical();
  doc["running_cost"] = p.running_cost.canonical();
  doc["terminal_cost"] = p.terminal_cost.canonical();
  json atoms = json::array();
  for (const auto& a : p.atoms) {
    json mark = json::array();
    for (const auto& e : a.mark) mark.push_back(e.canonical());
    atoms.push_back({{"mark", mark}, {"weight", a.weight.canonical()}});
  }
  doc["kernel"] = {{"atoms", atoms}, {"normalize", p.normalize_kernel}};
  return doc;
}

std::string canonical_text(const ProblemData& data) { return problem_to_json(data).dump(2) + "\n"; }

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string problem_hash(const ProblemData& data) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_text(data))));
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw InputError("write failed for '" + path + "'");
}

ProblemData load_problem(std::string_view reference) {
  constexpr std::string_view prefix = "builtin:";
  if (reference.substr(0, prefix.size()) == prefix)
    return builtin_problem(reference.substr(prefix.size()));
  return parse_problem_spec(read_text_file(std::string(reference)));
}

}  // namespace pdp
