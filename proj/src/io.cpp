#include "mindiff/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mindiff/error.hpp"
#include "mindiff/presets.hpp"

namespace mindiff {

namespace {

const Json& member(const Json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) throw InputError(what + ": missing \"" + key + "\"");
  return j.at(key);
}

std::pair<double, double> pair_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2) throw InputError(what + ": expected a two-element array");
  return {number_from_json(j[0], what), number_from_json(j[1], what)};
}

Json nodes_to_json(const std::vector<DensityNode>& nodes) {
  Json a = Json::array();
  for (const DensityNode& n : nodes) a.push_back(Json::array({n.x, n.f}));
  return a;
}

std::vector<DensityNode> nodes_from_json(const Json& piece, const std::string& what) {
  const Json& interval = member(piece, "interval", what);
  const auto [l, r] = pair_from_json(interval, what + ".interval");
  std::vector<DensityNode> nodes;
  for (const Json& n : member(piece, "nodes", what)) {
    const auto [x, f] = pair_from_json(n, what + ".nodes");
    nodes.push_back({x, f});
  }
  if (nodes.size() < 2) throw InputError(what + ": a density piece needs at least two nodes");
  if (nodes.front().x != l || nodes.back().x != r)
    throw InputError(what + ": nodes must start at " + format_number(l) + " and end at " + format_number(r));
  return nodes;
}

Json tail_to_json(const TailRecord& t) { return Json{{"cut", number_to_json(t.cut)}, {"mass", t.mass}, {"moment", t.moment}}; }

TailRecord tail_from_json(const Json& j) {
  TailRecord t;
  t.cut = number_from_json(member(j, "cut", "tail"), "tail.cut");
  t.mass = number_from_json(member(j, "mass", "tail"), "tail.mass");
  t.moment = number_from_json(member(j, "moment", "tail"), "tail.moment");
  return t;
}

bool is_speed_preset(const std::string& name) {
  for (const std::string& p : speed_preset_names())
    if (p == name) return true;
  return false;
}

// Density samples at the piece ends, its knots and refine points per knot cell.
std::vector<DensityNode> sample_piece(const SpeedDensity& p, int refine) {
  if (!std::isfinite(p.left) || !std::isfinite(p.right))
    throw InputError("cannot export an unbounded density piece as nodes");
  std::vector<double> cuts{p.left};
  for (double k : p.knots)
    if (k > p.left && k < p.right) cuts.push_back(k);
  cuts.push_back(p.right);
  if (p.knots.empty()) refine = std::max(refine, 256);
  std::vector<DensityNode> out;
  const double nudge = 1e-9 * (p.right - p.left);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    for (int k = 0; k < refine; ++k) out.push_back({cuts[i] + (cuts[i + 1] - cuts[i]) * k / refine, 0.0});
  out.push_back({p.right, 0.0});
  for (DensityNode& n : out) {
    n.f = p.rho(n.x);
    // Singular ends keep a finite value from just inside.
    if (!std::isfinite(n.f)) n.f = p.rho(n.x == p.left ? n.x + nudge : n.x - nudge);
    if (!std::isfinite(n.f)) throw InputError("density is not finite near " + format_number(n.x));
  }
  return out;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double number_from_json(const Json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  throw InputError(what + ": expected a number, got " + j.dump());
}

Json number_to_json(double v) {
  if (std::isfinite(v)) return v;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return nullptr;
}

TargetLaw law_from_json(const Json& j) {
  if (!j.is_object()) throw InputError("law: expected a JSON object");
  if (j.contains("preset") && !j.contains("support")) return law_preset(j.at("preset").get<std::string>());
  const auto [a, b] = pair_from_json(member(j, "support", "law"), "law.support");
  std::vector<Atom> atoms;
  if (j.contains("atoms"))
    for (const Json& x : j.at("atoms")) {
      const auto [pos, p] = pair_from_json(x, "law.atoms");
      atoms.push_back({pos, p});
    }
  std::vector<DensityPiece> density;
  if (j.contains("density"))
    for (const Json& piece : j.at("density")) density.push_back({nodes_from_json(piece, "law.density")});
  TargetLaw::Options opt;
  if (j.contains("name")) opt.name = j.at("name").get<std::string>();
  if (j.contains("discretized")) opt.discretized = j.at("discretized").get<bool>();
  if (j.contains("mass_tolerance")) opt.mass_tolerance = number_from_json(j.at("mass_tolerance"), "law.mass_tolerance");
  if (j.contains("tails")) {
    const Json& t = j.at("tails");
    if (t.contains("left")) opt.left_tail = tail_from_json(t.at("left"));
    if (t.contains("right")) opt.right_tail = tail_from_json(t.at("right"));
  }
  return TargetLaw(a, b, std::move(atoms), std::move(density), opt);
}

Json law_to_json(const TargetLaw& law) {
  Json j;
  if (!law.name().empty()) j["name"] = law.name();
  j["support"] = Json::array({number_to_json(law.support_left()), number_to_json(law.support_right())});
  Json atoms = Json::array();
  for (const Atom& at : law.atoms()) atoms.push_back(Json::array({at.x, at.mass}));
  j["atoms"] = atoms;
  Json density = Json::array();
  for (const DensityPiece& p : law.density())
    density.push_back(Json{{"interval", Json::array({p.left(), p.right()})}, {"nodes", nodes_to_json(p.nodes)}});
  j["density"] = density;
  if (law.discretized()) j["discretized"] = true;
  Json tails = Json::object();
  if (law.left_tail().mass > 0.0) tails["left"] = tail_to_json(law.left_tail());
  if (law.right_tail().mass > 0.0) tails["right"] = tail_to_json(law.right_tail());
  if (!tails.empty()) j["tails"] = tails;
  return j;
}

SpeedMeasure speed_from_json(const Json& j) {
  if (!j.is_object()) throw InputError("speed: expected a JSON object");
  if (j.contains("from_law")) {
    const Json& f = j.at("from_law");
    return from_law(law_from_json(member(f, "law", "speed.from_law")), number_from_json(member(f, "x0", "from_law"), "x0"),
                    number_from_json(member(f, "lambda", "from_law"), "lambda"),
                    number_from_json(member(f, "kappa", "from_law"), "kappa"));
  }
  if (j.contains("preset") && !j.contains("support")) return speed_preset(j.at("preset").get<std::string>());
  const auto [a, b] = pair_from_json(member(j, "support", "speed"), "speed.support");
  std::vector<SpeedAtom> atoms;
  if (j.contains("atoms"))
    for (const Json& x : j.at("atoms")) {
      const auto [pos, m] = pair_from_json(x, "speed.atoms");
      atoms.push_back({pos, m, false});
    }
  if (j.contains("infinite_atoms"))
    for (const Json& side : j.at("infinite_atoms")) {
      const std::string s = side.get<std::string>();
      if (s != "left" && s != "right") throw InputError("speed.infinite_atoms: expected \"left\" or \"right\"");
      const double x = s == "left" ? a : b;
      if (!std::isfinite(x)) throw InputError("speed.infinite_atoms: endpoint " + s + " is not finite");
      atoms.push_back({x, 0.0, true});
    }
  std::vector<SpeedDensity> pieces;
  if (j.contains("density"))
    for (const Json& piece : j.at("density")) pieces.push_back(node_density(nodes_from_json(piece, "speed.density")));
  return SpeedMeasure(a, b, std::move(atoms), std::move(pieces), j.value("name", std::string()));
}

Json speed_to_json(const SpeedMeasure& speed, int refine) {
  Json j;
  if (!speed.name().empty()) j["name"] = speed.name();
  for (const SpeedDensity& p : speed.pieces())
    if (!std::isfinite(p.left) || !std::isfinite(p.right)) {
      if (!is_speed_preset(speed.name())) throw InputError("speed has an unbounded density piece and no preset name");
      j["preset"] = speed.name();
      return j;
    }
  j["support"] = Json::array({number_to_json(speed.left()), number_to_json(speed.right())});
  Json atoms = Json::array(), infinite = Json::array();
  for (const SpeedAtom& at : speed.atoms()) {
    if (!at.infinite)
      atoms.push_back(Json::array({at.x, at.mass}));
    else
      infinite.push_back(at.x == speed.left() ? "left" : "right");
  }
  j["atoms"] = atoms;
  j["infinite_atoms"] = infinite;
  Json density = Json::array();
  for (const SpeedDensity& p : speed.pieces())
    density.push_back(Json{{"interval", Json::array({p.left, p.right})}, {"nodes", nodes_to_json(sample_piece(p, refine))}});
  j["density"] = density;
  return j;
}

Json speed_to_json(const DiffusionSpec& spec, const Json& law_json, int refine) {
  Json j;
  try {
    j = speed_to_json(spec.speed, refine);
  } catch (const InputError&) {
    // Unbounded pieces: the construction alone describes the measure.
    j = Json::object();
  }
  j.erase("preset");
  j["from_law"] = Json{{"law", law_json}, {"x0", spec.x0}, {"lambda", spec.lambda}, {"kappa", spec.kappa}};
  return j;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("'" + path + "' is not valid JSON: " + e.what());
  }
}

TargetLaw load_law(const std::string& arg, Json* resolved) {
  Json j;
  if (std::filesystem::exists(arg))
    j = read_json_file(arg);
  else
    j = Json{{"preset", arg}};
  try {
    TargetLaw law = law_from_json(j);
    if (resolved) *resolved = j;
    return law;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("law '" + arg + "': " + e.what());
  }
}

SpeedMeasure load_speed(const std::string& arg, Json* resolved) {
  Json j;
  if (std::filesystem::exists(arg))
    j = read_json_file(arg);
  else
    j = Json{{"preset", arg}};
  try {
    SpeedMeasure m = speed_from_json(j);
    if (resolved) *resolved = j;
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("speed '" + arg + "': " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write '" + path + "'");
  f << text;
  if (!f) throw InputError("write to '" + path + "' failed");
}

CsvWriter::CsvWriter(std::vector<std::string> header) : width_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) text_ += (i ? "," : "") + header[i];
  text_ += '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != width_) throw InputError("csv row has " + std::to_string(values.size()) + " fields");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) text_ += ',';
    text_ += format_number(values[i]);
  }
  text_ += '\n';
}

}  // namespace mindiff
