#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "mindiff/speed_measure.hpp"
#include "mindiff/target_law.hpp"

namespace mindiff {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// %.17g, with "inf"/"-inf"/"nan" for non-finite values.
std::string format_number(double v);

/// Numbers or the strings "inf", "+inf", "-inf".
double number_from_json(const Json& j, const std::string& what);
Json number_to_json(double v);

/// Law files:
///   {"support":[a,b], "atoms":[[x,p],...],
///    "density":[{"interval":[l,r], "nodes":[[x,f],...]}], "preset": name}
/// A "preset" key alone selects a bundled law.
TargetLaw law_from_json(const Json& j);
Json law_to_json(const TargetLaw& law);

/// Speed files mirror law files plus "infinite_atoms": ["left"|"right"]. A
/// speed built from a law also carries "from_law": {law, x0, lambda, kappa}
/// and is rebuilt from it exactly; the nodes are then informational.
SpeedMeasure speed_from_json(const Json& j);
/// Closed-form densities are exported as node samples (refine points per knot cell).
Json speed_to_json(const SpeedMeasure& speed, int refine = 8);
Json speed_to_json(const DiffusionSpec& spec, const Json& law_json, int refine = 8);

/// Reads a JSON file; InputError when missing or malformed.
Json read_json_file(const std::string& path);
/// A file path, or a preset name when no such file exists.
TargetLaw load_law(const std::string& arg, Json* resolved = nullptr);
SpeedMeasure load_speed(const std::string& arg, Json* resolved = nullptr);

/// Writes text to path ("-" or empty for out).
void write_text(const std::string& path, const std::string& text, std::ostream& out);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void row(const std::vector<double>& values);
  std::string str() const { return text_; }

 private:
  std::size_t width_;
  std::string text_;
};

}  // namespace mindiff
