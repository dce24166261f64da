#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mindiff/verify.hpp"

namespace mindiff {

struct ExampleOptions {
  /// 0 keeps the example's own default.
  std::size_t paths = 0;
  double delta = 0.0;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

struct ExampleReport {
  std::string name;
  std::size_t paths = 0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  std::vector<Check> checks;
  /// Public operations the pipeline called, in first-use order.
  std::vector<std::string> operations;

  bool pass() const;
};

/// jump3, inverse-bessel, bessel-martingale, kimura, reflected-cosh.
std::vector<std::string> example_names();

/// Names of the library's public operations; run over all examples, the
/// pipelines call each of them.
std::vector<std::string> public_operations();

/// Construct, classify, eigen-check, simulate and verify one bundled example.
/// Unknown names raise InputError.
ExampleReport run_example(const std::string& name, const ExampleOptions& options = {});

}  // namespace mindiff
