#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "crl/mixing.hpp"
#include "crl/types.hpp"

namespace crl::proptests {

struct CheckOutcome {
  bool pass = true;
  std::string detail;  // first violation when pass is false
};

// One random instance per call; everything random derives from seed.
using CheckFn = std::function<CheckOutcome(std::uint64_t seed)>;

struct PropertyCase {
  std::string name;
  std::string claim;      // the statement being checked
  std::string generator;  // instance parameters, for the report
  double tolerance = 0.0;
  CheckFn check;
};

struct CaseResult {
  std::string name;
  std::string claim;
  int instances = 0;
  std::vector<std::uint64_t> failing_seeds;
  std::string first_failure;
  bool passed() const { return failing_seeds.empty(); }
};

struct SuiteReport {
  std::vector<CaseResult> cases;
  bool all_passed() const;
};

struct SuiteOptions {
  std::string filter;  // substring match on case names; empty runs everything
  int instances = 20;
  std::uint64_t seed = 1;
  int workers = 1;
};

const std::vector<PropertyCase>& registry();

// Instance seeds depend only on (suite seed, case name, instance index).
CaseResult run_case(const PropertyCase& c, int instances, std::uint64_t suite_seed);
SuiteReport run_property_suite(const SuiteOptions& opts);
std::string format_report(const SuiteReport& r);

// Pull-back of an observed score difference at latent point z through the
// decoder of the true encoder, returning the latent difference.
using PullbackFn = std::function<Vec(const Mixing& mix, const Vec& observed_diff, const Vec& z)>;
Vec reference_pullback(const Mixing& mix, const Vec& observed_diff, const Vec& z);
// Push-forward then pull-back reproduces the latent score difference.
PropertyCase pullback_case(PullbackFn pullback);

}  // namespace crl::proptests
