#include <gtest/gtest.h>

#include <string>

#include "crl/proptests.hpp"

namespace crl::proptests {
namespace {

class RegisteredProperty : public ::testing::TestWithParam<std::size_t> {};

TEST_P(RegisteredProperty, HoldsOnRandomInstances) {
  const PropertyCase& c = registry()[GetParam()];
  CaseResult r = run_case(c, 10, 2024);
  EXPECT_TRUE(r.passed()) << c.name << ": " << r.first_failure;
}

INSTANTIATE_TEST_SUITE_P(All, RegisteredProperty, ::testing::Range<std::size_t>(0, registry().size()),
                         [](const ::testing::TestParamInfo<std::size_t>& info) {
                           std::string n = registry()[info.param].name;
                           for (char& ch : n)
                             if (ch == '.') ch = '_';
                           return n;
                         });

TEST(PropertyRunner, NegatedPullbackIsCaught) {
  PropertyCase broken = pullback_case([](const Mixing& mix, const Vec& diff, const Vec& z) {
    return Vec(-reference_pullback(mix, diff, z));
  });
  CaseResult r = run_case(broken, 5, 11);
  ASSERT_FALSE(r.passed());
  EXPECT_EQ(r.failing_seeds.size(), 5u);
  EXPECT_FALSE(r.first_failure.empty());
  SuiteReport rep;
  rep.cases.push_back(r);
  std::string text = format_report(rep);
  EXPECT_NE(text.find("FAIL mixing.pullback_inverts_pushforward"), std::string::npos);
  EXPECT_NE(text.find(std::to_string(r.failing_seeds.front())), std::string::npos);
}

TEST(PropertyRunner, SeedsDependOnlyOnSuiteSeedAndName) {
  PropertyCase broken = pullback_case([](const Mixing&, const Vec&, const Vec& z) { return Vec(Vec::Constant(z.size(), 1e3)); });
  CaseResult a = run_case(broken, 4, 3);
  CaseResult b = run_case(broken, 4, 3);
  CaseResult c = run_case(broken, 4, 4);
  EXPECT_EQ(a.failing_seeds, b.failing_seeds);
  EXPECT_NE(a.failing_seeds, c.failing_seeds);
}

TEST(PropertyRunner, FilterSelectsBySubstring) {
  SuiteOptions o;
  o.filter = "metrics.";
  o.instances = 3;
  SuiteReport r = run_property_suite(o);
  ASSERT_EQ(r.cases.size(), 2u);
  EXPECT_TRUE(r.all_passed());
}

}  // namespace
}  // namespace crl::proptests
