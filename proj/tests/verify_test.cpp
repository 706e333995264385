// Copyright 2026 The Smoothmatch Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "smoothmatch/verify.hpp"

#include <set>
#include <string>

#include "gtest/gtest.h"

namespace smoothmatch {
namespace {

TEST(CheckResultTest, ObserveTracksWorstMarginAndFailures) {
  auto c = detail::make_check("x", "y", 0.1);
  EXPECT_FALSE(c.passed());  // no instances yet
  c.observe(0.5);
  c.observe(-0.05);
  EXPECT_TRUE(c.passed());
  EXPECT_DOUBLE_EQ(c.worst_margin, -0.05);
  c.observe(-0.2);
  EXPECT_FALSE(c.passed());
  EXPECT_EQ(c.failures, 1);
  EXPECT_EQ(c.instances, 3);
  c.observe(std::nan(""));
  EXPECT_EQ(c.failures, 2);
  EXPECT_EQ(c.to_json()["passed"], false);
}

TEST(VerifyBoundsTest, SuiteDispatch) {
  for (const auto& suite : suite_names()) {
    const auto report = verify_bounds(suite);
    ASSERT_FALSE(report.checks.empty()) << suite;
    for (const auto& c : report.checks) {
      EXPECT_EQ(c.suite, suite);
      EXPECT_TRUE(c.passed()) << c.to_json().dump();
    }
    EXPECT_TRUE(report.passed());
    EXPECT_EQ(report.to_json()["checks"].size(), report.checks.size());
  }
}

TEST(VerifyBoundsTest, AllCoversEverySuite) {
  std::set<std::string> seen;
  for (const auto& c : verify_bounds("all").checks) seen.insert(c.suite);
  EXPECT_EQ(seen.size(), suite_names().size());
}

TEST(VerifyBoundsTest, UnknownSuiteThrows) {
  EXPECT_THROW(verify_bounds("nope"), std::invalid_argument);
}

TEST(VerifyBoundsTest, ProbabilityGridSize) {
  EXPECT_EQ(detail::probability_grid(0).size(), 1u);
  EXPECT_EQ(detail::probability_grid(3).size(), 125u);
}

}  // namespace
}  // namespace smoothmatch
