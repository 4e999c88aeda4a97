// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "dfvt/gradcheck_suite.hpp"

using namespace dfvt;

TEST(GradcheckSuiteTest, EveryCasePassesAcrossSeeds) {
    for (std::uint64_t seed : {0u, 1u, 2u}) {
        const auto cases = run_gradcheck_suite(seed);
        ASSERT_FALSE(cases.empty());
        for (const auto& c : cases) {
            EXPECT_TRUE(c.passed()) << c.name << " seed " << seed << " rel " << c.result.max_rel_error;
            EXPECT_GT(c.result.checked, 0u) << c.name;
        }
    }
}

TEST(GradcheckSuiteTest, CoversOpsAndTheFullModel) {
    std::set<std::string> names;
    for (const auto& c : run_gradcheck_suite(0)) names.insert(c.name);
    for (const char* op : {"matmul", "softmax", "layer_norm", "gelu", "conv2d", "attention", "encoder_block",
                           "cross_entropy", "anchor_penalty", "model"}) {
        EXPECT_TRUE(names.contains(op)) << op;
    }
}

TEST(GradcheckSuiteTest, CorruptingAnyOneCaseFailsExactlyThatCase) {
    const auto clean = run_gradcheck_suite(5);
    for (const auto& target : clean) {
        const auto cases = run_gradcheck_suite(5, ModelConfig::tiny(), target.name);
        for (const auto& c : cases) {
            EXPECT_EQ(c.passed(), c.name != target.name) << "corrupted " << target.name << ", case " << c.name;
        }
    }
}

TEST(GradcheckSuiteTest, ReportIsDeterministicAndNamesTheFailure) {
    std::ostringstream a, b, bad;
    EXPECT_TRUE(report_gradcheck(a, run_gradcheck_suite(9)));
    EXPECT_TRUE(report_gradcheck(b, run_gradcheck_suite(9)));
    EXPECT_EQ(a.str(), b.str());
    EXPECT_FALSE(report_gradcheck(bad, run_gradcheck_suite(9, ModelConfig::tiny(), "softmax")));
    const auto text = bad.str();
    EXPECT_NE(text.find("softmax\t"), std::string::npos);
    EXPECT_NE(text.find("FAIL"), std::string::npos);
    EXPECT_NE(text.find("coordinate"), std::string::npos);
    EXPECT_NE(text.find("analytic"), std::string::npos);
    EXPECT_NE(text.find("numeric"), std::string::npos);
}
