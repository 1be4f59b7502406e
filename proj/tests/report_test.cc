// Copyright 2026 The qtwin Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <sstream>

#include "qtwin/error.hpp"
#include "qtwin/experiments.hpp"
#include "qtwin/report.hpp"

namespace qtwin {
namespace {

TEST(UncertaintyNotation, TableStyle) {
    EXPECT_EQ(format_with_uncertainty(5.76601234, 0.00049), "5.7660(5)");
    EXPECT_EQ(format_with_uncertainty(-198.63, 1.4), "-198.6(14)");
    EXPECT_EQ(format_with_uncertainty(7.6213, 0.083), "7.62(8)");
    EXPECT_EQ(format_with_uncertainty(80.4, 11.0), "80(11)");
    EXPECT_EQ(format_with_uncertainty(15.31, 1.6), "15.3(16)");
    EXPECT_EQ(format_with_uncertainty(1.52, 0.05), "1.52(5)");
    EXPECT_EQ(format_with_uncertainty(7.4191431, 6e-6), "7.419143(6)");
    EXPECT_EQ(format_with_uncertainty(0.58612, 0.053), "0.59(5)");
}

TEST(UncertaintyNotation, RoundingEdges) {
    // 0.0349 rounds to 35, which drops to one digit.
    EXPECT_EQ(format_with_uncertainty(1.0, 0.0349), "1.00(3)");
    // 98 rounds up to a two-digit 10 in the tens place.
    EXPECT_EQ(format_with_uncertainty(350.2, 98.0), "350(100)");
    EXPECT_EQ(format_with_uncertainty(12345.0, 240.0), "12350(240)");
    EXPECT_EQ(format_with_uncertainty(-0.00004, 0.0004), "0.0000(4)");
    EXPECT_EQ(format_with_uncertainty(2.5, 0.0), "2.5");
}

TEST(Summary, RecordsMapOntoRows) {
    SummaryColumn col{"QB-0", {}, false};
    ExperimentFit notch;
    notch.kind = ExperimentKind::notch;
    notch.derived = {{"f_r", {7.57905e9, 4e4}}, {"q_i", {15.3e3, 1.6e3}}, {"q_c", {4.28e3, 80}}, {"q_l", {3344, 10}}};
    col.add_record(to_json(notch));
    ExperimentFit chevron;
    chevron.kind = ExperimentKind::chevron;
    chevron.derived = {{"f01", {5.7661e9, 1e6}}};
    col.add_record(to_json(chevron));
    ExperimentFit two_tone;
    two_tone.kind = ExperimentKind::two_tone;
    two_tone.derived = {{"f01", {5.7660e9, 0.5e6}}, {"alpha", {-198.6e6, 1.4e6}}};
    col.add_record(to_json(two_tone));
    ASSERT_EQ(col.entries.size(), 5u);
    EXPECT_EQ(col.entries.at("f_q").value, 5.7660e9);

    SummaryColumn exp{"Exp. QB-0", {}, true};
    exp.set("f_q", {5.6941e9, 0});
    EXPECT_THROW(exp.set("omega", {1, 0}), InputError);
    const std::string text = render_summary_text({col, exp});
    EXPECT_NE(text.find("5.7660(5)"), std::string::npos);
    EXPECT_NE(text.find("-198.6(14)"), std::string::npos);
    EXPECT_NE(text.find("15.3(16)"), std::string::npos);
    EXPECT_NE(text.find("7.57905(4)"), std::string::npos);
    EXPECT_NE(text.find("5.6941"), std::string::npos);
    const std::string csv = render_summary_csv({col, exp});
    EXPECT_NE(csv.find("f_q,QB-0,5.766e+09,5e+05"), std::string::npos);
    EXPECT_NE(csv.find("f_q,Exp. QB-0,5694100000,0"), std::string::npos);
    EXPECT_THROW(col.add_record(nlohmann::json{{"kind", "t1"}}), InputError);
}

}  // namespace
}  // namespace qtwin
