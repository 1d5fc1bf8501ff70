// Copyright 2026 The privrec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "privrec/csv.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace csv = privrec::csv;

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(csv::format_double(1.0), "1");
  EXPECT_EQ(csv::format_double(0.5), "0.5");
  EXPECT_EQ(csv::format_double(-2.25), "-2.25");
  EXPECT_EQ(csv::format_double(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(csv::format_double(-std::numeric_limits<double>::infinity()), "-inf");
}

TEST(FormatDouble, RoundTripsExactly) {
  std::vector<double> values{0.1,    1.0 / 3.0, 1e-300, 1e300, 12345.6789,
                             -0.001, 2.5e-17,   0.0,    -0.0,  std::numeric_limits<double>::infinity()};
  for (double v : values) {
    double back = csv::parse_double(csv::format_double(v));
    EXPECT_EQ(back, v) << csv::format_double(v);
  }
  EXPECT_TRUE(std::isnan(csv::parse_double(csv::format_double(std::numeric_limits<double>::quiet_NaN()))));
}

TEST(ParseDouble, AcceptsInfSpellingsAndRejectsJunk) {
  EXPECT_EQ(csv::parse_double("inf"), std::numeric_limits<double>::infinity());
  EXPECT_EQ(csv::parse_double("-inf"), -std::numeric_limits<double>::infinity());
  EXPECT_EQ(csv::parse_double("3.5"), 3.5);
  EXPECT_THROW(csv::parse_double(""), csv::ParseError);
  EXPECT_THROW(csv::parse_double("abc"), csv::ParseError);
  EXPECT_THROW(csv::parse_double("3.5x"), csv::ParseError);
}

TEST(ParseInt, Basics) {
  EXPECT_EQ(csv::parse_int("42"), 42);
  EXPECT_EQ(csv::parse_int("-7"), -7);
  EXPECT_THROW(csv::parse_int("4.2"), csv::ParseError);
  EXPECT_THROW(csv::parse_int(""), csv::ParseError);
}

TEST(ParseU64, CoversFullUnsignedRange) {
  // Values above INT64_MAX, such as hashed seeds, must survive a round trip.
  EXPECT_EQ(csv::parse_u64("15418913865167612138"), 15418913865167612138u);
  EXPECT_EQ(csv::parse_u64(std::to_string(std::numeric_limits<std::uint64_t>::max())),
            std::numeric_limits<std::uint64_t>::max());
  EXPECT_THROW(csv::parse_u64("-1"), csv::ParseError);
  EXPECT_THROW(csv::parse_u64("18446744073709551616"), csv::ParseError);  // 2^64
  EXPECT_THROW(csv::parse_u64(""), csv::ParseError);
}

TEST(Split, KeepsEmptyFields) {
  auto f = csv::split("a,b,,d,", ',');
  ASSERT_EQ(f.size(), 5u);
  EXPECT_EQ(f[0], "a");
  EXPECT_EQ(f[2], "");
  EXPECT_EQ(f[4], "");
  auto g = csv::split("", ',');
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g[0], "");
}

TEST(SplitQuoted, HandlesQuotesAndEscapes) {
  auto f = csv::split_quoted("\"a;b\";\"say \"\"hi\"\"\";plain", ';');
  ASSERT_EQ(f.size(), 3u);
  EXPECT_EQ(f[0], "a;b");
  EXPECT_EQ(f[1], "say \"hi\"");
  EXPECT_EQ(f[2], "plain");
}

TEST(Trim, StripsAsciiWhitespace) {
  EXPECT_EQ(csv::trim("  x y \t"), "x y");
  EXPECT_EQ(csv::trim(""), "");
  EXPECT_EQ(csv::trim(" \t "), "");
}

TEST(Files, WriteReadRoundTrip) {
  std::string path = ::testing::TempDir() + "privrec_csv_roundtrip.txt";
  csv::write_file(path, "line1\nline2\n\nline4\n");
  auto lines = csv::read_lines(path);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0], "line1");
  EXPECT_EQ(lines[2], "");
  EXPECT_EQ(csv::read_file(path), "line1\nline2\n\nline4\n");
  std::remove(path.c_str());
}

TEST(Files, ReadLinesStripsCarriageReturns) {
  std::string path = ::testing::TempDir() + "privrec_csv_crlf.txt";
  csv::write_file(path, "a\r\nb\r\n");
  auto lines = csv::read_lines(path);
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0], "a");
  EXPECT_EQ(lines[1], "b");
  std::remove(path.c_str());
}
