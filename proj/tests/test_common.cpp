#include "delayptc/common.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace delayptc;

TEST(Time, CompactAndIsoRoundTrip) {
    auto ts = parse_compact_timestamp("20190820075012");
    ASSERT_TRUE(ts);
    EXPECT_EQ(format_compact_timestamp(*ts), "20190820075012");
    EXPECT_EQ(format_iso_timestamp(*ts), "2019-08-20 07:50:12");
    EXPECT_EQ(parse_iso_timestamp("2019-08-20 07:50:12"), ts);
    EXPECT_DOUBLE_EQ(minute_of_day(*ts), 7 * 60 + 50 + 12.0 / 60.0);
    EXPECT_EQ(format_date(date_of(*ts)), "2019-08-20");
}

TEST(Time, RejectsGarbage) {
    EXPECT_FALSE(parse_compact_timestamp("2019082007501"));
    EXPECT_FALSE(parse_compact_timestamp("20191320075012"));
    EXPECT_FALSE(parse_compact_timestamp("20190820255012"));
    EXPECT_FALSE(parse_date("2019-02-30"));
    EXPECT_FALSE(parse_hhmm("24:00"));
    EXPECT_EQ(parse_hhmm("07:05"), 425);
    EXPECT_EQ(format_hhmm(425), "07:05");
}

TEST(Time, Weekend) {
    EXPECT_TRUE(is_weekend(*parse_date("2019-08-03")));
    EXPECT_TRUE(is_weekend(*parse_date("2019-08-04")));
    EXPECT_FALSE(is_weekend(*parse_date("2019-08-05")));
}

TEST(Rng, SameSeedSameStream) {
    Rng a(7), b(7), c(8);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        auto x = a.next();
        EXPECT_EQ(x, b.next());
        differs |= x != c.next();
    }
    EXPECT_TRUE(differs);
}

TEST(Rng, UniformIntStaysInRange) {
    Rng rng(1);
    std::vector<int> hits(5);
    for (int i = 0; i < 5000; ++i) {
        auto v = rng.uniform_int(3, 7);
        ASSERT_GE(v, 3);
        ASSERT_LE(v, 7);
        ++hits[static_cast<std::size_t>(v - 3)];
    }
    for (int h : hits) EXPECT_GT(h, 800);
    for (int i = 0; i < 1000; ++i) {
        double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(Stats, PopulationStd) {
    std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
    auto ms = mean_and_population_std(v);
    EXPECT_DOUBLE_EQ(ms.mean, 5.0);
    EXPECT_DOUBLE_EQ(ms.std, 2.0);
    EXPECT_DOUBLE_EQ(mean_and_population_std(std::vector<double>{}).std, 0.0);
}

TEST(Strings, SplitRowPrefersTabs) {
    EXPECT_EQ(split_row("RF +GPT-4\t0.55\t0.76"), (std::vector<std::string>{"RF +GPT-4", "0.55", "0.76"}));
    EXPECT_EQ(split_row("a | b | c"), (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_EQ(split_row("a,b"), (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(format_decimal(0.126, 2), "0.13");
    EXPECT_EQ(format_decimal(-0.0001, 2), "0.00");
}

TEST(Files, AtomicWriteReplaces) {
    auto dir = std::filesystem::temp_directory_path() / "delayptc_common_test";
    std::filesystem::remove_all(dir);
    write_file_atomic(dir / "nested" / "a.txt", "one");
    write_file_atomic(dir / "nested" / "a.txt", "two");
    EXPECT_EQ(read_file(dir / "nested" / "a.txt"), "two");
    EXPECT_EQ(std::distance(std::filesystem::directory_iterator(dir / "nested"), {}), 1);
    EXPECT_THROW(read_file(dir / "missing"), Error);
    std::filesystem::remove_all(dir);
}
