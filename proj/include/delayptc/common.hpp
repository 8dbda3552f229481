#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace delayptc {

/// Error carrying a stable, machine-checkable code such as "unknown-station".
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

using Timestamp = std::chrono::sys_seconds;
using Date = std::chrono::year_month_day;

// Time-of-day helpers. Minutes are measured from local midnight; timestamps
// carry local wall-clock time with no zone attached.

std::optional<Timestamp> parse_compact_timestamp(std::string_view text);  // yyyyMMddHHmmss
std::string format_compact_timestamp(Timestamp ts);
std::optional<Timestamp> parse_iso_timestamp(std::string_view text);      // yyyy-MM-dd HH:mm:ss
std::string format_iso_timestamp(Timestamp ts);
std::optional<Date> parse_date(std::string_view text);                    // yyyy-MM-dd
std::string format_date(Date date);
std::optional<int> parse_hhmm(std::string_view text);                     // HH:MM -> minutes
std::string format_hhmm(int minutes);

Date date_of(Timestamp ts);
double minute_of_day(Timestamp ts);
Timestamp make_timestamp(Date date, int seconds_of_day);
bool is_weekend(Date date);

/// Deterministic generator. Only the raw mt19937_64 stream is used so that
/// sequences are identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next();
    double uniform();                                   // [0, 1)
    double uniform(double lo, double hi);               // [lo, hi)
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);  // [lo, hi]
    bool bernoulli(double p);

    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

/// Mean and population standard deviation (divide by n); {0,0} when empty.
MeanStd mean_and_population_std(std::span<const double> values);

std::string trim(std::string_view text);
std::string to_lower(std::string_view text);
std::vector<std::string> split(std::string_view text, char delimiter);

/// Splits one delimited row. Tab, '|' and ',' are accepted in that order of
/// preference; fields are trimmed.
std::vector<std::string> split_row(std::string_view line);

/// Fixed-precision decimal rendering with no locale influence.
std::string format_decimal(double value, int precision);

std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename so readers never see partial output.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace delayptc
