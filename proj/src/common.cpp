#include "delayptc/common.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace delayptc {

namespace {

std::optional<int> parse_digits(std::string_view text) {
    if (text.empty()) return std::nullopt;
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

bool all_digits(std::string_view text) {
    return std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isdigit(c); });
}

std::optional<Timestamp> build_timestamp(int y, int mo, int d, int h, int mi, int s) {
    Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
              std::chrono::day{static_cast<unsigned>(d)}};
    if (!date.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 59) return std::nullopt;
    return make_timestamp(date, h * 3600 + mi * 60 + s);
}

}  // namespace

std::optional<Timestamp> parse_compact_timestamp(std::string_view text) {
    if (text.size() != 14 || !all_digits(text)) return std::nullopt;
    auto field = [&](std::size_t pos, std::size_t len) { return *parse_digits(text.substr(pos, len)); };
    return build_timestamp(field(0, 4), field(4, 2), field(6, 2), field(8, 2), field(10, 2), field(12, 2));
}

std::string format_compact_timestamp(Timestamp ts) {
    auto date = date_of(ts);
    auto secs = static_cast<int>((ts - std::chrono::sys_days{date}).count());
    return fmt::format("{:04d}{:02d}{:02d}{:02d}{:02d}{:02d}", static_cast<int>(date.year()),
                       static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()), secs / 3600,
                       (secs / 60) % 60, secs % 60);
}

std::optional<Timestamp> parse_iso_timestamp(std::string_view text) {
    if (text.size() != 19 || text[4] != '-' || text[7] != '-' || text[10] != ' ' || text[13] != ':' ||
        text[16] != ':')
        return std::nullopt;
    std::string compact;
    for (char c : text)
        if (std::isdigit(static_cast<unsigned char>(c))) compact.push_back(c);
    return parse_compact_timestamp(compact);
}

std::string format_iso_timestamp(Timestamp ts) {
    auto c = format_compact_timestamp(ts);
    return fmt::format("{}-{}-{} {}:{}:{}", c.substr(0, 4), c.substr(4, 2), c.substr(6, 2), c.substr(8, 2),
                       c.substr(10, 2), c.substr(12, 2));
}

std::optional<Date> parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    auto y = parse_digits(text.substr(0, 4));
    auto m = parse_digits(text.substr(5, 2));
    auto d = parse_digits(text.substr(8, 2));
    if (!y || !m || !d) return std::nullopt;
    Date date{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
              std::chrono::day{static_cast<unsigned>(*d)}};
    if (!date.ok()) return std::nullopt;
    return date;
}

std::string format_date(Date date) {
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(date.year()), static_cast<unsigned>(date.month()),
                       static_cast<unsigned>(date.day()));
}

std::optional<int> parse_hhmm(std::string_view text) {
    auto colon = text.find(':');
    if (colon == std::string_view::npos || colon == 0 || colon > 2 || text.size() - colon != 3)
        return std::nullopt;
    auto h = parse_digits(text.substr(0, colon));
    auto m = parse_digits(text.substr(colon + 1));
    if (!h || !m || *h > 23 || *m > 59) return std::nullopt;
    return *h * 60 + *m;
}

std::string format_hhmm(int minutes) { return fmt::format("{:02d}:{:02d}", minutes / 60, minutes % 60); }

Date date_of(Timestamp ts) { return Date{std::chrono::floor<std::chrono::days>(ts)}; }

double minute_of_day(Timestamp ts) {
    auto midnight = std::chrono::floor<std::chrono::days>(ts);
    return static_cast<double>((ts - midnight).count()) / 60.0;
}

Timestamp make_timestamp(Date date, int seconds_of_day) {
    return std::chrono::sys_days{date} + std::chrono::seconds{seconds_of_day};
}

bool is_weekend(Date date) {
    std::chrono::weekday wd{std::chrono::sys_days{date}};
    return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next() { return engine_(); }

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) return lo;
    auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    // Rejection sampling keeps the draw unbiased.
    std::uint64_t limit = span == 0 ? 0 : (~std::uint64_t{0} - span + 1) % span;
    std::uint64_t x;
    do {
        x = next();
    } while (x < limit);
    return lo + static_cast<std::int64_t>(x % span);
}

bool Rng::bernoulli(double p) { return uniform() < p; }

MeanStd mean_and_population_std(std::span<const double> values) {
    if (values.empty()) return {};
    double sum = 0.0;
    for (double v : values) sum += v;
    double mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - mean) * (v - mean);
    return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

std::string trim(std::string_view text) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    std::size_t b = 0, e = text.size();
    while (b < e && is_space(text[b])) ++b;
    while (e > b && is_space(text[e - 1])) --e;
    return std::string(text.substr(b, e - b));
}

std::string to_lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<std::string> split(std::string_view text, char delimiter) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = text.find(delimiter, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(text.substr(start));
            break;
        }
        out.emplace_back(text.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::vector<std::string> split_row(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    char delimiter = ',';
    if (line.find('\t') != std::string_view::npos)
        delimiter = '\t';
    else if (line.find('|') != std::string_view::npos)
        delimiter = '|';
    auto fields = split(line, delimiter);
    for (auto& f : fields) f = trim(f);
    return fields;
}

std::string format_decimal(double value, int precision) {
    auto text = fmt::format("{:.{}f}", value, precision);
    if (text.front() == '-' && text.find_first_not_of("-0.") == std::string::npos) text.erase(0, 1);
    return text;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("unreadable-source", "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("unwritable-output", "cannot open " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("unwritable-output", "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace delayptc
