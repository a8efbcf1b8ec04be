#include "tsad/timeseries.hpp"

#include "tsad/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

namespace tsad {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

bool parse_double(std::string_view field, double& out) {
    if (field.empty()) return false;
    // std::from_chars for double is available in libstdc++ 11.
    const auto* begin = field.data();
    const auto* end = field.data() + field.size();
    if (*begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end && std::isfinite(out);
}

bool looks_numeric(std::string_view field) {
    double ignored = 0.0;
    return parse_double(field, ignored);
}

}  // namespace

std::vector<SeriesPoint> load_series(const std::filesystem::path& path, SeriesSchema schema) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open series file: " + path.string());

    std::vector<SeriesPoint> points;
    std::string line;
    std::size_t line_no = 0;
    bool first_content = true;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = trim(line);
        if (body.empty()) continue;
        auto fields = split_fields(body);
        if (first_content) {
            first_content = false;
            if (!looks_numeric(fields.front())) continue;  // header row
        }

        const auto where = path.string() + ":" + std::to_string(line_no);
        std::size_t expected = fields.size();
        if (schema == SeriesSchema::labeled) expected = 3;
        if (schema == SeriesSchema::unlabeled) expected = 2;
        if (fields.size() != expected || (expected != 2 && expected != 3)) {
            throw ParseError("malformed row at line " + std::to_string(line_no) + " (" + where +
                             "): expected " +
                             (schema == SeriesSchema::detect ? std::string("2 or 3")
                                                             : std::to_string(expected)) +
                             " fields");
        }

        SeriesPoint point;
        double ts = 0.0;
        if (!parse_double(fields[0], ts) || ts != std::floor(ts)) {
            throw ParseError("malformed timestamp at line " + std::to_string(line_no) + " (" +
                             where + ")");
        }
        point.timestamp = static_cast<std::int64_t>(ts);
        if (!parse_double(fields[1], point.value)) {
            throw ParseError("malformed value at line " + std::to_string(line_no) + " (" + where +
                             ")");
        }
        if (fields.size() == 3) {
            double label = 0.0;
            if (!parse_double(fields[2], label) || (label != 0.0 && label != 1.0)) {
                throw ParseError("malformed label at line " + std::to_string(line_no) + " (" +
                                 where + "): expected 0 or 1");
            }
            point.label = static_cast<int>(label);
        }
        if (!points.empty() && point.timestamp <= points.back().timestamp) {
            throw DataError("non-monotone timestamp at line " + std::to_string(line_no) + " (" +
                            where + ")");
        }
        points.push_back(point);
    }
    if (points.empty()) throw DataError("no data rows in " + path.string());
    return points;
}

std::vector<SeriesPoint> generate_synthetic(std::size_t length, double anomaly_rate,
                                            std::uint64_t seed) {
    if (!(anomaly_rate >= 0.0 && anomaly_rate < 0.5)) {
        throw ArgumentError("anomaly_rate must lie in [0, 0.5)");
    }
    if (length < 2) throw ArgumentError("synthetic length must be at least 2");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.1);

    constexpr double kPi = 3.14159265358979323846;
    const double period = 40.0 + 40.0 * unit(rng);
    const double phase = 2.0 * kPi * unit(rng);

    std::vector<double> base(length);
    for (std::size_t t = 0; t < length; ++t) {
        base[t] = std::sin(2.0 * kPi * static_cast<double>(t) / period + phase) + noise(rng);
    }
    const double mean = std::accumulate(base.begin(), base.end(), 0.0) / static_cast<double>(length);
    double var = 0.0;
    for (double v : base) var += (v - mean) * (v - mean);
    const double base_std = std::sqrt(var / static_cast<double>(length));

    const auto count = static_cast<std::size_t>(std::floor(static_cast<double>(length) * anomaly_rate + 1e-9));
    std::vector<std::size_t> positions(length);
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    std::shuffle(positions.begin(), positions.end(), rng);
    positions.resize(count);
    std::sort(positions.begin(), positions.end());

    std::vector<SeriesPoint> points(length);
    for (std::size_t t = 0; t < length; ++t) {
        points[t].timestamp = static_cast<std::int64_t>(t + 1);
        points[t].value = base[t];
        points[t].label = 0;
    }
    for (std::size_t pos : positions) {
        const double magnitude = base_std * (5.0 + 3.0 * unit(rng));
        const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
        points[pos].value += sign * magnitude;
        points[pos].label = 1;
    }
    return points;
}

void write_series(const std::filesystem::path& path, const std::vector<SeriesPoint>& points) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write series file: " + path.string());
    const bool labeled = !points.empty() && points.front().label.has_value();
    out << (labeled ? "timestamp,value,is_anomaly\n" : "timestamp,value\n");
    out << std::setprecision(17);
    for (const auto& p : points) {
        out << p.timestamp << ',' << p.value;
        if (labeled) out << ',' << p.label.value_or(0);
        out << '\n';
    }
}

Vector WindowDataset::raw_window(std::size_t window) const {
    Vector out(n_steps);
    const std::size_t start = end_point(window) + 1 - static_cast<std::size_t>(n_steps);
    for (int k = 0; k < n_steps; ++k) out[k] = (*series)[start + static_cast<std::size_t>(k)];
    return out;
}

std::vector<double> WindowDataset::raw_context(std::size_t window) const {
    const auto n = static_cast<std::size_t>(n_steps);
    const std::size_t start = end_point(window) + 1 - n;
    const std::size_t lo = start >= n ? start - n : 0;
    const std::size_t hi = std::min(series->size(), end_point(window) + 1 + n);
    return {series->begin() + static_cast<std::ptrdiff_t>(lo),
            series->begin() + static_cast<std::ptrdiff_t>(hi)};
}

std::pair<double, double> window_statistics(const WindowDataset& dataset, std::size_t begin,
                                            std::size_t end) {
    const auto n = static_cast<std::size_t>(dataset.n_steps);
    const auto& s = *dataset.series;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t w = begin; w < end; ++w) {
        const std::size_t start = dataset.end_point(w) + 1 - n;
        for (std::size_t k = 0; k < n; ++k) sum += s[start + k];
        count += n;
    }
    if (count == 0) throw DataError("no windows to compute statistics over");
    const double mean = sum / static_cast<double>(count);
    double sq = 0.0;
    for (std::size_t w = begin; w < end; ++w) {
        const std::size_t start = dataset.end_point(w) + 1 - n;
        for (std::size_t k = 0; k < n; ++k) sq += (s[start + k] - mean) * (s[start + k] - mean);
    }
    return {mean, std::sqrt(sq / static_cast<double>(count))};
}

void restandardize(WindowDataset& dataset, double mean, double std) {
    if (!(std > 0.0) || !std::isfinite(std)) throw DataError("zero variance: cannot standardize");
    for (std::size_t w = 0; w < dataset.num_windows(); ++w) {
        dataset.windows.row(static_cast<Eigen::Index>(w)) =
            ((dataset.raw_window(w).array() - mean) / std).transpose();
    }
    dataset.mean = mean;
    dataset.std = std;
    dataset.standardized = true;
}

WindowDataset make_windows(const std::vector<SeriesPoint>& points, int n_steps, bool standardize) {
    if (n_steps < 1) throw ArgumentError("n_steps must be positive");
    const auto n = static_cast<std::size_t>(n_steps);
    if (points.size() < n) {
        throw DataError("series of length " + std::to_string(points.size()) +
                        " is shorter than n_steps " + std::to_string(n_steps));
    }
    auto values = std::make_shared<std::vector<double>>(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) (*values)[i] = points[i].value;

    WindowDataset ds;
    ds.n_steps = n_steps;
    ds.series = values;
    ds.first_end = n - 1;
    const std::size_t count = points.size() - n + 1;
    ds.windows.resize(static_cast<Eigen::Index>(count), n_steps);
    for (std::size_t w = 0; w < count; ++w) {
        for (std::size_t k = 0; k < n; ++k) {
            ds.windows(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(k)) = (*values)[w + k];
        }
    }
    const bool all_labeled = std::all_of(points.begin(), points.end(),
                                         [](const SeriesPoint& p) { return p.label.has_value(); });
    if (all_labeled) {
        std::vector<int> labels(count);
        for (std::size_t w = 0; w < count; ++w) labels[w] = *points[w + n - 1].label;
        ds.labels = std::move(labels);
    }
    if (standardize) {
        const auto [mean, std] = window_statistics(ds, 0, count);
        if (!(std > 0.0)) throw DataError("zero variance: cannot standardize a constant series");
        restandardize(ds, mean, std);
    }
    return ds;
}

namespace {

WindowDataset slice(const WindowDataset& ds, std::size_t begin, std::size_t end) {
    WindowDataset out;
    out.n_steps = ds.n_steps;
    out.series = ds.series;
    out.first_end = ds.first_end + begin;
    out.standardized = ds.standardized;
    out.mean = ds.mean;
    out.std = ds.std;
    out.windows = ds.windows.middleRows(static_cast<Eigen::Index>(begin),
                                       static_cast<Eigen::Index>(end - begin));
    if (ds.labels) out.labels = std::vector<int>(ds.labels->begin() + static_cast<std::ptrdiff_t>(begin),
                                                 ds.labels->begin() + static_cast<std::ptrdiff_t>(end));
    return out;
}

}  // namespace

std::pair<WindowDataset, WindowDataset> split(const WindowDataset& dataset, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ArgumentError("train_fraction must lie in (0, 1)");
    }
    const std::size_t total = dataset.num_windows();
    const auto train_count =
        static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(total)));
    if (train_count == 0 || train_count == total) {
        throw DataError("split leaves an empty train or validation part");
    }
    auto train = slice(dataset, 0, train_count);
    auto valid = slice(dataset, train_count, total);
    if (dataset.standardized) {
        const auto [mean, std] = window_statistics(dataset, 0, train_count);
        restandardize(train, mean, std);
        restandardize(valid, mean, std);
    }
    return {std::move(train), std::move(valid)};
}

}  // namespace tsad
