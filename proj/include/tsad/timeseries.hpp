#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace tsad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct SeriesPoint {
    std::int64_t timestamp = 0;
    double value = 0.0;
    std::optional<int> label;  // 0 normal, 1 anomaly
};

enum class SeriesSchema {
    detect,     // three columns means labeled, two means unlabeled
    labeled,    // timestamp,value,is_anomaly
    unlabeled,  // timestamp,value
};

// Reads a benchmark CSV (optional header row). Timestamps must be strictly
// increasing; line numbers in errors are physical file lines starting at 1.
std::vector<SeriesPoint> load_series(const std::filesystem::path& path,
                                     SeriesSchema schema = SeriesSchema::detect);

// Sinusoid plus Gaussian noise with floor(length * anomaly_rate) additive
// spikes of at least five baseline standard deviations.
std::vector<SeriesPoint> generate_synthetic(std::size_t length, double anomaly_rate,
                                            std::uint64_t seed);

void write_series(const std::filesystem::path& path, const std::vector<SeriesPoint>& points);

// Stride-1 sliding windows over a univariate series. Row i of `windows` is the
// window whose last point is series point (first_end + i); its label is that
// point's label.
struct WindowDataset {
    Matrix windows;  // num_windows x n_steps
    std::optional<std::vector<int>> labels;
    int n_steps = 0;
    bool standardized = false;
    double mean = 0.0;
    double std = 1.0;

    std::shared_ptr<const std::vector<double>> series;  // raw values of the full source series
    std::size_t first_end = 0;

    std::size_t num_windows() const { return static_cast<std::size_t>(windows.rows()); }
    bool has_labels() const { return labels.has_value(); }

    // Index into the source series of window i's last point.
    std::size_t end_point(std::size_t window) const { return first_end + window; }
    Vector raw_window(std::size_t window) const;
    // Up to 3 * n_steps raw values centred on the window, clipped at the series ends.
    std::vector<double> raw_context(std::size_t window) const;
};

WindowDataset make_windows(const std::vector<SeriesPoint>& points, int n_steps, bool standardize);

// Re-applies a (mean, std) transform to the raw values behind each window.
void restandardize(WindowDataset& dataset, double mean, double std);

// Chronological split: floor(train_fraction * W) windows to train, the rest to
// validation. If the input is standardized, both halves are re-standardized with
// statistics of the train windows.
std::pair<WindowDataset, WindowDataset> split(const WindowDataset& dataset, double train_fraction);

// Mean and population standard deviation over every entry of the raw windows
// [begin, end).
std::pair<double, double> window_statistics(const WindowDataset& dataset, std::size_t begin,
                                            std::size_t end);

}  // namespace tsad
