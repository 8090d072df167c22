#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "csv.hpp"

namespace lisgan {

// Metrics sink: keeps every row in memory (tests and evaluation read them
// back directly) and optionally streams the same rows to a CSV file. The
// first column is the batch index and prints as an integer; all other
// columns print as %.9g.
class MetricsSink {
public:
    MetricsSink() = default;

    void open(std::vector<std::string> columns, const std::string& path = "") {
        columns_ = std::move(columns);
        path_ = path;
        if (!path_.empty()) {
            file_.open(path_, std::ios::binary);
            if (!file_) throw IoError("metrics: cannot open for writing: " + path_);
            file_ << csv_join(columns_);
            check_write();
        }
    }

    const std::vector<std::string>& columns() const { return columns_; }
    const std::vector<std::vector<double>>& rows() const { return rows_; }

    void append(const std::vector<double>& row) {
        if (row.size() != columns_.size())
            throw ConfigError("metrics: row has " + std::to_string(row.size()) + " cells, schema has " +
                              std::to_string(columns_.size()));
        rows_.push_back(row);
        if (file_.is_open()) {
            std::vector<std::string> cells;
            cells.reserve(row.size());
            cells.push_back(std::to_string(static_cast<std::int64_t>(row[0])));
            for (std::size_t i = 1; i < row.size(); ++i) cells.push_back(format_float(row[i]));
            file_ << csv_join(cells);
            check_write();
        }
    }

    void flush() {
        if (file_.is_open()) {
            file_.flush();
            check_write();
        }
    }

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < columns_.size(); ++i)
            if (columns_[i] == name) return static_cast<int>(i);
        throw ConfigError("metrics: no column named '" + name + "'");
    }

private:
    void check_write() {
        if (!file_) throw IoError("metrics: write failed: " + path_);
    }

    std::vector<std::string> columns_;
    std::vector<std::vector<double>> rows_;
    std::string path_;
    std::ofstream file_;
};

// Schema of the adversarial trainers for a given module/iteration count:
// batch, d_real, d_fake per stage 0..n_r, adversarial g per stage, and the
// similarity constraint per module 1..n_r.
inline std::vector<std::string> adversarial_metric_columns(int n_r) {
    std::vector<std::string> cols{"batch", "d_real"};
    for (int i = 0; i <= n_r; ++i) cols.push_back("d_fake_m" + std::to_string(i));
    for (int i = 0; i <= n_r; ++i) cols.push_back("g_m" + std::to_string(i));
    for (int i = 1; i <= n_r; ++i) cols.push_back("l_r_m" + std::to_string(i));
    return cols;
}

inline std::vector<std::string> reverser_metric_columns() {
    return {"batch", "r_loss", "r_mse"};
}

} // namespace lisgan
