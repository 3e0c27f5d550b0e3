#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coag2d/state.hpp"

namespace coag2d {

/// Exponent pair (k, l) of the moment M_{k,l}.
struct MomentKey {
    double k;
    double l;

    bool operator==(const MomentKey&) const = default;
    std::string name() const;  // "M_k_l"
};

/// Time-stamped moment records. Columns are the requested moments followed by
/// auxiliary named columns (diagnostics the engines compute alongside).
class MomentSeries {
public:
    struct Row {
        double clock;
        std::vector<double> moments;
        std::vector<double> aux;
    };

    MomentSeries() = default;
    MomentSeries(std::vector<MomentKey> keys, std::vector<std::string> aux_names);

    const std::vector<MomentKey>& keys() const { return keys_; }
    const std::vector<std::string>& aux_names() const { return aux_names_; }
    const std::vector<Row>& rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }

    /// Clocks must increase strictly.
    void append(Row row);

    std::optional<std::size_t> moment_index(MomentKey key) const;
    std::optional<std::size_t> aux_index(const std::string& name) const;

    /// Column values over all rows; throws ConfigError if absent.
    std::vector<double> moment_column(MomentKey key) const;
    std::vector<double> aux_column(const std::string& name) const;
    std::vector<double> clocks() const;

    bool has_moment(MomentKey key) const { return moment_index(key).has_value(); }
    bool has_aux(const std::string& name) const { return aux_index(name).has_value(); }

    void write_csv(std::ostream& os) const;
    void write_csv(const std::string& path) const;
    static MomentSeries read_csv(std::istream& is);
    static MomentSeries read_csv(const std::string& path);

private:
    std::vector<MomentKey> keys_;
    std::vector<std::string> aux_names_;
    std::vector<Row> rows_;
};

/// Records one row from an ensemble: the requested moments plus derived
/// <a>/<v> and <a>/<v>^{2/3} and the particle count.
MomentSeries::Row record_row(const Ensemble& e, std::span<const MomentKey> keys,
                             std::span<const std::string> extra_aux_names,
                             std::span<const double> extra_aux_values);

/// Standard aux columns written by record_row, before any engine-specific ones.
std::vector<std::string> standard_aux_names();

/// Column-wise mean and standard error over replicas with identical clocks.
struct ReplicaSummary {
    MomentSeries mean;
    MomentSeries sem;
    std::size_t replicas = 0;
};

ReplicaSummary summarize(std::span<const MomentSeries> replicas);

/// Mean and standard error of a sample.
struct SampleStats {
    double mean = 0.0;
    double sem = 0.0;
    double sd = 0.0;
};
SampleStats sample_stats(std::span<const double> xs);

/// Least-squares line y = intercept + slope x.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace coag2d
