#include "coag2d/series.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "coag2d/errors.hpp"

namespace coag2d {

std::string MomentKey::name() const { return "M_" + format_double(k) + "_" + format_double(l); }

MomentSeries::MomentSeries(std::vector<MomentKey> keys, std::vector<std::string> aux_names)
    : keys_(std::move(keys)), aux_names_(std::move(aux_names)) {}

void MomentSeries::append(Row row) {
    if (row.moments.size() != keys_.size() || row.aux.size() != aux_names_.size()) {
        throw ConfigError("series row has the wrong number of columns");
    }
    if (!rows_.empty() && !(row.clock > rows_.back().clock)) {
        throw ConfigError("series clocks must increase strictly");
    }
    rows_.push_back(std::move(row));
}

std::optional<std::size_t> MomentSeries::moment_index(MomentKey key) const {
    for (std::size_t i = 0; i < keys_.size(); ++i) {
        if (keys_[i] == key) return i;
    }
    return std::nullopt;
}

std::optional<std::size_t> MomentSeries::aux_index(const std::string& name) const {
    for (std::size_t i = 0; i < aux_names_.size(); ++i) {
        if (aux_names_[i] == name) return i;
    }
    return std::nullopt;
}

std::vector<double> MomentSeries::moment_column(MomentKey key) const {
    const auto idx = moment_index(key);
    if (!idx) throw ConfigError("series lacks column " + key.name());
    std::vector<double> out;
    out.reserve(rows_.size());
    for (const auto& r : rows_) out.push_back(r.moments[*idx]);
    return out;
}

std::vector<double> MomentSeries::aux_column(const std::string& name) const {
    const auto idx = aux_index(name);
    if (!idx) throw ConfigError("series lacks column " + name);
    std::vector<double> out;
    out.reserve(rows_.size());
    for (const auto& r : rows_) out.push_back(r.aux[*idx]);
    return out;
}

std::vector<double> MomentSeries::clocks() const {
    std::vector<double> out;
    out.reserve(rows_.size());
    for (const auto& r : rows_) out.push_back(r.clock);
    return out;
}

void MomentSeries::write_csv(std::ostream& os) const {
    os << "clock";
    for (const auto& k : keys_) os << ',' << k.name();
    for (const auto& n : aux_names_) os << ',' << n;
    os << '\n';
    for (const auto& r : rows_) {
        os << format_double(r.clock);
        for (double x : r.moments) os << ',' << format_double(x);
        for (double x : r.aux) os << ',' << format_double(x);
        os << '\n';
    }
}

void MomentSeries::write_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open " + path + " for writing");
    write_csv(os);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
        if (!field.empty() && field.back() == '\r') field.pop_back();
        out.push_back(field);
    }
    return out;
}

std::optional<MomentKey> parse_moment_name(const std::string& name) {
    if (name.rfind("M_", 0) != 0) return std::nullopt;
    const auto rest = name.substr(2);
    // Exponents may be negative ("M_0_-0.5"), so split on the first '_' after
    // the first character.
    const auto sep = rest.find('_', 1);
    if (sep == std::string::npos) return std::nullopt;
    try {
        return MomentKey{parse_double(rest.substr(0, sep)), parse_double(rest.substr(sep + 1))};
    } catch (const ConfigError&) {
        return std::nullopt;
    }
}

}  // namespace

MomentSeries MomentSeries::read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("empty series CSV");
    const auto header = split_csv(line);
    if (header.empty() || header.front() != "clock") {
        throw ConfigError("series CSV must start with a 'clock' column");
    }
    std::vector<MomentKey> keys;
    std::vector<std::string> aux;
    std::vector<bool> is_moment;
    for (std::size_t i = 1; i < header.size(); ++i) {
        if (auto key = parse_moment_name(header[i]); key && aux.empty()) {
            keys.push_back(*key);
            is_moment.push_back(true);
        } else {
            aux.push_back(header[i]);
            is_moment.push_back(false);
        }
    }
    MomentSeries series(keys, aux);
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv(line);
        if (fields.size() != header.size()) throw ConfigError("series row width mismatch");
        Row row{parse_double(fields[0]), {}, {}};
        for (std::size_t i = 1; i < fields.size(); ++i) {
            (is_moment[i - 1] ? row.moments : row.aux).push_back(parse_double(fields[i]));
        }
        series.append(std::move(row));
    }
    return series;
}

MomentSeries MomentSeries::read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open " + path);
    return read_csv(is);
}

std::vector<std::string> standard_aux_names() { return {"ratio_av", "ratio_av23", "n_particles"}; }

MomentSeries::Row record_row(const Ensemble& e, std::span<const MomentKey> keys,
                             std::span<const std::string> extra_aux_names,
                             std::span<const double> extra_aux_values) {
    if (extra_aux_names.size() != extra_aux_values.size()) {
        throw ConfigError("aux name/value count mismatch");
    }
    MomentSeries::Row row{e.clock, {}, {}};
    row.moments.reserve(keys.size());
    for (const auto& key : keys) row.moments.push_back(moment(e, key.k, key.l));
    if (e.empty()) {
        row.aux = {0.0, 0.0, 0.0};
    } else {
        const auto ratios = mean_ratio_diagnostics(e);
        row.aux = {ratios.ratio_av, ratios.ratio_av23, static_cast<double>(e.size())};
    }
    row.aux.insert(row.aux.end(), extra_aux_values.begin(), extra_aux_values.end());
    return row;
}

SampleStats sample_stats(std::span<const double> xs) {
    SampleStats s;
    if (xs.empty()) return s;
    CompensatedSum sum;
    for (double x : xs) sum.add(x);
    s.mean = sum.value() / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        CompensatedSum sq;
        for (double x : xs) sq.add((x - s.mean) * (x - s.mean));
        s.sd = std::sqrt(sq.value() / static_cast<double>(xs.size() - 1));
        s.sem = s.sd / std::sqrt(static_cast<double>(xs.size()));
    }
    return s;
}

ReplicaSummary summarize(std::span<const MomentSeries> replicas) {
    if (replicas.empty()) throw ConfigError("no replicas to summarize");
    const auto& first = replicas.front();
    for (const auto& r : replicas) {
        if (r.keys() != first.keys() || r.aux_names() != first.aux_names() ||
            r.size() != first.size()) {
            throw ConfigError("replica series have different layouts");
        }
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (r.rows()[i].clock != first.rows()[i].clock) {
                throw ConfigError("replica series have different record clocks");
            }
        }
    }
    ReplicaSummary out{MomentSeries(first.keys(), first.aux_names()),
                       MomentSeries(first.keys(), first.aux_names()), replicas.size()};
    std::vector<double> buf(replicas.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        MomentSeries::Row mean{first.rows()[i].clock, {}, {}};
        MomentSeries::Row sem = mean;
        auto column = [&](auto getter, std::vector<double>& m, std::vector<double>& s) {
            for (std::size_t r = 0; r < replicas.size(); ++r) buf[r] = getter(replicas[r].rows()[i]);
            const auto st = sample_stats(buf);
            m.push_back(st.mean);
            s.push_back(st.sem);
        };
        for (std::size_t c = 0; c < first.keys().size(); ++c) {
            column([c](const MomentSeries::Row& row) { return row.moments[c]; }, mean.moments,
                   sem.moments);
        }
        for (std::size_t c = 0; c < first.aux_names().size(); ++c) {
            column([c](const MomentSeries::Row& row) { return row.aux[c]; }, mean.aux, sem.aux);
        }
        out.mean.append(std::move(mean));
        out.sem.append(std::move(sem));
    }
    return out;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw DomainError("line fit needs >= 2 points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw DomainError("line fit with constant abscissa");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    return f;
}

}  // namespace coag2d
