#pragma once

#include <cmath>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "offnac/chain.hpp"
#include "offnac/mdp_io.hpp"
#include "offnac/nac.hpp"

namespace offnac {

// CSV schema version; bump when columns change.
inline constexpr const char* kCsvSchemaLine = "#schema=1";

inline void write_run_csv(std::ostream& out, const RunRecord& record) {
    out << kCsvSchemaLine << "\n";
    out << "t,gap,critic_err,fp_err\n";
    for (const auto& row : record.rows)
        out << row.t << ',' << detail::format_double(row.gap) << ','
            << detail::format_double(row.critic_err) << ','
            << detail::format_double(row.fixed_point_err) << "\n";
}

inline void write_run_csv(const std::string& path, const RunRecord& record) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_run_csv(out, record);
}

/// Per-iteration mean and (sample) standard deviation across seeds for
/// each RunRecord column. All records must share the same length.
struct AggregateRecord {
    std::vector<long> t;
    std::vector<double> gap_mean, gap_std;
    std::vector<double> critic_err_mean, critic_err_std;
    std::vector<double> fp_err_mean, fp_err_std;
};

inline AggregateRecord aggregate_records(const std::vector<RunRecord>& records) {
    if (records.empty()) throw std::invalid_argument("aggregate_records: no records");
    const std::size_t len = records[0].rows.size();
    for (const auto& r : records)
        if (r.rows.size() != len) throw std::invalid_argument("aggregate_records: length mismatch");
    const double n = static_cast<double>(records.size());
    AggregateRecord agg;
    auto stats = [&](auto getter, std::vector<double>& mean_out, std::vector<double>& std_out) {
        for (std::size_t i = 0; i < len; ++i) {
            double mean = 0.0;
            for (const auto& r : records) mean += getter(r.rows[i]);
            mean /= n;
            double ss = 0.0;
            for (const auto& r : records) {
                const double d = getter(r.rows[i]) - mean;
                ss += d * d;
            }
            mean_out.push_back(mean);
            std_out.push_back(records.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0);
        }
    };
    for (std::size_t i = 0; i < len; ++i) agg.t.push_back(records[0].rows[i].t);
    stats([](const IterationStats& s) { return s.gap; }, agg.gap_mean, agg.gap_std);
    stats([](const IterationStats& s) { return s.critic_err; }, agg.critic_err_mean,
          agg.critic_err_std);
    stats([](const IterationStats& s) { return s.fixed_point_err; }, agg.fp_err_mean,
          agg.fp_err_std);
    return agg;
}

inline void write_aggregate_csv(std::ostream& out, const AggregateRecord& agg) {
    out << kCsvSchemaLine << "\n";
    out << "t,gap_mean,gap_std,critic_err_mean,critic_err_std,fp_err_mean,fp_err_std\n";
    for (std::size_t i = 0; i < agg.t.size(); ++i)
        out << agg.t[i] << ',' << detail::format_double(agg.gap_mean[i]) << ','
            << detail::format_double(agg.gap_std[i]) << ','
            << detail::format_double(agg.critic_err_mean[i]) << ','
            << detail::format_double(agg.critic_err_std[i]) << ','
            << detail::format_double(agg.fp_err_mean[i]) << ','
            << detail::format_double(agg.fp_err_std[i]) << "\n";
}

inline void write_aggregate_csv(const std::string& path, const AggregateRecord& agg) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_aggregate_csv(out, agg);
}

inline void write_mixing_csv(std::ostream& out, const MixingReport& report) {
    out << kCsvSchemaLine << "\n";
    out << "k,max_tv\n";
    for (std::size_t k = 0; k < report.max_tv_by_step.size(); ++k)
        out << k << ',' << detail::format_double(report.max_tv_by_step[k]) << "\n";
}

/// Dense matrix dump, one row per line; debugging aid for the expected
/// critic operator.
inline void write_matrix_csv(std::ostream& out, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j > 0) out << ',';
            out << detail::format_double(m(i, j));
        }
        out << "\n";
    }
}

} // namespace offnac
