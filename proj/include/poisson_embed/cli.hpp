#pragma once

#include "poisson_embed/mesh.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace poisson_embed {

inline constexpr const char* kToolVersion = "0.1.0";

// RFC-4180 table; every cell is stored as text.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row);
};

// Shortest round-trip text ('.' decimal, locale independent).
std::string format_number(double v);
std::string format_number(int v);
std::string csv_escape(const std::string& cell);
void write_csv(std::ostream& os, const CsvTable& table);
void write_csv_file(const std::string& path, const CsvTable& table);
CsvTable read_csv(std::istream& is);
CsvTable read_csv_file(const std::string& path);

// Flat key=value configuration with [section] headers. Keys are stored as
// "section.key"; keys before the first header have no prefix. '#' and ';'
// start comment lines.
class Config {
public:
    static Config parse(std::istream& is);
    static Config parse_string(const std::string& text);
    static Config load(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    const std::map<std::string, std::string>& values() const { return values_; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    // Throw ConfigError naming the key when it is missing or malformed.
    std::string get_string(const std::string& key) const;
    double get_double(const std::string& key) const;
    int get_int(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;

    // ConfigError naming the first key not in allowed.
    void require_known(const std::vector<std::string>& allowed) const;

private:
    std::map<std::string, std::string> values_;
};

// Metric library: identity, conformal (exp(2 alpha x1) I), aniso (diag(1, 4)).
MetricField named_metric(const std::string& name, double alpha = 1.0);

struct CheckResult {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
};

enum class Compare { AtMost, AtLeast, Above };

struct RunReport {
    std::string scenario;
    std::string version = kToolVersion;
    std::vector<CheckResult> checks;
    // Tracked error metrics (smaller is better), compared against baselines.
    std::map<std::string, double> metrics;
    std::map<std::string, CsvTable> tables;
    // name -> SVG document
    std::map<std::string, std::string> plots;
    double seconds = 0.0;

    bool passed() const;
    void check(const std::string& name, double value, double threshold, Compare cmp = Compare::AtMost,
               const std::string& detail = {});
    CsvTable checks_table() const;
    CsvTable metrics_table() const;
};

std::vector<std::string> scenario_names();

// Runs the scenario named by [scenario] name with the overrides in config.
RunReport run_scenario(const Config& config);

// Writes checks.csv, metrics.csv, one CSV per table and one SVG per plot
// into dir, and a summary.txt with timing and version.
void write_artifacts(const RunReport& report, const std::string& dir);

struct BaselineComparison {
    bool passed = true;
    std::vector<std::string> regressions;
    std::vector<std::string> warnings;
};

// A metric regresses when value > baseline * (1 + slack) + 1e-12.
BaselineComparison compare_baseline(const std::map<std::string, double>& metrics, const std::string& baseline_path,
                                    double slack = 0.2);
std::map<std::string, double> read_metrics_file(const std::string& path);

// Minimal SVG plots.
struct Segment {
    Point2 from, to;
};
std::string displacement_svg(const std::vector<Point2>& boundary, const std::vector<Segment>& arrows,
                             const std::string& title);
struct Series {
    std::string label;
    std::vector<double> x, y;
};
// log10-log10 axes when log_scale.
std::string curve_svg(const std::vector<Series>& series, const std::string& title, const std::string& xlabel,
                      const std::string& ylabel, bool log_scale);

} // namespace poisson_embed
