#include "poisson_embed/cli.hpp"

#include "poisson_embed/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace poisson_embed {

void CsvTable::add_row(std::vector<std::string> row) {
    if (row.size() != header.size()) {
        throw Error(ErrorCode::InvalidArgument, "row has " + std::to_string(row.size()) + " cells, header has " +
                                                    std::to_string(header.size()));
    }
    rows.push_back(std::move(row));
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_number(int v) { return std::to_string(v); }

std::string csv_escape(const std::string& cell) {
    if (cell.find_first_of(",\"\r\n") == std::string::npos) return cell;
    std::string out = "\"";
    for (char ch : cell) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

void write_csv(std::ostream& os, const CsvTable& table) {
    if (table.header.empty()) throw Error(ErrorCode::InvalidArgument, "CSV header required");
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) os << ',';
            os << csv_escape(cells[i]);
        }
        os << "\r\n";
    };
    line(table.header);
    for (const auto& row : table.rows) line(row);
}

void write_csv_file(const std::string& path, const CsvTable& table) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::IoError, "cannot open " + path);
    write_csv(os, table);
    if (!os) throw Error(ErrorCode::IoError, "write failed for " + path);
}

CsvTable read_csv(std::istream& is) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string cell;
    bool quoted = false, any = false;
    char ch;
    auto end_record = [&] {
        record.push_back(cell);
        records.push_back(record);
        record.clear();
        cell.clear();
        any = false;
    };
    while (is.get(ch)) {
        if (quoted) {
            if (ch == '"') {
                if (is.peek() == '"') {
                    is.get(ch);
                    cell += '"';
                } else {
                    quoted = false;
                }
            } else {
                cell += ch;
            }
            continue;
        }
        if (ch == '"') {
            quoted = true;
            any = true;
        } else if (ch == ',') {
            record.push_back(cell);
            cell.clear();
            any = true;
        } else if (ch == '\r') {
            if (is.peek() == '\n') is.get(ch);
            end_record();
        } else if (ch == '\n') {
            end_record();
        } else {
            cell += ch;
            any = true;
        }
    }
    if (quoted) throw Error(ErrorCode::IoError, "unterminated quoted CSV cell");
    if (any || !cell.empty() || !record.empty()) end_record();
    if (records.empty()) throw Error(ErrorCode::IoError, "CSV has no header");
    CsvTable table;
    table.header = records.front();
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].size() != table.header.size()) {
            throw Error(ErrorCode::IoError, "CSV record " + std::to_string(i) + " has the wrong number of cells");
        }
        table.rows.push_back(records[i]);
    }
    return table;
}

CsvTable read_csv_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorCode::IoError, "cannot open " + path);
    return read_csv(is);
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

Config Config::parse(std::istream& is) {
    Config cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']' || t.size() < 3) {
                throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": malformed section '" + t + "'");
            }
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": key '" + t + "' has no value");
        }
        const std::string key = trim(t.substr(0, eq));
        if (key.empty()) throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": empty key");
        const std::string full = section.empty() ? key : section + "." + key;
        if (cfg.has(full)) throw Error(ErrorCode::ConfigError, "key '" + full + "' is set twice");
        cfg.values_[full] = trim(t.substr(eq + 1));
    }
    return cfg;
}

Config Config::parse_string(const std::string& text) {
    std::istringstream is(text);
    return parse(is);
}

Config Config::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::ConfigError, "cannot open config file " + path);
    return parse(is);
}

std::string Config::get_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw Error(ErrorCode::ConfigError, "missing key '" + key + "'");
    return it->second;
}

double Config::get_double(const std::string& key) const {
    const std::string s = get_string(key);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw Error(ErrorCode::ConfigError, "key '" + key + "': '" + s + "' is not a number");
    }
    return v;
}

int Config::get_int(const std::string& key) const {
    const std::string s = get_string(key);
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw Error(ErrorCode::ConfigError, "key '" + key + "': '" + s + "' is not an integer");
    }
    return v;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
}

double Config::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

int Config::get_int(const std::string& key, int fallback) const { return has(key) ? get_int(key) : fallback; }

void Config::require_known(const std::vector<std::string>& allowed) const {
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : values_) {
        if (!ok.count(key)) throw Error(ErrorCode::ConfigError, "unknown key '" + key + "'");
    }
}

MetricField named_metric(const std::string& name, double alpha) {
    if (name == "identity") return MetricField::euclidean(2);
    if (name == "conformal") {
        Vec a(2);
        a << alpha, 0.0;
        return MetricField::conformal_exp(a);
    }
    if (name == "aniso") {
        Mat g(2, 2);
        g << 1.0, 0.0, 0.0, 4.0;
        return MetricField::constant(g);
    }
    throw Error(ErrorCode::ConfigError, "unknown metric '" + name + "'");
}

bool RunReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

void RunReport::check(const std::string& name, double value, double threshold, Compare cmp,
                      const std::string& detail) {
    CheckResult c;
    c.name = name;
    c.value = value;
    c.threshold = threshold;
    c.detail = detail;
    switch (cmp) {
    case Compare::AtMost: c.passed = value <= threshold; break;
    case Compare::AtLeast: c.passed = value >= threshold; break;
    case Compare::Above: c.passed = value > threshold; break;
    }
    checks.push_back(std::move(c));
}

CsvTable RunReport::checks_table() const {
    CsvTable t;
    t.header = {"scenario", "check", "status", "value", "threshold", "detail"};
    for (const auto& c : checks) {
        t.add_row({scenario, c.name, c.passed ? "pass" : "fail", format_number(c.value), format_number(c.threshold),
                   c.detail});
    }
    return t;
}

CsvTable RunReport::metrics_table() const {
    CsvTable t;
    t.header = {"metric", "value"};
    for (const auto& [name, v] : metrics) t.add_row({name, format_number(v)});
    return t;
}

void write_artifacts(const RunReport& report, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir + ": " + ec.message());
    const std::filesystem::path base(dir);
    write_csv_file((base / "checks.csv").string(), report.checks_table());
    write_csv_file((base / "metrics.csv").string(), report.metrics_table());
    for (const auto& [name, table] : report.tables) write_csv_file((base / (name + ".csv")).string(), table);
    for (const auto& [name, svg] : report.plots) {
        std::ofstream os(base / (name + ".svg"), std::ios::binary);
        if (!os) throw Error(ErrorCode::IoError, "cannot write plot " + name);
        os << svg;
    }
    std::ofstream os(base / "summary.txt");
    if (!os) throw Error(ErrorCode::IoError, "cannot write summary");
    os << "scenario " << report.scenario << "\n"
       << "version " << report.version << "\n"
       << "seconds " << std::fixed << std::setprecision(3) << report.seconds << "\n"
       << "status " << (report.passed() ? "pass" : "fail") << "\n";
    for (const auto& c : report.checks) os << (c.passed ? "pass " : "FAIL ") << c.name << "\n";
}

std::map<std::string, double> read_metrics_file(const std::string& path) {
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::MissingBaseline, "no baseline at " + path);
    const CsvTable t = read_csv_file(path);
    if (t.header.size() != 2 || t.header[0] != "metric" || t.header[1] != "value") {
        throw Error(ErrorCode::IoError, path + ": expected header metric,value");
    }
    std::map<std::string, double> out;
    for (const auto& row : t.rows) {
        const std::string& s = row[1];
        double v = 0.0;
        if (s == "nan") v = std::nan("");
        else if (s == "inf") v = std::numeric_limits<double>::infinity();
        else if (s == "-inf") v = -std::numeric_limits<double>::infinity();
        else {
            const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
            if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
                throw Error(ErrorCode::IoError, path + ": metric " + row[0] + " has a bad value");
            }
        }
        out[row[0]] = v;
    }
    return out;
}

BaselineComparison compare_baseline(const std::map<std::string, double>& metrics, const std::string& baseline_path,
                                    double slack) {
    const auto baseline = read_metrics_file(baseline_path);
    BaselineComparison out;
    for (const auto& [name, value] : metrics) {
        const auto it = baseline.find(name);
        if (it == baseline.end()) {
            out.warnings.push_back(name + " is not in the baseline");
            continue;
        }
        const double limit = it->second * (1.0 + slack) + 1e-12;
        if (!(value <= limit)) {
            out.regressions.push_back(name + ": " + format_number(value) + " > baseline " + format_number(it->second));
        }
    }
    for (const auto& [name, value] : baseline) {
        if (!metrics.count(name)) out.warnings.push_back(name + " is in the baseline but was not produced");
    }
    out.passed = out.regressions.empty();
    return out;
}

namespace {

std::string svg_number(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += ch;
        }
    }
    return out;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

} // namespace

std::string displacement_svg(const std::vector<Point2>& boundary, const std::vector<Segment>& arrows,
                             const std::string& title) {
    const double size = 600.0, pad = 30.0;
    double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
    auto grow = [&](const Point2& p) {
        lo_x = std::min(lo_x, p.x());
        hi_x = std::max(hi_x, p.x());
        lo_y = std::min(lo_y, p.y());
        hi_y = std::max(hi_y, p.y());
    };
    for (const auto& p : boundary) grow(p);
    for (const auto& a : arrows) {
        grow(a.from);
        grow(a.to);
    }
    if (lo_x > hi_x) lo_x = lo_y = -1.0, hi_x = hi_y = 1.0;
    const double scale = (size - 2.0 * pad) / std::max({hi_x - lo_x, hi_y - lo_y, 1e-12});
    auto sx = [&](const Point2& p) { return svg_number(pad + (p.x() - lo_x) * scale); };
    auto sy = [&](const Point2& p) { return svg_number(size - pad - (p.y() - lo_y) * scale); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size + 20
       << "\" viewBox=\"0 0 " << size << " " << size + 20 << "\">\n"
       << "<defs><marker id=\"head\" markerWidth=\"6\" markerHeight=\"6\" refX=\"5\" refY=\"3\" orient=\"auto\">"
       << "<path d=\"M0,0 L6,3 L0,6 z\" fill=\"#d62728\"/></marker></defs>\n"
       << "<text x=\"" << pad << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\">" << xml_escape(title)
       << "</text>\n";
    if (!boundary.empty()) {
        os << "<polygon fill=\"none\" stroke=\"#444\" stroke-width=\"1\" points=\"";
        for (const auto& p : boundary) os << sx(p) << "," << sy(p) << " ";
        os << "\"/>\n";
    }
    for (const auto& a : arrows) {
        os << "<line x1=\"" << sx(a.from) << "\" y1=\"" << sy(a.from) << "\" x2=\"" << sx(a.to) << "\" y2=\""
           << sy(a.to) << "\" stroke=\"#d62728\" stroke-width=\"0.8\" marker-end=\"url(#head)\"/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string curve_svg(const std::vector<Series>& series, const std::string& title, const std::string& xlabel,
                      const std::string& ylabel, bool log_scale) {
    const double w = 640.0, hgt = 420.0, left = 70.0, right = 20.0, top = 30.0, bottom = 50.0;
    auto tx = [&](double v) { return log_scale ? std::log10(std::max(v, 1e-300)) : v; };
    double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            lo_x = std::min(lo_x, tx(s.x[i]));
            hi_x = std::max(hi_x, tx(s.x[i]));
            lo_y = std::min(lo_y, tx(s.y[i]));
            hi_y = std::max(hi_y, tx(s.y[i]));
        }
    }
    if (lo_x > hi_x) lo_x = lo_y = 0.0, hi_x = hi_y = 1.0;
    if (hi_x - lo_x < 1e-12) hi_x = lo_x + 1.0;
    if (hi_y - lo_y < 1e-12) hi_y = lo_y + 1.0;
    auto px = [&](double v) { return svg_number(left + (tx(v) - lo_x) / (hi_x - lo_x) * (w - left - right)); };
    auto py = [&](double v) { return svg_number(hgt - bottom - (tx(v) - lo_y) / (hi_y - lo_y) * (hgt - top - bottom)); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << hgt << "\" viewBox=\"0 0 "
       << w << " " << hgt << "\">\n"
       << "<text x=\"" << left << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << xml_escape(title)
       << "</text>\n"
       << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << w - left - right << "\" height=\""
       << hgt - top - bottom << "\" fill=\"none\" stroke=\"#444\"/>\n"
       << "<text x=\"" << w / 2 << "\" y=\"" << hgt - 12 << "\" font-family=\"sans-serif\" font-size=\"12\">"
       << xml_escape(xlabel) << (log_scale ? " (log10)" : "") << "</text>\n"
       << "<text x=\"14\" y=\"" << hgt / 2 << "\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 "
       << hgt / 2 << ")\">" << xml_escape(ylabel) << (log_scale ? " (log10)" : "") << "</text>\n";
    os << "<text x=\"" << left << "\" y=\"" << hgt - bottom + 16 << "\" font-size=\"10\">" << svg_number(lo_x)
       << "</text>\n<text x=\"" << w - right - 30 << "\" y=\"" << hgt - bottom + 16 << "\" font-size=\"10\">"
       << svg_number(hi_x) << "</text>\n<text x=\"" << 4 << "\" y=\"" << hgt - bottom << "\" font-size=\"10\">"
       << svg_number(lo_y) << "</text>\n<text x=\"" << 4 << "\" y=\"" << top + 10 << "\" font-size=\"10\">"
       << svg_number(hi_y) << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = kPalette[k % (sizeof(kPalette) / sizeof(kPalette[0]))];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) os << px(s.x[i]) << "," << py(s.y[i]) << " ";
        os << "\"/>\n";
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            os << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\"" << color
               << "\"/>\n";
        }
        os << "<text x=\"" << w - right - 150 << "\" y=\"" << top + 16 + 14 * static_cast<double>(k)
           << "\" font-size=\"11\" fill=\"" << color << "\">" << xml_escape(s.label) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace poisson_embed
