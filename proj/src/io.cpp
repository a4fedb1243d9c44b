#include "ppts/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "ppts/errors.hpp"

namespace ppts {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

long parse_long(const std::string& s, long line_no, const std::string& what) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw parse_error(line_no, "invalid " + what + " '" + s + "'");
    return v;
}

double parse_double(const std::string& s, long line_no, const std::string& what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw parse_error(line_no, "invalid " + what + " '" + s + "'");
    return v;
}

struct Stamp {
    int year = 0, month = 0, day = 0;
    double hours = 0.0;
};

int digits(const std::string& s, size_t pos, int count, long line_no) {
    if (pos + count > s.size()) throw parse_error(line_no, "truncated timestamp '" + s + "'");
    int v = 0;
    for (int i = 0; i < count; ++i) {
        char c = s[pos + i];
        if (c < '0' || c > '9') throw parse_error(line_no, "invalid timestamp '" + s + "'");
        v = v * 10 + (c - '0');
    }
    return v;
}

void expect(const std::string& s, size_t pos, char c, long line_no) {
    if (pos >= s.size() || s[pos] != c)
        throw parse_error(line_no, "invalid timestamp '" + s + "'");
}

// YYYY-MM-DD[T ]HH:MM[:SS[.frac]]
Stamp parse_timestamp(const std::string& s, long line_no) {
    Stamp st;
    st.year = digits(s, 0, 4, line_no);
    expect(s, 4, '-', line_no);
    st.month = digits(s, 5, 2, line_no);
    expect(s, 7, '-', line_no);
    st.day = digits(s, 8, 2, line_no);
    if (s.size() <= 10 || (s[10] != 'T' && s[10] != ' '))
        throw parse_error(line_no, "invalid timestamp '" + s + "'");
    int hh = digits(s, 11, 2, line_no);
    expect(s, 13, ':', line_no);
    int mm = digits(s, 14, 2, line_no);
    double sec = 0.0;
    size_t pos = 16;
    if (pos < s.size()) {
        expect(s, pos, ':', line_no);
        sec = digits(s, pos + 1, 2, line_no);
        pos += 3;
        if (pos < s.size()) {
            expect(s, pos, '.', line_no);
            double scale = 0.1;
            ++pos;
            if (pos >= s.size()) throw parse_error(line_no, "invalid timestamp '" + s + "'");
            for (; pos < s.size(); ++pos) {
                char c = s[pos];
                if (c < '0' || c > '9')
                    throw parse_error(line_no, "invalid timestamp '" + s + "'");
                sec += (c - '0') * scale;
                scale *= 0.1;
            }
        }
    }
    static const int month_days[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    bool leap = (st.year % 4 == 0 && st.year % 100 != 0) || st.year % 400 == 0;
    int dmax = month_days[st.month >= 1 && st.month <= 12 ? st.month - 1 : 0] +
               (st.month == 2 && leap ? 1 : 0);
    if (st.month < 1 || st.month > 12 || st.day < 1 || st.day > dmax || hh > 23 || mm > 59 ||
        sec >= 60.0)
        throw parse_error(line_no, "timestamp out of range '" + s + "'");
    st.hours = hh + mm / 60.0 + sec / 3600.0;
    return st;
}

PatternSeries from_day_points(std::vector<std::pair<long, double>>& rows) {
    long n = 0;
    for (const auto& r : rows) n = std::max(n, r.first);
    PatternSeries series;
    series.patterns.resize(n);
    for (const auto& r : rows) series.patterns[r.first - 1].points.push_back(r.second);
    for (auto& p : series.patterns) std::sort(p.points.begin(), p.points.end());
    return series;
}

PatternSeries load_presliced(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw parse_error(1, "empty events file");
    if (trim(line) != "day,u") throw parse_error(1, "expected header 'day,u'");
    std::vector<std::pair<long, double>> rows;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split_csv(line);
        if (cells.size() != 2) throw parse_error(line_no, "expected two columns");
        long day = parse_long(cells[0], line_no, "day index");
        double u = parse_double(cells[1], line_no, "event time");
        if (day < 1) throw parse_error(line_no, "day index must be positive");
        if (!(u >= 0.0 && u < 24.0))
            throw parse_error(line_no, "event time must lie in [0, 24)");
        rows.emplace_back(day, u);
    }
    if (rows.empty()) throw parse_error(line_no + 1, "no event rows");
    return from_day_points(rows);
}

PatternSeries load_raw(std::istream& in, const RawSliceRule& rule) {
    std::string line;
    if (!std::getline(in, line)) throw parse_error(1, "empty events file");
    if (trim(line) != "timestamp") throw parse_error(1, "expected header 'timestamp'");
    std::vector<std::pair<long, double>> abs_rows;  // absolute day ordinal, u
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        std::string cell = trim(line);
        if (cell.empty()) continue;
        Stamp st = parse_timestamp(cell, line_no);
        double total = 24.0 * days_from_civil(st.year, st.month, st.day) + st.hours -
                       rule.day_boundary;
        long abs_day = static_cast<long>(std::floor(total / 24.0));
        double u = (total - 24.0 * abs_day) * rule.clock_scale;
        u = std::min(u, std::nextafter(24.0 * rule.clock_scale, 0.0));
        abs_rows.emplace_back(abs_day, u);
    }
    if (abs_rows.empty()) throw parse_error(line_no + 1, "no event rows");
    long first = abs_rows[0].first;
    for (const auto& r : abs_rows) first = std::min(first, r.first);
    for (auto& r : abs_rows) r.first = r.first - first + 1;
    return from_day_points(abs_rows);
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (long i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (long j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (long i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw error("fit document: " + what + " must be an array of rows");
    Eigen::MatrixXd m(j.size(), j[0].size());
    for (size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != j[0].size())
            throw error("fit document: ragged rows in " + what);
        for (size_t k = 0; k < j[i].size(); ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& what) {
    if (!j.is_array()) throw error("fit document: " + what + " must be an array");
    Eigen::VectorXd v(j.size());
    for (size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
    return v;
}

}  // namespace

PatternSeries load_events(const std::string& path, EventsMode mode, const RawSliceRule& rule) {
    std::ifstream in(path);
    if (!in) throw error("cannot open events file '" + path + "'");
    return mode == EventsMode::presliced ? load_presliced(in) : load_raw(in, rule);
}

PatternSeries load_events(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw error("cannot open events file '" + path + "'");
    std::string header;
    if (!std::getline(in, header)) throw parse_error(1, "empty events file");
    in.seekg(0);
    std::string h = trim(header);
    if (h == "day,u") return load_presliced(in);
    if (h == "timestamp") return load_raw(in, RawSliceRule{});
    throw parse_error(1, "unrecognized header '" + h + "' (expected 'day,u' or 'timestamp')");
}

long days_from_civil(int year, int month, int day) {
    year -= month <= 2;
    const long era = (year >= 0 ? year : year - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(year - era * 400);
    const unsigned doy = (153u * (month + (month > 2 ? -3 : 9)) + 2u) / 5u + day - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

std::string format_double(double x) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc()) throw error("number formatting failed");
    return std::string(buf, ptr);
}

void write_fit_document(const std::string& path, const FitDocument& doc) {
    json j;
    j["format_version"] = doc.format_version;
    j["config"] = doc.config.empty() ? json::object() : json::parse(doc.config);
    j["n"] = doc.n;
    j["d"] = doc.d;
    j["p"] = doc.p;
    j["q"] = doc.q;
    j["theta"] = matrix_to_json(doc.theta);
    j["eta"] = vector_to_json(doc.eta);
    j["mu"] = vector_to_json(doc.mu);
    j["seasonal"] = matrix_to_json(doc.seasonal);
    if (doc.has_omega) {
        json blocks = json::array();
        for (const auto& b : doc.omega_theta) blocks.push_back(matrix_to_json(b));
        j["omega"] = {{"theta", blocks}, {"eta", matrix_to_json(doc.omega_eta)}};
    } else {
        j["omega"] = nullptr;
    }
    j["diagnostics"] = {{"converged", doc.converged},
                        {"iterations", doc.iterations},
                        {"gradient_norm", doc.gradient_norm},
                        {"objective_value", doc.objective_value},
                        {"ridged_seasons", doc.ridged_seasons}};
    std::ofstream out(path);
    if (!out) throw error("cannot write fit document '" + path + "'");
    out << j.dump(2) << "\n";
    if (!out) throw error("failed writing fit document '" + path + "'");
}

FitDocument read_fit_document(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw error("cannot open fit document '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw error("invalid fit document '" + path + "': " + e.what());
    }
    try {
        FitDocument doc;
        doc.format_version = j.at("format_version").get<int>();
        if (doc.format_version != 1)
            throw error("unsupported fit document version " +
                        std::to_string(doc.format_version));
        doc.config = j.at("config").dump();
        doc.n = j.at("n").get<long>();
        doc.d = j.at("d").get<int>();
        doc.p = j.at("p").get<int>();
        doc.q = j.at("q").get<int>();
        doc.theta = matrix_from_json(j.at("theta"), "theta");
        doc.eta = vector_from_json(j.at("eta"), "eta");
        doc.mu = vector_from_json(j.at("mu"), "mu");
        doc.seasonal = matrix_from_json(j.at("seasonal"), "seasonal");
        if (!j.at("omega").is_null()) {
            doc.has_omega = true;
            for (const auto& b : j.at("omega").at("theta"))
                doc.omega_theta.push_back(matrix_from_json(b, "omega theta block"));
            doc.omega_eta = doc.q > 0
                                ? matrix_from_json(j.at("omega").at("eta"), "omega eta block")
                                : Eigen::MatrixXd(0, 0);
        } else {
            doc.omega_eta = Eigen::MatrixXd(0, 0);
        }
        const json& diag = j.at("diagnostics");
        doc.converged = diag.at("converged").get<bool>();
        doc.iterations = diag.at("iterations").get<int>();
        doc.gradient_norm = diag.at("gradient_norm").get<double>();
        doc.objective_value = diag.at("objective_value").get<double>();
        doc.ridged_seasons = diag.at("ridged_seasons").get<std::vector<int>>();
        if (doc.theta.rows() != doc.d || doc.theta.cols() != doc.p ||
            doc.eta.size() != doc.q || doc.seasonal.rows() != doc.d)
            throw error("fit document dimensions are inconsistent");
        return doc;
    } catch (const json::exception& e) {
        throw error("invalid fit document '" + path + "': " + e.what());
    }
}

}  // namespace ppts
