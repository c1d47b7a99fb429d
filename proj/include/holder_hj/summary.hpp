#pragma once

// Acceptance-check rows and the summary.csv / report.txt renderers.

#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "holder_hj/common.hpp"
#include "holder_hj/io.hpp"

namespace holder_hj {

struct SummaryRow {
    std::string criterion;  // acceptance id the row rolls up into; empty for stand-alone rows
    std::string check;
    std::string expected;
    double measured = 0.0;
    std::string tolerance;
    bool pass = false;
};

/// "1e-k" for exact negative powers of ten, format_number otherwise.
inline std::string format_tolerance(double v) {
    if (v > 0.0 && v < 1.0) {
        const double e = std::round(std::log10(v));
        if (std::abs(std::pow(10.0, e) - v) <= 1e-15 * v) {
            return "1e" + std::to_string(static_cast<int>(e));
        }
    }
    return format_number(v);
}

class CheckList {
public:
    void criterion(std::string id) { criterion_ = std::move(id); }
    const std::string& criterion() const { return criterion_; }

    bool near(const std::string& id, double expected, double measured, double tol) {
        const bool ok = std::abs(measured - expected) <= tol;
        return add(id, format_expected(expected), measured, format_tolerance(tol), ok);
    }
    bool at_most(const std::string& id, double bound, double measured) {
        return add(id, "<=" + format_number(bound), measured, "0", measured <= bound);
    }
    bool at_least(const std::string& id, double bound, double measured) {
        return add(id, ">=" + format_number(bound), measured, "0", measured >= bound);
    }
    bool below(const std::string& id, double bound, double measured) {
        return add(id, "<" + format_number(bound), measured, "0", measured < bound);
    }
    bool above(const std::string& id, double bound, double measured) {
        return add(id, ">" + format_number(bound), measured, "0", measured > bound);
    }
    bool holds(const std::string& id, bool condition) {
        return add(id, "true", condition ? 1.0 : 0.0, "0", condition);
    }

    const std::vector<SummaryRow>& rows() const { return rows_; }
    std::vector<SummaryRow>& rows() { return rows_; }

private:
    bool add(const std::string& id, std::string expected, double measured, std::string tol, bool ok) {
        if (!std::isfinite(measured)) {
            ok = false;
        }
        rows_.push_back({criterion_, id, std::move(expected), measured, std::move(tol), ok});
        return ok;
    }

    std::string criterion_;
    std::vector<SummaryRow> rows_;
};

inline CsvTable summary_csv(const std::vector<SummaryRow>& rows) {
    CsvTable csv({"check", "expected", "measured", "tolerance", "pass"});
    for (const auto& r : rows) {
        csv.row({r.check, r.expected, format_number(r.measured), r.tolerance, r.pass ? "pass" : "fail"});
    }
    return csv;
}

/// Distance from failing, recomputed from the expected/tolerance text:
/// positive when the check passes. Boolean checks have no margin.
inline std::string summary_margin(const std::string& expected, const std::string& measured_text,
                                  const std::string& tolerance) {
    const double m = parse_number(measured_text);
    auto starts = [&](const char* prefix) { return expected.rfind(prefix, 0) == 0; };
    double margin = 0.0;
    if (expected == "true") {
        return "-";
    } else if (starts("<=")) {
        margin = parse_number(expected.substr(2)) - m;
    } else if (starts(">=")) {
        margin = m - parse_number(expected.substr(2));
    } else if (starts("<")) {
        margin = parse_number(expected.substr(1)) - m;
    } else if (starts(">")) {
        margin = m - parse_number(expected.substr(1));
    } else {
        margin = parse_number(tolerance) - std::abs(m - parse_number(expected));
    }
    return format_number(margin);
}

class artifact_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Renders summary.csv as an aligned text table with margins, writes it to
/// report.txt and returns it. Files named in artifacts.json must exist.
inline std::string emit_report(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const fs::path summary = dir / "summary.csv";
    if (!fs::exists(summary)) {
        throw artifact_error("missing artifact: summary.csv");
    }
    std::vector<std::string> missing;
    if (fs::exists(dir / "artifacts.json")) {
        const auto manifest = nlohmann::json::parse(read_text(dir / "artifacts.json"));
        for (const auto& f : manifest.at("files")) {
            const auto name = f.get<std::string>();
            if (!fs::exists(dir / name)) {
                missing.push_back(name);
            }
        }
    }
    if (!missing.empty()) {
        std::string msg = "missing artifacts:";
        for (const auto& m : missing) {
            msg += " " + m;
        }
        throw artifact_error(msg);
    }

    const auto rows = parse_csv(read_text(summary));
    if (rows.empty() || rows[0] != std::vector<std::string>{"check", "expected", "measured", "tolerance", "pass"}) {
        throw artifact_error("summary.csv: unexpected header");
    }
    std::vector<std::vector<std::string>> table{{"status", "check", "expected", "measured", "tolerance", "margin"}};
    std::size_t passed = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != 5) {
            throw artifact_error("summary.csv: row " + std::to_string(i) + " does not have 5 columns");
        }
        const bool ok = r[4] == "pass";
        passed += ok ? 1 : 0;
        table.push_back({ok ? "PASS" : "FAIL", r[0], r[1], r[2], r[3], summary_margin(r[1], r[2], r[3])});
    }
    std::vector<std::size_t> width(table[0].size(), 0);
    for (const auto& row : table) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            width[c] = std::max(width[c], row[c].size());
        }
    }
    const std::size_t total = rows.size() - 1;
    std::string text = "holder-hj report\n";
    text += "checks: " + std::to_string(total) + "  passed: " + std::to_string(passed) +
            "  failed: " + std::to_string(total - passed) + "\n";
    for (const auto& row : table) {
        std::string line;
        for (std::size_t c = 0; c < row.size(); ++c) {
            line += row[c];
            if (c + 1 < row.size()) {
                line += std::string(width[c] - row[c].size() + 2, ' ');
            }
        }
        text += line + "\n";
    }
    write_text(dir / "report.txt", text);
    return text;
}

}  // namespace holder_hj
