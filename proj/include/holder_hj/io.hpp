#pragma once

// CSV and JSON persistence. Numbers go out at 12 significant digits through
// format_number; every file ends lines with '\n'.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "holder_hj/common.hpp"
#include "holder_hj/reverse_holder.hpp"
#include "holder_hj/stochastic.hpp"
#include "holder_hj/value_solver.hpp"

namespace holder_hj {

namespace fs = std::filesystem;

inline void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path.string());
    }
    out << text;
    if (!out) {
        throw std::runtime_error("write failed: " + path.string());
    }
}

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open: " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Accumulates comma-separated rows under a fixed header.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : columns_(header.size()) { append(header); }

    CsvTable& row(const std::vector<std::string>& cells) {
        if (cells.size() != columns_) {
            throw std::logic_error("CsvTable: row has " + std::to_string(cells.size()) + " cells, expected " +
                                   std::to_string(columns_));
        }
        append(cells);
        return *this;
    }

    const std::string& text() const { return text_; }
    void save(const fs::path& path) const { write_text(path, text_); }

private:
    void append(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (cells[i].find_first_of(",\n\"") != std::string::npos) {
                throw std::logic_error("CsvTable: cell needs quoting: " + cells[i]);
            }
            if (i > 0) {
                text_ += ',';
            }
            text_ += cells[i];
        }
        text_ += '\n';
    }

    std::size_t columns_;
    std::string text_;
};

/// Rows of a CSV file split on commas (no quoting). The header is row 0.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (!line.empty()) {
            std::vector<std::string> cells;
            std::size_t start = 0;
            for (;;) {
                const std::size_t comma = line.find(',', start);
                cells.emplace_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
                if (comma == std::string_view::npos) {
                    break;
                }
                start = comma + 1;
            }
            rows.push_back(std::move(cells));
        }
        pos = end + 1;
    }
    return rows;
}

/// `t,x,u`, one row per node; `stride` keeps every stride-th node on each axis
/// (the last node is always kept).
inline CsvTable grid_csv(const GridFunction2D& u, std::size_t stride = 1) {
    require(stride >= 1, "grid_csv: stride must be positive");
    auto picks = [stride](std::size_t n) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < n; i += stride) {
            idx.push_back(i);
        }
        if (idx.back() != n - 1) {
            idx.push_back(n - 1);
        }
        return idx;
    };
    CsvTable csv({"t", "x", "u"});
    for (std::size_t k : picks(u.nt())) {
        for (std::size_t i : picks(u.nx())) {
            csv.row({format_number(u.t_grid()[k]), format_number(u.x_grid()[i]), format_number(u.at(k, i))});
        }
    }
    return csv;
}

inline CsvTable arc_csv(const DiscreteArc& arc) {
    CsvTable csv({"t", "x"});
    for (std::size_t k = 0; k < arc.size(); ++k) {
        csv.row({format_number(arc.times[k]), format_number(arc.positions[k])});
    }
    return csv;
}

inline DiscreteArc read_arc_csv(const fs::path& path) {
    const auto rows = parse_csv(read_text(path));
    require(!rows.empty() && rows[0] == std::vector<std::string>{"t", "x"}, "arc csv: header must be t,x");
    DiscreteArc arc;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        require(rows[r].size() == 2, "arc csv: expected two columns");
        arc.times.push_back(parse_number(rows[r][0]));
        arc.positions.push_back(parse_number(rows[r][1]));
    }
    return arc;
}

/// `s,phi` with s the left node of each cell.
inline CsvTable sampled_csv(const SampledFunction1D& phi) {
    CsvTable csv({"s", "phi"});
    for (std::size_t i = 0; i < phi.size(); ++i) {
        csv.row({format_number(phi.node(i)), format_number(phi.values()[i])});
    }
    return csv;
}

/// Reads `s,phi` written by sampled_csv; b is the right end of the interval.
inline SampledFunction1D read_sampled_csv(const fs::path& path, double b, double p) {
    const auto rows = parse_csv(read_text(path));
    require(rows.size() >= 2 && rows[0] == std::vector<std::string>{"s", "phi"}, "sampled csv: header must be s,phi");
    std::vector<double> vals;
    const double a = parse_number(rows[1][0]);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        require(rows[r].size() == 2, "sampled csv: expected two columns");
        vals.push_back(parse_number(rows[r][1]));
    }
    return SampledFunction1D(a, b, std::move(vals), p);
}

/// JSON numbers rounded to 12 significant digits.
inline nlohmann::ordered_json json_number(double v) {
    if (!std::isfinite(v)) {
        return format_number(v);
    }
    return parse_number(format_number(v));
}

inline nlohmann::ordered_json theta_json(const ThetaResult& r) {
    return nlohmann::ordered_json{{"theta", json_number(r.theta)},
                                  {"p", json_number(r.p)},
                                  {"A", json_number(r.A)},
                                  {"margin", json_number(r.margin)},
                                  {"constant_C", json_number(r.constant_C)}};
}

inline ThetaResult theta_from_json(const nlohmann::json& j) {
    ThetaResult r;
    r.theta = j.at("theta").get<double>();
    r.p = j.at("p").get<double>();
    r.A = j.at("A").get<double>();
    r.margin = j.at("margin").get<double>();
    r.constant_C = j.at("constant_C").get<double>();
    return r;
}

/// times.csv `k,t`; paths.csv `path,k,y...`; controls.csv `path,k,zeta...`
/// (path-major, one value column per component); manifest.json.
inline void save_ensemble(const PathEnsemble& ens, const fs::path& dir, const nlohmann::ordered_json& spec_json) {
    require(ens.stored, "save_ensemble: ensemble has no stored trajectories");
    fs::create_directories(dir);
    auto component_header = [&](const std::string& name) {
        std::vector<std::string> h{"path", "k"};
        if (ens.dimension == 1) {
            h.push_back(name);
        } else {
            for (std::size_t d = 0; d < ens.dimension; ++d) {
                h.push_back(name + "_" + std::to_string(d));
            }
        }
        return h;
    };
    CsvTable times({"k", "t"});
    for (std::size_t k = 0; k < ens.times.size(); ++k) {
        times.row({std::to_string(k), format_number(ens.times[k])});
    }
    times.save(dir / "times.csv");

    CsvTable paths(component_header("y"));
    CsvTable controls(component_header("zeta"));
    std::vector<std::string> cells;
    for (std::size_t path = 0; path < ens.path_count; ++path) {
        for (std::size_t k = 0; k < ens.times.size(); ++k) {
            cells = {std::to_string(path), std::to_string(k)};
            for (std::size_t d = 0; d < ens.dimension; ++d) {
                cells.push_back(format_number(ens.state(path, k, d)));
            }
            paths.row(cells);
            if (k < ens.steps()) {
                cells.resize(2);
                for (std::size_t d = 0; d < ens.dimension; ++d) {
                    cells.push_back(format_number(ens.control(path, k, d)));
                }
                controls.row(cells);
            }
        }
    }
    paths.save(dir / "paths.csv");
    controls.save(dir / "controls.csv");

    nlohmann::ordered_json manifest{{"seed", ens.seed},
                                    {"dt", json_number(ens.dt)},
                                    {"steps", ens.steps()},
                                    {"paths", ens.path_count},
                                    {"dimension", ens.dimension},
                                    {"spec", spec_json}};
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

struct StatRow {
    std::string quantity;
    double estimate = 0.0;
    double stderr_ = 0.0;
    double bound = 0.0;
    double ratio = 0.0;
};

inline CsvTable stats_csv(const std::vector<StatRow>& rows) {
    CsvTable csv({"quantity", "estimate", "stderr", "bound", "ratio"});
    for (const auto& r : rows) {
        csv.row({r.quantity, format_number(r.estimate), format_number(r.stderr_), format_number(r.bound),
                 format_number(r.ratio)});
    }
    return csv;
}

struct HolderRow {
    std::string check;
    std::string region;
    double scale_min = 0.0;
    double scale_max = 0.0;
    double value = 0.0;
    double margin = 0.0;
};

inline CsvTable holder_csv(const std::vector<HolderRow>& rows) {
    CsvTable csv({"check", "region", "scale_min", "scale_max", "value", "margin"});
    for (const auto& r : rows) {
        csv.row({r.check, r.region, format_number(r.scale_min), format_number(r.scale_max), format_number(r.value),
                 format_number(r.margin)});
    }
    return csv;
}

struct GalleryRow {
    std::string check;
    std::string params;
    double value = 0.0;
    double margin = 0.0;
};

inline CsvTable gallery_csv(const std::vector<GalleryRow>& rows) {
    CsvTable csv({"check", "params", "value", "margin"});
    for (const auto& r : rows) {
        csv.row({r.check, r.params, format_number(r.value), format_number(r.margin)});
    }
    return csv;
}

}  // namespace holder_hj
