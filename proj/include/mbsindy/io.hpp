// Dataset and report serialization.
//
// A dataset directory holds a JSON `manifest`, one CSV per field snapshot
// under snapshots/, and one CSV per boundary curve under boundary/. Machine
// numbers are written with 17 significant digits so a read-back is
// bit-exact; human-facing summaries round to 3.
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "common.hpp"
#include "ensemble.hpp"
#include "simulate.hpp"

namespace mbsindy {

using nlohmann::json;

namespace detail {

inline std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string fmt3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Parse comma-separated doubles; returns false at end of input.
inline bool parse_csv_row(const std::string& line, std::vector<double>& out) {
    out.clear();
    const char* p = line.c_str();
    while (*p) {
        char* end = nullptr;
        const double v = std::strtod(p, &end);
        if (end == p) return false;
        out.push_back(v);
        p = end;
        while (*p == ',' || *p == ' ' || *p == '\t') ++p;
    }
    return !out.empty();
}

}  // namespace detail

inline std::string geometry_name(FrontGeometry g) {
    return g == FrontGeometry::planar ? "planar" : "star";
}

inline FrontGeometry geometry_from_name(const std::string& name) {
    if (name == "planar") return FrontGeometry::planar;
    if (name == "star") return FrontGeometry::star;
    throw IoError("unknown geometry '" + name + "'");
}

inline std::string topology_name(CurveTopology t) {
    switch (t) {
        case CurveTopology::open_chain: return "open_chain";
        case CurveTopology::periodic_graph: return "periodic_graph";
        case CurveTopology::closed_loop: return "closed_loop";
    }
    throw IoError("unknown curve topology");
}

inline CurveTopology topology_from_name(const std::string& name) {
    if (name == "open_chain") return CurveTopology::open_chain;
    if (name == "periodic_graph") return CurveTopology::periodic_graph;
    if (name == "closed_loop") return CurveTopology::closed_loop;
    throw IoError("unknown curve topology '" + name + "'");
}

inline json params_to_json(const SimParams& p) {
    json j;
    j["geometry"] = geometry_name(p.geometry);
    j["kappa"] = p.kappa;
    j["dx"] = p.dx;
    j["dy"] = p.dy;
    j["dt"] = p.dt;
    j["t_end"] = p.t_end;
    j["snapshot_stride"] = p.snapshot_stride;
    j["u_f"] = p.u_f;
    j["u_ell"] = p.u_ell;
    j["length_x"] = p.length_x;
    j["length_y"] = p.length_y;
    j["front_x0"] = p.front_x0;
    j["perturb_amplitude"] = p.perturb_amplitude;
    j["perturb_mode"] = p.perturb_mode;
    j["uniform_init"] = p.uniform_init;
    j["uniform_value"] = p.uniform_value;
    j["half_width"] = p.half_width;
    j["star_radius"] = p.star_radius;
    j["star_amplitude"] = p.star_amplitude;
    j["u_init"] = p.u_init;
    j["init_taper"] = p.init_taper;
    j["n_theta"] = p.n_theta;
    return j;
}

inline SimParams params_from_json(const json& j) {
    SimParams p;
    p.geometry = geometry_from_name(j.at("geometry").get<std::string>());
    p.kappa = j.at("kappa").get<double>();
    p.dx = j.at("dx").get<double>();
    p.dy = j.at("dy").get<double>();
    p.dt = j.at("dt").get<double>();
    p.t_end = j.at("t_end").get<double>();
    p.snapshot_stride = j.at("snapshot_stride").get<int>();
    p.u_f = j.at("u_f").get<double>();
    p.u_ell = j.at("u_ell").get<double>();
    p.length_x = j.at("length_x").get<double>();
    p.length_y = j.at("length_y").get<double>();
    p.front_x0 = j.at("front_x0").get<double>();
    p.perturb_amplitude = j.at("perturb_amplitude").get<double>();
    p.perturb_mode = j.at("perturb_mode").get<int>();
    p.uniform_init = j.at("uniform_init").get<bool>();
    p.uniform_value = j.at("uniform_value").get<double>();
    p.half_width = j.at("half_width").get<double>();
    p.star_radius = j.at("star_radius").get<double>();
    p.star_amplitude = j.at("star_amplitude").get<double>();
    p.u_init = j.at("u_init").get<double>();
    p.init_taper = j.at("init_taper").get<double>();
    p.n_theta = j.at("n_theta").get<int>();
    return p;
}

inline void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir / "snapshots", ec);
    fs::create_directories(dir / "boundary", ec);
    if (ec) throw IoError("cannot create dataset directories under " + dir.string());

    json manifest;
    manifest["format"] = "mbsindy-dataset";
    manifest["version"] = 1;
    manifest["params"] = params_to_json(ds.params);
    manifest["noise"] = {{"eta", ds.noise_eta}, {"seed", ds.noise_seed}};
    manifest["solver"] = ds.solver;
    manifest["snapshot_count"] = ds.snapshots.size();
    json times = json::array();
    for (const auto& s : ds.snapshots) times.push_back(s.time);
    manifest["times"] = times;
    json truth;
    truth["stefan"] = {{"names", stefan_feature_names()},
                       {"coefficients", std::vector<double>(ds.truth_stefan.data(),
                                                            ds.truth_stefan.data() + ds.truth_stefan.size())}};
    truth["fisher"] = {{"names", fisher_feature_names()},
                       {"coefficients", std::vector<double>(ds.truth_fisher.data(),
                                                            ds.truth_fisher.data() + ds.truth_fisher.size())}};
    manifest["ground_truth"] = truth;
    detail::write_text(dir / "manifest", manifest.dump(2) + "\n");

    for (std::size_t k = 0; k < ds.snapshots.size(); ++k) {
        const FieldSnapshot& snap = ds.snapshots[k];
        std::string body;
        body.reserve(snap.points.size() * 48 + 64);
        body += "# time=" + detail::fmt17(snap.time) + "\n";
        body += "x,y,u\n";
        for (std::size_t i = 0; i < snap.points.size(); ++i) {
            body += detail::fmt17(snap.points[i].x);
            body += ',';
            body += detail::fmt17(snap.points[i].y);
            body += ',';
            body += detail::fmt17(snap.values[i]);
            body += '\n';
        }
        detail::write_text(dir / "snapshots" / ("t_" + std::to_string(k) + ".csv"), body);
    }
    for (std::size_t k = 0; k < ds.curves.size(); ++k) {
        const BoundaryCurve& c = ds.curves[k];
        std::string body;
        body.reserve(c.points.size() * 40 + 96);
        body += "# topology=" + topology_name(c.topology) +
                " period_y=" + detail::fmt17(c.period_y) + " time=" + detail::fmt17(c.time) + "\n";
        body += "x,y\n";
        for (const Vec2& p : c.points) {
            body += detail::fmt17(p.x);
            body += ',';
            body += detail::fmt17(p.y);
            body += '\n';
        }
        detail::write_text(dir / "boundary" / ("t_" + std::to_string(k) + ".csv"), body);
    }
}

namespace detail {

inline std::string header_field(const std::string& header, const std::string& key) {
    const auto pos = header.find(key + "=");
    if (pos == std::string::npos) throw IoError("missing '" + key + "' in header: " + header);
    const auto start = pos + key.size() + 1;
    auto end = header.find(' ', start);
    if (end == std::string::npos) end = header.size();
    return header.substr(start, end - start);
}

}  // namespace detail

inline Dataset read_dataset(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::exists(dir / "manifest"))
        throw MissingSnapshotError("no manifest under " + dir.string());
    json manifest;
    try {
        manifest = json::parse(detail::read_text(dir / "manifest"));
    } catch (const json::exception& e) {
        throw IoError("malformed manifest: " + std::string(e.what()));
    }
    if (manifest.value("format", "") != "mbsindy-dataset")
        throw IoError("not a dataset manifest: " + dir.string());

    Dataset ds;
    ds.params = params_from_json(manifest.at("params"));
    ds.noise_eta = manifest.at("noise").at("eta").get<double>();
    ds.noise_seed = manifest.at("noise").at("seed").get<std::uint64_t>();
    ds.solver = manifest.value("solver", "");
    const auto sc = manifest.at("ground_truth").at("stefan").at("coefficients")
                        .get<std::vector<double>>();
    const auto fc = manifest.at("ground_truth").at("fisher").at("coefficients")
                        .get<std::vector<double>>();
    ds.truth_stefan = Eigen::Map<const Eigen::VectorXd>(sc.data(), static_cast<Eigen::Index>(sc.size()));
    ds.truth_fisher = Eigen::Map<const Eigen::VectorXd>(fc.data(), static_cast<Eigen::Index>(fc.size()));

    const std::size_t count = manifest.at("snapshot_count").get<std::size_t>();
    std::vector<double> row;
    for (std::size_t k = 0; k < count; ++k) {
        const fs::path spath = dir / "snapshots" / ("t_" + std::to_string(k) + ".csv");
        if (!fs::exists(spath)) throw MissingSnapshotError("missing " + spath.string());
        std::ifstream in(spath);
        FieldSnapshot snap;
        std::string line;
        bool header_done = false;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            if (line[0] == '#') {
                snap.time = std::stod(detail::header_field(line, "time"));
                continue;
            }
            if (!header_done) {  // x,y,u column header
                header_done = true;
                continue;
            }
            if (!detail::parse_csv_row(line, row) || row.size() != 3)
                throw IoError("malformed snapshot row in " + spath.string() + ": " + line);
            snap.points.push_back({row[0], row[1]});
            snap.values.push_back(row[2]);
        }
        ds.snapshots.push_back(std::move(snap));

        const fs::path bpath = dir / "boundary" / ("t_" + std::to_string(k) + ".csv");
        if (!fs::exists(bpath)) throw MissingSnapshotError("missing " + bpath.string());
        std::ifstream bin(bpath);
        BoundaryCurve curve;
        header_done = false;
        while (std::getline(bin, line)) {
            if (line.empty()) continue;
            if (line[0] == '#') {
                curve.topology = topology_from_name(detail::header_field(line, "topology"));
                curve.period_y = std::stod(detail::header_field(line, "period_y"));
                curve.time = std::stod(detail::header_field(line, "time"));
                continue;
            }
            if (!header_done) {
                header_done = true;
                continue;
            }
            if (!detail::parse_csv_row(line, row) || row.size() != 2)
                throw IoError("malformed boundary row in " + bpath.string() + ": " + line);
            curve.points.push_back({row[0], row[1]});
        }
        if (curve.points.size() < 2) throw IoError("boundary curve " + bpath.string() + " too short");
        ds.curves.push_back(std::move(curve));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Discovery reports.

struct ReportFeature {
    std::string name;
    long presence = 0;
    long selections = 0;
    double inclusion_probability = 0.0;
    double median = 0.0;
    double mean = 0.0;
    double stddev = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    bool ci_is_point = false;
    bool retained = false;
};

struct DiscoveryReport {
    std::string problem;  // "stefan" or "fisher"
    std::vector<ReportFeature> features;
    std::vector<double> coefficients;  // aggregated, raw feature units
    std::string model;
    std::vector<std::pair<std::string, double>> combined_terms;
    std::string combined_model;
    bool empty_model = false;
    long total_fits = 0;
    long failed_fits = 0;
    std::optional<double> coefficient_error;
    json config;  // echo of the discovery configuration
};

// Render "lhs = c1 * name1 + c2 * name2" with 3 significant digits.
inline std::string render_model(const std::string& lhs,
                                const std::vector<std::pair<std::string, double>>& terms) {
    if (terms.empty()) return lhs + " = 0";
    std::string out = lhs + " = ";
    bool first = true;
    for (const auto& [name, coef] : terms) {
        if (first) {
            out += detail::fmt3(coef);
            first = false;
        } else {
            out += coef < 0.0 ? " - " + detail::fmt3(-coef) : " + " + detail::fmt3(coef);
        }
        out += " * " + name;
    }
    return out;
}

inline json report_to_json(const DiscoveryReport& r) {
    json j;
    j["format"] = "mbsindy-report";
    j["version"] = 1;
    j["problem"] = r.problem;
    json feats = json::array();
    for (const auto& f : r.features) {
        feats.push_back({{"name", f.name},
                         {"presence", f.presence},
                         {"selections", f.selections},
                         {"inclusion_probability", f.inclusion_probability},
                         {"median", f.median},
                         {"mean", f.mean},
                         {"stddev", f.stddev},
                         {"ci", {f.ci_lo, f.ci_hi}},
                         {"ci_is_point", f.ci_is_point},
                         {"retained", f.retained}});
    }
    j["features"] = feats;
    j["coefficients"] = r.coefficients;
    j["model"] = r.model;
    json combined = json::array();
    for (const auto& [name, coef] : r.combined_terms) combined.push_back({{"name", name}, {"coefficient", coef}});
    j["combined_terms"] = combined;
    j["combined_model"] = r.combined_model;
    j["empty_model"] = r.empty_model;
    j["total_fits"] = r.total_fits;
    j["failed_fits"] = r.failed_fits;
    if (r.coefficient_error)
        j["coefficient_error"] = *r.coefficient_error;
    else
        j["coefficient_error"] = nullptr;
    j["config"] = r.config;
    return j;
}

inline DiscoveryReport report_from_json(const json& j) {
    if (j.value("format", "") != "mbsindy-report") throw IoError("not a discovery report");
    DiscoveryReport r;
    r.problem = j.at("problem").get<std::string>();
    for (const auto& f : j.at("features")) {
        ReportFeature rf;
        rf.name = f.at("name").get<std::string>();
        rf.presence = f.at("presence").get<long>();
        rf.selections = f.at("selections").get<long>();
        rf.inclusion_probability = f.at("inclusion_probability").get<double>();
        rf.median = f.at("median").get<double>();
        rf.mean = f.at("mean").get<double>();
        rf.stddev = f.at("stddev").get<double>();
        rf.ci_lo = f.at("ci")[0].get<double>();
        rf.ci_hi = f.at("ci")[1].get<double>();
        rf.ci_is_point = f.at("ci_is_point").get<bool>();
        rf.retained = f.at("retained").get<bool>();
        r.features.push_back(std::move(rf));
    }
    r.coefficients = j.at("coefficients").get<std::vector<double>>();
    r.model = j.at("model").get<std::string>();
    for (const auto& t : j.at("combined_terms"))
        r.combined_terms.emplace_back(t.at("name").get<std::string>(),
                                      t.at("coefficient").get<double>());
    r.combined_model = j.at("combined_model").get<std::string>();
    r.empty_model = j.at("empty_model").get<bool>();
    r.total_fits = j.at("total_fits").get<long>();
    r.failed_fits = j.at("failed_fits").get<long>();
    if (!j.at("coefficient_error").is_null())
        r.coefficient_error = j.at("coefficient_error").get<double>();
    r.config = j.value("config", json::object());
    return r;
}

inline void write_report(const std::filesystem::path& dir, const DiscoveryReport& r) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    detail::write_text(dir / "report.json", report_to_json(r).dump(2) + "\n");

    std::string txt;
    txt += "problem: " + r.problem + "\n";
    txt += "model:   " + r.model + "\n";
    if (!r.combined_model.empty() && r.combined_model != r.model)
        txt += "combined: " + r.combined_model + "\n";
    txt += "fits:    " + std::to_string(r.total_fits) +
           " (failed: " + std::to_string(r.failed_fits) + ")\n";
    if (r.coefficient_error)
        txt += "coefficient error vs truth: " + detail::fmt3(*r.coefficient_error) + "\n";
    txt += "\n";
    txt += "feature           p_inc   median    mean     std      ci_lo    ci_hi  kept\n";
    for (const auto& f : r.features) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-16s %6.3f %8.3g %8.3g %8.3g %8.3g %8.3g  %s\n",
                      f.name.c_str(), f.inclusion_probability, f.median, f.mean, f.stddev,
                      f.ci_lo, f.ci_hi, f.retained ? "yes" : "no");
        txt += line;
    }
    detail::write_text(dir / "report.txt", txt);
}

inline DiscoveryReport read_report(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(detail::read_text(path));
    } catch (const json::exception& e) {
        throw IoError("malformed report: " + std::string(e.what()));
    }
    return report_from_json(j);
}

}  // namespace mbsindy
