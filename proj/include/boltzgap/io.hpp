#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "velocity_space.hpp"

namespace boltzgap {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// Shortest round-trip formatting keeps summaries byte-stable across runs.
inline std::string fmt(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

// NaN/inf are not JSON; store them as strings
inline json num(double x) {
    if (std::isfinite(x)) return x;
    return fmt(x);
}

class CsvWriter {
public:
    CsvWriter(const fs::path& p, const std::vector<std::string>& header) : os_(p) {
        if (!os_) throw std::runtime_error("cannot open " + p.string());
        for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
        os_ << "\n";
    }
    CsvWriter& row(const std::vector<double>& xs) {
        for (std::size_t i = 0; i < xs.size(); ++i) os_ << (i ? "," : "") << fmt(xs[i]);
        os_ << "\n";
        return *this;
    }
    CsvWriter& row(const std::vector<std::string>& xs) {
        for (std::size_t i = 0; i < xs.size(); ++i) os_ << (i ? "," : "") << xs[i];
        os_ << "\n";
        return *this;
    }

private:
    std::ofstream os_;
};

inline void write_json(const fs::path& p, const json& j) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot open " + p.string());
    os << j.dump(2) << "\n";
}

inline json grid_metadata(const VelocityGrid& g) {
    return {{"dimension", g.dimension()}, {"points_per_axis", g.points_per_axis()}, {"extent", g.extent()},
            {"rule", g.uniform() ? "trapezoid" : "gauss"}, {"ordering", "last axis fastest"}};
}

inline void write_le_doubles(std::ostream& os, const double* x, std::size_t n) {
    static_assert(sizeof(double) == 8);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t u;
        std::memcpy(&u, &x[i], 8);
        unsigned char b[8];
        for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(u >> (8 * k));
        os.write(reinterpret_cast<const char*>(b), 8);
    }
}

inline std::vector<double> read_le_doubles(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::vector<double> out;
    unsigned char b[8];
    while (is.read(reinterpret_cast<char*>(b), 8)) {
        std::uint64_t u = 0;
        for (int k = 0; k < 8; ++k) u |= std::uint64_t(b[k]) << (8 * k);
        double x;
        std::memcpy(&x, &u, 8);
        out.push_back(x);
    }
    return out;
}

// snapshot as CSV `vx,vy[,vz],f`
inline void write_field_csv(const fs::path& p, const VelocityGrid& g, const Field& f) {
    std::vector<std::string> h{"vx", "vy"};
    if (g.dimension() == 3) h.push_back("vz");
    h.push_back("f");
    CsvWriter w(p, h);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec& v = g.node(i);
        std::vector<double> r{v[0], v[1]};
        if (g.dimension() == 3) r.push_back(v[2]);
        r.push_back(f[Eigen::Index(i)]);
        w.row(r);
    }
}

// raw little-endian doubles plus a JSON sidecar `<path>.json`
inline void write_field_binary(const fs::path& p, const VelocityGrid& g, const Field& f) {
    std::ofstream os(p, std::ios::binary);
    write_le_doubles(os, f.data(), std::size_t(f.size()));
    json side = grid_metadata(g);
    side["dtype"] = "float64 little-endian";
    side["length"] = f.size();
    write_json(fs::path(p.string() + ".json"), side);
}

// row-major matrix export with sidecar
inline void write_matrix(const fs::path& p, const Eigen::MatrixXd& A, json meta = json::object()) {
    std::ofstream os(p, std::ios::binary);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R = A;
    write_le_doubles(os, R.data(), std::size_t(R.size()));
    meta["rows"] = A.rows();
    meta["cols"] = A.cols();
    meta["dtype"] = "float64 little-endian";
    meta["layout"] = "row-major";
    write_json(fs::path(p.string() + ".json"), meta);
}

// Minimal SVG line/scatter plots. Every plot is paired with a CSV of the
// plotted series by the caller.
struct Series {
    std::string label;
    std::vector<double> x, y;
    bool points = false;
    std::string color = "#1f77b4";
    bool dashed = false;
};

struct PlotSpec {
    std::string title, xlabel, ylabel;
    bool logy = false;
};

inline void write_svg(const fs::path& p, const PlotSpec& spec, const std::vector<Series>& ss) {
    const double W = 640, H = 420, L = 70, R = 20, T = 40, B = 50;
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    auto ty = [&](double y) { return spec.logy ? std::log10(y) : y; };
    for (auto& s : ss)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (spec.logy && !(s.y[i] > 0)) continue;
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, ty(s.y[i]));
            y1 = std::max(y1, ty(s.y[i]));
        }
    if (!(x1 > x0)) x1 = x0 + 1, x0 -= 1e-9;
    if (!(y1 > y0)) y1 = y0 + 1, y0 -= 1;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (ty(y) - y0) / (y1 - y0) * (H - T - B); };
    std::ofstream os(p);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << spec.title << "</text>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        double xv = x0 + (x1 - x0) * k / 4, yv = y0 + (y1 - y0) * k / 4;
        double yy = H - B - (H - T - B) * k / 4.0;
        os << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
           << std::setprecision(3) << xv << "</text>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << yy + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
           << std::setprecision(3) << (spec.logy ? std::pow(10.0, yv) : yv) << "</text>\n";
    }
    os << "<text x=\"" << W / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\" font-size=\"12\">"
       << spec.xlabel << "</text>\n";
    os << "<text x=\"16\" y=\"" << H / 2 << "\" transform=\"rotate(-90 16 " << H / 2
       << ")\" text-anchor=\"middle\" font-size=\"12\">" << spec.ylabel << "</text>\n";
    int li = 0;
    for (auto& s : ss) {
        if (s.points) {
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (spec.logy && !(s.y[i] > 0)) continue;
                os << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"2\" fill=\"" << s.color
                   << "\"/>\n";
            }
        } else {
            os << "<polyline fill=\"none\" stroke=\"" << s.color << "\"" << (s.dashed ? " stroke-dasharray=\"5,4\"" : "")
               << " points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (spec.logy && !(s.y[i] > 0)) continue;
                os << px(s.x[i]) << "," << py(s.y[i]) << " ";
            }
            os << "\"/>\n";
        }
        os << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 14 * (li + 1) << "\" text-anchor=\"end\" font-size=\"11\" fill=\""
           << s.color << "\">" << s.label << "</text>\n";
        ++li;
    }
    os << "</svg>\n";
}

}  // namespace boltzgap
