#include "mfcn/control.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace mfcn {

ControlPolicy ControlFamily::materialize(const std::vector<double>& params) const {
    check();
    if (static_cast<int>(params.size()) != param_count())
        fail("ControlFamily: parameter vector has wrong length");
    ControlPolicy p;
    p.m = m;
    p.k = k;
    p.steps = steps;
    p.v_radius = v_radius;
    p.u_table.assign(static_cast<std::size_t>(steps) * m, 0.0);
    p.v.assign(static_cast<std::size_t>(steps) * k, 0.0);
    if (affine) p.u_affine.assign(static_cast<std::size_t>(steps) * m * d, 0.0);

    const double* pu = params.data();
    const double* pv = pu + u_pieces * m;
    const double* pg = pv + v_pieces * k;
    for (int j = 0; j < steps; ++j) {
        const int up = std::min(u_pieces - 1, j * u_pieces / steps);
        const int vp = std::min(v_pieces - 1, j * v_pieces / steps);
        for (int c = 0; c < m; ++c)
            p.u_table[static_cast<std::size_t>(j) * m + c] = pu[up * m + c];
        for (int c = 0; c < k; ++c) p.v[static_cast<std::size_t>(j) * k + c] = pv[vp * k + c];
        if (affine)
            for (int c = 0; c < m * d; ++c)
                p.u_affine[static_cast<std::size_t>(j) * m * d + c] = pg[up * m * d + c];
    }
    return p;
}

void save_control_policy(const ControlPolicy& policy, const TimeGrid& grid,
                         const std::string& path) {
    std::ofstream out(path);
    if (!out) fail("save_control_policy: cannot open " + path);
    out << "schema_version = 1\n";
    out << "m = " << policy.m << "\n";
    out << "k = " << policy.k << "\n";
    out << "steps = " << policy.steps << "\n";
    out << strprintf("horizon = %.17g\n", grid.horizon);
    out << strprintf("v_radius = %.17g\n", policy.v_radius);
    auto write_table = [&](const char* name, const std::vector<double>& tab, int cols) {
        if (tab.empty()) return;
        for (int j = 0; j < policy.steps; ++j) {
            out << name << " " << j << " =";
            for (int c = 0; c < cols; ++c)
                out << strprintf(" %.17g", tab[static_cast<std::size_t>(j) * cols + c]);
            out << "\n";
        }
    };
    write_table("u", policy.u_table, policy.m);
    write_table("v", policy.v, policy.k);
    write_table("u_affine", policy.u_affine, policy.m * (policy.u_affine.empty()
                                                             ? 1
                                                             : static_cast<int>(policy.u_affine.size() /
                                                                                (static_cast<std::size_t>(policy.steps) * policy.m))));
    if (!out) fail("save_control_policy: write failed for " + path);
}

ControlPolicy load_control_policy(const std::string& path, TimeGrid* grid_out) {
    std::ifstream in(path);
    if (!in) fail("load_control_policy: cannot open " + path);
    ControlPolicy p;
    double horizon = 1.0;
    int d_gain = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "u" || key == "v" || key == "u_affine") {
            int j;
            std::string eq;
            ss >> j >> eq;
            std::vector<double> vals;
            double x;
            while (ss >> x) vals.push_back(x);
            if (key == "u") {
                if (p.u_table.empty())
                    p.u_table.assign(static_cast<std::size_t>(p.steps) * p.m, 0.0);
                std::copy(vals.begin(), vals.end(),
                          p.u_table.begin() + static_cast<std::ptrdiff_t>(j) * p.m);
            } else if (key == "v") {
                if (p.v.empty()) p.v.assign(static_cast<std::size_t>(p.steps) * p.k, 0.0);
                std::copy(vals.begin(), vals.end(),
                          p.v.begin() + static_cast<std::ptrdiff_t>(j) * p.k);
            } else {
                if (d_gain == 0) d_gain = static_cast<int>(vals.size()) / p.m;
                if (p.u_affine.empty())
                    p.u_affine.assign(static_cast<std::size_t>(p.steps) * p.m * d_gain, 0.0);
                std::copy(vals.begin(), vals.end(),
                          p.u_affine.begin() + static_cast<std::ptrdiff_t>(j) * p.m * d_gain);
            }
            continue;
        }
        std::string eq;
        double val;
        ss >> eq >> val;
        if (key == "schema_version") {
            if (static_cast<int>(val) != 1) fail("load_control_policy: unsupported schema version");
        } else if (key == "m")
            p.m = static_cast<int>(val);
        else if (key == "k")
            p.k = static_cast<int>(val);
        else if (key == "steps")
            p.steps = static_cast<int>(val);
        else if (key == "horizon")
            horizon = val;
        else if (key == "v_radius")
            p.v_radius = val;
        else
            fail("load_control_policy: unknown key " + key);
    }
    if (grid_out) *grid_out = TimeGrid(horizon, p.steps);
    return p;
}

}  // namespace mfcn
