#include "tidecap/config.hpp"

#include "tidecap/io_util.hpp"
#include "tidecap/kepler.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace tidecap {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_number(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("config: malformed number for key '" + key + "': " + value);
    }
}

int parse_int(const std::string& key, const std::string& value) {
    double v = parse_number(key, value);
    if (v != std::floor(v)) throw std::runtime_error("config: key '" + key + "' must be integer");
    return int(v);
}

std::string csv_cell(double v) { return fmt_g17(v); }

} // namespace

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    cfg.params.R1 = 0.0;
    std::map<std::string, bool> seen;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        std::string stripped = line.substr(0, line.find('#'));
        stripped = trim(stripped);
        if (stripped.empty()) continue;
        std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: expected 'key = value', got: " + line);
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::runtime_error("config: empty key or value in line: " + line);
        seen[key] = true;
        if (key == "G") cfg.params.G = parse_number(key, value);
        else if (key == "M") cfg.params.M = parse_number(key, value);
        else if (key == "R") cfg.params.R = parse_number(key, value);
        else if (key == "b") cfg.params.b = parse_number(key, value);
        else if (key == "v0") cfg.params.v0 = parse_number(key, value);
        else if (key == "R1") cfg.params.R1 = parse_number(key, value);
        else if (key == "alpha_exp") cfg.alpha_exp = parse_number(key, value);
        else if (key == "rtol") cfg.rtol = parse_number(key, value);
        else if (key == "l_max") cfg.l_max = parse_int(key, value);
        else if (key == "grid_degree") cfg.grid_degree = parse_int(key, value);
        else if (key == "quadrature_order") cfg.quadrature_order = parse_int(key, value);
        else if (key == "sample_dt") cfg.sample_dt = parse_number(key, value);
        else if (key == "stop_margin") cfg.stop.value = parse_number(key, value);
        else if (key == "closure") {
            if (value == "point") cfg.closure = ClosureKind::PointMass;
            else if (value == "ball") cfg.closure = ClosureKind::RigidBallQuadrature;
            else if (value == "quadrupole") cfg.closure = ClosureKind::QuadrupoleCoupled;
            else throw std::runtime_error("config: key 'closure' must be point|ball|quadrupole");
        } else if (key == "launch") {
            if (value == "conic") cfg.launch = LaunchMode::Conic;
            else if (value == "ballistic") cfg.launch = LaunchMode::Ballistic;
            else throw std::runtime_error("config: key 'launch' must be conic|ballistic");
        } else if (key == "stop") {
            if (value == "closest") {
                cfg.stop.kind = StopCondition::Kind::ClosestApproachMargin;
            } else if (value.rfind("r1=", 0) == 0) {
                cfg.stop.kind = StopCondition::Kind::RadiusBelow;
                cfg.stop.value = parse_number(key, value.substr(3));
            } else if (value.rfind("t=", 0) == 0) {
                cfg.stop.kind = StopCondition::Kind::TimeHorizon;
                cfg.stop.value = parse_number(key, value.substr(2));
            } else {
                throw std::runtime_error("config: key 'stop' must be closest|r1=<val>|t=<val>");
            }
        } else {
            throw std::runtime_error("config: unknown key '" + key + "'");
        }
    }
    for (const char* req : {"G", "M", "R", "b", "v0"})
        if (!seen.count(req))
            throw std::runtime_error(std::string("config: missing required key '") + req + "'");
    if (cfg.stop.kind == StopCondition::Kind::ClosestApproachMargin && !seen.count("stop_margin"))
        cfg.stop.value = 10.0;
    cfg.params.validate();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

std::vector<SweepPoint> parse_sweep_grid(const std::string& text) {
    std::vector<SweepPoint> grid;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        std::string stripped = trim(line.substr(0, line.find('#')));
        if (stripped.empty()) continue;
        std::replace(stripped.begin(), stripped.end(), ',', ' ');
        std::istringstream ls(stripped);
        SweepPoint p{};
        if (!(ls >> p.beta >> p.kappa >> p.alpha_exp))
            throw std::runtime_error("sweep grid: expected 'beta kappa alpha_exp': " + line);
        grid.push_back(p);
    }
    if (grid.empty()) throw std::runtime_error("sweep grid: no rows");
    return grid;
}

RunResult run_simulation(const RunConfig& cfg) {
    if (cfg.closure == ClosureKind::QuadrupoleCoupled)
        throw std::runtime_error("run_simulation: use run_coupled for the quadrupole closure");
    RunResult out;
    out.scaled = nondimensionalize(cfg.params);
    PhysicalParams ip = out.scaled.internal;
    out.groups = derive(ip, cfg.alpha_exp);
    ForceClosure closure;
    closure.kind = cfg.closure;
    closure.quadrature_order = cfg.quadrature_order;
    IntegrateOptions io;
    io.rtol = cfg.rtol;
    io.launch = cfg.launch;
    out.traj = integrate(ip, closure, cfg.stop, io);
    if (cfg.with_modes && cfg.l_max >= 2) {
        ModeIntegrateOptions mo;
        mo.L_max = cfg.l_max;
        mo.rtol = cfg.rtol;
        mo.sample_dt = cfg.sample_dt;
        out.modes = integrate_modes(out.traj, mo);
        out.energy = decomposition_report(out.traj, out.modes, out.traj.params());
        try {
            out.capture = capture_ratio(out.energy, out.traj);
        } catch (const std::domain_error&) {
        }
        try {
            out.fit = eta_scaling_fit(out.energy, out.traj);
        } catch (const std::domain_error&) {
        }
    }
    return out;
}

CoupledRunResult run_coupled(const RunConfig& cfg) {
    CoupledRunResult out;
    out.scaled = nondimensionalize(cfg.params);
    PhysicalParams ip = out.scaled.internal;
    out.groups = derive(ip, cfg.alpha_exp);

    double R1 = ip.R1;
    if (R1 == 0.0) R1 = 50.0 * out.groups.r_plus_exact;
    OrbitState init = launch_state(ip, cfg.launch, R1);
    out.e0 = init.energy(ip.GM()) ;

    const int L = std::max(cfg.l_max, 2);
    const int N = sh_count(L);
    std::vector<double> a(N, 0.0);
    for (int l = 0; l <= L; ++l)
        for (int m = -l; m <= l; ++m) a[sh_index(l, m)] = mode_frequency(l, ip.GM(), ip.R);

    OdeRhs rhs = [&, N](double t, const StateVec& y, StateVec& dydt) {
        OrbitState s{t, {y[0], y[1], y[2]}, {y[3], y[4], y[5]}};
        std::array<double, 5> h2;
        for (int m = -2; m <= 2; ++m) h2[std::size_t(m + 2)] = y[6 + sh_index(2, m)];
        Vec3 acc = accel_with_modes(s, h2, ip);
        dydt.assign(6 + 2 * N, 0.0);
        dydt[0] = y[3];
        dydt[1] = y[4];
        dydt[2] = y[5];
        dydt[3] = acc.x;
        dydt[4] = acc.y;
        dydt[5] = acc.z;
        SourceTerm src = source_coefficients(s, ip);
        for (int i = 0; i < N; ++i) {
            dydt[6 + i] = y[6 + N + i];
            dydt[6 + N + i] = -a[i] * y[6 + i];
        }
        for (int m = -2; m <= 2; ++m)
            dydt[6 + N + sh_index(2, m)] += src.f2m[std::size_t(m + 2)];
    };

    const double a2 = mode_frequency(2, ip.GM(), ip.R);
    const double period = 2.0 * M_PI / std::sqrt(a2);
    const double dt_sample = cfg.sample_dt > 0.0 ? cfg.sample_dt : period / 16.0;
    double eta_plus = ip.R / out.groups.r_plus_exact;
    double h_scale = ip.R * ip.R * std::pow(eta_plus, 3);

    OdeOptions oo;
    oo.rtol = cfg.rtol;
    oo.keep_history = false;
    oo.atol_per_component.assign(6 + 2 * N, 0.0);
    for (int i = 0; i < 3; ++i) oo.atol_per_component[i] = cfg.rtol * R1;
    for (int i = 3; i < 6; ++i) oo.atol_per_component[i] = cfg.rtol * ip.v0;
    for (int i = 0; i < N; ++i) {
        oo.atol_per_component[6 + i] = 1e-4 * cfg.rtol * h_scale;
        oo.atol_per_component[6 + N + i] = 1e-4 * cfg.rtol * h_scale * std::sqrt(a2);
    }

    out.modes.L_max = L;
    double next_sample = 0.0;
    double t_stop = 0.0;
    bool stopped = false;
    StateVec yi;

    DormandPrince5::Monitor monitor = [&](const OdeSolution& sol, double t_prev, double t_now,
                                          const StateVec& y) -> bool {
        OrbitState s{t_now, {y[0], y[1], y[2]}, {y[3], y[4], y[5]}};
        if (s.r1() <= ip.R) throw std::domain_error("run_coupled: bodies overlap");
        auto rad_speed = [&](double t) {
            sol.eval(t, yi);
            return yi[0] * yi[3] + yi[1] * yi[4] + yi[2] * yi[5];
        };
        auto radius = [&](double t) {
            sol.eval(t, yi);
            return Vec3{yi[0], yi[1], yi[2]}.norm();
        };
        while (next_sample <= t_now) {
            sol.eval(next_sample, yi);
            OrbitState os{next_sample, {yi[0], yi[1], yi[2]}, {yi[3], yi[4], yi[5]}};
            out.orbit_samples.push_back(os);
            ModeSample ms;
            ms.t = next_sample;
            ms.r1 = os.r1();
            ms.eta = os.eta(ip.R);
            ms.v1 = os.v1.norm();
            ms.r1dot = os.r1dot();
            for (int m = -2; m <= 2; ++m) {
                ms.h2[std::size_t(m + 2)] = yi[6 + sh_index(2, m)];
                ms.h2dot[std::size_t(m + 2)] = yi[6 + N + sh_index(2, m)];
            }
            out.modes.samples.push_back(ms);
            next_sample += dt_sample;
        }
        if (!out.closest && rad_speed(t_now) > 0.0) {
            double f_lo = rad_speed(t_prev);
            double t0 = t_prev;
            if (f_lo < 0.0) {
                double lo = t_prev, hi = t_now;
                for (int it = 0; it < 200; ++it) {
                    double tm = 0.5 * (lo + hi);
                    if (tm == lo || tm == hi) break;
                    if (rad_speed(tm) < 0.0)
                        lo = tm;
                    else
                        hi = tm;
                }
                t0 = 0.5 * (lo + hi);
            }
            sol.eval(t0, yi);
            OrbitState os{t0, {yi[0], yi[1], yi[2]}, {yi[3], yi[4], yi[5]}};
            ClosestApproach ca;
            ca.t0 = t0;
            ca.r0 = os.r1();
            ca.E1_at_t0 = os.energy(ip.GM());
            ca.J_at_t0 = os.J_vec().norm();
            double GM = ip.GM();
            double disc = GM * GM + 32.0 * ca.E1_at_t0 * ca.J_at_t0 * ca.J_at_t0;
            ca.r0_pred =
                disc >= 0 ? 4.0 * ca.J_at_t0 * ca.J_at_t0 / (std::sqrt(disc) + GM) : NAN;
            out.closest = ca;
        }
        if (cfg.stop.kind == StopCondition::Kind::TimeHorizon) return false;
        if (cfg.stop.kind == StopCondition::Kind::RadiusBelow) {
            if (radius(t_now) <= cfg.stop.value) {
                t_stop = t_now;
                stopped = true;
                return true;
            }
            return false;
        }
        if (out.closest) {
            double r_exit = std::min(cfg.stop.value * out.closest->r0, R1);
            if (radius(t_now) >= r_exit) {
                t_stop = t_now;
                stopped = true;
                return true;
            }
        }
        return false;
    };

    double t_final = cfg.stop.kind == StopCondition::Kind::TimeHorizon
                         ? cfg.stop.value
                         : 1000.0 * std::max(R1 / ip.v0, 4.0 * std::pow(R1, 1.5));
    StateVec y0(6 + 2 * N, 0.0);
    y0[0] = init.x1.x;
    y0[1] = init.x1.y;
    y0[2] = init.x1.z;
    y0[3] = init.v1.x;
    y0[4] = init.v1.y;
    y0[5] = init.v1.z;
    DormandPrince5 solver(rhs, oo);
    solver.integrate(0.0, y0, t_final, monitor);
    (void)stopped;
    (void)t_stop;
    return out;
}

namespace {

void append_orbit_row(std::string& out, double t, const OrbitState& s, double GM, double R) {
    double r1 = s.r1();
    out += csv_cell(t);
    for (double v : {s.x1.x, s.x1.y, s.x1.z, s.v1.x, s.v1.y, s.v1.z}) {
        out += ',';
        out += csv_cell(v);
    }
    out += ',';
    out += csv_cell(r1);
    out += ',';
    out += csv_cell(s.r1dot());
    out += ',';
    out += csv_cell(R / r1);
    out += ',';
    out += csv_cell(s.J_vec().norm());
    out += ',';
    out += csv_cell(s.energy(GM));
}

void append_mode_row(std::string& out, const ModeSample& ms, double R) {
    for (double v : ms.h2) {
        out += ',';
        out += csv_cell(v);
    }
    for (double v : ms.h2dot) {
        out += ',';
        out += csv_cell(v);
    }
    double nh = ms.norm_h2(), nhd = ms.norm_h2dot();
    out += ',';
    out += csv_cell(nh);
    out += ',';
    out += csv_cell(nhd);
    out += ',';
    out += csv_cell(nh / (R * R * std::pow(ms.eta, 3)));
    out += ',';
    out += csv_cell(nhd / (R * std::pow(ms.eta, 4) * std::max(ms.v1, 1e-300)));
}

const char* kOrbitHeader = "t,x1x,x1y,x1z,v1x,v1y,v1z,r1,r1dot,eta,J,E1";
const char* kModeHeader =
    "h2m_-2,h2m_-1,h2m_0,h2m_1,h2m_2,h2m_dot_-2,h2m_dot_-1,h2m_dot_0,h2m_dot_1,h2m_dot_2,"
    "norm_h2,norm_h2dot,ratio_h2,ratio_h2dot";

} // namespace

void write_run_csv(const std::string& path, const RunConfig& cfg, const RunResult& result) {
    const PhysicalParams& ip = result.traj.params();
    std::string out;
    out.reserve(1 << 20);
    out += kOrbitHeader;
    if (!result.modes.samples.empty()) {
        out += ',';
        out += kModeHeader;
    }
    out += '\n';
    if (!result.modes.samples.empty()) {
        for (const ModeSample& ms : result.modes.samples) {
            append_orbit_row(out, ms.t, result.traj.state(ms.t), ip.GM(), ip.R);
            append_mode_row(out, ms, ip.R);
            out += '\n';
        }
    } else {
        double t_prev = result.traj.t_begin();
        append_orbit_row(out, t_prev, result.traj.state(t_prev), ip.GM(), ip.R);
        out += '\n';
        for (const OdeStepRecord& st : result.traj.solution().steps()) {
            double t1 = std::min(st.t1, result.traj.t_end());
            append_orbit_row(out, t1, result.traj.state(t1), ip.GM(), ip.R);
            out += '\n';
            if (t1 >= result.traj.t_end()) break;
        }
    }
    atomic_write_file(path, out);
    write_sidecar(path, cfg, result.groups, result.scaled, result.traj.closest());
}

void write_coupled_csv(const std::string& path, const RunConfig& cfg,
                       const CoupledRunResult& result) {
    const PhysicalParams& ip = result.scaled.internal;
    std::string out;
    out.reserve(1 << 20);
    out += kOrbitHeader;
    out += ',';
    out += kModeHeader;
    out += '\n';
    for (std::size_t i = 0; i < result.modes.samples.size(); ++i) {
        append_orbit_row(out, result.modes.samples[i].t, result.orbit_samples[i], ip.GM(), ip.R);
        append_mode_row(out, result.modes.samples[i], ip.R);
        out += '\n';
    }
    atomic_write_file(path, out);
    write_sidecar(path, cfg, result.groups, result.scaled, result.closest);
}

void write_sidecar(const std::string& csv_path, const RunConfig& cfg,
                   const DerivedGroups& groups, const ScaledParams& scaled,
                   const std::optional<ClosestApproach>& closest) {
    std::ostringstream os;
    os << "{\"version\":\"tidecap 0.1.0\"";
    if (cfg.timestamp) {
        auto now = std::chrono::system_clock::now();
        std::time_t tt = std::chrono::system_clock::to_time_t(now);
        char buf[32];
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
        os << ",\"generated_utc\":\"" << buf << "\"";
    }
    os << ",\"config\":{";
    os << "\"G\":" << json_num(cfg.params.G) << ",\"M\":" << json_num(cfg.params.M)
       << ",\"R\":" << json_num(cfg.params.R) << ",\"b\":" << json_num(cfg.params.b)
       << ",\"v0\":" << json_num(cfg.params.v0) << ",\"R1\":" << json_num(cfg.params.R1)
       << ",\"alpha_exp\":" << json_num(cfg.alpha_exp) << ",\"rtol\":" << json_num(cfg.rtol)
       << ",\"l_max\":" << cfg.l_max << ",\"grid_degree\":" << cfg.grid_degree
       << ",\"quadrature_order\":" << cfg.quadrature_order << ",\"closure\":\""
       << (cfg.closure == ClosureKind::PointMass
               ? "point"
               : cfg.closure == ClosureKind::RigidBallQuadrature ? "ball" : "quadrupole")
       << "\",\"launch\":\"" << (cfg.launch == LaunchMode::Conic ? "conic" : "ballistic")
       << "\"}";
    os << ",\"derived\":" << to_json(groups);
    os << ",\"scales\":{\"length\":" << json_num(scaled.length_scale)
       << ",\"time\":" << json_num(scaled.time_scale)
       << ",\"velocity\":" << json_num(scaled.velocity_scale)
       << ",\"energy\":" << json_num(scaled.energy_scale)
       << ",\"mass\":" << json_num(scaled.mass_scale) << "}";
    os << ",\"internal\":{\"b\":" << json_num(scaled.internal.b)
       << ",\"v0\":" << json_num(scaled.internal.v0)
       << ",\"R1\":" << json_num(scaled.internal.R1) << "}";
    if (closest) {
        os << ",\"closest_approach\":{\"t0\":" << json_num(closest->t0)
           << ",\"r0\":" << json_num(closest->r0)
           << ",\"E1_at_t0\":" << json_num(closest->E1_at_t0)
           << ",\"J_at_t0\":" << json_num(closest->J_at_t0)
           << ",\"r0_pred\":" << json_num(closest->r0_pred) << "}";
    }
    os << "}";
    atomic_write_file(csv_path + ".meta.json", os.str());
}

std::string report_json(const RunResult& result, int max_series_rows) {
    std::ostringstream os;
    os << "{";
    os << "\"e0\":" << json_num(result.energy.e0);
    os << ",\"max_total_energy_drift\":" << json_num(result.energy.max_drift);
    os << ",\"surrogate_to_split_potential\":"
       << json_num(result.energy.surrogate_to_split_potential);
    os << ",\"surrogate_to_split_kinetic\":"
       << json_num(result.energy.surrogate_to_split_kinetic);
    os << ",\"capture_index\":" << json_num(result.groups.capture_index);
    if (result.traj.closest()) {
        os << ",\"t0\":" << json_num(result.traj.closest()->t0);
        os << ",\"r0\":" << json_num(result.traj.closest()->r0);
    }
    if (result.capture) {
        os << ",\"m_ratio\":" << json_num(result.capture->m_ratio);
        os << ",\"m_ratio_split\":" << json_num(result.capture->m_ratio_split);
    }
    if (result.fit) {
        os << ",\"eta_slope\":" << json_num(result.fit->slope);
        os << ",\"eta6_ratio_min\":" << json_num(result.fit->ratio_min);
        os << ",\"eta6_ratio_max\":" << json_num(result.fit->ratio_max);
    }
    os << ",\"series\":[";
    const auto& reps = result.energy.reports;
    std::size_t stride = reps.empty() ? 1 : std::max<std::size_t>(1, reps.size() / max_series_rows);
    bool first = true;
    for (std::size_t i = 0; i < reps.size(); i += stride) {
        const EnergyReport& r = reps[i];
        if (!first) os << ",";
        first = false;
        os << "{\"t\":" << json_num(r.t) << ",\"eta\":" << json_num(r.eta)
           << ",\"E_orbital\":" << json_num(r.E_orbital) << ",\"E_tidal\":" << json_num(r.E_tidal)
           << ",\"E_tidal_kinetic\":" << json_num(r.E_tidal_kinetic)
           << ",\"E_tidal_potential\":" << json_num(r.E_tidal_potential)
           << ",\"E_tidal_surrogate\":" << json_num(r.E_tidal_surrogate)
           << ",\"E_total\":" << json_num(r.E_total)
           << ",\"E_orbital_inferred\":" << json_num(r.E_orbital_inferred) << "}";
    }
    os << "]}";
    return os.str();
}

std::string report_from_csv(const std::string& csv_path, const std::string& config_path) {
    // Params in internal units: from the sidecar by default.
    PhysicalParams ip;
    ip.G = ip.M = ip.R = 1.0;
    double r0_meta = -1.0, t0_meta = NAN;
    if (!config_path.empty()) {
        RunConfig cfg = load_config(config_path);
        ScaledParams sc = nondimensionalize(cfg.params);
        ip = sc.internal;
    } else {
        std::ifstream ms(csv_path + ".meta.json");
        if (!ms)
            throw std::runtime_error("report: no sidecar " + csv_path +
                                     ".meta.json and no --config given");
        nlohmann::json j = nlohmann::json::parse(ms);
        ip.b = j["internal"]["b"].get<double>();
        ip.v0 = j["internal"]["v0"].get<double>();
        ip.R1 = j["internal"]["R1"].get<double>();
        if (j.contains("closest_approach")) {
            r0_meta = j["closest_approach"]["r0"].get<double>();
            t0_meta = j["closest_approach"]["t0"].get<double>();
        }
    }

    std::ifstream is(csv_path);
    if (!is) throw std::runtime_error("report: cannot open " + csv_path);
    std::string header;
    std::getline(is, header);
    std::vector<std::string> cols;
    {
        std::istringstream hs(header);
        std::string c;
        while (std::getline(hs, c, ',')) cols.push_back(c);
    }
    auto col = [&](const std::string& name) {
        auto it = std::find(cols.begin(), cols.end(), name);
        if (it == cols.end())
            throw std::runtime_error("report: run csv lacks column '" + name + "'");
        return std::size_t(it - cols.begin());
    };
    std::size_t ct = col("t"), cr1 = col("r1"), ceta = col("eta"), ce1 = col("E1");
    std::size_t cv[3] = {col("v1x"), col("v1y"), col("v1z")};
    std::size_t ch0 = col("h2m_-2"), chd0 = col("h2m_dot_-2");

    DecompositionSeries series;
    std::vector<double> r1s;
    std::string line;
    std::vector<double> row;
    bool first_row = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        row.clear();
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
        std::array<double, 5> h2{}, h2dot{};
        for (int m = 0; m < 5; ++m) {
            h2[std::size_t(m)] = row[ch0 + m];
            h2dot[std::size_t(m)] = row[chd0 + m];
        }
        TidalEnergy te = tidal_energy(h2, h2dot, ip);
        EnergyReport r;
        r.t = row[ct];
        r.eta = row[ceta];
        double v2 = row[cv[0]] * row[cv[0]] + row[cv[1]] * row[cv[1]] + row[cv[2]] * row[cv[2]];
        r.E_orbital = 0.5 * v2 - ip.GM() / (4.0 * row[cr1]);
        r.E_tidal = te.total;
        r.E_tidal_kinetic = te.kinetic;
        r.E_tidal_potential = te.potential;
        r.E_tidal_surrogate = te.surrogate_total;
        if (first_row) {
            series.e0 = row[ce1];
            first_row = false;
        }
        r.E_total = r.E_orbital + r.E_tidal;
        r.E_orbital_inferred = series.e0 - r.E_tidal_surrogate;
        series.max_drift = std::max(series.max_drift, std::abs(r.E_total - series.e0));
        series.reports.push_back(r);
        r1s.push_back(row[cr1]);
    }
    if (series.reports.empty()) throw std::runtime_error("report: run csv has no rows");

    std::size_t i_min = std::min_element(r1s.begin(), r1s.end()) - r1s.begin();
    double r0 = r0_meta > 0 ? r0_meta : r1s[i_min];
    double t0 = std::isnan(t0_meta) ? series.reports[i_min].t : t0_meta;

    // Capture ratio at the sample nearest t0, eta fit over the inbound window.
    const EnergyReport* at = &series.reports[i_min];
    double best = std::abs(at->t - t0);
    for (const EnergyReport& r : series.reports)
        if (std::abs(r.t - t0) < best) {
            best = std::abs(r.t - t0);
            at = &r;
        }
    double m_ratio = series.e0 > 0 ? at->E_tidal_surrogate / series.e0 : NAN;
    double m_split = series.e0 > 0 ? at->E_tidal / series.e0 : NAN;

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 0; i < series.reports.size(); ++i) {
        const EnergyReport& r = series.reports[i];
        if (r.t > t0) continue;
        double r1v = r1s[i];
        if (r1v <= r0 || r1v > 2.0 * r0 || !(r.E_tidal > 0)) continue;
        double x = std::log(r.eta), y = std::log(r.E_tidal);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    double slope = n >= 10 ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : NAN;

    std::ostringstream os;
    os << "{\"e0\":" << json_num(series.e0) << ",\"r0\":" << json_num(r0)
       << ",\"t0\":" << json_num(t0) << ",\"m_ratio\":" << json_num(m_ratio)
       << ",\"m_ratio_split\":" << json_num(m_split) << ",\"eta_slope\":" << json_num(slope)
       << ",\"max_total_energy_drift\":" << json_num(series.max_drift) << ",\"rows\":"
       << series.reports.size() << "}";
    return os.str();
}

std::vector<SweepRowResult> run_sweep(const RunConfig& base, const std::vector<SweepPoint>& grid,
                                      int jobs) {
    std::vector<SweepRowResult> rows(grid.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= grid.size()) return;
            RunConfig cfg = base;
            cfg.params.G = cfg.params.M = cfg.params.R = 1.0;
            cfg.params.b = grid[i].beta;
            cfg.params.v0 = grid[i].kappa * std::pow(grid[i].beta, -grid[i].alpha_exp);
            cfg.params.R1 = base.params.R1;
            cfg.alpha_exp = grid[i].alpha_exp;
            RunResult r = run_simulation(cfg);
            SweepRowResult& row = rows[i];
            row.point = grid[i];
            row.capture_index = r.groups.capture_index;
            row.r0 = r.traj.closest() ? r.traj.closest()->r0 : NAN;
            row.m_ratio = r.capture ? r.capture->m_ratio : NAN;
            row.slope = r.fit ? r.fit->slope : NAN;
        }
    };
    jobs = std::max(1, std::min<int>(jobs, int(grid.size())));
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    return rows;
}

std::string sweep_csv(const std::vector<SweepRowResult>& rows) {
    std::string out = "beta,kappa,alpha_exp,capture_index,r0,m_ratio,slope\n";
    for (const SweepRowResult& r : rows) {
        out += csv_cell(r.point.beta);
        out += ',';
        out += csv_cell(r.point.kappa);
        out += ',';
        out += csv_cell(r.point.alpha_exp);
        out += ',';
        out += csv_cell(r.capture_index);
        out += ',';
        out += csv_cell(r.r0);
        out += ',';
        out += csv_cell(r.m_ratio);
        out += ',';
        out += csv_cell(r.slope);
        out += '\n';
    }
    return out;
}

} // namespace tidecap
