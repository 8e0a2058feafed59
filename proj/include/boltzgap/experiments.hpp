#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "collision.hpp"
#include "config.hpp"
#include "dynamics.hpp"
#include "io.hpp"
#include "kernels.hpp"
#include "linearized.hpp"
#include "spectral.hpp"
#include "velocity_space.hpp"

namespace boltzgap {

class Stopwatch {
public:
    Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::chrono::steady_clock::time_point t0_;
};

struct Check {
    std::string what;
    bool pass = false;
    std::string detail;
};

struct Outcome {
    std::string id, title, claim;
    bool pass = true;
    json data = json::object();
    std::vector<Check> checks;
    double seconds = 0;

    bool check(const std::string& what, bool ok, const std::string& detail = "") {
        checks.push_back({what, ok, detail});
        pass = pass && ok;
        return ok;
    }

    json to_json() const {
        json j;
        j["id"] = id;
        j["title"] = title;
        j["claim"] = claim;
        j["pass"] = pass;
        j["checks"] = json::array();
        for (auto& c : checks) j["checks"].push_back({{"what", c.what}, {"pass", c.pass}, {"detail", c.detail}});
        j["data"] = data;
        return j;
    }

    std::string line() const {
        std::string s = "criterion " + id + ": " + (pass ? "PASS" : "FAIL") + " " + title;
        for (auto& c : checks)
            if (!c.pass) s += " | failed: " + c.what + " (" + c.detail + ")";
        return s;
    }
};

// nu(0) = C_Phi |S^{N-1}| Gamma((gamma+N)/2) / 2 * ell_b
inline double nu_origin_oracle(const CollisionKernelSpec& k) {
    const int N = k.dimension;
    return k.c_phi * sphere_area(N - 1) * std::tgamma(0.5 * (k.gamma + N)) / 2 * k.ell_b();
}

inline std::string sci(double x, int prec = 4) {
    std::ostringstream os;
    os << std::setprecision(prec) << x;
    return os.str();
}

// One configured grid + kernel + sphere with lazily built operators.
class Lab {
public:
    explicit Lab(RunConfig c)
        : cfg(std::move(c)), g(cfg.make_grid()), k(cfg.make_kernel_spec()), sq(cfg.make_sphere()) {}

    RunConfig cfg;
    VelocityGrid g;
    CollisionKernelSpec k;
    SphereQuadrature sq;
    double assembly_seconds = 0, eigen_seconds = 0, sym_eigen_seconds = 0;

    AssemblyOptions options() const {
        AssemblyOptions o;
        o.order = cfg.grid.order;
        return o;
    }

    const LinearizedOperatorMatrix& L() {
        if (!L_) {
            Stopwatch sw;
            L_ = assemble_L(g, k, sq, options());
            assembly_seconds = sw.seconds();
        }
        return *L_;
    }
    const Eigen::MatrixXd& A() {
        if (!A_) A_ = L().full();
        return *A_;
    }
    double nu0() { return L().nu.minCoeff(); }
    double nu_max() { return L().nu.maxCoeff(); }
    Field W() const { return l2m_weights(g); }

    // spectrum in the configured mode (general mode also keeps left vectors)
    const SpectrumReport& spectrum() {
        if (!sp_) {
            Stopwatch sw;
            SpectrumOptions o = cfg.spectrum;
            o.vectors = true;
            o.left_vectors = true;
            sp_ = boltzgap::spectrum(A(), g, nu0(), o);
            eigen_seconds = sw.seconds();
        }
        return *sp_;
    }

    // eigenvalues only, for runs that just need lambda
    const SpectrumReport& values_only() {
        if (sp_) return *sp_;
        if (!vsp_) {
            Stopwatch sw;
            SpectrumOptions o = cfg.spectrum;
            o.vectors = false;
            o.left_vectors = false;
            vsp_ = boltzgap::spectrum(A(), g, nu0(), o);
            eigen_seconds = sw.seconds();
        }
        return *vsp_;
    }

    const SpectrumReport& symmetric_spectrum() {
        if (!ssp_) {
            if (spectrum().symmetrized) {
                ssp_ = *sp_;
            } else {
                Stopwatch sw;
                SpectrumOptions o = cfg.spectrum;
                o.mode = SpectrumOptions::Mode::symmetric;
                ssp_ = boltzgap::spectrum(A(), g, nu0(), o);
                sym_eigen_seconds = sw.seconds();
            }
        }
        return *ssp_;
    }

    // L^2(M)-symmetrized operator acting on h
    const Eigen::MatrixXd& A_sym() {
        if (!Asym_) Asym_ = symmetrize(A(), W()).A;
        return *Asym_;
    }

    void release_vectors() {
        if (sp_) {
            sp_->vectors.resize(0, 0);
            sp_->left_vectors.resize(0, 0);
        }
    }

private:
    std::optional<LinearizedOperatorMatrix> L_;
    std::optional<Eigen::MatrixXd> A_, Asym_;
    std::optional<SpectrumReport> sp_, ssp_, vsp_;
};

inline void write_spectrum_files(const fs::path& dir, const SpectrumReport& sp, const std::string& stem = "eigenvalues") {
    {
        CsvWriter w(dir / (stem + ".csv"), {"re", "im", "classification"});
        for (std::size_t i = 0; i < sp.values.size(); ++i)
            w.row(std::vector<std::string>{fmt(sp.values[i].real()), fmt(sp.values[i].imag()), to_string(sp.classes[i])});
    }
    Series s{"eigenvalues", {}, {}, true};
    Series nul{"null", {}, {}, true, "#d62728"};
    for (std::size_t i = 0; i < sp.values.size(); ++i) {
        auto& t = sp.classes[i] == EigClass::null ? nul : s;
        t.x.push_back(double(i));
        t.y.push_back(sp.values[i].real());
    }
    write_svg(dir / (stem + ".svg"), {"eigenvalue ladder (real parts)", "index", "Re lambda", false}, {s, nul});
}

inline json spectrum_json(const SpectrumReport& sp, std::size_t head = 12) {
    json j;
    j["symmetrized"] = sp.symmetrized;
    j["symmetry_defect"] = num(sp.symmetry_defect);
    j["tol_null"] = num(sp.tol_null);
    j["null_count"] = sp.null_count;
    j["gap"] = num(sp.gap);
    j["band_onset"] = num(sp.band_onset);
    j["null_span_angle_deg"] = num(sp.null_span_angle_deg);
    j["max_imag"] = num(sp.max_imag);
    j["leading"] = json::array();
    for (std::size_t i = 0; i < std::min(head, sp.values.size()); ++i)
        j["leading"].push_back({num(sp.values[i].real()), num(sp.values[i].imag()), to_string(sp.classes[i])});
    return j;
}

// Largest <h, A h>_{L^2(M)} / (nu0 ||h||^2) over random h.
inline double dirichlet_form_worst(const Eigen::MatrixXd& A, const VelocityGrid& g, double nu0, int samples,
                                   std::uint64_t seed) {
    Field W = l2m_weights(g);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N01;
    double worst = -INFINITY;
    for (int s = 0; s < samples; ++s) {
        Field h(A.rows());
        for (Eigen::Index i = 0; i < h.size(); ++i) h[i] = N01(rng);
        double q = h.dot(W.cwiseProduct(A * h)) / (nu0 * h.dot(W.cwiseProduct(h)));
        worst = std::max(worst, q);
    }
    return worst;
}

// Invariant-moment defect of the linear operator in the bulk |v| <= radius:
// max_a max_l |sum_i W_i phi_a(i) A_il| / sum_i W_i |phi_a(i)| (|G_il| + |C_il| + delta_il nu_i)
inline double linear_conservation_defect(const LinearizedOperatorMatrix& L, const VelocityGrid& g, double radius) {
    Field W = l2m_weights(g);
    Eigen::MatrixXd P = invariants(g);
    Eigen::MatrixXd A = L.full();
    double worst = 0;
    for (Eigen::Index a = 0; a < P.cols(); ++a) {
        Field wp = W.cwiseProduct(P.col(a));
        Eigen::RowVectorXd num = wp.transpose() * A;
        Eigen::RowVectorXd den = wp.cwiseAbs().transpose() * (L.gain.cwiseAbs() + L.conv.cwiseAbs());
        for (Eigen::Index l = 0; l < A.cols(); ++l) {
            if (norm(g.node(std::size_t(l))) > radius) continue;
            double d = den[l] + std::abs(wp[l]) * L.nu[l];
            worst = std::max(worst, std::abs(num[l]) / d);
        }
    }
    return worst;
}

// ||S - S^T||_F / ||S||_F on the block of nodes with |v| <= radius, S the symmetric-frame matrix
inline double bulk_symmetry_defect(const Eigen::MatrixXd& A, const VelocityGrid& g, double radius) {
    Field s = l2m_weights(g).array().sqrt();
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (norm(g.node(i)) <= radius) idx.push_back(Eigen::Index(i));
    const auto n = Eigen::Index(idx.size());
    Eigen::MatrixXd S(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b) S(a, b) = s[idx[a]] * A(idx[a], idx[b]) / s[idx[b]];
    return (S - S.transpose()).norm() / S.norm();
}

inline Field initial_field(const VelocityGrid& g, const std::string& kind, double eps, std::uint64_t seed) {
    if (kind == "maxwellian") return maxwellian_field(g);
    if (kind == "shifted_maxwellian") {
        Maxwellian m = Maxwellian::standard(g.dimension());
        m.u = {0.3, -0.2, g.dimension() == 3 ? 0.1 : 0.0};
        m.T = 0.45;
        return maxwellian_field(g, m);
    }
    if (kind == "mixture") {
        std::mt19937_64 rng(seed);
        return random_positive_field(g, rng, 2);
    }
    if (kind == "polynomial_tail") {
        // M plus a slowly decaying bump carrying eps of the mass
        Field M = maxwellian_field(g);
        Field t = g.sample([&](const Vec& v) { return std::pow(japanese(norm(v)), -(g.dimension() + 4.0)); });
        t *= eps * l1_norm(g, M) / l1_norm(g, t);
        return M + t;
    }
    return near_equilibrium(g, eps, seed);
}

inline Maxwellian equilibrium_for(const VelocityGrid& g, const Field& f0, const std::string& kind) {
    if (kind == "near_equilibrium" || kind == "maxwellian") return Maxwellian::standard(g.dimension());
    return maxwellian_from_moments(moments(g, f0), g.dimension());
}

struct RunStats {
    double max_H_increase = 0;  // max (H_{i+1} - H_i) / dt
    double mass_drift = 0, energy_drift = 0;
    std::size_t ladder_violations = 0;
};

inline RunStats trajectory_stats(const Trajectory& tr) {
    RunStats s;
    const auto& r = tr.rows;
    for (std::size_t i = 0; i + 1 < r.size(); ++i)
        s.max_H_increase = std::max(s.max_H_increase, (r[i + 1].H - r[i].H) / (r[i + 1].t - r[i].t));
    for (auto& x : r) {
        s.mass_drift = std::max(s.mass_drift, std::abs(x.mass - r[0].mass) / std::abs(r[0].mass));
        s.energy_drift = std::max(s.energy_drift, std::abs(x.energy - r[0].energy) / std::abs(r[0].energy));
        if (x.l1 > x.l1_m * (1 + 1e-12) || x.l1_m > x.l1_m2 * (1 + 1e-12)) ++s.ladder_violations;
    }
    return s;
}

inline void write_trajectory(const fs::path& dir, const Trajectory& tr, const std::string& stem = "trajectory") {
    CsvWriter w(dir / (stem + ".csv"), {"t", "l1_dist", "l1_m_dist", "l1_m2_dist", "H", "D", "mass", "energy", "exp_moment"});
    for (auto& r : tr.rows) w.row({r.t, r.l1, r.l1_m, r.l1_m2, r.H, r.D, r.mass, r.energy, r.exp_moment});
}

inline void write_decay_plot(const fs::path& dir, const Trajectory& tr, const DecayFit& fit, double lambda,
                             const std::string& stem = "decay") {
    Series d{"||f - M||_1", {}, {}};
    Series f{"fit", {}, {}, false, "#ff7f0e", true};
    Series l{"lambda slope", {}, {}, false, "#2ca02c", true};
    CsvWriter w(dir / (stem + ".csv"), {"t", "l1_dist", "fit", "lambda_ref"});
    double y0 = tr.rows.empty() ? 1 : tr.rows[0].l1;
    for (auto& r : tr.rows) {
        double fv = fit.C * std::exp(-fit.mu * r.t), lv = y0 * std::exp(-lambda * r.t);
        d.x.push_back(r.t), d.y.push_back(r.l1);
        f.x.push_back(r.t), f.y.push_back(fv);
        l.x.push_back(r.t), l.y.push_back(lv);
        w.row({r.t, r.l1, fv, lv});
    }
    write_svg(dir / (stem + ".svg"), {"distance to equilibrium", "t", "L1 distance", true}, {d, f, l});
}

// ---------------------------------------------------------------------------
// individual studies, shared by the subcommands and the acceptance suite

inline Outcome study_gap(Lab& lab, const fs::path& dir) {
    Outcome o{"1", "spectral gap against the explicit bound", "0 < lambda < nu0 and lambda above the explicit lower bound"};
    Stopwatch sw;
    const auto& sp = lab.spectrum();
    const auto& x = lab.cfg.experiment;
    double nu0 = lab.nu0(), nu_ref = nu_origin_oracle(lab.k);
    double ref = x.reference_bound > 0 ? x.reference_bound : explicit_gap_lower_bound(1.0, lab.k.c_phi, lab.k.gamma);
    auto gc = gap_check(sp, lab.k, nu0);
    o.seconds = sw.seconds() + lab.assembly_seconds;
    o.data = {{"lambda", num(sp.gap)},
              {"nu0", num(nu0)},
              {"nu0_oracle", num(nu_ref)},
              {"bound_reference", num(ref)},
              {"bound_kernel", num(gc.kernel_bound)},
              {"gap_slack", x.gap_slack},
              {"spectrum", spectrum_json(sp)}};
    o.check("lambda >= (1 - slack) * bound", sp.gap >= (1 - x.gap_slack) * ref,
            "lambda " + sci(sp.gap) + " vs " + sci((1 - x.gap_slack) * ref));
    o.check("lambda < nu0", sp.gap < nu0, sci(sp.gap) + " < " + sci(nu0));
    o.check("nu0 within 2% of nu(0) oracle", std::abs(nu0 / nu_ref - 1) <= 0.02,
            "nu0 " + sci(nu0) + " oracle " + sci(nu_ref));
    if (!dir.empty()) {
        fs::create_directories(dir);
        write_spectrum_files(dir, sp);
    }
    return o;
}

inline void null_space_checks(Outcome& o, Lab& lab, const SpectrumReport& sp, const std::string& tag) {
    const int N = lab.g.dimension();
    double worst = -INFINITY;
    for (std::size_t i = 0; i < sp.values.size(); ++i)
        if (sp.classes[i] != EigClass::null) worst = std::max(worst, sp.values[i].real());
    o.check(tag + ": exactly N+2 null eigenvalues", sp.null_count == std::size_t(N + 2),
            std::to_string(sp.null_count) + " within " + sci(sp.tol_null));
    o.check(tag + ": null span angle <= " + sci(lab.cfg.experiment.null_angle_deg) + " deg",
            sp.null_span_angle_deg <= lab.cfg.experiment.null_angle_deg, sci(sp.null_span_angle_deg) + " deg");
    o.check(tag + ": other eigenvalues <= -lambda/2", worst <= -sp.gap / 2, "max " + sci(worst));
    o.data[tag] = spectrum_json(sp);
}

inline Outcome study_null_space(Lab& lab3, Lab* lab2, const fs::path& dir) {
    Outcome o{"2", "null space of the linearized operator", "kernel is span{1, v, |v|^2}, rest of spectrum negative"};
    Stopwatch sw;
    null_space_checks(o, lab3, lab3.spectrum(), lab3.cfg.name);
    if (lab2) null_space_checks(o, *lab2, lab2->symmetric_spectrum(), lab2->cfg.name + "_symmetrized");
    if (!lab3.spectrum().symmetrized) {
        // logged only: the post-hoc symmetrized matrix of the general-mode lab
        SpectrumOptions so = lab3.cfg.spectrum;
        so.mode = SpectrumOptions::Mode::symmetric;
        so.vectors = false;
        auto ss = spectrum(lab3.A(), lab3.g, lab3.nu0(), so);
        o.data[lab3.cfg.name + "_symmetrized_info"] = {{"symmetry_defect", num(ss.symmetry_defect)},
                                                       {"null_count", ss.null_count},
                                                       {"largest_eigenvalue", num(ss.values.front().real())}};
    }
    o.seconds = sw.seconds();
    if (!dir.empty()) {
        fs::create_directories(dir);
        write_spectrum_files(dir, lab3.spectrum(), lab3.cfg.name);
        if (lab2) write_spectrum_files(dir, lab2->symmetric_spectrum(), lab2->cfg.name);
    }
    return o;
}

struct RandomFieldStats {
    double pre = 0, post = 0, dmin = INFINITY, pre_pointwise = 0;
    std::size_t clamped = 0;
};

// Q(f, f) on random positive mixtures; relative invariant defects and scaled D(f)
inline RandomFieldStats random_field_checks(Lab& lab, int count, std::uint64_t seed, double loss_sign,
                                            const fs::path& csv_path) {
    CollisionOperatorConfig cc;
    cc.order = lab.cfg.grid.order;
    cc.scheme = CollisionOperatorConfig::Scheme::conservative;
    cc.project = true;
    cc.pair_cutoff = 1e-12;
    cc.loss_sign = loss_sign;
    CollisionOperator Q(lab.g, lab.k, lab.sq, cc);
    std::mt19937_64 rng(seed);
    RandomFieldStats st;
    std::optional<CsvWriter> csv;
    if (!csv_path.empty()) csv.emplace(csv_path, std::vector<std::string>{"sample", "defect_pre", "defect_post", "D", "D_scale"});
    for (int s = 0; s < count; ++s) {
        Field f = random_positive_field(lab.g, rng, 2 + s % 2);
        auto r = Q.q(f);
        auto e = Q.entropy_production(f, r.q);
        double scale = 0;
        for (Eigen::Index i = 0; i < f.size(); ++i)
            scale += lab.g.weight(std::size_t(i)) * (std::abs(r.gain[i]) + std::abs(r.loss[i])) *
                     std::abs(std::log(std::max(f[i], 1e-300)));
        st.pre = std::max(st.pre, r.defects_before.maxCoeff());
        st.post = std::max(st.post, r.defects_after.maxCoeff());
        st.dmin = std::min(st.dmin, e.D / scale);
        st.clamped += e.clamped;
        if (csv) csv->row({double(s), r.defects_before.maxCoeff(), r.defects_after.maxCoeff(), e.D, scale});
    }
    // pointwise scheme on a few fields, logged only
    if (lab.g.dimension() == 2 || lab.g.points_per_axis() <= 11) {
        CollisionOperatorConfig pc = cc;
        pc.scheme = CollisionOperatorConfig::Scheme::pointwise;
        CollisionOperator Qp(lab.g, lab.k, lab.sq, pc);
        std::mt19937_64 rng2(seed + 1);
        for (int s = 0; s < 2; ++s)
            st.pre_pointwise = std::max(st.pre_pointwise, Qp.q(random_positive_field(lab.g, rng2, 2)).defects_before.maxCoeff());
    }
    return st;
}

// random fields on every lab given, H along a trajectory on the first one
inline Outcome study_conservation(const std::vector<Lab*>& labs, const fs::path& dir, double traj_t_end = 0.5,
                                  double loss_sign = 1) {
    Outcome o{"3", "conservation and H theorem", "Q conserves mass, momentum, energy; D(f) >= 0; H decreases"};
    Stopwatch sw;
    if (!dir.empty()) fs::create_directories(dir);
    for (Lab* lab : labs) {
        const auto& x = lab->cfg.experiment;
        auto st = random_field_checks(*lab, x.random_fields, lab->cfg.seed, loss_sign,
                                      dir.empty() ? fs::path() : dir / ("random_fields_" + lab->cfg.name + ".csv"));
        o.data[lab->cfg.name] = {{"samples", x.random_fields},
                                 {"defect_pre_conservative", num(st.pre)},
                                 {"defect_pre_pointwise", num(st.pre_pointwise)},
                                 {"defect_post", num(st.post)},
                                 {"min_D_over_scale", num(st.dmin)},
                                 {"log_clamps", st.clamped}};
        const std::string& t = lab->cfg.name;
        o.check(t + ": invariant moments after projection <= 1e-6", st.post <= 1e-6, sci(st.post));
        o.check(t + ": pre-projection defect <= " + sci(x.cons_pre_limit), st.pre <= x.cons_pre_limit, sci(st.pre));
        o.check(t + ": D(f) >= -1e-8 scale", st.dmin >= -1e-8, sci(st.dmin));
    }
    Lab& lab = *labs.front();
    Field f0 = initial_field(lab.g, "mixture", 0, lab.cfg.seed + 7);
    Maxwellian E = equilibrium_for(lab.g, f0, "mixture");
    SolverConfig sc = lab.cfg.solver;
    sc.t_end = traj_t_end;
    Evolver ev(lab.g, lab.k, lab.sq, sc, E, nullptr, lab.cfg.grid.order);
    auto tr = ev.integrate(f0);
    auto st = trajectory_stats(tr);
    double Htol = 1e-6 * std::max(1.0, std::abs(tr.rows[0].H));
    if (!dir.empty()) write_trajectory(dir, tr, "h_trajectory");
    o.data["trajectory"] = {{"lab", lab.cfg.name},
                            {"t_end", traj_t_end},
                            {"H0", num(tr.rows.front().H)},
                            {"H_end", num(tr.rows.back().H)},
                            {"max_H_increase_rate", num(st.max_H_increase)},
                            {"mass_drift", num(st.mass_drift)},
                            {"energy_drift", num(st.energy_drift)},
                            {"H_tolerance", num(Htol)}};
    o.check("H nonincreasing along trajectory", st.max_H_increase <= Htol, sci(st.max_H_increase));
    o.check("H strictly decreases from a non-Maxwellian start", tr.rows.back().H < tr.rows.front().H);
    o.seconds = sw.seconds();
    return o;
}

struct RateStudy {
    Trajectory tr;
    DecayFit fit;
    double lambda = 0;
};

inline Outcome study_rate(Lab& lab, const fs::path& dir, RateStudy* keep = nullptr) {
    Outcome o{"4", "nonlinear relaxation rate equals the gap", "||f_t - M||_1 <= C exp(-mu t) with mu close to lambda"};
    Stopwatch sw;
    const auto& x = lab.cfg.experiment;
    const auto& sp = lab.spectrum();
    double lambda = sp.gap;
    Field f0 = initial_field(lab.g, "near_equilibrium", x.epsilon, lab.cfg.seed);
    SolverConfig sc = lab.cfg.solver;
    sc.snapshot_stride = std::max(1, int(std::round(0.05 / sc.dt)));
    Evolver ev(lab.g, lab.k, lab.sq, sc, Maxwellian::standard(lab.g.dimension()), &lab.L(), lab.cfg.grid.order);
    auto tr = ev.integrate(f0);
    std::vector<double> t, y;
    for (auto& r : tr.rows) t.push_back(r.t), y.push_back(r.l1);
    auto fit = fit_decay_rate(t, y, x.fit_start, t.back());
    auto st = trajectory_stats(tr);
    double Htol = 1e-6 * std::max(1.0, std::abs(tr.rows[0].H));

    // Gronwall closure with the fitted prefactor and the sampled bilinear constant
    CollisionOperatorConfig cc;
    cc.order = lab.cfg.grid.order;
    cc.scheme = CollisionOperatorConfig::Scheme::conservative;
    cc.pair_cutoff = sc.pair_cutoff;
    CollisionOperator Q(lab.g, lab.k, lab.sq, cc);
    Field M = maxwellian_field(lab.g), mv = weight_field(lab.g, lab.cfg.weight.primary);
    std::vector<Field> gs;
    for (std::size_t i = 0; i < tr.snapshots.size(); i += std::max<std::size_t>(1, tr.snapshots.size() / 4))
        gs.push_back((tr.snapshots[i] - M).cwiseQuotient(mv));
    double C11 = bilinear_gamma_constant(Q, lab.cfg.weight.primary, gs);
    double mu_g = std::min(fit.mu, lambda);
    GronwallCheck gr = gronwall_certificate(t, y, mu_g, 1.0, 0.0);
    gr = gronwall_certificate(t, y, mu_g, gr.C12, C11);

    // leading profile along the gap cluster
    json profile;
    if (!sp.symmetrized || sp.vectors.size()) {
        auto members = gap_cluster(sp, 1e-2);
        if (!members.empty() && (sp.symmetrized || sp.left_vectors.size())) {
            auto P = cluster_projector(sp, members, lab.W());
            std::vector<Field> hs;
            for (auto& f : tr.snapshots) hs.push_back((f - M).cwiseQuotient(M));
            auto pr = asymptotic_profile(tr.snapshot_times, hs, P, lab.g, x.fit_start);
            profile = {{"cluster_size", members.size()},
                       {"leading_rate", num(pr.leading_fit.mu)},
                       {"remainder_rate", num(pr.remainder_fit.mu)},
                       {"leading_l2_minv_max", num(pr.max_leading_l2m_inv)}};
            if (!dir.empty()) {
                fs::create_directories(dir);
                CsvWriter w(dir / "profile.csv", {"t", "phi1_l1", "remainder_l1"});
                for (std::size_t i = 0; i < pr.t.size(); ++i) w.row({pr.t[i], pr.leading[i], pr.remainder[i]});
            }
        }
    }
    o.seconds = sw.seconds();
    o.data = {{"lambda", num(lambda)},
              {"mu_hat", num(fit.mu)},
              {"C_hat", num(fit.C)},
              {"r2", num(fit.r2)},
              {"decades", num(fit.decades)},
              {"fit_window", {x.fit_start, t.back()}},
              {"relative_mismatch", num(std::abs(fit.mu - lambda) / lambda)},
              {"epsilon", x.epsilon},
              {"dt", sc.dt},
              {"scheme", sc.scheme == SolverConfig::Scheme::rk4 ? "rk4" : "lawson_rk4"},
              {"max_projection_correction", num(tr.max_correction)},
              {"mass_drift", num(st.mass_drift)},
              {"energy_drift", num(st.energy_drift)},
              {"C11_hat", num(C11)},
              {"C12", num(gr.C12)},
              {"gronwall_violations", gr.violations},
              {"profile", profile}};
    o.check("distance spans >= " + sci(x.min_decades) + " decades", fit.decades >= x.min_decades, sci(fit.decades));
    o.check("|mu - lambda| / lambda <= " + sci(x.rate_tolerance), std::abs(fit.mu - lambda) <= x.rate_tolerance * lambda,
            "mu " + sci(fit.mu) + " lambda " + sci(lambda));
    o.check("H nonincreasing", st.max_H_increase <= Htol, sci(st.max_H_increase));
    o.check("mass and energy drift <= 1e-10", st.mass_drift <= 1e-10 && st.energy_drift <= 1e-10,
            sci(st.mass_drift) + ", " + sci(st.energy_drift));
    o.check("weighted norm ladder", st.ladder_violations == 0, std::to_string(st.ladder_violations));
    o.check("Gronwall certificate", gr.finite && gr.violations == 0, "C12 " + sci(gr.C12));
    if (!dir.empty()) {
        fs::create_directories(dir);
        write_trajectory(dir, tr);
        write_decay_plot(dir, tr, fit, lambda);
    }
    if (keep) *keep = {std::move(tr), fit, lambda};
    return o;
}

inline Outcome study_transfer(Lab& lab, const fs::path& dir) {
    Outcome o{"5", "eigenvector transfer between the two scalings", "eigenpairs of L move to the weighted operator by m^{-1} M"};
    Stopwatch sw;
    const auto& x = lab.cfg.experiment;
    const auto& sp = lab.spectrum();
    if (!dir.empty()) fs::create_directories(dir);
    int idx = 0;
    for (const auto* m : {&lab.cfg.weight.primary, &lab.cfg.weight.second}) {
        std::string tag = "a" + sci(m->a, 3) + "_s" + sci(m->s, 3);
        AssemblyOptions opt = lab.options();
        opt.reference = AssemblyOptions::Reference::weight;
        auto Lm = assemble_L_m(lab.g, lab.k, lab.sq, *m, opt);
        auto t = eigenvector_transfer_check(sp, lab.g, Lm.full(), *m, x.eps_match);
        // the same residual restricted to eigenvalues above -nu0
        double res_nu0 = 0;
        for (auto& r : t.rows)
            if (r.lambda.real() > -lab.nu0()) res_nu0 = std::max(res_nu0, r.residual);
        o.data[tag] = {{"a", m->a},
                       {"s", m->s},
                       {"rows", t.rows.size()},
                       {"onset", num(t.onset)},
                       {"max_residual", num(t.max_residual)},
                       {"max_residual_above_minus_nu0", num(res_nu0)},
                       {"max_mismatch", num(t.max_mismatch)},
                       {"unmatched_weighted", t.unmatched_weighted},
                       {"conjugation_defect", num(conjugation_defect(Lm.full(), lab.A(), lab.g, *m))}};
        o.check(tag + ": residual <= " + sci(x.eps_transfer), t.max_residual <= x.eps_transfer, sci(t.max_residual));
        o.check(tag + ": eigenvalue match <= " + sci(x.eps_match), t.max_mismatch <= x.eps_match, sci(t.max_mismatch));
        o.check(tag + ": no unmatched weighted eigenvalue above onset", t.unmatched_weighted == 0,
                std::to_string(t.unmatched_weighted));
        if (!dir.empty()) {
            CsvWriter w(dir / ("transfer_" + std::to_string(idx) + ".csv"),
                        {"lambda_re", "lambda_im", "residual", "nearest_re", "nearest_im", "mismatch"});
            for (auto& r : t.rows)
                w.row({r.lambda.real(), r.lambda.imag(), r.residual, r.nearest.real(), r.nearest.imag(), r.mismatch});
        }
        ++idx;
    }
    o.data["band_onset"] = num(sp.band_onset);
    o.seconds = sw.seconds();
    return o;
}

// delta ladder, cross-check path and measured constants
inline Outcome study_delta(Lab& lab, Lab* coarse, const fs::path& dir) {
    Outcome o{"6", "mollified gain approximations", "||L+ - L+_delta|| decreases with delta, C4(delta) grows"};
    Stopwatch sw;
    const auto& x = lab.cfg.experiment;
    const auto& m = lab.cfg.weight.primary;
    const auto& L = lab.L();
    Field Mv = maxwellian_field(lab.g), mv = weight_field(lab.g, m);
    Field D = mv.cwiseQuotient(Mv);
    auto conj = [&](const Eigen::MatrixXd& X) { return Eigen::MatrixXd(D.cwiseInverse().asDiagonal() * X * D.asDiagonal()); };
    Eigen::MatrixXd Gm = conj(L.gain);
    Field br = lab.g.sample([&](const Vec& v) { return std::pow(japanese(norm(v)), lab.k.gamma); });
    Field W = lab.W();
    const Field& w = lab.g.weights();
    std::vector<double> C1, C2, C4;
    std::optional<CsvWriter> csv;
    if (!dir.empty()) {
        fs::create_directories(dir);
        csv.emplace(dir / "delta_ladder.csv", std::vector<std::string>{"delta", "C1", "C2", "C3", "C4", "C5"});
    }
    LinearizedOperatorMatrix Lm = conjugate_to_weight(L, lab.g, m);
    json rows = json::array();
    MeasuredConstants last;
    for (double d : x.delta_ladder) {
        auto Ld = assemble_L_plus_delta(lab.g, lab.k, lab.sq, d, nullptr, lab.options());
        Eigen::MatrixXd Gdm = conj(Ld.gain);
        double c1 = l1_operator_norm(Gm - Gdm, w, &br);
        double c2 = l2_operator_norm(L.gain - Ld.gain, W);
        LinearizedOperatorMatrix Ldm = Ld;
        Ldm.gain = Gdm;
        Ldm.weighted = true;
        Ldm.weight = m;
        auto mc = measured_constants(Lm, Ldm, lab.g, lab.k.gamma, lab.cfg.seed);
        C1.push_back(c1), C2.push_back(c2), C4.push_back(mc.C4);
        rows.push_back({{"delta", d}, {"C1", num(c1)}, {"C2", num(c2)}, {"C3", num(mc.C3)}, {"C4", num(mc.C4)}, {"C5", num(mc.C5)}});
        if (csv) csv->row({d, c1, c2, mc.C3, mc.C4, mc.C5});
        last = mc;
    }
    bool dec1 = true, dec2 = true, inc4 = true;
    for (std::size_t i = 1; i < C1.size(); ++i) {
        dec1 = dec1 && C1[i] <= 1.1 * C1[i - 1];
        dec2 = dec2 && C2[i] <= 1.1 * C2[i - 1];
        inc4 = inc4 && C4[i] >= 0.9 * C4[i - 1];
    }
    inc4 = inc4 && C4.back() > C4.front();
    o.check("C1(delta) decreasing (10% noise)", dec1, "first " + sci(C1.front()) + " last " + sci(C1.back()));
    o.check("C2(delta) decreasing (10% noise)", dec2, "first " + sci(C2.front()) + " last " + sci(C2.back()));
    o.check("C4(delta) increasing as delta decreases", inc4, "first " + sci(C4.front()) + " last " + sci(C4.back()));
    o.check("L* envelope: no violations", last.C6_violations == 0,
            std::to_string(last.C6_violations) + " of " + std::to_string(last.C6_samples));
    auto gk = grad_kernel_bound_check(L.gain, lab.g, lab.k.gamma, 0.6 * lab.g.extent());
    o.data = {{"ladder", rows},
              {"C3", num(last.C3)},
              {"C5_smallest_delta", num(last.C5)},
              {"C6", num(last.C6)},
              {"C7", num(last.C7)},
              {"grad_kernel", {{"C", num(gk.C)}, {"pairs", gk.pairs}, {"violations", gk.violations}, {"tail_ratio", num(gk.decay_ratio)}}}};
    o.check("Grad kernel bound: no violations", gk.violations == 0, std::to_string(gk.violations));
    if (coarse) {
        // two quadratures of the same weighted mollified gain on a coarse grid
        double d = x.delta_ladder.size() > 1 ? x.delta_ladder[1] : x.delta_ladder[0];
        auto A1 = assemble_L_plus_delta(coarse->g, coarse->k, coarse->sq, d, &m, coarse->options());
        auto A2 = carleman_L_plus_delta(coarse->g, coarse->k, d, &m);
        Field y = maxwellian_field(coarse->g).cwiseQuotient(weight_field(coarse->g, m));
        Field r1 = A1.gain * y, r2 = A2.gain * y;
        double dev = l1_norm(coarse->g, r1 - r2) / l1_norm(coarse->g, r1);
        Field z = Field::Zero(y.size());
        o.data["cross_check"] = {{"delta", d}, {"points_per_axis", coarse->g.points_per_axis()}, {"relative_l1", num(dev)}};
        o.check("line/hyperplane path agrees within " + sci(x.eps_xval), dev <= x.eps_xval, sci(dev));
        o.check("line/hyperplane path maps 0 to 0", (A2.gain * z).cwiseAbs().maxCoeff() == 0);
    }
    o.seconds = sw.seconds();
    return o;
}

inline Outcome study_semigroup(Lab& lab, const fs::path& dir) {
    Outcome o{"7", "semigroup decay on the complement of the null space", "||exp(t L~)||_{L1} <= C10 exp(-mu t)"};
    Stopwatch sw;
    const auto& x = lab.cfg.experiment;
    const auto& sp = lab.symmetric_spectrum();
    double lambda = sp.gap;
    const auto& m = lab.cfg.weight.primary;
    Field D = weight_field(lab.g, m).cwiseQuotient(maxwellian_field(lab.g));
    Eigen::MatrixXd Am = D.cwiseInverse().asDiagonal() * lab.A_sym() * D.asDiagonal();
    auto pi0 = spectral_null_projector(sp, lab.g, &m);
    double horizon = x.semigroup_horizon / lambda;
    int steps = int(std::ceil(horizon / x.semigroup_dt));
    auto rep = semigroup_decay(Am, lab.g, pi0, x.semigroup_dt, steps, 1.0 / lambda);
    // L^2(M) identity on the symmetric frame
    Field s = lab.W().array().sqrt();
    Eigen::MatrixXd S = s.asDiagonal() * lab.A_sym() * s.cwiseInverse().asDiagonal();
    S = 0.5 * (S + S.transpose()).eval();
    // complement of the computed null eigenvectors, orthonormal in this frame
    std::vector<Eigen::Index> nul;
    for (std::size_t i = 0; i < sp.values.size(); ++i)
        if (sp.classes[i] == EigClass::null) nul.push_back(Eigen::Index(i));
    Eigen::MatrixXd Q(S.rows(), Eigen::Index(nul.size()));
    for (std::size_t c = 0; c < nul.size(); ++c) Q.col(Eigen::Index(c)) = s.cwiseProduct(sp.vectors.col(nul[c]).real());
    Eigen::MatrixXd Pc = Eigen::MatrixXd::Identity(S.rows(), S.rows()) - Q * Q.transpose();
    double invariant_angle = sp.null_span_angle_deg;
    double worst_l2 = 0;
    for (double tt : {1.0 / lambda, 2.0 / lambda}) {
        Eigen::MatrixXd E = (tt * S).exp() * Pc;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(E.transpose() * E, Eigen::EigenvaluesOnly);
        double nrm = std::sqrt(es.eigenvalues().maxCoeff());
        worst_l2 = std::max(worst_l2, std::abs(nrm / std::exp(-lambda * tt) - 1));
    }
    // local log-slope over the last fifth of the window
    const auto& rows = rep.rows;
    std::size_t k0 = rows.size() - std::max<std::size_t>(2, rows.size() / 5);
    double late_slope = -std::log(rows.back().upper / rows[k0].upper) / (rows.back().t - rows[k0].t);
    o.seconds = sw.seconds();
    o.data = {{"lambda", num(lambda)},
              {"mu_hat", num(rep.mu_hat)},
              {"late_log_slope", num(late_slope)},
              {"C10", num(rep.C10)},
              {"violations", rep.violations},
              {"t_max", horizon},
              {"l2_identity_worst", num(worst_l2)},
              {"null_space", "computed null eigenvectors"},
              {"null_angle_to_invariants_deg", num(invariant_angle)},
              {"norm_at_0_lower", num(rep.rows.front().lower)},
              {"norm_at_0_upper", num(rep.rows.front().upper)}};
    o.check("zero violations of C10 exp(-mu t)", rep.violations == 0, std::to_string(rep.violations));
    o.check("mu >= 0.9 lambda", rep.mu_hat >= 0.9 * lambda, "mu " + sci(rep.mu_hat) + " lambda " + sci(lambda));
    o.check("norm at t = 0 equals 1 on the complement", std::abs(rep.rows.front().lower - 1) <= 1e-12,
            sci(rep.rows.front().lower));
    o.check("L2(M) semigroup norm = exp(-lambda t)", worst_l2 <= 1e-6, sci(worst_l2));
    if (!dir.empty()) {
        fs::create_directories(dir);
        CsvWriter w(dir / "semigroup.csv", {"t", "upper", "lower", "bound"});
        Series up{"upper", {}, {}}, lo{"lower", {}, {}, false, "#2ca02c"}, bd{"C10 exp(-mu t)", {}, {}, false, "#ff7f0e", true};
        for (auto& r : rep.rows) {
            double b = rep.C10 * std::exp(-rep.mu_hat * r.t);
            w.row({r.t, r.upper, r.lower, b});
            up.x.push_back(r.t), up.y.push_back(r.upper);
            lo.x.push_back(r.t), lo.y.push_back(r.lower);
            bd.x.push_back(r.t), bd.y.push_back(b);
        }
        write_svg(dir / "semigroup.svg", {"semigroup norm on the complement", "t", "L1 operator norm", true}, {up, lo, bd});
    }
    return o;
}

inline Outcome study_resolvent(Lab& lab, const fs::path& dir) {
    Outcome o{"8", "resolvent bounds", "weighted resolvent controlled by the L2(M) one and by a + b/|xi - mu|"};
    Stopwatch sw;
    const auto& x = lab.cfg.experiment;
    const auto& sp = lab.symmetric_spectrum();
    double lambda = sp.gap, mu = x.sector_mu_fraction * lambda;
    const auto& m = lab.cfg.weight.primary;
    Field D = weight_field(lab.g, m).cwiseQuotient(maxwellian_field(lab.g));
    Eigen::MatrixXd Am = D.cwiseInverse().asDiagonal() * lab.A_sym() * D.asDiagonal();
    auto pi0 = spectral_null_projector(sp, lab.g, &m);
    Field s = lab.W().array().sqrt();
    Eigen::MatrixXd S = s.asDiagonal() * lab.A_sym() * s.cwiseInverse().asDiagonal();
    S = 0.5 * (S + S.transpose()).eval();
    Eigen::MatrixXd nb(S.rows(), Eigen::Index(sp.null_count));
    std::vector<double> sigma;
    Eigen::Index c = 0;
    for (std::size_t i = 0; i < sp.values.size(); ++i) {
        if (sp.classes[i] == EigClass::null) {
            nb.col(c++) = s.cwiseProduct(sp.vectors.col(Eigen::Index(i)).real());
        } else {
            sigma.push_back(sp.values[i].real());
        }
    }
    auto xis = sector_samples(mu, 2 * lab.nu_max(), x.sector_per_ray);
    std::size_t n_sector = xis.size();
    for (double f : {0.5, 1.0, 2.0}) xis.push_back(f * lab.nu0());
    auto rep = resolvent_scan(Am, lab.g, pi0, S, nb, sigma, xis, mu, 80, lab.cfg.seed);
    std::size_t in = 0;
    for (auto& r : rep.rows) in += r.in_sector;
    o.seconds = sw.seconds();
    o.data = {{"mu", num(mu)},      {"lambda", num(lambda)},         {"samples", rep.rows.size()},
              {"sector_samples", in}, {"C8", num(rep.C8)},           {"C9", num(rep.C9)},
              {"a", num(rep.a)},      {"b", num(rep.b)},             {"violations_comparison", rep.violations_cmp},
              {"violations_sector", rep.violations_sector}, {"identity_worst", num(rep.worst_identity)}};
    o.check(">= 40 sector samples", in >= 40 && n_sector >= 40, std::to_string(in));
    o.check("C8 + C9 ||R|| bound: zero violations", rep.violations_cmp == 0, std::to_string(rep.violations_cmp));
    o.check("a + b/|xi - mu| bound: zero violations", rep.violations_sector == 0, std::to_string(rep.violations_sector));
    o.check("||R(xi)|| dist(xi, Sigma) = 1 within 5%", rep.worst_identity <= 0.05, sci(rep.worst_identity));
    if (!dir.empty()) {
        fs::create_directories(dir);
        CsvWriter w(dir / "resolvent.csv", {"re", "im", "l1_weighted", "l2m", "dist", "in_sector"});
        for (auto& r : rep.rows) w.row({r.xi.real(), r.xi.imag(), r.l1_weighted, r.l2m, r.dist, double(r.in_sector)});
    }
    return o;
}

inline Outcome study_moments(Lab& dyn_lab, const CollisionKernelSpec& hs, const SphereQuadrature& sq,
                             const fs::path& dir, double t_end = 3.0) {
    Outcome o{"9", "Povzner constants and exponential moments", "alpha_p < 1 decreasing; exponential moment plateau"};
    Stopwatch sw;
    const auto& x = dyn_lab.cfg.experiment;
    auto pv = povzner_check(hs, sq, x.povzner_samples, x.povzner_s, x.p_set, dyn_lab.cfg.seed);
    bool below = true, mono = true;
    double shapeC = 0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        below = below && pv[i].alpha < 1;
        if (i) mono = mono && pv[i].alpha <= pv[i - 1].alpha + 1e-12;
        shapeC = std::max(shapeC, pv[i].alpha * (x.povzner_s * pv[i].p / 2 + 1));
    }
    auto k2 = povzner_check(hs, sq, 2000, x.povzner_s, {2.0 / x.povzner_s}, dyn_lab.cfg.seed + 3);
    auto low = povzner_check(hs, sq, x.povzner_samples, 0.4, {5, 10, 20}, dyn_lab.cfg.seed + 5);
    json table = json::array(), table_low = json::array();
    for (auto& r : pv) table.push_back({{"p", r.p}, {"alpha", num(r.alpha)}, {"alpha_full", num(r.alpha_full)}});
    for (auto& r : low) table_low.push_back({{"p", r.p}, {"alpha", num(r.alpha)}, {"alpha_full", num(r.alpha_full)}});
    bool low_full_dec = true;
    for (std::size_t i = 1; i < low.size(); ++i) low_full_dec = low_full_dec && low[i].alpha_full < low[i - 1].alpha_full;

    // exponential moment along trajectories from polynomially perturbed data
    SolverConfig sc = dyn_lab.cfg.solver;
    sc.t_end = t_end;
    sc.exp_weight = dyn_lab.cfg.weight.primary;
    sc.snapshot_stride = 1 << 30;  // t = 0 and the final state only
    std::vector<double> plateaus;
    json runs = json::array();
    bool settled = true;
    for (double amp : {0.05, 0.1}) {
        Field f0 = initial_field(dyn_lab.g, "polynomial_tail", amp, dyn_lab.cfg.seed);
        Maxwellian E = equilibrium_for(dyn_lab.g, f0, "polynomial_tail");
        Evolver ev(dyn_lab.g, dyn_lab.k, dyn_lab.sq, sc, E, nullptr, dyn_lab.cfg.grid.order);
        auto tr = ev.integrate(f0);
        double plateau = tr.rows.back().exp_moment;
        // tau: first time after which the series stays within 2x of the plateau and moves < 1% per unit time
        double tau = INFINITY;
        for (std::size_t i = 0; i + 1 < tr.rows.size(); ++i) {
            bool ok = true;
            for (std::size_t j = i; j + 1 < tr.rows.size() && ok; ++j) {
                double v = tr.rows[j].exp_moment;
                double rate = std::abs(tr.rows[j + 1].exp_moment - v) / (v * (tr.rows[j + 1].t - tr.rows[j].t));
                ok = v <= 2 * plateau && v >= plateau / 2 && rate < 1e-2;
            }
            if (ok) {
                tau = tr.rows[i].t;
                break;
            }
        }
        settled = settled && std::isfinite(tau);
        plateaus.push_back(plateau);
        auto mt = moment_table(dyn_lab.g, tr.snapshots.back(), x.moment_s, x.p_max, dyn_lab.k.gamma);
        double xfit = 0;
        std::size_t flagged = 0;
        for (auto& r : mt) {
            if (r.flagged) {
                ++flagged;
                continue;
            }
            if (r.p > 0) xfit = std::max(xfit, std::pow(r.z, 1.0 / r.p));
        }
        runs.push_back({{"amplitude", amp}, {"plateau", num(plateau)}, {"tau", num(tau)}, {"z_p_x", num(xfit)}, {"flagged_moments", flagged}});
        if (!dir.empty()) {
            fs::create_directories(dir);
            write_trajectory(dir, tr, "poly_tail_" + sci(amp, 2));
            CsvWriter w(dir / ("moments_" + sci(amp, 2) + ".csv"), {"p", "m_p", "z_p", "tail_fraction", "flagged"});
            for (auto& r : mt) w.row({r.p, r.m, r.z, r.tail_fraction, double(r.flagged)});
        }
    }
    double spread = *std::max_element(plateaus.begin(), plateaus.end()) / *std::min_element(plateaus.begin(), plateaus.end());
    o.seconds = sw.seconds();
    o.data = {{"povzner_kernel", {{"dimension", hs.dimension}, {"gamma", hs.gamma}}},
              {"povzner_s", x.povzner_s},
              {"samples", x.povzner_samples},
              {"alpha", table},
              {"alpha_s_0.4", table_low},
              {"shape_C", num(shapeC)},
              {"K_at_sp2_max", num(k2[0].max_abs_K)},
              {"exp_moment_runs", runs},
              {"plateau_spread", num(spread)}};
    o.check("alpha_p < 1 for all p", below);
    o.check("alpha_p nonincreasing in p", mono);
    o.check("K_p = 0 at sp = 2", k2[0].max_abs_K <= 1e-10, sci(k2[0].max_abs_K));
    o.check("exponential moment settles by a finite tau", settled);
    o.check("plateau independent of amplitude within 2x", spread <= 2, sci(spread));
    if (!dir.empty()) {
        CsvWriter w(dir / "povzner.csv", {"s", "p", "alpha", "alpha_full", "max_abs_K"});
        for (auto& r : pv) w.row({x.povzner_s, r.p, r.alpha, r.alpha_full, r.max_abs_K});
        for (auto& r : low) w.row({0.4, r.p, r.alpha, r.alpha_full, r.max_abs_K});
    }
    o.data["alpha_full_s_0.4_decreasing"] = low_full_dec;
    return o;
}

// ---------------------------------------------------------------------------
// grid refinement

inline RunConfig with_points(RunConfig c, int points, int sphere_points = 0) {
    c.grid.points = points;
    if (sphere_points > 0) c.sphere.points = sphere_points;
    c.name += "_n" + std::to_string(points);
    return c;
}

class Suite {
public:
    Suite(RunConfig n3, RunConfig n2) : base3(std::move(n3)), base2(std::move(n2)) {}

    RunConfig base3, base2;

    Lab& n3() { return get(n3_, base3); }
    Lab& n2() { return get(n2_, base2); }
    Lab& n3_coarse() { return get(n3c_, with_points(base3, 11)); }
    Lab& n2_coarse() { return get(n2c_, with_points(base2, 21, std::max(8, base2.sphere.points / 2))); }
    Lab& n2_moments() { return get(n2m_, with_points(base2, base2.experiment.moment_points)); }
    std::unique_ptr<Lab> n2_fine() const {
        return std::make_unique<Lab>(with_points(base2, 2 * base2.grid.points - 1, 2 * base2.sphere.points));
    }

private:
    static Lab& get(std::unique_ptr<Lab>& p, const RunConfig& c) {
        if (!p) p = std::make_unique<Lab>(c);
        return *p;
    }
    std::unique_ptr<Lab> n3_, n2_, n3c_, n2c_, n2m_;
};

// earlier outcomes are read for the fine-grid side of the comparison
inline Outcome study_grid(Suite& s, const std::map<std::string, Outcome>& done, const fs::path& dir) {
    Outcome o{"10", "grid refinement", "defects shrink at the scheme order; acceptance numbers move toward targets"};
    Stopwatch sw;
    const double bulk = 3.0;
    Lab& L2 = s.n2();
    const int p = L2.cfg.grid.order;  // nominal order p + 1, required p
    double sym_c = bulk_symmetry_defect(L2.A(), L2.g, bulk), cons_c = linear_conservation_defect(L2.L(), L2.g, bulk);
    double gsym_c = L2.spectrum().symmetry_defect;
    double sym_f = 0, cons_f = 0, gsym_f = 0;
    int nf = 0;
    {
        auto F = s.n2_fine();
        nf = F->g.points_per_axis();
        sym_f = bulk_symmetry_defect(F->A(), F->g, bulk);
        cons_f = linear_conservation_defect(F->L(), F->g, bulk);
        gsym_f = symmetry_defect(F->A(), F->W());
    }
    double ord_sym = std::log2(sym_c / sym_f), ord_cons = std::log2(cons_c / cons_f);
    o.data["doubling"] = {{"lab", L2.cfg.name},
                          {"points", {L2.g.points_per_axis(), nf}},
                          {"bulk_radius", bulk},
                          {"symmetry_defect_bulk", {num(sym_c), num(sym_f)}},
                          {"symmetry_defect_global", {num(gsym_c), num(gsym_f)}},
                          {"conservation_defect_bulk", {num(cons_c), num(cons_f)}},
                          {"observed_order_symmetry", num(ord_sym)},
                          {"observed_order_conservation", num(ord_cons)},
                          {"required_order", p}};
    o.check("symmetry defect order >= " + std::to_string(p), ord_sym >= p, sci(ord_sym));
    o.check("conservation defect order >= " + std::to_string(p), ord_cons >= p, sci(ord_cons));

    // N = 3, coarse vs default grid
    Lab& c3 = s.n3_coarse();
    Lab& f3 = s.n3();
    const auto& spc = c3.spectrum();
    const auto& spf = f3.spectrum();
    double ref = f3.cfg.experiment.reference_bound > 0 ? f3.cfg.experiment.reference_bound
                                                       : explicit_gap_lower_bound(1.0, f3.k.c_phi, f3.k.gamma);
    double nu_ref = nu_origin_oracle(f3.k);
    double e_nu_c = std::abs(c3.nu0() / nu_ref - 1), e_nu_f = std::abs(f3.nu0() / nu_ref - 1);
    o.data["n3"] = {{"points", {c3.g.points_per_axis(), f3.g.points_per_axis()}},
                    {"lambda", {num(spc.gap), num(spf.gap)}},
                    {"nu0_relative_error", {num(e_nu_c), num(e_nu_f)}},
                    {"null_count", {spc.null_count, spf.null_count}},
                    {"null_span_angle_deg", {num(spc.null_span_angle_deg), num(spf.null_span_angle_deg)}},
                    {"symmetry_defect_bulk", {num(bulk_symmetry_defect(c3.A(), c3.g, bulk)), num(bulk_symmetry_defect(f3.A(), f3.g, bulk))}},
                    {"conservation_defect_bulk", {num(linear_conservation_defect(c3.L(), c3.g, bulk)), num(linear_conservation_defect(f3.L(), f3.g, bulk))}}};
    o.check("1: nu0 moves toward nu(0)", e_nu_f <= e_nu_c, sci(e_nu_c) + " -> " + sci(e_nu_f));
    o.check("1: lambda above bound on both grids", spc.gap >= 0.9 * ref && spf.gap >= 0.9 * ref);
    o.check("2: null count N+2 on both grids", spc.null_count == 5 && spf.null_count == 5);
    o.check("2: null angle not worse by more than 2 deg", spf.null_span_angle_deg <= spc.null_span_angle_deg + 2,
            sci(spc.null_span_angle_deg) + " -> " + sci(spf.null_span_angle_deg));

    // 3 and 5 on the N = 2 pair
    Lab& c2 = s.n2_coarse();
    auto rc = random_field_checks(c2, 10, c2.cfg.seed, 1, {});
    auto rf = random_field_checks(L2, 10, L2.cfg.seed, 1, {});
    o.data["n2_conservation_pre"] = {num(rc.pre), num(rf.pre)};
    o.check("3: pre-projection defect not worse by more than 1e-3", rf.pre <= rc.pre + 1e-3, sci(rc.pre) + " -> " + sci(rf.pre));
    auto tc = study_transfer(c2, {});
    if (auto it = done.find("5"); it != done.end()) {
        const json& fine = it->second.data;
        for (auto& [key, val] : tc.data.items()) {
            if (!val.is_object() || !fine.contains(key)) continue;
            double rc5 = val["max_residual"].get<double>(), rf5 = fine[key]["max_residual"].get<double>();
            double mc5 = val["max_mismatch"].get<double>(), mf5 = fine[key]["max_mismatch"].get<double>();
            o.data["n2_transfer_" + key] = {{"residual", {num(rc5), num(rf5)}}, {"mismatch", {num(mc5), num(mf5)}}};
            o.check("5: " + key + " residual not worse by more than 1e-2", rf5 <= rc5 + 1e-2, sci(rc5) + " -> " + sci(rf5));
            o.check("5: " + key + " mismatch not worse by more than 1e-2", mf5 <= mc5 + 1e-2, sci(mc5) + " -> " + sci(mf5));
        }
    }
    // 4 on the N = 3 pair
    if (auto it = done.find("4"); it != done.end()) {
        auto r4 = study_rate(c3, {});
        double mc = r4.data["relative_mismatch"].get<double>(), mf = it->second.data["relative_mismatch"].get<double>();
        o.data["n3_rate_mismatch"] = {num(mc), num(mf)};
        o.check("4: rate mismatch not worse by more than 0.1", mf <= mc + 0.1, sci(mc) + " -> " + sci(mf));
    }
    o.seconds = sw.seconds();
    if (!dir.empty()) {
        fs::create_directories(dir);
        write_json(dir / "refinement.json", o.data);
    }
    return o;
}

// ---------------------------------------------------------------------------
// orchestration

struct SuiteResult {
    std::vector<Outcome> outcomes;
    bool pass = true;
};

inline void write_report(const fs::path& out, const SuiteResult& r, const json& meta) {
    json j = meta;
    j["pass"] = r.pass;
    j["criteria"] = json::array();
    json timing = json::object();
    for (auto& o : r.outcomes) {
        j["criteria"].push_back(o.to_json());
        timing[o.id] = o.seconds;
    }
    write_json(out / "report.json", j);
    write_json(out / "timing.json", timing);
    std::ofstream md(out / "report.md");
    md << "# boltzgap acceptance report\n\n";
    md << "Overall: " << (r.pass ? "PASS" : "FAIL") << "\n\n";
    md << "| # | criterion | result | anchor |\n|---|---|---|---|\n";
    for (auto& o : r.outcomes) md << "| " << o.id << " | " << o.title << " | " << (o.pass ? "pass" : "FAIL") << " | " << o.claim << " |\n";
    for (auto& o : r.outcomes) {
        md << "\n## " << o.id << ". " << o.title << "\n\n";
        md << "Anchor: " << o.claim << "\n\n";
        for (auto& c : o.checks) md << "- [" << (c.pass ? "x" : " ") << "] " << c.what << (c.detail.empty() ? "" : ": " + c.detail) << "\n";
        md << "\n```json\n" << o.data.dump(2) << "\n```\n";
    }
}

// Runs every criterion; a throwing criterion is recorded as failed and the
// suite continues.
inline SuiteResult run_suite(Suite& s, const fs::path& out, std::ostream& log) {
    SuiteResult res;
    std::map<std::string, Outcome> done;
    auto run = [&](const std::string& id, const std::string& title, std::function<Outcome()> f) {
        Stopwatch sw;
        Outcome o;
        try {
            o = f();
        } catch (const std::exception& e) {
            o = Outcome{id, title, "", false};
            o.check("completed without error", false, e.what());
        }
        if (o.seconds == 0) o.seconds = sw.seconds();
        log << o.line() << std::endl;
        res.pass = res.pass && o.pass;
        done[o.id] = o;
        res.outcomes.push_back(o);
    };
    auto sub = [&](const std::string& d) { return out.empty() ? fs::path() : out / d; };
    run("1", "spectral gap against the explicit bound", [&] {
        auto o = study_gap(s.n3(), sub("gap"));
        o.check("runtime <= 900 s", o.seconds <= 900, "see timing.json");
        return o;
    });
    run("2", "null space of the linearized operator", [&] { return study_null_space(s.n3(), &s.n2(), sub("null_space")); });
    run("3", "conservation and H theorem", [&] { return study_conservation({&s.n2(), &s.n3()}, sub("conservation")); });
    run("4", "nonlinear relaxation rate equals the gap", [&] {
        auto o = study_rate(s.n3(), sub("rate"));
        o.check("runtime <= 1800 s", o.seconds <= 1800, "see timing.json");
        return o;
    });
    run("5", "eigenvector transfer between the two scalings", [&] { return study_transfer(s.n2(), sub("transfer")); });
    run("6", "mollified gain approximations", [&] { return study_delta(s.n2(), &s.n2_coarse(), sub("delta")); });
    run("7", "semigroup decay on the complement of the null space", [&] { return study_semigroup(s.n2(), sub("semigroup")); });
    run("8", "resolvent bounds", [&] { return study_resolvent(s.n2(), sub("resolvent")); });
    run("9", "Povzner constants and exponential moments", [&] {
        return study_moments(s.n2_moments(), hard_sphere_kernel(3), SphereQuadrature::product(16, 32), sub("moments"),
                             s.base2.experiment.moment_t_end);
    });
    run("10", "grid refinement", [&] { return study_grid(s, done, sub("refinement")); });
    if (!out.empty()) {
        json meta = {{"presets", {s.base3.raw, s.base2.raw}}};
        write_report(out, res, meta);
    }
    return res;
}

// ---------------------------------------------------------------------------
// single subcommands

inline json run_summary(const std::string& cmd, const RunConfig& c, const Lab& lab, const std::vector<Outcome>& os) {
    json j;
    j["command"] = cmd;
    j["name"] = c.name;
    j["seed"] = c.seed;
    j["grid"] = grid_metadata(lab.g);
    j["config"] = c.raw;
    bool pass = true;
    j["outcomes"] = json::array();
    for (auto& o : os) {
        pass = pass && o.pass;
        j["outcomes"].push_back(o.to_json());
    }
    j["pass"] = pass;
    return j;
}

inline Outcome spectrum_diagnostics(Lab& lab, const fs::path& dir) {
    Outcome o{"spectrum", "discrete spectrum of the linearized operator", "null space span{1, v, |v|^2}, negative elsewhere"};
    Stopwatch sw;
    const auto& sp = lab.spectrum();
    const int N = lab.g.dimension();
    auto fb = frequency_bounds(lab.g, lab.L().nu, lab.k.gamma);
    double dform = dirichlet_form_worst(lab.A(), lab.g, lab.nu0(), 20, lab.cfg.seed);
    o.data = {{"nu0", num(lab.nu0())},
              {"nu0_oracle", num(nu_origin_oracle(lab.k))},
              {"nu_max", num(lab.nu_max())},
              {"n0", num(fb.n0)},
              {"n1", num(fb.n1)},
              {"ell_b_quadrature", num(lab.L().ell_quad)},
              {"dirichlet_form_max_over_nu0", num(dform)},
              {"conservation_defect_bulk", num(linear_conservation_defect(lab.L(), lab.g, 3.0))},
              {"spectrum", spectrum_json(sp, 24)}};
    o.check("N+2 null eigenvalues", sp.null_count == std::size_t(N + 2), std::to_string(sp.null_count));
    o.check("positive gap below nu0", sp.gap > 0 && sp.gap < lab.nu0(), sci(sp.gap));
    o.check("Dirichlet form <= 1e-3 nu0 on random fields", dform <= 1e-3, sci(dform));
    o.seconds = sw.seconds();
    if (!dir.empty()) write_spectrum_files(dir, sp);
    return o;
}

inline Outcome evolve_generic(Lab& lab, const fs::path& dir) {
    const auto& x = lab.cfg.experiment;
    Outcome o{"evolve", "nonlinear trajectory from " + x.initial, "mass, momentum, energy conserved; H nonincreasing"};
    Stopwatch sw;
    Field f0 = initial_field(lab.g, x.initial, x.epsilon, lab.cfg.seed);
    Maxwellian E = equilibrium_for(lab.g, f0, x.initial);
    Evolver ev(lab.g, lab.k, lab.sq, lab.cfg.solver, E, nullptr, lab.cfg.grid.order);
    auto tr = ev.integrate(f0);
    auto st = trajectory_stats(tr);
    double Htol = 1e-6 * std::max(1.0, std::abs(tr.rows[0].H));
    o.data = {{"initial", x.initial},
              {"t_end", tr.rows.back().t},
              {"l1_start", num(tr.rows.front().l1)},
              {"l1_end", num(tr.rows.back().l1)},
              {"H_start", num(tr.rows.front().H)},
              {"H_end", num(tr.rows.back().H)},
              {"mass_drift", num(st.mass_drift)},
              {"energy_drift", num(st.energy_drift)},
              {"max_H_increase_rate", num(st.max_H_increase)},
              {"max_projection_correction", num(tr.max_correction)}};
    o.check("H nonincreasing", st.max_H_increase <= Htol, sci(st.max_H_increase));
    o.check("mass and energy drift <= 1e-10", st.mass_drift <= 1e-10 && st.energy_drift <= 1e-10,
            sci(st.mass_drift) + ", " + sci(st.energy_drift));
    if (x.initial == "maxwellian") {
        double worst = 0;
        for (auto& r : tr.rows) worst = std::max(worst, r.l1);
        o.data["max_l1_distance"] = num(worst);
        o.check("flat diagnostics from f0 = M", worst <= 1e-12 * tr.rows[0].mass, sci(worst));
    } else {
        o.check("distance to equilibrium decreases", tr.rows.back().l1 < tr.rows.front().l1);
    }
    o.seconds = sw.seconds();
    if (!dir.empty()) {
        write_trajectory(dir, tr);
        std::vector<double> t, y;
        for (auto& r : tr.rows) t.push_back(r.t), y.push_back(r.l1);
        DecayFit fit;
        if (x.initial != "maxwellian") {
            fit = fit_decay_rate(t, y, x.fit_start, t.back(), 1e-300);
            o.data["mu_hat"] = num(fit.mu);
            o.data["C_hat"] = num(fit.C);
        }
        write_decay_plot(dir, tr, fit, 0);
        for (std::size_t i = 0; i < tr.snapshots.size(); ++i)
            write_field_csv(dir / ("snapshot_" + std::to_string(i) + ".csv"), lab.g, tr.snapshots[i]);
    }
    return o;
}

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> s{"spectrum", "gapcheck", "evolve", "moments", "resolvent", "transfer", "reproduce-all"};
    return s;
}

// Returns 0 when every assertion passes, 1 otherwise. Config, domain and
// numerical errors propagate as exceptions.
inline int run_command(const std::string& cmd, const RunConfig& c, const fs::path& out, std::ostream& log) {
    fs::create_directories(out);
    if (cmd == "reproduce-all") {
        RunConfig n3 = c.kernel.dimension == 3 ? c : parse_config(preset("hard_sphere_n3"));
        RunConfig n2 = c.kernel.dimension == 2 ? c : parse_config(preset("hard_potential_gamma_half_n2"));
        n3.seed = n2.seed = c.seed;
        Suite s(n3, n2);
        auto r = run_suite(s, out, log);
        return r.pass ? 0 : 1;
    }
    std::vector<Outcome> os;
    Lab lab(c);
    if (cmd == "spectrum") {
        os.push_back(spectrum_diagnostics(lab, out));
        if (c.raw.contains("experiment") && c.raw["experiment"].contains("delta_ladder"))
            os.push_back(study_delta(lab, nullptr, out / "delta"));
    } else if (cmd == "gapcheck") {
        os.push_back(study_gap(lab, out));
    } else if (cmd == "evolve") {
        check_solver_budget(c, lab.g, lab.k);
        if (c.experiment.initial == "near_equilibrium") {
            os.push_back(study_rate(lab, out));
        } else {
            os.push_back(evolve_generic(lab, out));
        }
    } else if (cmd == "moments") {
        RunConfig mc = with_points(c, c.experiment.moment_points);
        Lab ml(mc);
        check_solver_budget(mc, ml.g, ml.k);
        os.push_back(study_moments(ml, lab.k, lab.sq, out, c.experiment.moment_t_end));
    } else if (cmd == "resolvent") {
        os.push_back(study_semigroup(lab, out));
        os.push_back(study_resolvent(lab, out));
    } else if (cmd == "transfer") {
        os.push_back(study_transfer(lab, out));
    } else {
        throw ConfigError("command", "unknown subcommand " + cmd);
    }
    json timing = json::object();
    for (auto& o : os) {
        log << o.line() << std::endl;
        timing[o.id] = o.seconds;
    }
    timing["assembly"] = lab.assembly_seconds;
    timing["eigensolve"] = lab.eigen_seconds;
    json sum = run_summary(cmd, c, lab, os);
    write_json(out / "summary.json", sum);
    write_json(out / "timing.json", timing);
    return sum["pass"].get<bool>() ? 0 : 1;
}

}  // namespace boltzgap
