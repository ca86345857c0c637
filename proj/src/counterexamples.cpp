#include "aclab/counterexamples.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace aclab {

namespace {

void require(bool ok, const std::string& constraint) {
    if (!ok) throw ConstraintError("constraint violated: " + constraint);
}

double param(const std::map<std::string, double>& p, const std::string& key, double fallback) {
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

Dist pm(int n, int i) { return point_mass(n, i); }

Dist two(int n, int a, double pa, int b) {
    Dist d(static_cast<size_t>(n), 0.0);
    d[static_cast<size_t>(a)] += pa;
    d[static_cast<size_t>(b)] += 1.0 - pa;
    return d;
}

BehaviorSource markov_from(std::vector<Dist> rows) { return BehaviorSource::markov(std::move(rows)); }

}  // namespace

int GenOutput::state(const std::string& label) const {
    auto it = std::find(state_names.begin(), state_names.end(), label);
    if (it == state_names.end()) throw Error("unknown state label: " + label);
    return static_cast<int>(it - state_names.begin());
}

double value_bias_formula(double gamma, int h, double eps) {
    return gamma * eps / ((1.0 - gamma) * (1.0 - (1.0 - eps) * std::pow(gamma, h)));
}

double strong_two_term(double gamma, int h, double eps, double c1, double c2) {
    const double gh = std::pow(gamma, h);
    return (2.0 * eps * gamma - c2) / ((1.0 - gamma) * (1.0 - (1.0 - 2.0 * eps) * gh)) +
           eps * gamma / ((1.0 - gamma) * (1.0 - (1.0 - eps - c1) * gh));
}

double strong_three_term(double gamma, int h, double eps) {
    const double gh = std::pow(gamma, h);
    return eps * gamma / (1.0 - gamma) * (2.0 / (1.0 - (1.0 - 2.0 * eps) * gh) + 1.0 / (1.0 - (1.0 - eps) * gh));
}

double bounded_ov_formula(double gamma, int h, double theta_l, double theta_g) {
    const double gh = std::pow(gamma, h);
    return theta_l / (1.0 - gamma) + (theta_g + gh * std::min(theta_l, theta_g)) / ((1.0 - gamma) * (1.0 - gh));
}

double shortcut_free_formula(double gamma, int h, double alpha, double theta) {
    const double gh = std::pow(gamma, h);
    return alpha / ((1.0 - gamma) * (1.0 - gamma) * (1.0 - gh * (1.0 - alpha))) +
           theta * gh / ((1.0 - gamma) * (1.0 - gh));
}

double strong_worstcase_delta(double gamma, int h, double eps, double c1, double c2) {
    const double gh = std::pow(gamma, h);
    return (2.0 * eps * gamma - c2) * (1.0 - (1.0 - eps - c1) * gh) /
           ((1.0 - eps - c1) * (gamma - gh) * (1.0 - (1.0 - 2.0 * eps) * gh));
}

GenOutput gen_value_bias(double gamma, int h, double eps, bool flip) {
    require(h > 1, "h > 1");
    require(gamma >= 0.0 && gamma < 1.0, "gamma in [0,1)");
    require(eps >= 0.0 && eps <= 0.5, "eps in [0,1/2]");
    const double delta = 0.5 * (1.0 - std::sqrt(std::max(0.0, 1.0 - 2.0 * eps)));
    const int S = 2 * h;
    const int Z = 2 * h - 1;
    auto X = [](int i) { return i == 0 ? 0 : 2 * i - 1; };
    auto Xt = [](int i) { return 2 * i; };

    GenOutput g;
    g.name = "value_bias";
    g.h = h;
    g.mdp = Mdp(S, 2, gamma);
    Mdp& m = g.mdp;
    auto rew = [&](double r) { return flip ? 1.0 - r : r; };

    for (int i = 0; i < h; ++i) {
        std::vector<int> layer = {X(i)};
        if (i > 0) layer.push_back(Xt(i));
        for (int s : layer) {
            const bool tilde = i > 0 && s == Xt(i);
            for (int a = 0; a < 2; ++a) {
                if (i + 1 < h) {
                    m.set_transition(s, a, {{X(i + 1), 1.0 - delta}, {Xt(i + 1), delta}});
                } else {
                    const bool safe = tilde ? a == 0 : a == 1;
                    m.set_transition(s, a, {{safe ? X(0) : Z, 1.0}});
                }
                m.r(s, a) = rew((tilde ? a == 0 : a == 1) ? 1.0 : 0.0);
            }
        }
    }
    m.set_all_actions(Z, {{Z, 1.0}}, rew(0.0));

    std::vector<int> pi(static_cast<size_t>(S), 0);
    for (int i = 0; i < h; ++i) pi[static_cast<size_t>(X(i))] = 1;
    for (int i = 1; i < h; ++i) pi[static_cast<size_t>(Xt(i))] = 0;
    Dist mu(static_cast<size_t>(S), 0.0);
    mu[0] = 0.5;
    mu[static_cast<size_t>(Z)] = 0.5;
    g.data["D"] = single_source(BehaviorSource::deterministic(pi, 2), mu);

    g.state_names.assign(static_cast<size_t>(S), "");
    g.state_names[0] = "X_0";
    for (int i = 1; i < h; ++i) {
        g.state_names[static_cast<size_t>(X(i))] = "X_" + std::to_string(i);
        g.state_names[static_cast<size_t>(Xt(i))] = "Xt_" + std::to_string(i);
    }
    g.state_names[static_cast<size_t>(Z)] = "Z";
    g.start_state = 0;

    const double bias = value_bias_formula(gamma, h, eps);
    g.expected["bias"] = bias;
    g.expected["signed_bias"] = flip ? -bias : bias;  // nominal minus actual
    g.expected["weak_eps"] = eps;
    g.formulas["bias"] = "gamma*eps/((1-gamma)*(1-(1-eps)*gamma^h))";
    g.formulas["signed_bias"] = flip ? "-bias" : "bias";
    g.formulas["weak_eps"] = "eps";
    g.params = {{"gamma", gamma}, {"h", h}, {"eps", eps}, {"flip", flip ? 1.0 : 0.0}, {"delta", delta}};
    return g;
}

GenOutput gen_ac_optgap(double gamma, int h, double eps) {
    require(h > 1, "h > 1");
    require(gamma >= 0.0 && gamma < 1.0, "gamma in [0,1)");
    require(eps >= 0.0 && eps <= 0.5, "eps in [0,1/2]");
    const double delta = 2.0 * eps;
    const int S = 3 * h - 1;
    const int Z = 3 * h - 2;
    auto X = [](int i) { return i; };
    auto Aa = [h](int i) { return h - 1 + i; };
    auto B = [h](int i) { return 2 * h - 2 + i; };

    GenOutput g;
    g.name = "ac_optgap";
    g.h = h;
    g.mdp = Mdp(S, 2, gamma);
    Mdp& m = g.mdp;

    for (int i = 0; i < h; ++i) {
        const bool last = i == h - 1;
        for (int a = 0; a < 2; ++a) {
            if (last)
                m.set_transition(X(i), a, {{X(0), 1.0}});
            else if (delta > 0.0)
                m.set_transition(X(i), a, {{Aa(i + 1), delta / 2}, {X(i + 1), 1.0 - delta}, {B(i + 1), delta / 2}});
            else
                m.set_transition(X(i), a, {{X(i + 1), 1.0}});
            m.r(X(i), a) = 1.0;
            if (i == 0) continue;
            // A_i pays for a=1, B_i for a=0; on the last layer the unpaid action falls into Z.
            for (int s : {Aa(i), B(i)}) {
                const bool paid = s == Aa(i) ? a == 1 : a == 0;
                if (last)
                    m.set_transition(s, a, {{paid ? X(0) : Z, 1.0}});
                else
                    m.set_transition(s, a,
                                     {{Aa(i + 1), delta / 2}, {X(i + 1), 1.0 - delta}, {B(i + 1), delta / 2}});
                m.r(s, a) = paid ? 1.0 : 0.0;
            }
        }
    }
    m.set_all_actions(Z, {{Z, 1.0}}, 0.0);

    std::vector<Dist> pi(static_cast<size_t>(S));
    for (int i = 0; i < h; ++i) pi[static_cast<size_t>(X(i))] = {0.5, 0.5};
    for (int i = 1; i < h; ++i) {
        pi[static_cast<size_t>(Aa(i))] = pm(2, 1);
        pi[static_cast<size_t>(B(i))] = pm(2, 0);
    }
    pi[static_cast<size_t>(Z)] = pm(2, 0);
    Dist mu(static_cast<size_t>(S), 0.0);
    mu[0] = 0.5;
    mu[static_cast<size_t>(Z)] = 0.5;
    g.data["D_star"] = single_source(markov_from(pi), mu);

    g.state_names.assign(static_cast<size_t>(S), "");
    for (int i = 0; i < h; ++i) g.state_names[static_cast<size_t>(X(i))] = "X_" + std::to_string(i);
    for (int i = 1; i < h; ++i) {
        g.state_names[static_cast<size_t>(Aa(i))] = "A_" + std::to_string(i);
        g.state_names[static_cast<size_t>(B(i))] = "B_" + std::to_string(i);
    }
    g.state_names[static_cast<size_t>(Z)] = "Z";
    g.start_state = 0;

    g.expected["gap"] = value_bias_formula(gamma, h, eps);
    g.expected["weak_eps"] = eps;
    g.formulas["gap"] = "gamma*eps/((1-gamma)*(1-(1-eps)*gamma^h))";
    g.formulas["weak_eps"] = "eps";
    g.params = {{"gamma", gamma}, {"h", h}, {"eps", eps}, {"delta", delta}};
    return g;
}

GenOutput gen_lottery(double gamma, double c, double eps, int h) {
    require(h > 1, "h > 1");
    require(gamma >= 0.0 && gamma < 1.0, "gamma in [0,1)");
    require(c >= 0.0 && c < 0.5, "c in [0,1/2)");
    require(eps > 0.0 && eps < 0.5, "eps in (0,1/2)");
    const double theta = 2.0 * eps;
    const double delta = 0.5 * (1.0 - std::sqrt(1.0 - 2.0 * eps / theta));
    const double ct = c + 0.5;
    require(ct > delta, "c~ > delta");

    enum { A, B, C, D, E, F, G, Z, S };
    GenOutput g;
    g.name = "lottery";
    g.h = h;
    g.mdp = Mdp(S, 2, gamma);
    Mdp& m = g.mdp;
    // Rewards are paid on entry to the payoff sinks and then every step inside them.
    m.set_transition(A, 0, {{B, delta}, {C, 1.0 - delta}});
    m.set_transition(A, 1, {{F, 1.0}});
    m.set_transition(B, 0, {{D, 1.0}});
    m.r(B, 0) = 1.0;
    m.set_transition(B, 1, {{Z, 1.0}});
    m.set_transition(C, 0, {{Z, 1.0}});
    m.set_transition(C, 1, {{G, 1.0}});
    m.r(C, 1) = 2.0 * c;
    m.set_transition(F, 0, {{Z, 1.0}});
    m.set_transition(F, 1, {{E, 1.0}});
    m.r(F, 1) = ct;
    m.set_all_actions(D, {{D, 1.0}}, 1.0);
    m.set_all_actions(E, {{E, 1.0}}, ct);
    m.set_all_actions(G, {{G, 1.0}}, 2.0 * c);
    m.set_all_actions(Z, {{Z, 1.0}}, 0.0);

    std::vector<Dist> pi(S, pm(2, 0));
    pi[A] = {theta, 1.0 - theta};
    pi[C] = pm(2, 1);
    pi[F] = pm(2, 1);
    g.data["D"] = single_source(markov_from(pi), Dist(S, 1.0 / static_cast<double>(S)));

    g.state_names = {"A", "B", "C", "D", "E", "F", "G", "Z"};
    g.start_state = A;
    g.expected["gap"] = c * gamma / (1.0 - gamma);
    g.expected["weak_eps_max"] = eps;
    g.expected["vstar"] = ct * gamma / (1.0 - gamma);
    g.expected["v_plus"] = delta * gamma / (1.0 - gamma);
    g.formulas["gap"] = "c*gamma/(1-gamma)";
    g.formulas["weak_eps_max"] = "eps";
    g.formulas["vstar"] = "(c+1/2)*gamma/(1-gamma)";
    g.formulas["v_plus"] = "delta*gamma/(1-gamma)";
    g.params = {{"gamma", gamma}, {"c", c}, {"eps", eps}, {"h", h}, {"theta", theta}, {"delta", delta}, {"c_tilde", ct}};
    return g;
}

GenOutput gen_strong_worstcase(double gamma, int h, double eps, double c1, double c2, double c3, double c4,
                               double rho) {
    require(gamma > 0.0 && gamma < 1.0, "gamma in (0,1)");
    require(h > 1, "h > 1");
    require(eps > 0.0 && eps < 0.2, "eps in (0,1/5)");
    require(c1 > 0.0 && c1 < eps / 2, "c1 in (0,eps/2)");
    require(c2 > 0.0 && c2 < 2 * eps * gamma, "c2 in (0,2 eps gamma)");
    require(c3 > 0.0 && c3 < eps / 2, "c3 in (0,eps/2)");
    require(c4 > c1 && c4 < eps, "c4 in (c1,eps)");
    require(rho > 0.0 && rho < 1.0, "rho in (0,1)");
    const double delta = strong_worstcase_delta(gamma, h, eps, c1, c2);
    require(delta > 0.0 && delta <= 1.0, "derived delta in (0,1]");
    const double dG = eps * (1 - 2 * eps - 2 * c3) / ((eps + c3) * (1 - 2 * eps));
    const double dZ = eps * (1 - eps - c4) / ((eps + c4) * (1 - eps - c1));
    require(dG > 0.0 && dG < 1.0, "delta_G in (0,1)");
    require(dZ > 0.0 && dZ < 1.0, "delta_Z in (0,1)");
    const double vs = 1.0 / (2.0 * (1.0 - dG) + 1.0);
    const double vt = c1 / (c1 + (1.0 - dZ) * (eps + c1));

    const int S = 2 * h + 4;
    const int Zs = 0, Gs = 1, X0 = 2, X1 = 3, Xt1 = 4, Cs = 5;
    auto X = [&](int i) { return i == 0 ? X0 : i == 1 ? X1 : (i < h ? 4 + i : X0); };
    const int Y1 = h + 4, Yt1 = h + 5;
    auto Y = [&](int i) { return i == 1 ? Y1 : (i < h ? h + 4 + i : X0); };

    GenOutput g;
    g.name = "strong_worstcase";
    g.h = h;
    g.mdp = Mdp(S, 3, gamma);
    Mdp& m = g.mdp;
    for (int s = 0; s < S; ++s) m.set_transition(s, 2, {{Zs, 1.0}});
    m.set_all_actions(Zs, {{Zs, 1.0}}, 0.0);
    m.set_all_actions(Gs, {{Gs, 1.0}}, 1.0);

    m.set_transition(X0, 0, {{X1, 1 - 2 * eps}, {Xt1, eps}, {Cs, eps}});
    m.r(X0, 0) = 1.0;
    m.set_transition(X0, 1, {{Y1, 1 - eps - c1}, {Yt1, eps}, {Gs, c1}});
    m.r(X0, 1) = 1.0;

    auto edge = [&](int s, int a, int sp, double r) {
        m.set_transition(s, a, {{sp, 1.0}});
        m.r(s, a) = r;
    };
    edge(X1, 0, X(2), 1.0);
    edge(X1, 1, Zs, 0.0);
    edge(Xt1, 1, X(2), 1.0);
    edge(Xt1, 0, Gs, 1.0);
    edge(Cs, 1, X(2), 1.0);
    edge(Cs, 0, Zs, 0.0);
    edge(Y1, 1, Y(2), 1.0 - delta);
    edge(Y1, 0, Zs, 0.0);
    edge(Yt1, 0, Y(2), 1.0 - delta);
    edge(Yt1, 1, Zs, 0.0);
    for (int i = 2; i < h; ++i)
        for (int a = 0; a < 2; ++a) {
            edge(X(i), a, X(i + 1), 1.0);
            edge(Y(i), a, Y(i + 1), 1.0 - delta);
        }

    auto fill = [&](int dflt) { return std::vector<Dist>(static_cast<size_t>(S), pm(3, dflt)); };
    std::vector<Dist> top1 = fill(0), top2 = fill(0), bot1 = fill(1), bot2 = fill(1), star = fill(0);
    top1[X1] = pm(3, 2);
    top1[Xt1] = pm(3, 2);
    top2[Xt1] = pm(3, 1);
    top2[Cs] = pm(3, 1);
    top2[X1] = two(3, 0, 1.0 - dG, 1);
    bot1[Y1] = pm(3, 2);
    bot1[Yt1] = pm(3, 2);
    bot2[Y1] = two(3, 0, dZ, 1);
    bot2[Yt1] = pm(3, 0);
    star[Cs] = pm(3, 1);

    // The second bottom policy plays 2 at G only right after the branch, so its G paths share (1,2,1,...).
    std::vector<std::vector<Dist>> bot2_phases(static_cast<size_t>(h), bot2);
    bot2_phases[1][Gs] = pm(3, 2);
    const BehaviorSource bot2_src = BehaviorSource::phase_cycled(bot2_phases);

    const Dist mu = pm(S, X0);
    DataDist D;
    D.start_dist = mu;
    D.components = {{(1 - rho) * (1 - vs), markov_from(top1)},
                    {(1 - rho) * vs, markov_from(top2)},
                    {rho * (1 - vt), markov_from(bot1)},
                    {rho * vt, bot2_src}};
    g.data["D"] = D;
    g.data["D_top"] = DataDist{{{1 - vs, markov_from(top1)}, {vs, markov_from(top2)}}, mu};
    g.data["D_bottom"] = DataDist{{{1 - vt, markov_from(bot1)}, {vt, bot2_src}}, mu};
    g.data["D_star"] = single_source(markov_from(star), mu);

    g.state_names.assign(static_cast<size_t>(S), "");
    g.state_names[Zs] = "Z";
    g.state_names[Gs] = "G";
    g.state_names[X0] = "X_0";
    g.state_names[X1] = "X_1";
    g.state_names[Xt1] = "Xt_1";
    g.state_names[Cs] = "C";
    g.state_names[static_cast<size_t>(Y1)] = "Y_1";
    g.state_names[static_cast<size_t>(Yt1)] = "Yt_1";
    for (int i = 2; i < h; ++i) {
        g.state_names[static_cast<size_t>(X(i))] = "X_" + std::to_string(i);
        g.state_names[static_cast<size_t>(Y(i))] = "Y_" + std::to_string(i);
    }
    g.start_state = X0;

    g.expected["gap"] = strong_two_term(gamma, h, eps, c1, c2);
    g.expected["strong_eps"] = eps;
    g.expected["three_term"] = strong_three_term(gamma, h, eps);
    g.formulas["gap"] =
        "(2*eps*gamma-c2)/((1-gamma)*(1-(1-2*eps)*gamma^h)) + eps*gamma/((1-gamma)*(1-(1-eps-c1)*gamma^h))";
    g.formulas["strong_eps"] = "eps";
    g.formulas["three_term"] = "eps*gamma/(1-gamma)*(2/(1-(1-2*eps)*gamma^h) + 1/(1-(1-eps)*gamma^h))";
    g.params = {{"gamma", gamma}, {"h", h},        {"eps", eps},     {"c1", c1},       {"c2", c2},
                {"c3", c3},       {"c4", c4},      {"rho", rho},     {"delta", delta}, {"delta_G", dG},
                {"delta_Z", dZ},  {"varsigma", vs}, {"vartheta", vt}};
    return g;
}

GenOutput gen_castle_flower(double gamma, int h, double theta_l, double theta_g, double c, double sigma) {
    require(gamma > 0.0 && gamma < 1.0, "gamma in (0,1)");
    require(h > 1, "h > 1");
    const double gh = std::pow(gamma, h);
    const double box = (gamma - gh) / (4.0 * (1.0 - gamma));
    require(theta_l > 0.0 && theta_l <= box, "theta_L in (0,(gamma-gamma^h)/(4(1-gamma))]");
    require(theta_g > 0.0 && theta_g <= box, "theta_G in (0,(gamma-gamma^h)/(4(1-gamma))]");
    require(c >= 0.0 && c < (gamma - gh) / (4.0 * (1.0 - gh)), "c in [0,(gamma-gamma^h)/(4(1-gamma^h)))");
    const double mn = std::min(theta_l, theta_g);
    require(sigma > 0.0 && sigma < mn / (1.0 - gamma), "sigma in (0,min(theta_G,theta_L)/(1-gamma))");

    const double dt = sigma * (1.0 - gamma);
    const double total = theta_l + (theta_g + gh * mn) / (1.0 - gh);
    const double c1 = (1.0 - gamma) * theta_g / (gamma - gh);
    const double c3 = 2.0 * (1.0 - gamma) * theta_l / (gamma - gh);
    const double c4 = 2.0 * (1.0 - gamma) * mn / (gamma - gh);
    const double p = std::min(0.25, dt / (4.0 * (gamma * total / (1.0 - gamma) + theta_l + mn / (1.0 - gh))));
    const double q = p;
    const double dp = 1.0 - gamma * (1.0 - p) - p * gamma * gh * (1.0 - q) / (1.0 - q * gh);
    const double big_delta = (total - dt) * dp / (1.0 - gamma);
    const double c2 = 2.0 * (big_delta + p * theta_l);
    const double alpha = 0.5;
    const double vs = 1.0 - dt * (1.0 - gh) / (4.0 * theta_g);
    require(c2 > 0.0 && c2 <= 1.0, "flower reward offset c2 in (0,1]");
    require(vs > 0.0 && vs < 1.0, "mixing weight varsigma in (0,1)");

    const int S = 2 * h + 2;
    const int X = 0, Y = 1, Xt = 2, Z = 2 * h + 1;
    auto Ct = [&](int k) { return k < h ? 2 + k : Xt; };
    auto Dt = [&](int k) { return k < h ? h + 1 + k : Xt; };
    const int A = 4;

    GenOutput g;
    g.name = "castle_flower";
    g.h = h;
    g.mdp = Mdp(S, A, gamma);
    Mdp& m = g.mdp;
    for (int hub : {X, Y}) {
        for (int a = 0; a < 2; ++a) {
            m.set_transition(hub, a, {{X, 0.5}, {Y, 0.5}});
            const bool good = (hub == X) == (a == 0);
            m.r(hub, a) = good ? 0.5 : 0.5 - c1;
        }
        m.set_transition(hub, 2, {{Ct(1), p}, {X, (1.0 - p) / 2}, {Y, (1.0 - p) / 2}});
        m.r(hub, 2) = (1.0 - c2) / 2;
        m.set_transition(hub, 3, {{Z, 1.0}});
    }
    for (int k = 1; k < h; ++k) {
        m.set_all_actions(Ct(k), {{Ct(k + 1), 1.0}}, (1.0 + c3) / 2);
        m.set_all_actions(Dt(k), {{Dt(k + 1), 1.0}}, (1.0 + c4) / 2);
    }
    m.set_transition(Xt, 0, {{X, 1.0}});
    m.r(Xt, 0) = 0.5;
    m.set_transition(Xt, 1, {{X, 1.0}});
    m.set_transition(Xt, 2, {{Dt(1), q}, {X, 1.0 - q}});
    m.r(Xt, 2) = 0.5 - q * mn;
    m.set_transition(Xt, 3, {{Z, 1.0}});
    m.set_all_actions(Z, {{Z, 1.0}}, 0.0);

    // Phase-cycled components; every phase row defaults to action 0.
    auto phases = [&]() { return std::vector<std::vector<Dist>>(static_cast<size_t>(h), std::vector<Dist>(static_cast<size_t>(S), pm(A, 0))); };
    auto set_all = [&](std::vector<std::vector<Dist>>& pp, int s, int a, int from = 0) {
        for (int k = from; k < h; ++k) pp[static_cast<size_t>(k)][static_cast<size_t>(s)] = pm(A, a);
    };
    auto star = phases(), diamond = phases(), tri = phases();
    set_all(star, Y, 1);
    set_all(diamond, Y, 1);
    set_all(diamond, X, 1, 1);
    set_all(diamond, Y, 0, 1);
    set_all(tri, X, 2);
    set_all(tri, Y, 2);
    set_all(tri, Xt, 2);
    set_all(tri, Y, 1, 1);
    set_all(tri, X, 0, 1);
    set_all(tri, Xt, 0, 1);
    for (int k = 1; k < h; ++k) {
        set_all(tri, Ct(k), 3);
        set_all(tri, Dt(k), 3);
    }

    const Dist mu(static_cast<size_t>(S), 1.0 / S);
    DataDist D;
    D.start_dist = mu;
    D.components = {{alpha * (1.0 - vs), BehaviorSource::phase_cycled(star)},
                    {alpha * vs, BehaviorSource::phase_cycled(diamond)},
                    {1.0 - alpha, BehaviorSource::phase_cycled(tri)}};
    g.data["D"] = D;
    g.data["D_star"] = single_source(BehaviorSource::phase_cycled(star), mu);

    g.state_names.assign(static_cast<size_t>(S), "");
    g.state_names[X] = "X";
    g.state_names[Y] = "Y";
    g.state_names[Xt] = "Xt";
    g.state_names[static_cast<size_t>(Z)] = "Z";
    for (int k = 1; k < h; ++k) {
        g.state_names[static_cast<size_t>(Ct(k))] = "Ct_" + std::to_string(k);
        g.state_names[static_cast<size_t>(Dt(k))] = "Dt_" + std::to_string(k);
    }
    g.start_state = X;

    g.expected["closedloop_gap"] = bounded_ov_formula(gamma, h, theta_l, theta_g) - sigma;
    g.expected["ac_gap_lower"] = c / (1.0 - gamma);
    g.expected["local_theta"] = theta_l;
    g.expected["global_theta"] = theta_g;
    g.formulas["closedloop_gap"] =
        "theta_L/(1-gamma) + (theta_G + gamma^h*min(theta_L,theta_G))/((1-gamma)*(1-gamma^h)) - sigma";
    g.formulas["ac_gap_lower"] = "c/(1-gamma)";
    g.formulas["local_theta"] = "theta_L";
    g.formulas["global_theta"] = "theta_G";
    g.params = {{"gamma", gamma}, {"h", h},   {"theta_L", theta_l}, {"theta_G", theta_g}, {"c", c},
                {"sigma", sigma}, {"p", p},   {"q", q},             {"c1", c1},           {"c2", c2},
                {"c3", c3},       {"c4", c4}, {"varsigma", vs},     {"alpha", alpha},     {"Delta", big_delta}};
    return g;
}

GenOutput gen_nstep_worstcase(double gamma, int n, double delta_tilde, double sigma) {
    require(n > 1, "n > 1");
    require(gamma > 0.0 && gamma < 1.0, "gamma in (0,1)");
    const double span = gamma - std::pow(gamma, n);
    require(delta_tilde > 0.0 && delta_tilde < span, "delta_tilde in (0,gamma-gamma^n)");
    require(sigma > 0.0 && sigma < delta_tilde / (1.0 - gamma), "sigma in (0,delta_tilde/(1-gamma))");
    const double alpha = 1.0 - delta_tilde / span;
    const double c2 = delta_tilde - (1.0 - gamma) * sigma;

    enum { X, Y, Z, S };
    GenOutput g;
    g.name = "nstep_worstcase";
    g.h = n;
    g.mdp = Mdp(S, 2, gamma);
    Mdp& m = g.mdp;
    m.set_transition(X, 0, {{Z, 1.0}});
    m.r(X, 0) = 1.0 - c2;
    m.set_transition(X, 1, {{Y, 1.0}});
    m.r(X, 1) = 1.0;
    m.set_transition(Y, 0, {{Y, 1.0}});
    m.r(Y, 0) = 1.0;
    m.set_transition(Y, 1, {{Y, 1.0}});
    m.set_all_actions(Z, {{Z, 1.0}}, 1.0 - c2);

    std::vector<Dist> pi = {{0.5, 0.5}, {alpha, 1.0 - alpha}, pm(2, 0)};
    g.data["D"] = single_source(markov_from(pi), pm(S, X));

    g.state_names = {"X", "Y", "Z"};
    g.start_state = X;
    g.expected["vac_minus_vn"] = delta_tilde / (1.0 - gamma) - sigma;
    g.expected["vstar_equals_vac"] = 1.0;
    g.expected["delta_tilde"] = delta_tilde;
    g.expected["delta_tilde_measured"] = delta_tilde / (1.0 - gamma);
    g.formulas["vac_minus_vn"] = "delta_tilde/(1-gamma) - sigma";
    g.formulas["vstar_equals_vac"] = "1";
    g.formulas["delta_tilde"] = "delta_tilde";
    g.formulas["delta_tilde_measured"] = "delta_tilde/(1-gamma)";
    g.params = {{"gamma", gamma}, {"n", n}, {"delta_tilde", delta_tilde}, {"sigma", sigma}, {"alpha", alpha}, {"c2", c2}};
    return g;
}

std::vector<std::string> generator_names() {
    return {"value_bias", "ac_optgap", "lottery", "strong_worstcase", "castle_flower", "nstep_worstcase"};
}

GenOutput generate(const std::string& name, const std::map<std::string, double>& p) {
    const double gamma = param(p, "gamma", 0.9);
    const int h = static_cast<int>(param(p, "h", 2));
    if (name == "value_bias") return gen_value_bias(gamma, h, param(p, "eps", 0.5), param(p, "flip", 0.0) != 0.0);
    if (name == "ac_optgap") return gen_ac_optgap(gamma, h, param(p, "eps", 0.25));
    if (name == "lottery") return gen_lottery(gamma, param(p, "c", 0.3), param(p, "eps", 0.1), h);
    if (name == "strong_worstcase") {
        // Defaults keep the derived reward offset delta near 1/2 for any (gamma, h).
        const double eps = param(p, "eps", 0.25 * (1.0 - std::pow(gamma, h - 1)));
        return gen_strong_worstcase(gamma, h, eps, param(p, "c1", 0.2 * eps), param(p, "c2", 0.5 * eps * gamma),
                                    param(p, "c3", 0.25 * eps), param(p, "c4", 0.5 * eps), param(p, "rho", 0.5));
    }
    if (name == "castle_flower") {
        const double gh = std::pow(gamma, h);
        const double tl = param(p, "theta_L", 0.08 * (1.0 - gh));
        const double tg = param(p, "theta_G", 0.04 * (1.0 - gh));
        return gen_castle_flower(gamma, h, tl, tg, param(p, "c", 0.0),
                                 param(p, "sigma", 0.5 * std::min(tl, tg) / (1.0 - gamma)));
    }
    if (name == "nstep_worstcase")
        return gen_nstep_worstcase(gamma, static_cast<int>(param(p, "n", 3)), param(p, "delta_tilde", 0.1),
                                   param(p, "sigma", 0.2));
    std::ostringstream os;
    os << "unknown generator: " << name;
    throw Error(os.str());
}

}  // namespace aclab
