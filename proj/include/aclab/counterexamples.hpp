#pragma once

#include <map>
#include <string>
#include <vector>

#include "aclab/chunk_dist.hpp"

namespace aclab {

struct GenOutput {
    std::string name;
    Mdp mdp;
    int h = 2;
    int start_state = 0;
    std::map<std::string, DataDist> data;
    std::map<std::string, double> expected;
    std::map<std::string, std::string> formulas;
    std::map<std::string, double> params;
    std::vector<std::string> state_names;

    int state(const std::string& label) const;
};

// Layered 2h-state chain; D follows pi(X_i)=1, pi(X~_i)=0. `flip` maps r -> 1 - r,
// turning the nominal overestimate into an underestimate of the same size.
// States: X_0 = 0, X_i = 2i-1, X~_i = 2i (1 <= i < h), Z = 2h-1.
GenOutput gen_value_bias(double gamma, int h, double eps, bool flip = false);

// (3h-1)-state chain; D* mixes actions uniformly on the X_i spine.
// States: X_i = i, A_i = h-1+i, B_i = 2h-2+i, Z = 3h-2.
GenOutput gen_ac_optgap(double gamma, int h, double eps);

// Lottery with an added low-payoff sink G so the closed-loop optimum stays at c~ gamma/(1-gamma).
// States: A, B, C, D, E, F, G, Z = 0..7.
GenOutput gen_lottery(double gamma, double c, double eps, int h = 2);

// (2h+4)-state construction under strong OLC.
// States: Z=0, G=1, X_0=2, X_1=3, X~_1=4, C=5, X_2..X_{h-1}=6..h+3, Y_1=h+4, Y~_1=h+5, Y_2..Y_{h-1}=h+6..2h+3.
GenOutput gen_strong_worstcase(double gamma, int h, double eps, double c1, double c2, double c3, double c4,
                               double rho = 0.5);

// Castle/flower assembly reaching the bounded-OV closed-loop bound minus sigma.
// States: X=0, Y=1, X~=2, C~_k=2+k, D~_k=h+1+k (1 <= k < h), Z=2h+1.
GenOutput gen_castle_flower(double gamma, int h, double theta_l, double theta_g, double c, double sigma);

// Three-state construction where the n-step policy is sub-optimal and chunked Q-learning is exact.
// States: X=0, Y=1, Z=2.
GenOutput gen_nstep_worstcase(double gamma, int n, double delta_tilde, double sigma);

// Closed forms shared by generators and checks.
double value_bias_formula(double gamma, int h, double eps);
double strong_two_term(double gamma, int h, double eps, double c1, double c2);
double strong_three_term(double gamma, int h, double eps);
double bounded_ov_formula(double gamma, int h, double theta_l, double theta_g);
double shortcut_free_formula(double gamma, int h, double alpha, double theta);
double strong_worstcase_delta(double gamma, int h, double eps, double c1, double c2);

std::vector<std::string> generator_names();
GenOutput generate(const std::string& name, const std::map<std::string, double>& params);

}  // namespace aclab
