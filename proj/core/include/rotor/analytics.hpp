#pragma once

#include <optional>

#include "rotor/distributions.hpp"

namespace rotor {

/// Recurrence/transience of the rotor walk, decided by the mean number m of
/// good children per vertex.
enum class Regime { PositiveRecurrent, NullRecurrent, Transient };

/// m < 1-tol: positive recurrent; |m-1| <= tol: null recurrent; else transient.
Regime classify(double m, double tol = 1e-12);

const char* regime_name(Regime r);

/// Smallest fixed point of a pgf in [0,1]: q = P[the tree of good children
/// rooted at a fixed vertex is finite].  Laws with mean <= 1 (up to 1e-12)
/// return exactly 1.  Fixed-point iteration from 0, then a short Newton
/// polish; NonConvergence if the final residual |f(q)-q| exceeds 1e-13.
double extinction_probability(const GenFun& f);

/// Ingredients of the transient-regime constants, all derived from the
/// good-child pgf f and its extinction probability q.
struct TransientIngredients {
    double q;               // extinction probability of the good-child tree
    double fprime_q;        // f'(q); exact mean of the trap offspring law h
    double trap_mean;       // expected total progeny of one trap, 1/(1 - f'(q))
    double ray_right_mean;  // expected good children hanging off the escape ray,
                            // q (1 - f'(q)) / (1 - q)
};

/// Requires f.mean() > 1 + 1e-12 (throws NotTransient otherwise).
TransientIngredients transient_ingredients(const GenFun& f);

/// Alternative closed-form evaluations of the same constants, reported for
/// auditing.  The single-fraction forms disagree with the decomposition route
/// on ranges of laws (they can even go negative); both are always emitted so
/// the discrepancy is visible rather than silently resolved.
struct FormulaDiagnostics {
    double alpha_closed_form;            // single fraction in (q, f'(q))
    double ell_closed_form;
    double trap_offspring_mean;          // h'(1) = f'(q), exact
    double trap_offspring_mean_scaled;   // f'(q)/q variant, for comparison
    std::optional<double> alpha_uniform_series;  // geometric-series form, uniform regular laws only
};

/// Law-level constants: alpha = lim |R_n|/n (range), ell = lim |X_n|/n (speed).
struct Constants {
    Regime regime = Regime::PositiveRecurrent;
    double m = 0.0;    // mean number of good children
    double mu = 0.0;   // mean forward degree of the environment
    double alpha = 0.0;
    double ell = 0.0;
    std::optional<TransientIngredients> transient;
    std::optional<FormulaDiagnostics> diagnostics;  // transient regime only
};

/// Constants for the rotor walk on the d-regular tree with i.i.d. rotors.
///   positive recurrent: alpha = (d-1) / (2 E[rho]), ell = 0
///   null recurrent:     alpha = 1/2, ell = 0
///   transient:          alpha = (1+x)/(1+2x), ell = 1/(1+2x),
///                       x = ray_right_mean * trap_mean
Constants range_constant(const RotorLaw& law);

/// Same, on a Galton-Watson environment (mean offspring mu, good-child mean m);
/// positive recurrent alpha = (mu-1) / (2(mu-m)).  Requires a supercritical
/// environment without death: p_0 = 0 and mu > 1 (DegenerateEnvironment).
Constants range_constant(const OffspringLaw& offspring, const RotorMatrix& rotors);

/// The speed constant ell alongside alpha; same structure, same preconditions.
Constants speed_constant(const RotorLaw& law);
Constants speed_constant(const OffspringLaw& offspring, const RotorMatrix& rotors);

/// Positive recurrent regular trees only: mean leaf-count multiplier of the
/// cluster growth process, nu = 1 + (d-1)/(1-m), with the equivalent
/// alpha = (1/2)(1 - 1/nu).
struct LeafProcess {
    double nu;
    double alpha;
};
LeafProcess leaf_process_mean(const RotorLaw& law);  // NotPositiveRecurrent otherwise

/// Galton-Watson counterpart: lambda = (mu - m)/(1 - m), positive recurrent only.
double gw_leaf_process_mean(const OffspringLaw& offspring, const RotorMatrix& rotors);

}  // namespace rotor
