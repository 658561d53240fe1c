#include "rotor/analytics.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace rotor {

namespace {

constexpr double kCriticalTol = 1e-12;

FormulaDiagnostics make_diagnostics(const TransientIngredients& t,
                                    std::optional<int> uniform_regular_d) {
    const double q = t.q;
    const double fp = t.fprime_q;
    FormulaDiagnostics dg;
    const double denom = q * q + q - fp * (2.0 * q * q - q + 1.0);
    dg.alpha_closed_form = (q - fp * (q * q - q + 1.0)) / denom;
    dg.ell_closed_form = (q - fp) * (1.0 - q) / denom;
    dg.trap_offspring_mean = fp;
    dg.trap_offspring_mean_scaled =
        q > 0.0 ? fp / q : std::numeric_limits<double>::infinity();
    if (uniform_regular_d) {
        const int d = *uniform_regular_d;
        const double w = q - 1.0;
        const double w3 = w * w * w;
        dg.alpha_uniform_series =
            q * (1.0 - d) * (1.0 - std::pow(q, d + 1)) / ((d + 1) * w3) +
            q * q * (1.0 - std::pow(q, d - 1)) / w3;
    }
    return dg;
}

// Shared tail: fill regime, alpha, ell from the good-child law.
Constants finish_constants(const OffspringLaw& good, double mu, double alpha_pos_rec,
                           std::optional<int> uniform_regular_d) {
    Constants out;
    out.m = good.mean();
    out.mu = mu;
    out.regime = classify(out.m);
    switch (out.regime) {
        case Regime::PositiveRecurrent:
            out.alpha = alpha_pos_rec;
            out.ell = 0.0;
            break;
        case Regime::NullRecurrent:
            out.alpha = 0.5;
            out.ell = 0.0;
            break;
        case Regime::Transient: {
            const TransientIngredients t = transient_ingredients(genfun(good));
            const double x = t.ray_right_mean * t.trap_mean;
            out.alpha = (1.0 + x) / (1.0 + 2.0 * x);
            out.ell = 1.0 / (1.0 + 2.0 * x);
            out.transient = t;
            out.diagnostics = make_diagnostics(t, uniform_regular_d);
            break;
        }
    }
    return out;
}

bool is_uniform(const RotorLaw& law) {
    const double u = 1.0 / (law.degree() + 1);
    for (double r : law.probs()) {
        if (std::abs(r - u) > kProbTol) return false;
    }
    return true;
}

Constants regular_constants(const RotorLaw& law) {
    const OffspringLaw good = good_child_law(law);
    const double alpha_pos_rec = (law.degree() - 1) / (2.0 * law.mean());
    std::optional<int> uniform_d;
    if (is_uniform(law)) uniform_d = law.degree();
    return finish_constants(good, static_cast<double>(law.degree()), alpha_pos_rec, uniform_d);
}

Constants gw_constants(const OffspringLaw& offspring, const RotorMatrix& rotors) {
    if (offspring.has_zero_offspring()) {
        throw DegenerateEnvironment("galton-watson environment: offspring law has mass at 0; "
                                    "the tree must be infinite without leaves");
    }
    const double mu = offspring.mean();
    if (!(mu > 1.0)) {
        throw DegenerateEnvironment("galton-watson environment: mean offspring must exceed 1, got " +
                                    std::to_string(mu));
    }
    const OffspringLaw good = gw_good_child_law(offspring, rotors);
    const double m = good.mean();
    const double alpha_pos_rec = (mu - 1.0) / (2.0 * (mu - m));
    return finish_constants(good, mu, alpha_pos_rec, std::nullopt);
}

}  // namespace

Regime classify(double m, double tol) {
    if (m < 1.0 - tol) return Regime::PositiveRecurrent;
    if (m <= 1.0 + tol) return Regime::NullRecurrent;
    return Regime::Transient;
}

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::PositiveRecurrent: return "positive_recurrent";
        case Regime::NullRecurrent: return "null_recurrent";
        case Regime::Transient: return "transient";
    }
    return "unknown";
}

double extinction_probability(const GenFun& f) {
    if (f.mean() <= 1.0 + kCriticalTol) return 1.0;  // dies out almost surely

    double s = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double next = f.eval(s);
        const double delta = std::abs(next - s);
        s = next;
        if (delta < 1e-14) break;
    }
    // Newton polish; the smallest fixed point is a simple root of f(s)-s.
    for (int i = 0; i < 5; ++i) {
        const double denom = f.deriv_eval(s) - 1.0;
        if (denom == 0.0) break;
        double next = s - (f.eval(s) - s) / denom;
        if (next < 0.0) next = 0.0;
        if (next > 1.0) next = 1.0;
        if (next == s) break;
        s = next;
    }
    if (std::abs(f.eval(s) - s) > 1e-13) {
        throw NonConvergence("extinction probability: residual " +
                             std::to_string(std::abs(f.eval(s) - s)) + " after polish");
    }
    return s;
}

TransientIngredients transient_ingredients(const GenFun& f) {
    if (f.mean() <= 1.0 + kCriticalTol) {
        throw NotTransient("transient ingredients need a supercritical good-child law");
    }
    TransientIngredients t;
    t.q = extinction_probability(f);
    t.fprime_q = f.deriv_eval(t.q);
    t.trap_mean = 1.0 / (1.0 - t.fprime_q);
    t.ray_right_mean = t.q / (1.0 - t.q) * (1.0 - t.fprime_q);
    return t;
}

Constants range_constant(const RotorLaw& law) { return regular_constants(law); }

Constants range_constant(const OffspringLaw& offspring, const RotorMatrix& rotors) {
    return gw_constants(offspring, rotors);
}

Constants speed_constant(const RotorLaw& law) { return regular_constants(law); }

Constants speed_constant(const OffspringLaw& offspring, const RotorMatrix& rotors) {
    return gw_constants(offspring, rotors);
}

LeafProcess leaf_process_mean(const RotorLaw& law) {
    const double m = good_child_law(law).mean();
    if (classify(m) != Regime::PositiveRecurrent) {
        throw NotPositiveRecurrent("leaf process mean is defined for positive recurrent laws only");
    }
    const double nu = 1.0 + (law.degree() - 1) / (1.0 - m);
    return {nu, 0.5 * (1.0 - 1.0 / nu)};
}

double gw_leaf_process_mean(const OffspringLaw& offspring, const RotorMatrix& rotors) {
    const double m = gw_good_child_law(offspring, rotors).mean();
    if (classify(m) != Regime::PositiveRecurrent) {
        throw NotPositiveRecurrent("leaf process mean is defined for positive recurrent laws only");
    }
    return (offspring.mean() - m) / (1.0 - m);
}

}  // namespace rotor
