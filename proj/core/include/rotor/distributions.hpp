#pragma once

#include <map>
#include <span>
#include <vector>

#include "rotor/errors.hpp"

namespace rotor {

/// Tolerance for "these probabilities sum to one" checks.
inline constexpr double kProbTol = 1e-12;

/// Largest forward degree / offspring count the engine accepts.  Rotor values
/// are stored in 16-bit fields, and nothing in scope needs wider fan-out.
inline constexpr int kMaxDegree = 10000;

/// Law of the initial rotor at a vertex of the d-regular tree.
/// probs[j] = P[rotor = j] for j = 0..d; rotor value 0 points at the parent,
/// value j >= 1 at the j-th child.
class RotorLaw {
public:
    RotorLaw(int forward_degree, std::vector<double> probs);

    static RotorLaw uniform(int forward_degree);

    int degree() const { return d_; }
    double prob(int j) const { return r_[static_cast<std::size_t>(j)]; }
    std::span<const double> probs() const { return r_; }
    double mean() const { return mean_; }

private:
    int d_;
    std::vector<double> r_;
    double mean_;
};

/// Offspring law of a Galton-Watson tree, stored sparsely.  Entries with zero
/// probability are dropped on construction.
class OffspringLaw {
public:
    explicit OffspringLaw(std::map<int, double> probs);

    double prob(int k) const;
    const std::map<int, double>& support() const { return p_; }
    int max_support() const { return max_k_; }
    double mean() const { return mean_; }
    bool has_zero_offspring() const { return p_.count(0) != 0; }

private:
    std::map<int, double> p_;
    int max_k_;
    double mean_;
};

/// Conditional law of the number of *good* children given the offspring
/// count: row k has k+1 entries, row(k)[l] = P[l good children | k children].
/// A vertex with k children and rotor value rho has k - rho good children,
/// so row k equals the reversed rotor law at that vertex.
class RotorMatrix {
public:
    explicit RotorMatrix(std::map<int, std::vector<double>> rows);

    /// One uniform rotor row per supported offspring count of `law`.
    static RotorMatrix uniform_for(const OffspringLaw& law);

    bool has_row(int k) const { return rows_.count(k) != 0; }
    const std::vector<double>& row(int k) const;  // throws MissingRow
    const std::map<int, std::vector<double>>& rows() const { return rows_; }

private:
    std::map<int, std::vector<double>> rows_;
};

/// Probability generating function with explicit coefficients,
/// f(s) = sum_j coeffs[j] s^j.  Both f and f' are evaluated by Horner's rule;
/// the derivative comes from the shifted coefficient vector, not differencing.
class GenFun {
public:
    explicit GenFun(std::vector<double> coeffs);

    double eval(double s) const;
    double deriv_eval(double s) const;
    double mean() const { return deriv_eval(1.0); }
    std::span<const double> coeffs() const { return c_; }

private:
    std::vector<double> c_;
};

/// Evaluator for an affine conjugate a(s) = (f(u*s + v) - w) / z of a pgf.
/// Derivatives go through the chain rule on the exact coefficient form of f'.
class ConjugatePgf {
public:
    ConjugatePgf(GenFun f, double u, double v, double w, double z)
        : f_(std::move(f)), u_(u), v_(v), w_(w), z_(z) {}

    double eval(double s) const { return (f_.eval(u_ * s + v_) - w_) / z_; }
    double deriv_eval(double s) const { return f_.deriv_eval(u_ * s + v_) * u_ / z_; }
    double mean() const { return deriv_eval(1.0); }

private:
    GenFun f_;
    double u_, v_, w_, z_;
};

/// Backbone/trap pair of a supercritical pgf f with extinction probability q:
///   g(s) = (f((1-q)s + q) - q) / (1-q)   -- offspring pgf conditioned on survival
///   h(s) = f(q s) / q                    -- offspring pgf conditioned on extinction
struct ConditionedGenFuns {
    ConjugatePgf g;
    ConjugatePgf h;
    double q;

    /// h as an explicit pgf: coefficient j is c_j q^{j-1}.  Used to simulate
    /// trap trees directly.
    GenFun h_coefficients() const;

private:
    friend ConditionedGenFuns conditioned_genfuns(const GenFun& f, double q);
    ConditionedGenFuns(ConjugatePgf g_, ConjugatePgf h_, double q_, std::vector<double> hc)
        : g(std::move(g_)), h(std::move(h_)), q(q_), h_coeffs_(std::move(hc)) {}
    std::vector<double> h_coeffs_;
};

/// Law of the number of good children of a vertex in the d-regular tree:
/// a vertex with rotor rho has d - rho good children, so P[j good] = r_{d-j}.
OffspringLaw good_child_law(const RotorLaw& law);

/// Law of the number of good children in a Galton-Watson environment:
/// nu_l = sum_{k >= l} p_k q_{k,l}.  Every supported k needs a matrix row.
OffspringLaw gw_good_child_law(const OffspringLaw& offspring, const RotorMatrix& rotors);

/// Dense pgf of a (sparse) offspring law.
GenFun genfun(const OffspringLaw& law);

/// Requires 0 < q < 1 (throws DegenerateConditioning otherwise) with
/// f(q) = q up to solver tolerance.
ConditionedGenFuns conditioned_genfuns(const GenFun& f, double q);

}  // namespace rotor
