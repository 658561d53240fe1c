#include "rotor/distributions.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace rotor {

namespace {

void check_prob_vector(std::span<const double> v, const std::string& what) {
    double sum = 0.0;
    for (double p : v) {
        if (!(p >= 0.0)) throw InvalidLaw(what + ": negative or NaN probability");
        sum += p;
    }
    if (std::abs(sum - 1.0) > kProbTol) {
        throw InvalidLaw(what + ": probabilities sum to " + std::to_string(sum) + ", not 1");
    }
}

}  // namespace

RotorLaw::RotorLaw(int forward_degree, std::vector<double> probs)
    : d_(forward_degree), r_(std::move(probs)) {
    if (d_ < 1 || d_ > kMaxDegree) throw InvalidLaw("rotor law: forward degree out of range");
    if (r_.size() != static_cast<std::size_t>(d_) + 1) {
        throw InvalidLaw("rotor law: need d+1 probabilities (rotor values 0..d)");
    }
    check_prob_vector(r_, "rotor law");
    mean_ = 0.0;
    for (int j = 0; j <= d_; ++j) mean_ += j * r_[static_cast<std::size_t>(j)];
}

RotorLaw RotorLaw::uniform(int forward_degree) {
    if (forward_degree < 1 || forward_degree > kMaxDegree) {
        throw InvalidLaw("rotor law: forward degree out of range");
    }
    std::vector<double> r(static_cast<std::size_t>(forward_degree) + 1,
                          1.0 / (forward_degree + 1));
    return RotorLaw(forward_degree, std::move(r));
}

OffspringLaw::OffspringLaw(std::map<int, double> probs) : p_(std::move(probs)) {
    double sum = 0.0;
    for (auto it = p_.begin(); it != p_.end();) {
        auto [k, pk] = *it;
        if (k < 0 || k > kMaxDegree) throw InvalidLaw("offspring law: count out of range");
        if (!(pk >= 0.0)) throw InvalidLaw("offspring law: negative or NaN probability");
        sum += pk;
        it = (pk == 0.0) ? p_.erase(it) : std::next(it);
    }
    if (p_.empty()) throw InvalidLaw("offspring law: empty support");
    if (std::abs(sum - 1.0) > kProbTol) {
        throw InvalidLaw("offspring law: probabilities sum to " + std::to_string(sum) + ", not 1");
    }
    max_k_ = p_.rbegin()->first;
    mean_ = 0.0;
    for (auto [k, pk] : p_) mean_ += k * pk;
}

double OffspringLaw::prob(int k) const {
    auto it = p_.find(k);
    return it == p_.end() ? 0.0 : it->second;
}

RotorMatrix::RotorMatrix(std::map<int, std::vector<double>> rows) : rows_(std::move(rows)) {
    for (const auto& [k, row] : rows_) {
        if (k < 0 || k > kMaxDegree) throw InvalidLaw("rotor matrix: row index out of range");
        if (row.size() != static_cast<std::size_t>(k) + 1) {
            throw InvalidLaw("rotor matrix: row " + std::to_string(k) + " needs k+1 entries");
        }
        check_prob_vector(row, "rotor matrix row " + std::to_string(k));
    }
}

RotorMatrix RotorMatrix::uniform_for(const OffspringLaw& law) {
    std::map<int, std::vector<double>> rows;
    for (auto [k, pk] : law.support()) {
        rows.emplace(k, std::vector<double>(static_cast<std::size_t>(k) + 1, 1.0 / (k + 1)));
    }
    return RotorMatrix(std::move(rows));
}

const std::vector<double>& RotorMatrix::row(int k) const {
    auto it = rows_.find(k);
    if (it == rows_.end()) {
        throw MissingRow("rotor matrix: no row for offspring count " + std::to_string(k));
    }
    return it->second;
}

GenFun::GenFun(std::vector<double> coeffs) : c_(std::move(coeffs)) {
    if (c_.empty()) throw InvalidLaw("generating function: no coefficients");
    check_prob_vector(c_, "generating function");
}

double GenFun::eval(double s) const {
    double acc = 0.0;
    for (std::size_t i = c_.size(); i-- > 0;) acc = acc * s + c_[i];
    return acc;
}

double GenFun::deriv_eval(double s) const {
    double acc = 0.0;
    for (std::size_t i = c_.size(); i-- > 1;) acc = acc * s + static_cast<double>(i) * c_[i];
    return acc;
}

OffspringLaw good_child_law(const RotorLaw& law) {
    std::map<int, double> p;
    const int d = law.degree();
    for (int j = 0; j <= d; ++j) {
        const double pj = law.prob(d - j);
        if (pj > 0.0) p[j] = pj;
    }
    return OffspringLaw(std::move(p));
}

OffspringLaw gw_good_child_law(const OffspringLaw& offspring, const RotorMatrix& rotors) {
    std::map<int, double> nu;
    for (auto [k, pk] : offspring.support()) {
        const std::vector<double>& row = rotors.row(k);
        for (int l = 0; l <= k; ++l) {
            const double mass = pk * row[static_cast<std::size_t>(l)];
            if (mass > 0.0) nu[l] += mass;
        }
    }
    return OffspringLaw(std::move(nu));
}

GenFun genfun(const OffspringLaw& law) {
    std::vector<double> c(static_cast<std::size_t>(law.max_support()) + 1, 0.0);
    for (auto [k, pk] : law.support()) c[static_cast<std::size_t>(k)] = pk;
    return GenFun(std::move(c));
}

GenFun ConditionedGenFuns::h_coefficients() const {
    return GenFun(h_coeffs_);
}

ConditionedGenFuns conditioned_genfuns(const GenFun& f, double q) {
    if (!(q > 0.0 && q < 1.0)) {
        throw DegenerateConditioning("conditioned pgfs need 0 < q < 1, got q = " +
                                     std::to_string(q));
    }
    ConjugatePgf g(f, 1.0 - q, q, q, 1.0 - q);
    ConjugatePgf h(f, q, 0.0, 0.0, q);
    // h_j = c_j q^{j-1}; the vector sums to f(q)/q = 1 when q is a fixed point.
    std::span<const double> c = f.coeffs();
    std::vector<double> hc(c.size());
    double qpow = 1.0 / q;  // q^{j-1} built incrementally
    for (std::size_t j = 0; j < c.size(); ++j) {
        hc[j] = c[j] * qpow;
        qpow *= q;
    }
    return ConditionedGenFuns(std::move(g), std::move(h), q, std::move(hc));
}

}  // namespace rotor
