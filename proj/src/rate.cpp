#include "marblesim/rate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace marblesim {

namespace {
void check_lambda(double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("rate: lambda must be >= 0");
}
}  // namespace

RateFunction RateFunction::power_law(double lambda) {
    check_lambda(lambda);
    RateFunction r;
    r.kind_ = Kind::PowerLaw;
    r.lambda_ = lambda;
    return r;
}

RateFunction RateFunction::truncated_power_law(double lambda, double n) {
    check_lambda(lambda);
    if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("rate: truncation level must be positive");
    RateFunction r;
    r.kind_ = Kind::TruncatedPowerLaw;
    r.lambda_ = lambda;
    r.n_ = n;
    return r;
}

RateFunction RateFunction::constant(double r0) {
    if (!(r0 >= 0.0) || !std::isfinite(r0)) throw std::invalid_argument("rate: constant must be >= 0");
    RateFunction r;
    r.kind_ = Kind::Constant;
    r.r0_ = r0;
    return r;
}

RateFunction RateFunction::half_lambda_trunc(double lambda) {
    check_lambda(lambda);
    RateFunction r;
    r.kind_ = Kind::HalfLambdaTrunc;
    r.lambda_ = lambda;
    return r;
}

RateFunction RateFunction::table(std::vector<std::pair<double, double>> breakpoints) {
    if (breakpoints.empty()) throw std::invalid_argument("rate: empty table");
    std::sort(breakpoints.begin(), breakpoints.end());
    for (auto& [g, v] : breakpoints) {
        if (!(v >= 0.0) || !std::isfinite(v) || !std::isfinite(g))
            throw std::invalid_argument("rate: table values must be finite and >= 0");
    }
    RateFunction r;
    r.kind_ = Kind::Table;
    r.table_ = std::move(breakpoints);
    return r;
}

double RateFunction::operator()(double g) const {
    switch (kind_) {
        case Kind::Constant: return r0_;
        case Kind::PowerLaw:
            return g > 0.0 ? lambda_ / (g * g) : (lambda_ > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
        case Kind::TruncatedPowerLaw: return g > 0.0 ? std::min(lambda_ / (g * g), n_) : (lambda_ > 0.0 ? n_ : 0.0);
        case Kind::HalfLambdaTrunc: return g > 0.0 ? std::min(lambda_ / (g * g), 0.5 * lambda_) : 0.5 * lambda_;
        case Kind::Table: {
            auto it = std::upper_bound(table_.begin(), table_.end(), g,
                                       [](double x, const auto& bp) { return x < bp.first; });
            if (it == table_.begin()) return table_.front().second;
            return std::prev(it)->second;
        }
    }
    return 0.0;
}

double RateFunction::bound() const {
    switch (kind_) {
        case Kind::Constant: return r0_;
        case Kind::PowerLaw: return lambda_ > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
        case Kind::TruncatedPowerLaw: return lambda_ > 0.0 ? n_ : 0.0;
        case Kind::HalfLambdaTrunc: return 0.5 * lambda_;
        case Kind::Table: {
            double m = 0.0;
            for (auto& [g, v] : table_) m = std::max(m, v);
            return m;
        }
    }
    return 0.0;
}

bool RateFunction::bounded() const { return std::isfinite(bound()); }

RateFunction RateFunction::truncated(double n) const {
    switch (kind_) {
        case Kind::PowerLaw: return truncated_power_law(lambda_, n);
        case Kind::TruncatedPowerLaw: return truncated_power_law(lambda_, std::min(n, n_));
        case Kind::Constant: return constant(std::min(r0_, n));
        case Kind::HalfLambdaTrunc:
            return n >= 0.5 * lambda_ ? *this : truncated_power_law(lambda_, n);
        case Kind::Table: {
            auto t = table_;
            for (auto& [g, v] : t) v = std::min(v, n);
            return table(std::move(t));
        }
    }
    return *this;
}

std::string RateFunction::describe() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind_) {
        case Kind::PowerLaw: os << "power(" << lambda_ << ")"; break;
        case Kind::TruncatedPowerLaw: os << "power(" << lambda_ << ")^" << n_; break;
        case Kind::Constant: os << "const(" << r0_ << ")"; break;
        case Kind::HalfLambdaTrunc: os << "half(" << lambda_ << ")"; break;
        case Kind::Table: os << "table[" << table_.size() << "]"; break;
    }
    return os.str();
}

nlohmann::json RateFunction::to_json() const {
    nlohmann::json j;
    switch (kind_) {
        case Kind::PowerLaw: j = {{"kind", "power"}, {"lambda", lambda_}}; break;
        case Kind::TruncatedPowerLaw: j = {{"kind", "truncated_power"}, {"lambda", lambda_}, {"n", n_}}; break;
        case Kind::Constant: j = {{"kind", "constant"}, {"r0", r0_}}; break;
        case Kind::HalfLambdaTrunc: j = {{"kind", "half_lambda"}, {"lambda", lambda_}}; break;
        case Kind::Table: {
            j = {{"kind", "table"}};
            auto arr = nlohmann::json::array();
            for (auto& [g, v] : table_) arr.push_back({g, v});
            j["breakpoints"] = arr;
            break;
        }
    }
    return j;
}

}  // namespace marblesim
