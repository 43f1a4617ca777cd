#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace marblesim {

// Fragmentation rate R(g) as a function of gap size.
class RateFunction {
public:
    enum class Kind { PowerLaw, TruncatedPowerLaw, Constant, HalfLambdaTrunc, Table };

    static RateFunction power_law(double lambda);
    static RateFunction truncated_power_law(double lambda, double n);
    static RateFunction constant(double r0);
    // lambda/g^2 capped at lambda/2.
    static RateFunction half_lambda_trunc(double lambda);
    // Piecewise constant: value_i on [g_i, g_{i+1}), value_0 below g_0.
    static RateFunction table(std::vector<std::pair<double, double>> breakpoints);

    Kind kind() const { return kind_; }
    double lambda() const { return lambda_; }
    double n() const { return n_; }

    double operator()(double g) const;
    double bound() const;
    bool bounded() const;

    // R(g) ∧ n; a power law becomes TruncatedPowerLaw.
    RateFunction truncated(double n) const;

    std::string describe() const;
    nlohmann::json to_json() const;

private:
    Kind kind_ = Kind::Constant;
    double lambda_ = 0.0;
    double n_ = 0.0;
    double r0_ = 0.0;
    std::vector<std::pair<double, double>> table_;
};

}  // namespace marblesim
