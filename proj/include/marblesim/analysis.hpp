#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace marblesim {

enum class Regime { Subcritical, Critical, Supercritical };

struct LambdaParams {
    double lambda = 0.0;
    double alpha = 1.0;  // positive root of a(a-1) = lambda
    double beta = 0.0;   // (alpha-1)/2
    double c = 1.5;      // (6-lambda)/4
    double bessel_dim = 3.0;
    Regime regime = Regime::Subcritical;
};

LambdaParams lambda_params(double lambda);
const char* regime_name(Regime r);

struct LampertiRoot {
    std::optional<double> theta0;
    bool has_recurrent_extension = false;
};

// Positive root of theta^2/2 + theta/2 - lambda/2.
LampertiRoot lamperti_root(double lambda);

struct SampleMeta {
    double lambda = 0.0;
    double n = 0.0;  // truncation level, 0 when untruncated
    double t = 0.0;
    double dt = 0.0;
    std::uint64_t seed = 0;
};

struct EmpiricalSample {
    std::vector<double> values;
    SampleMeta meta;

    std::size_t size() const { return values.size(); }
};

nlohmann::json to_json(const SampleMeta& m, std::size_t sample_size);

// One verdict in a report: {statistic, threshold, pass, meta}.
struct Check {
    std::string name;
    double statistic = 0.0;
    double threshold = 0.0;
    bool pass = false;
    nlohmann::json meta = nlohmann::json::object();
};

nlohmann::json to_json(const Check& c);

using Cdf = std::function<double(double)>;

Cdf uniform_cdf();
Cdf gamma_cdf(double shape, double scale = 1.0);
Cdf beta_cdf(double a, double b);

double ks_distance(std::span<const double> sample, const Cdf& cdf);
double ks_distance(const EmpiricalSample& sample, const Cdf& cdf);
double ks_two_sample(std::span<const double> a, std::span<const double> b);

// Asymptotic 1% critical values.
double ks_threshold(std::size_t n);
double ks_threshold(std::size_t n, std::size_t m);

struct TailFit {
    double beta_hat = 0.0;
    double stderr_ = 0.0;
    double intercept = 0.0;
    std::size_t points = 0;
};

TailFit tail_exponent_fit(std::span<const std::pair<double, double>> survival_curve,
                          std::pair<double, double> window);

struct ScalingReport {
    double dispersion = 0.0;
    // per level, the collapse statistic on the (r, theta) grid, row-major in r
    std::map<double, std::vector<double>> collapse;
    std::vector<double> r_grid;
    std::vector<double> theta_grid;
};

// Collapse statistic -log(Lhat_n)/(r theta^beta) with Lhat_n = (E e^{-theta E})^{floor(n^beta r)}.
ScalingReport subordinator_scaling_check(const std::map<double, EmpiricalSample>& excursion_lengths_by_n,
                                         double beta, std::vector<double> r_grid = {0.5, 1.0, 2.0},
                                         std::vector<double> theta_grid = {0.5, 1.0, 2.0});

double quantile(std::vector<double> values, double p);
double median(std::vector<double> values);
double mean(std::span<const double> v);
double sample_variance(std::span<const double> v);
double pearson(std::span<const double> a, std::span<const double> b);

}  // namespace marblesim
