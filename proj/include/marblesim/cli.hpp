#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace marblesim::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kPass = 0, kAcceptanceFail = 1, kUsage = 2, kRuntimeAbort = 3 };

// Resolved settings of one command. Zero-valued dt, delta and replicas mean
// "use the command default" until resolve() fills them in.
struct ExperimentConfig {
    std::string command;
    std::string rate;  // trunc | half | constant; empty picks the command default
    double lambda = 3.0;
    double n = 1024.0;
    double r0 = 1.0;
    std::vector<double> levels{64.0, 256.0, 1024.0};
    double t = 1.0;
    double dt = 0.0;
    double delta = 0.0;
    std::vector<double> window{0.0, 1.0};
    double point = 0.0;         // vein: x of the query point
    std::optional<double> z;    // marble: point inside the window, default its centre
    double x0 = 0.0;
    unsigned split = 2;  // branching N
    double y = 1.0;
    std::size_t cap = 1000000;
    std::size_t replicas = 0;
    std::uint64_t seed = 1;
    std::string out = ".";
    std::vector<std::string> formats{"csv", "json"};
    bool render = false;
    bool svg = false;
    int width = 800;
    int height = 400;
    std::uint64_t palette_seed = 0;
    unsigned workers = 0;
};

// Parses "key = value" lines; blank lines and '#' comments are skipped.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path);

// Fills in command defaults and checks the config. Throws std::invalid_argument.
void resolve(ExperimentConfig& cfg);

// key=value lines echoed into every output file. Excludes settings that cannot
// change results (worker count, output directory).
std::vector<std::pair<std::string, std::string>> provenance(const ExperimentConfig& cfg);

std::string csv_field(const std::string& s);
std::string format_double(double v);

int run_command(const ExperimentConfig& cfg, std::ostream& log);

// Full front end: argv without the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace marblesim::cli
