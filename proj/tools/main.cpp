#include <capmin/capmin.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

int exit_code_for(capmin_status status) {
    switch (status) {
        case CAPMIN_OK: return kExitOk;
        case CAPMIN_ERROR_INVALID_ARGUMENT: return kExitUsage;
        case CAPMIN_ERROR_VALIDATION:
        case CAPMIN_ERROR_IO: return kExitValidation;
        case CAPMIN_ERROR_BUDGET:
        case CAPMIN_ERROR_NUMERICAL: return kExitNumerical;
    }
    return kExitNumerical;
}

int fail(capmin_status status) {
    std::cerr << "error (" << capmin_status_name(status) << "): " << capmin_last_error()
              << "\n";
    return exit_code_for(status);
}

struct ProcessDeleter {
    void operator()(capmin_process* p) const { capmin_process_free(p); }
};
struct ResultDeleter {
    void operator()(capmin_result* r) const { capmin_result_free(r); }
};
using ProcessHandle = std::unique_ptr<capmin_process, ProcessDeleter>;
using ResultHandle = std::unique_ptr<capmin_result, ResultDeleter>;

struct SolveFlags {
    double xi = 1e-6;
    double alpha = 1.0;
    double newton_tol = 1e-10;
    std::string prior = "opt";      // opt | fixed
    std::string capacity = "quad";  // quad | exact
    int threads = 0;
    std::int64_t max_iters = 200000;
    bool override_budget = false;
};

void apply_flags(capmin_solve_options& options, const SolveFlags& flags) {
    capmin_solve_options_init(&options);
    options.xi_bits = flags.xi;
    options.alpha = flags.alpha;
    options.newton_tol = flags.newton_tol;
    options.prior_mode = flags.prior == "fixed" ? CAPMIN_PRIOR_FIXED : CAPMIN_PRIOR_OPTIMIZE;
    options.capacity_mode =
        flags.capacity == "exact" ? CAPMIN_CAPACITY_EXACT : CAPMIN_CAPACITY_QUADRATIC;
    options.threads = flags.threads;
    options.max_iterations = flags.max_iters;
    options.override_memory_budget = flags.override_budget ? 1 : 0;
}

json run_record(const char* file, const SolveFlags& flags, const capmin_result* result) {
    json record;
    record["schema"] = 1;

    json problem;
    problem["file"] = file ? file : "";
    record["problem"] = problem;

    json config;
    config["xi_bits"] = flags.xi;
    config["alpha"] = flags.alpha;
    config["newton_tol"] = flags.newton_tol;
    config["prior_mode"] = flags.prior == "fixed" ? "fixed" : "optimize";
    config["capacity_mode"] = flags.capacity == "exact" ? "exact" : "quadratic";
    config["max_iterations"] = flags.max_iters;
    config["threads"] = flags.threads;
    record["config"] = config;

    json res;
    const double value = capmin_result_value_bits(result);
    res["value_bits"] = value;
    res["termination"] = capmin_result_termination_name(result);
    res["converged"] = capmin_result_termination(result) == CAPMIN_TERMINATED_CONVERGED;
    res["iterations"] = capmin_result_iterations(result);
    res["sequence_space_size"] = capmin_result_sequence_space_size(result);
    // Single-shot interval implied by the asymptotic value:
    // [value, value + 2*log2(value + 1) + 2*log2(e)].
    res["single_shot_interval_bits"] = {
        value, value + 2.0 * std::log2(value + 1.0) + 2.0 * std::log2(std::exp(1.0))};

    std::vector<double> prior(capmin_result_num_inputs(result));
    if (!prior.empty()) capmin_result_prior(result, prior.data(), prior.size());
    res["final_prior"] = prior;

    json timing;
    timing["dual_seconds"] = capmin_result_phase_seconds(result, CAPMIN_PHASE_DUAL);
    timing["capacity_seconds"] = capmin_result_phase_seconds(result, CAPMIN_PHASE_CAPACITY);
    timing["sweep_seconds"] = capmin_result_phase_seconds(result, CAPMIN_PHASE_SWEEP);
    timing["total_seconds"] = capmin_result_phase_seconds(result, CAPMIN_PHASE_TOTAL);
    res["timing"] = timing;

    double excess = 0, slackness = 0, marginal = 0, prior_res = 0;
    capmin_result_optimality(result, &excess, &slackness, &marginal, &prior_res);
    json optimality;
    optimality["max_potential_excess"] = excess;
    optimality["complementary_slackness"] = slackness;
    optimality["marginal_residual"] = marginal;
    optimality["prior_residual"] = prior_res;
    res["optimality"] = optimality;

    json history = json::array();
    const std::int64_t rounds = capmin_result_history_length(result);
    for (std::int64_t i = 0; i < rounds; ++i) {
        std::int64_t iter = 0;
        double lo = 0, hi = 0, gap = 0, seconds = 0;
        capmin_result_history_entry(result, i, &iter, &lo, &hi, &gap, &seconds);
        history.push_back({{"iter", iter},
                           {"c_lower_bits", lo},
                           {"c_upper_bits", hi},
                           {"gap_bits", gap},
                           {"seconds", seconds}});
    }
    res["history"] = history;
    record["result"] = res;
    return record;
}

bool write_bounds_csv(const std::string& path, const capmin_result* result) {
    std::ofstream out(path);
    if (!out) return false;
    out << "iter,c_lower_bits,c_upper_bits,gap_bits,seconds\n";
    char line[256];
    const std::int64_t rounds = capmin_result_history_length(result);
    for (std::int64_t i = 0; i < rounds; ++i) {
        std::int64_t iter = 0;
        double lo = 0, hi = 0, gap = 0, seconds = 0;
        capmin_result_history_entry(result, i, &iter, &lo, &hi, &gap, &seconds);
        std::snprintf(line, sizeof(line), "%lld,%.17g,%.17g,%.17g,%.17g\n",
                      static_cast<long long>(iter), lo, hi, gap, seconds);
        out << line;
    }
    return static_cast<bool>(out);
}

int cmd_generate(const std::string& kind, int arg1, int arg2, const std::string& out_path) {
    capmin_process* raw = nullptr;
    capmin_status status = kind == "planar" ? capmin_process_planar(arg1, arg2, &raw)
                                            : capmin_process_nonplanar(arg1, &raw);
    if (status != CAPMIN_OK) return fail(status);
    ProcessHandle process(raw);
    status = capmin_process_write_json(process.get(), out_path.c_str());
    if (status != CAPMIN_OK) return fail(status);
    int32_t na = 0, nb = 0, ns = 0;
    capmin_process_dimensions(process.get(), &na, &nb, &ns);
    std::cout << "wrote " << out_path << " (|A|=" << na << ", |B|=" << nb << ", |S|=" << ns
              << ")\n";
    return kExitOk;
}

int cmd_solve(const std::string& file, const SolveFlags& flags, std::string record_path,
              std::string csv_path) {
    capmin_process* praw = nullptr;
    capmin_status status = capmin_process_read_json(file.c_str(), &praw);
    if (status != CAPMIN_OK) return fail(status);
    ProcessHandle process(praw);

    capmin_solve_options options;
    apply_flags(options, flags);
    capmin_result* rraw = nullptr;
    status = capmin_solve(process.get(), &options, &rraw);
    if (status != CAPMIN_OK) return fail(status);
    ResultHandle result(rraw);

    const std::filesystem::path stem = std::filesystem::path(file).stem();
    if (record_path.empty()) record_path = stem.string() + ".record.json";
    if (csv_path.empty()) csv_path = stem.string() + ".bounds.csv";

    std::ofstream record_out(record_path);
    if (!record_out) {
        std::cerr << "error: cannot write " << record_path << "\n";
        return kExitValidation;
    }
    record_out << run_record(file.c_str(), flags, result.get()).dump(2) << "\n";
    if (!write_bounds_csv(csv_path, result.get())) {
        std::cerr << "error: cannot write " << csv_path << "\n";
        return kExitValidation;
    }

    const std::int64_t rounds = capmin_result_history_length(result.get());
    double lo = 0, hi = 0, gap = 0;
    if (rounds > 0)
        capmin_result_history_entry(result.get(), rounds - 1, nullptr, &lo, &hi, &gap, nullptr);
    std::printf("value          %.9f bits\n", capmin_result_value_bits(result.get()));
    std::printf("bounds         [%.9f, %.9f], gap %.3g bits\n", lo, hi, gap);
    std::printf("termination    %s after %lld iterations\n",
                capmin_result_termination_name(result.get()),
                static_cast<long long>(capmin_result_iterations(result.get())));
    std::printf("record         %s\n", record_path.c_str());
    std::printf("bounds csv     %s\n", csv_path.c_str());
    if (capmin_result_termination(result.get()) == CAPMIN_TERMINATED_NUMERICAL_FAILURE) {
        std::cerr << "numerical failure: " << capmin_result_failure_message(result.get())
                  << "\n";
        return kExitNumerical;
    }
    return kExitOk;
}

int cmd_capacity(const std::string& file, double tol) {
    std::ifstream in(file);
    if (!in) {
        std::cerr << "error: cannot open " << file << "\n";
        return kExitValidation;
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        std::cerr << "error: channel file is not valid JSON: " << e.what() << "\n";
        return kExitValidation;
    }
    int32_t num_inputs = 0, num_outputs = 0;
    std::vector<double> table;
    try {
        num_inputs = j.at("num_inputs").get<int32_t>();
        num_outputs = j.at("num_outputs").get<int32_t>();
        table = j.at("prob").get<std::vector<double>>();
    } catch (const json::exception& e) {
        std::cerr << "error: channel file has a malformed field: " << e.what() << "\n";
        return kExitValidation;
    }
    if (table.size() != static_cast<std::size_t>(num_inputs) * num_outputs) {
        std::cerr << "error: prob array length does not match num_inputs*num_outputs\n";
        return kExitValidation;
    }
    double capacity = 0.0;
    std::vector<double> maximizer(num_inputs);
    capmin_status status = capmin_channel_capacity(table.data(), num_inputs, num_outputs, tol,
                                                   &capacity, maximizer.data());
    if (status != CAPMIN_OK) return fail(status);
    std::printf("capacity %.12f bits\n", capacity);
    std::printf("maximizer");
    for (double p : maximizer) std::printf(" %.12g", p);
    std::printf("\n");
    return kExitOk;
}

int cmd_oracle(const std::string& file, double tol) {
    capmin_process* praw = nullptr;
    capmin_status status = capmin_process_read_json(file.c_str(), &praw);
    if (status != CAPMIN_OK) return fail(status);
    ProcessHandle process(praw);
    double value = 0.0;
    status = capmin_oracle_complexity(process.get(), tol, &value);
    if (status != CAPMIN_OK) return fail(status);
    std::printf("complexity %.9f bits (brute force, tolerance %.3g)\n", value, tol);
    return kExitOk;
}

int cmd_bench(int bmin, int bmax, const SolveFlags& flags, int repeats,
              const std::string& out_path) {
    if (bmin < 1 || bmax < bmin) {
        std::cerr << "error: need 1 <= bmin <= bmax\n";
        return kExitUsage;
    }
    std::ofstream out(out_path);
    if (!out) {
        std::cerr << "error: cannot write " << out_path << "\n";
        return kExitValidation;
    }
    out << "num_measurements,seconds,value_bits\n";
    std::printf("%4s %12s %14s\n", "|B|", "seconds", "value_bits");
    for (int b = bmin; b <= bmax; ++b) {
        capmin_process* praw = nullptr;
        capmin_status status = capmin_process_planar(2 * b, b, &praw);
        if (status != CAPMIN_OK) return fail(status);
        ProcessHandle process(praw);

        capmin_solve_options options;
        apply_flags(options, flags);

        double best_seconds = std::numeric_limits<double>::infinity();
        double value = 0.0;
        for (int rep = 0; rep < std::max(repeats, 1); ++rep) {
            capmin_result* rraw = nullptr;
            const auto start = std::chrono::steady_clock::now();
            status = capmin_solve(process.get(), &options, &rraw);
            const double elapsed =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            if (status != CAPMIN_OK) return fail(status);
            ResultHandle result(rraw);
            best_seconds = std::min(best_seconds, elapsed);
            value = capmin_result_value_bits(result.get());
        }
        char line[128];
        std::snprintf(line, sizeof(line), "%d,%.17g,%.17g\n", b, best_seconds, value);
        out << line << std::flush;
        std::printf("%4d %12.6f %14.9f\n", b, best_seconds, value);
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"capmin: asymptotic communication complexity of prepare-and-measure "
                 "processes"};
    app.require_subcommand(1);

    // generate
    auto* generate = app.add_subcommand("generate", "write a process table to JSON");
    generate->require_subcommand(1);
    int gen_states = 0, gen_meas = 0, gen_b0 = 0;
    std::string gen_out;
    auto* gen_planar = generate->add_subcommand("planar", "states/measurements on a circle");
    gen_planar->add_option("num_states", gen_states, "|A|")->required();
    gen_planar->add_option("num_measurements", gen_meas, "|B|")->required();
    gen_planar->add_option("output", gen_out, "output JSON file")->required();
    auto* gen_nonplanar =
        generate->add_subcommand("nonplanar", "three orthogonal planes, shared axes merged");
    gen_nonplanar->add_option("half_plane_count", gen_b0, "measurements per plane (even)")
        ->required();
    gen_nonplanar->add_option("output", gen_out, "output JSON file")->required();

    // solve
    auto* solve = app.add_subcommand("solve", "compute the complexity of a process file");
    std::string solve_file, record_path, csv_path;
    SolveFlags flags;
    solve->add_option("process", solve_file, "process JSON file")->required();
    solve->add_option("--xi", flags.xi, "certificate-gap accuracy in bits");
    solve->add_option("--alpha", flags.alpha, "over-relaxation exponent (>= 1)");
    solve->add_option("--newton-tol", flags.newton_tol, "dual marginal residual tolerance");
    solve->add_option("--prior", flags.prior, "opt | fixed (fixed = uniform prior)")
        ->check(CLI::IsMember({"opt", "fixed"}));
    solve->add_option("--capacity", flags.capacity, "quad | exact prior update")
        ->check(CLI::IsMember({"quad", "exact"}));
    solve->add_option("--threads", flags.threads, "worker threads (0 = hardware)");
    solve->add_option("--max-iters", flags.max_iters, "outer iteration cap");
    solve->add_flag("--override-memory-budget", flags.override_budget,
                    "skip the sequence-space budget check");
    solve->add_option("--record", record_path, "run record JSON path");
    solve->add_option("--csv", csv_path, "bound history CSV path");

    // capacity
    auto* capacity = app.add_subcommand("capacity", "capacity of a dense channel file");
    std::string capacity_file;
    double capacity_tol = 1e-9;
    capacity->add_option("channel", capacity_file, "channel JSON file")->required();
    capacity->add_option("--tol", capacity_tol, "bound-gap tolerance in bits");

    // oracle
    auto* oracle = app.add_subcommand("oracle", "brute-force value for small processes");
    std::string oracle_file;
    double oracle_tol = 1e-5;
    oracle->add_option("process", oracle_file, "process JSON file")->required();
    oracle->add_option("--tol", oracle_tol, "certification tolerance in bits");

    // bench
    auto* bench = app.add_subcommand("bench", "timing sweep over planar problem sizes");
    bench->require_subcommand(1);
    auto* bench_planar = bench->add_subcommand("planar", "planar(2|B|, |B|) for a |B| range");
    int bmin = 3, bmax = 8, repeats = 3;
    std::string bench_out = "bench.csv";
    SolveFlags bench_flags;
    bench_flags.prior = "fixed"; // symmetric problems: the uniform prior is optimal
    bench_planar->add_option("--bmin", bmin, "smallest measurement count");
    bench_planar->add_option("--bmax", bmax, "largest measurement count");
    bench_planar->add_option("--xi", bench_flags.xi, "certificate-gap accuracy in bits");
    bench_planar->add_option("--repeats", repeats, "timing repeats (best is kept)");
    bench_planar->add_option("--threads", bench_flags.threads, "worker threads");
    bench_planar->add_option("--prior", bench_flags.prior, "opt | fixed")
        ->check(CLI::IsMember({"opt", "fixed"}));
    bench_planar->add_option("--out", bench_out, "output CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
    }

    if (gen_planar->parsed()) return cmd_generate("planar", gen_states, gen_meas, gen_out);
    if (gen_nonplanar->parsed()) return cmd_generate("nonplanar", gen_b0, 0, gen_out);
    if (solve->parsed()) return cmd_solve(solve_file, flags, record_path, csv_path);
    if (capacity->parsed()) return cmd_capacity(capacity_file, capacity_tol);
    if (oracle->parsed()) return cmd_oracle(oracle_file, oracle_tol);
    if (bench_planar->parsed()) return cmd_bench(bmin, bmax, bench_flags, repeats, bench_out);
    return kExitUsage;
}
