#include "pushacc/harness.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

void print_summary(const pushacc::ExperimentResult& res, const std::filesystem::path& dir) {
    for (const auto& a : res.summary.at("algorithms")) {
        std::cout << a.at("label").get<std::string>() << ": final gap " << a.at("final_gap").get<double>();
        const auto& reach = a.at("iterations_to");
        for (const auto& [thr, k] : reach.items()) {
            std::cout << ", <=" << thr << " at ";
            if (k.is_null()) std::cout << "-";
            else std::cout << k.get<std::size_t>();
        }
        std::cout << '\n';
    }
    if (res.summary.contains("comparison")) std::cout << "comparison: " << res.summary.at("comparison").dump() << '\n';
    std::cout << "outputs written to " << dir.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decentralized optimization over directed graphs: experiment runner"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run an experiment described by a JSON config");
    std::string config_path;
    std::string run_out;
    std::optional<std::uint64_t> seed;
    run->add_option("--config", config_path, "experiment config file")->required()->check(CLI::ExistingFile);
    run->add_option("--out", run_out, "output directory (overrides the config)");
    run->add_option("--seed", seed, "initialization seed (overrides the config)");

    auto* rep = app.add_subcommand("reproduce", "run the 20-agent logistic-regression comparison");
    std::string case_name;
    std::string data;
    std::string rep_out = "reproduce_out";
    std::size_t iters = 3000;
    rep->add_option("--case", case_name, "nonstrongly or strongly")
        ->required()
        ->check(CLI::IsMember({"nonstrongly", "strongly"}));
    rep->add_option("--data", data, "CSV data file, or 'synthetic'")->required();
    rep->add_option("--out", rep_out, "output directory");
    rep->add_option("--iters", iters, "iteration count")->check(CLI::PositiveNumber);

    auto* plot = app.add_subcommand("plot", "render trace CSV files as an SVG chart");
    std::vector<std::string> inputs;
    std::string svg_out;
    std::string axes = "semilogy";
    plot->add_option("--in", inputs, "trace CSV files")->required()->expected(1, -1);
    plot->add_option("--out", svg_out, "SVG output path")->required();
    plot->add_option("--axes", axes, "loglog or semilogy")->check(CLI::IsMember({"loglog", "semilogy"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*run) {
            pushacc::ExperimentConfig cfg = pushacc::load_config(config_path);
            if (!run_out.empty()) cfg.output_dir = run_out;
            if (seed) cfg.init_seed = *seed;
            auto res = pushacc::run_experiment(cfg);
            print_summary(res, cfg.output_dir);
        } else if (*rep) {
            const auto c = case_name == "strongly" ? pushacc::ReproductionCase::strongly : pushacc::ReproductionCase::nonstrongly;
            auto res = pushacc::reproduce_reference_experiment(data, c, rep_out, iters);
            print_summary(res, rep_out);
        } else if (*plot) {
            std::vector<pushacc::RunTrace> traces;
            for (const auto& in : inputs) traces.push_back(pushacc::read_trace_csv(in));
            pushacc::emit_svg_plot(traces, svg_out, axes == "loglog" ? pushacc::PlotAxes::loglog : pushacc::PlotAxes::semilogy);
            std::cout << "wrote " << svg_out << '\n';
        }
    } catch (const pushacc::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 1;
    } catch (const pushacc::DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << '\n';
        return 2;
    } catch (const pushacc::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "file error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
