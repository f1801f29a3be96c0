#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "softseg/experiment.hpp"

namespace fs = std::filesystem;
using namespace softseg;

namespace {

int cmd_generate_phantoms(const std::string& spec_path, const std::string& out_dir) {
    const PhantomConfig pc = load_phantom_config(spec_path);
    const phantom::Dataset ds = phantom::gen_dataset(pc.spec, pc.centers, pc.n_per_center);
    phantom::save_dataset(ds, out_dir);
    std::cout << "wrote " << ds.subjects.size() << " subjects from " << pc.centers.size() << " centers to "
              << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& candidate, int iteration,
              std::string run_dir) {
    const RunConfig cfg = load_run_config(config_path);
    (void)candidate_by_name(candidate, cfg.awing);  // reject bad names before any work
    const phantom::Dataset ds = phantom::load_dataset(cfg.dataset_manifest);
    if (run_dir.empty())
        run_dir = (fs::path(output_root()) / cfg.output_dir / "runs" /
                   exp::run_dir_name(candidate, iteration))
                      .string();
    const bool converged = exp::train_run(cfg, ds, candidate, iteration, run_dir);
    std::cout << "run " << run_dir << (converged ? " converged" : " did not converge") << "\n";
    return converged ? 0 : 2;
}

int cmd_evaluate(const std::string& run_dir, const std::string& split) {
    nlohmann::json meta;
    {
        std::ifstream in((fs::path(run_dir) / "metadata.json").string());
        if (!in) throw StateError("missing metadata.json in " + run_dir);
        in >> meta;
    }
    const RunConfig cfg = run_config_from_json(meta.at("config"));
    const phantom::Dataset ds = phantom::load_dataset(cfg.dataset_manifest);
    exp::evaluate_run(cfg, ds, run_dir, split);
    std::cout << "evaluated " << run_dir << " on split " << split << "\n";
    return 0;
}

int cmd_experiment(const std::string& plan_path, bool resume, int jobs_override, std::string out_dir) {
    RunConfig cfg = load_run_config(plan_path);
    if (jobs_override > 0) cfg.jobs = jobs_override;
    if (out_dir.empty()) out_dir = (fs::path(output_root()) / cfg.output_dir).string();
    exp::run_experiment(cfg, out_dir, resume, [](const std::string& msg) { std::cout << msg << "\n"; });
    std::cout << "experiment complete: " << out_dir << "\n";
    return 0;
}

int cmd_report(const std::string& results_dir) {
    exp::write_report(results_dir);
    std::cout << "report written to " << (fs::path(results_dir) / "report").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SoftSeg training scheme: soft ground truths, normalized-ReLU activation, regression loss"};
    app.require_subcommand(1);

    std::string spec_path, out_dir;
    auto* gen = app.add_subcommand("generate-phantoms", "Generate a synthetic multi-center dataset");
    gen->add_option("--spec", spec_path, "Phantom spec file (JSON)")->required();
    gen->add_option("--out", out_dir, "Output directory")->required();

    std::string config_path, candidate, run_dir;
    int iteration = 0;
    auto* train_cmd = app.add_subcommand("train", "Train one candidate for one iteration");
    train_cmd->add_option("--config", config_path, "Run config file (JSON)")->required();
    train_cmd->add_option("--candidate", candidate, "Candidate name (see candidates table)")->required();
    train_cmd->add_option("--iteration", iteration, "Cross-validation iteration index")->required();
    train_cmd->add_option("--out", run_dir, "Run directory (default: <output root>/<output_dir>/runs/...)");

    std::string eval_run, eval_split = "test";
    auto* eval_cmd = app.add_subcommand("evaluate", "Threshold sweep on train+val, metrics on a split");
    eval_cmd->add_option("--run", eval_run, "Run directory")->required();
    eval_cmd->add_option("--split", eval_split, "Split to evaluate: test or val");

    std::string plan_path, exp_out;
    bool resume = false;
    int jobs = 0;
    auto* exp_cmd = app.add_subcommand("experiment", "Run the full iterations x candidates plan");
    exp_cmd->add_option("--plan", plan_path, "Plan file (same schema as the run config)")->required();
    exp_cmd->add_flag("--resume", resume, "Skip completed runs instead of refusing a partial store");
    exp_cmd->add_option("--jobs", jobs, "Parallel workers (default from the plan)");
    exp_cmd->add_option("--out", exp_out, "Results directory (default: <output root>/<output_dir>)");

    std::string results_dir;
    auto* report_cmd = app.add_subcommand("report", "Aggregate a result store into the report bundle");
    report_cmd->add_option("--results", results_dir, "Results directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_generate_phantoms(spec_path, out_dir);
        if (train_cmd->parsed()) return cmd_train(config_path, candidate, iteration, run_dir);
        if (eval_cmd->parsed()) return cmd_evaluate(eval_run, eval_split);
        if (exp_cmd->parsed()) return cmd_experiment(plan_path, resume, jobs, exp_out);
        if (report_cmd->parsed()) return cmd_report(results_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
