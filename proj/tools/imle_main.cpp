#include <iostream>

#include <CLI11.hpp>

#include "imle/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Implicit maximum likelihood estimation: training, sampling, evaluation, verification"};
    app.require_subcommand(1);

    imle::TrainArgs train;
    std::string train_config;
    std::string train_out;
    std::uint64_t train_seed = 0;
    auto* train_cmd = app.add_subcommand("train", "Train a generator from a JSON config");
    train_cmd->add_option("--config", train_config, "JSON run config")->required();
    auto* train_seed_opt = train_cmd->add_option("--seed", train_seed, "Override the config seed");
    auto* train_out_opt = train_cmd->add_option("--out", train_out, "Override the output directory");

    imle::SampleArgs sample;
    std::string sample_ckpt, sample_out, sample_nb;
    auto* sample_cmd = app.add_subcommand("sample", "Draw samples from a checkpoint");
    sample_cmd->add_option("--checkpoint", sample_ckpt, "Checkpoint file")->required();
    sample_cmd->add_option("--out", sample_out, "Output file")->required();
    sample_cmd->add_option("--count", sample.count, "Number of samples")->capture_default_str();
    sample_cmd->add_option("--format", sample.format, "csv or ppm-grid")->capture_default_str();
    sample_cmd->add_option("--grid-cols", sample.grid_cols, "Tiles per grid row")->capture_default_str();
    sample_cmd->add_option("--seed", sample.seed, "Sampling seed")->capture_default_str();
    auto* sample_nb_opt =
        sample_cmd->add_option("--neighbours", sample_nb, "Training data for a nearest-neighbour audit");
    sample_cmd->add_flag("--neighbours-has-header", sample.neighbours_has_header, "CSV audit data has a header row");

    imle::EvalArgs eval;
    std::string eval_ckpt, eval_test, eval_out, eval_grid;
    auto* eval_cmd = app.add_subcommand("eval", "Parzen-window log-likelihood of test data");
    eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
    eval_cmd->add_option("--test", eval_test, "Test data (.csv or IDX)")->required();
    eval_cmd->add_option("--out", eval_out, "Output CSV report")->required();
    eval_cmd->add_flag("--test-has-header", eval.test_has_header, "CSV test data has a header row");
    eval_cmd->add_option("--centers", eval.centers, "Number of model samples used as centers")->capture_default_str();
    auto* eval_grid_opt = eval_cmd->add_option("--sigma-grid", eval_grid, "Comma-separated bandwidths");
    eval_cmd->add_option("--validation-fraction", eval.validation_fraction, "Share of test data for bandwidth selection")
        ->capture_default_str();
    eval_cmd->add_option("--seed", eval.seed, "Seed for centers and the split")->capture_default_str();

    imle::InterpolateArgs interp;
    std::string interp_ckpt, interp_out;
    auto* interp_cmd = app.add_subcommand("interpolate", "Latent-space interpolation grid");
    interp_cmd->add_option("--checkpoint", interp_ckpt, "Checkpoint file")->required();
    interp_cmd->add_option("--out", interp_out, "Output PPM")->required();
    interp_cmd->add_option("--endpoints", interp.endpoints, "Number of latent endpoints")->capture_default_str();
    interp_cmd->add_option("--steps", interp.steps, "Images per segment")->capture_default_str();
    interp_cmd->add_option("--seed", interp.seed, "Endpoint seed")->capture_default_str();

    imle::VerifyArgs verify;
    std::string verify_out = "verify";
    auto* verify_cmd = app.add_subcommand("verify", "Numerical checks of the estimator theory");
    verify_cmd->add_option("--suite", verify.suite, "lemma1, lemma2, lemma3-psi, theorem1, tail-integral or all")
        ->capture_default_str();
    verify_cmd->add_option("--seed", verify.seed, "Seed")->capture_default_str();
    verify_cmd->add_option("--out", verify_out, "Report directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : imle::exit_code::config;
    }

    try {
        if (*train_cmd) {
            train.config = train_config;
            if (*train_seed_opt) train.seed = train_seed;
            if (*train_out_opt) train.out = train_out;
            return imle::cmd_train(train, std::cout, std::cerr);
        }
        if (*sample_cmd) {
            sample.checkpoint = sample_ckpt;
            sample.out = sample_out;
            if (*sample_nb_opt) sample.neighbours = sample_nb;
            return imle::cmd_sample(sample, std::cout, std::cerr);
        }
        if (*eval_cmd) {
            eval.checkpoint = eval_ckpt;
            eval.test = eval_test;
            eval.out = eval_out;
            if (*eval_grid_opt) eval.sigma_grid = eval_grid;
            return imle::cmd_eval(eval, std::cout, std::cerr);
        }
        if (*interp_cmd) {
            interp.checkpoint = interp_ckpt;
            interp.out = interp_out;
            return imle::cmd_interpolate(interp, std::cout, std::cerr);
        }
        verify.out = verify_out;
        return imle::cmd_verify(verify, std::cout, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "imle: " << e.what() << "\n";
        return imle::exit_code::failed;
    }
}
