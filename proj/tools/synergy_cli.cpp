#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "synergy/cli.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Convolutive motor-synergy extraction and reconstruction"};
    app.require_subcommand(1);

    synergy::CliOptions opts;
    std::string config;
    unsigned threads = 0;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "run configuration (JSON)")->required();
        sub->add_flag("--verbose", opts.verbose, "per-iteration progress on stderr");
        sub->add_option("--threads", threads, "worker threads (overrides SYNERGY_THREADS)")
            ->check(CLI::PositiveNumber);
    };
    add_common(app.add_subcommand("synth", "generate a planted synthetic dataset"));
    add_common(app.add_subcommand("train", "extract synergies from a velocity dataset"));
    add_common(app.add_subcommand("test", "reconstruct held-out movements with a trained bank"));
    add_common(app.add_subcommand("postures", "integrate synergies into joint-angle snapshots"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : synergy::ConfigFailure;
    }
    opts.config = config;
    if (threads > 0) {
        opts.threads = threads;
    }
    return synergy::run_command(app.get_subcommands().front()->get_name(), opts);
}
