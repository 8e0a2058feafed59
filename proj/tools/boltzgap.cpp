#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "boltzgap/config.hpp"
#include "boltzgap/experiments.hpp"

extern "C" void openblas_set_num_threads(int);

using namespace boltzgap;

namespace {

// --config takes a file path or a preset name
json resolve_config(const std::string& arg) {
    if (fs::exists(arg)) return load_json_file(arg);
    for (auto& n : preset_names())
        if (arg == n) return preset(n);
    throw ConfigError("", "no config file or preset named " + arg);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectral gap experiments for the homogeneous Boltzmann equation"};
    app.require_subcommand(1, 1);
    std::string config, out;
    std::uint64_t seed = 0;
    int threads = 0;
    bool parallel = false;
    for (auto& name : subcommands()) {
        auto* s = app.add_subcommand(name);
        s->add_option("--config", config, "config JSON path or preset name")->required();
        s->add_option("--out", out, "output directory");
        s->add_option("--seed", seed, "seed for sampled checks");
        s->add_option("--threads", threads, "BLAS threads");
        s->add_flag("--parallel", parallel, "accepted; experiments run sequentially");
    }
    CLI11_PARSE(app, argc, argv);
    const std::string cmd = app.get_subcommands().front()->get_name();

    try {
        RunConfig c = parse_config(resolve_config(config));
        auto* sc = app.get_subcommands().front();
        if (sc->count("--seed")) c.seed = seed;
        if (sc->count("--threads")) {
            if (threads < 1) throw ConfigError("threads", "must be >= 1");
            c.threads = threads;
        }
        openblas_set_num_threads(c.threads);
        fs::path dir;
        if (!out.empty()) {
            dir = out;
        } else if (!c.out.empty()) {
            dir = c.out;
        } else {
            const char* root = std::getenv("BOLTZGAP_OUT");
            dir = fs::path(root && *root ? root : "boltzgap_out") / (c.name + "_" + cmd);
        }
        int rc = run_command(cmd, c, dir, std::cout);
        std::cout << (rc == 0 ? "pass" : "FAIL") << ": results in " << dir.string() << "\n";
        return rc;
    } catch (const ConfigError& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
}
