// Acceptance suite: one line per criterion, nonzero exit if any fails.
#include <cstdlib>
#include <iostream>

#include "boltzgap/experiments.hpp"

extern "C" void openblas_set_num_threads(int);

using namespace boltzgap;

int main(int argc, char** argv) {
    openblas_set_num_threads(1);
    fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
    fs::create_directories(out);
    Suite s(parse_config(preset("hard_sphere_n3")), parse_config(preset("hard_potential_gamma_half_n2")));
    auto r = run_suite(s, out, std::cout);
    int passed = 0;
    for (auto& o : r.outcomes) passed += o.pass;
    std::cout << passed << "/" << r.outcomes.size() << " criteria pass; report in " << (out / "report.md").string()
              << std::endl;
    return r.pass ? 0 : 1;
}
