// Poincare sections of the Pullen-Edmonds oscillator at E = 10, 20, 50 and
// the share of seeds whose nearby twin separates.
#include "qaction/chaos.hpp"

#include <cstdio>
#include <fstream>
#include <string>

using namespace qaction;

int main()
{
    const ActionSpec2D classical{1.0, {0.0, 0.5, 0.05, 0.0}};
    for (const double E : {10.0, 20.0, 50.0})
    {
        SectionConfig cfg;
        cfg.spec          = classical;
        cfg.energy        = E;
        cfg.seeds         = scale_seeds(classical, E, default_seed_fractions(classical, E));
        cfg.max_crossings = 200;
        const auto s      = compute_section(cfg);
        std::printf("E = %4.0f  crossings = %zu  drift = %.1e  chaotic seeds = %.2f\n", E, s.crossing_count(),
                    s.max_drift(), chaos_indicator(s));
        std::ofstream out{"section_E" + std::to_string(static_cast< int >(E)) + ".csv"};
        write_section_csv(out, s);
    }
}
