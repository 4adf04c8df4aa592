// Synthetic sensor-table generators for tests: same 29-column header as the
// published dataset, 10-minute cadence, learnable nonlinear target.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "evo/frame.hpp"
#include "evo/rng.hpp"

namespace synth {

inline const char* kHeader =
    "date,Appliances,lights,T1,RH_1,T2,RH_2,T3,RH_3,T4,RH_4,T5,RH_5,T6,RH_6,"
    "T7,RH_7,T8,RH_8,T9,RH_9,T_out,Press_mm_hg,RH_out,Windspeed,Visibility,"
    "Tdewpoint,rv1,rv2";

// Writes a CSV whose target depends nonlinearly on a handful of sensors plus
// noise, so models have something real to learn.
inline void write_dataset(const std::string& path, int n_rows,
                          std::uint64_t seed, double noise = 8.0,
                          int n_spikes = 0) {
  evo::Rng rng(seed);
  std::ofstream out(path);
  out << kHeader << "\n";
  double t1 = 20, t2 = 19, t_out = 5, rh1 = 40;
  for (int i = 0; i < n_rows; ++i) {
    const long long epoch = 1452531600ll + 600ll * i;  // 10-minute cadence
    t1 += rng.normal() * 0.15;
    t2 += rng.normal() * 0.2;
    t_out += rng.normal() * 0.4;
    rh1 += rng.normal() * 0.5;
    const double lights = rng.uniform() < 0.3 ? 10 + 10 * rng.uniform() : 0;
    double target = 40 + 6.0 * (t2 - 18) + 2.5 * (t1 - 19) - 1.8 * t_out +
                    0.8 * rh1 + 2.0 * lights +
                    12.0 * std::sin(i / 144.0 * 2 * 3.14159265) +
                    noise * rng.normal();
    if (n_spikes > 0 && i % (n_rows / n_spikes + 1) == (n_rows / n_spikes))
      target += 600;  // isolated consumption spikes
    target = std::max(10.0, target);

    out << evo::format_timestamp(static_cast<double>(epoch)) << ',';
    out << target << ',' << lights;
    const double sensors[9] = {t1, t2, t1 * 0.9 + 2, t2 * 1.05, t1 + 0.5,
                               t_out + 2, t1 - 0.4, t2 + 0.7, t1 * 0.95};
    for (int s = 0; s < 9; ++s) {
      const double rh = rh1 + 2.0 * s + rng.normal();
      out << ',' << sensors[s] + rng.normal() * 0.1 << ',' << rh;
    }
    out << ',' << t_out << ',' << 755 + rng.normal() << ','
        << 80 + rng.normal() * 3 << ',' << 4 + rng.uniform() * 2 << ','
        << 40 + rng.uniform() * 10 << ',' << t_out - 3 << ','
        << rng.uniform() * 50 << ',' << rng.uniform() * 50 << "\n";
  }
}

// Small exactly-linear table: target = 3*T1 - 2*T_out + 5.
inline void write_linear_dataset(const std::string& path, int n_rows,
                                 std::uint64_t seed) {
  evo::Rng rng(seed);
  std::ofstream out(path);
  out << kHeader << "\n";
  for (int i = 0; i < n_rows; ++i) {
    const long long epoch = 1452531600ll + 600ll * i;
    const double t1 = 15 + 10 * rng.uniform();
    const double t_out = -5 + 20 * rng.uniform();
    const double target = 3 * t1 - 2 * t_out + 5;
    out << evo::format_timestamp(static_cast<double>(epoch)) << ',' << target
        << ",0";
    for (int s = 0; s < 9; ++s)
      out << ',' << (s == 0 ? t1 : 20.0) << ',' << 40.0 + s;
    out << ',' << t_out << ",755,80,4,40,2," << rng.uniform() * 50 << ','
        << rng.uniform() * 50 << "\n";
  }
}

}  // namespace synth
