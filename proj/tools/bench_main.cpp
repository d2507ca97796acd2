// Timing harness comparing the serial reference path against the OpenMP
// kernels on the heavy estimators, and checking that both produce identical
// bits.

#include "rdsl/cocycle.hpp"
#include "rdsl/stats.hpp"

#include <chrono>
#include <cstdio>

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct BenchRow {
  const char* name;
  double serial_s;
  double parallel_s;
  bool identical;
};

void print_row(const BenchRow& row) {
  std::printf("%-28s serial %8.3fs  parallel %8.3fs  speedup %5.2fx  %s\n",
              row.name, row.serial_s, row.parallel_s,
              row.serial_s / row.parallel_s,
              row.identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
  using namespace rdsl;
  std::printf("threads available: %d\n\n", max_threads());

  // Cotangent expansion search on the alternating-shear model.
  {
    ModelConfig cfg;
    cfg.variant = ModelVariant::Pierrehumbert;
    cfg.tau = 1.0;
    const Model model = build_model(cfg);
    Budget budget;
    budget.mc_words = 20000;
    SearchPlan plan;
    plan.base_points_per_dim = 4;
    plan.directions = 16;

    auto t0 = Clock::now();
    const auto serial =
        expansion_lambda(model, model.default_measure(), 6, CocycleKind::Cotangent,
                         plan, budget, 42, Exec::Serial);
    const double ts = seconds_since(t0);
    t0 = Clock::now();
    const auto parallel =
        expansion_lambda(model, model.default_measure(), 6, CocycleKind::Cotangent,
                         plan, budget, 42, Exec::Parallel);
    const double tp = seconds_since(t0);
    print_row({"expansion search (shears)", ts, tp,
               serial.value == parallel.value &&
                   serial.stderr_ == parallel.stderr_});
  }

  // Normalized Birkhoff sums for the central-limit experiment.
  {
    ModelConfig cfg;
    cfg.variant = ModelVariant::Pierrehumbert;
    cfg.tau = 1.0;
    const Model model = build_model(cfg);
    const Observable phi = Observable::cosine({1, 0});
    const FourierOperator op = build_galerkin(model, model.default_measure(), 2, 0.0);
    const GreenKuboReport gk = green_kubo_variance(op, phi, 100);

    auto t0 = Clock::now();
    const CLTReport serial = clt_experiment(model, model.default_measure(), phi,
                                            2000, 2000, 7, gk, Exec::Serial);
    const double ts = seconds_since(t0);
    t0 = Clock::now();
    const CLTReport parallel = clt_experiment(model, model.default_measure(), phi,
                                              2000, 2000, 7, gk, Exec::Parallel);
    const double tp = seconds_since(t0);
    print_row({"normalized sums (CLT)", ts, tp,
               serial.sigma2_mc == parallel.sigma2_mc &&
                   serial.ks_distance == parallel.ks_distance});
  }

  // Monte Carlo pair correlations.
  {
    ModelConfig cfg;
    cfg.variant = ModelVariant::AffineTorus;
    Mat a(2, 2), b(2, 2);
    a << 1, 2, 0, 1;
    b << 1, 0, 2, 1;
    cfg.matrices = {a, b};
    const Model model = build_model(cfg);
    const Observable phi = Observable::cosine({1, 0});

    auto t0 = Clock::now();
    const auto serial = correlation_series_mc(model, model.default_measure(),
                                              phi, phi, 10, 100000, 3,
                                              Exec::Serial);
    const double ts = seconds_since(t0);
    t0 = Clock::now();
    const auto parallel = correlation_series_mc(model, model.default_measure(),
                                                phi, phi, 10, 100000, 3,
                                                Exec::Parallel);
    const double tp = seconds_since(t0);
    bool same = true;
    for (std::size_t i = 0; i < serial.values.size(); ++i)
      same = same && serial.values[i] == parallel.values[i] &&
             serial.stderrs[i] == parallel.stderrs[i];
    print_row({"pair correlations (MC)", ts, tp, same});
  }

  return 0;
}
