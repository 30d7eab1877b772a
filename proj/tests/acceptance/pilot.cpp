// Pilot sweeps behind the pinned settings of acceptance criteria 7 and 8.
// Usage: qcs_pilot 7 | qcs_pilot 8. Results are recorded in PILOT.md.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "qcs/qcs.hpp"
#include "scenarios.hpp"

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void one_bit_row(double tau, std::size_t budget, bool monotone) {
  scenarios::OneBitSetup setup;
  setup.tau = tau;
  const auto op = setup.op();
  const auto refine = setup.refinement();
  const qcs::ReconstructOptions ro{.monotone = monotone};
  const auto t0 = std::chrono::steady_clock::now();
  qcs::StageSchedule schedule = qcs::StageSchedule::default_for(setup.stages);
  std::string calib = "default schedule";
  if (budget > 0) {
    qcs::CalibrationOptions co;
    co.budget = budget;
    co.reconstruct = ro;
    const auto cal = qcs::calibrate(setup.training(op), op, setup.stages, refine, co);
    schedule = cal.schedule;
    char buf[96];
    std::snprintf(buf, sizeof buf, "loss %.4g -> %.4g", cal.initial_loss, cal.final_loss);
    calib = buf;
  }
  const double calib_s = seconds_since(t0);
  int good = 0;
  double worst = 1.0;
  std::string failure;
  const auto t1 = std::chrono::steady_clock::now();
  for (std::size_t s = 0; s < setup.instances; ++s) {
    const auto x = scenarios::OneBitSetup::test_signal(s);
    const auto record = qcs::simulate(x, op, 0.0, qcs::QuantizerSpec::sign(), scenarios::OneBitSetup::test_noise_seed(s));
    try {
      const auto r = qcs::reconstruct(record, op, schedule, refine, ro);
      const double c = qcs::cosine_similarity(r.estimate, x);
      worst = std::min(worst, c);
      good += c >= 0.95;
    } catch (const qcs::Error& e) {
      failure = e.what();
      worst = -1.0;
    }
  }
  std::printf("| %.3g | %zu | %s | %s | %d/20 | %.3f | %.1f | %.1f |%s\n", tau, budget, monotone ? "on" : "off", calib.c_str(),
              good, worst, calib_s, seconds_since(t1), failure.empty() ? "" : (" " + failure).c_str());
}

void two_bit_row(bool monotone) {
  scenarios::TwoBitSetup setup;
  setup.monotone = monotone;
  const auto schedule = qcs::StageSchedule::default_for(setup.stages);
  const qcs::ReconstructOptions ro{.monotone = monotone};
  double lik = 0.0, lin = 0.0;
  int wins = 0;
  std::string failure;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t s = 0; s < setup.instances; ++s) {
    const auto op = scenarios::TwoBitSetup::op(s);
    const auto record = setup.record(s, op);
    try {
      const double a = qcs::reconstruct(record, op, schedule, {}, ro).nll_trace.back();
      const double b = qcs::vanilla_reconstruct(record, op, schedule, {}, ro).nll_trace.back();
      lik += a / 20;
      lin += b / 20;
      wins += a <= b;
    } catch (const qcs::Error& e) {
      failure = e.what();
      break;
    }
  }
  if (!failure.empty()) {
    std::printf("| %s | failed: %s |\n", monotone ? "on" : "off", failure.c_str());
  } else {
    std::printf("| %s | %.4g | %.4g | %d/20 | %.1f |\n", monotone ? "on" : "off", lik, lin, wins, seconds_since(t0));
  }
}

}  // namespace

int main(int argc, char** argv) {
  const std::string which = argc > 1 ? argv[1] : "7";
  if (which == "7") {
    std::printf("| tau | budget | monotone | calibration | cos >= 0.95 | min cos | calib s | eval s |\n");
    std::printf("|---|---|---|---|---|---|---|---|\n");
    one_bit_row(0.01, 0, false);
    one_bit_row(0.01, 0, true);
    one_bit_row(0.0, 120, true);
    one_bit_row(0.01, 120, true);
    one_bit_row(0.05, 120, true);
  } else {
    std::printf("| monotone | likelihood NLL | linear NLL | wins | s |\n|---|---|---|---|---|\n");
    two_bit_row(true);
    two_bit_row(false);
  }
  return 0;
}
