// qcs: simulate, reconstruct, calibrate, eval, gradcheck, ssmcheck.
//
// Exit codes: 0 ok, 1 a self-check failed, 2 malformed input, 3 bad
// parameters, 4 inconsistent metadata, 5 no data.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qcs/io.hpp"
#include "qcs/qcs.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit : int { kOk = 0, kCheckFailed = 1, kInput = 2, kParams = 3, kConsistency = 4, kNoData = 5 };

struct NoDataError : qcs::Error {
  using qcs::Error::Error;
};

std::uint64_t default_seed() {
  const char* env = std::getenv("QCS_SEED");
  if (env == nullptr || *env == '\0') return 0;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw qcs::ParameterError(std::string("QCS_SEED is not an unsigned integer: ") + env);
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, sep);) out.push_back(part);
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw qcs::ParameterError(what + ": not a number: \"" + s + "\"");
}

qcs::Refinement parse_refinement(const std::string& spec, const qcs::ImageShape& shape) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (name == "identity" && colon == std::string::npos) return {qcs::IdentityRefine{}, shape};
  if (name == "dct" && !arg.empty()) {
    return {qcs::DctSoftThreshold{parse_double(arg, "--refine dct")}, shape};
  }
  if (name == "tv") {
    const auto parts = split(arg, ',');
    if (parts.size() == 2) {
      const double iters = parse_double(parts[1], "--refine tv iterations");
      if (iters != std::floor(iters)) throw qcs::ParameterError("--refine tv: iterations must be an integer");
      return {qcs::TvRefine{parse_double(parts[0], "--refine tv weight"), static_cast<int>(iters)}, shape};
    }
  }
  if (name == "dmb" && !arg.empty()) {
    auto params = std::make_shared<const qcs::DMBParams>(qcs::io::load_dmb_params(arg));
    return {qcs::DmbRefine{std::move(params)}, shape};
  }
  throw qcs::ParameterError("--refine: expected identity, dct:TAU, tv:WEIGHT,ITERS or dmb:FILE, got \"" +
                            spec + "\"");
}

qcs::DataStep parse_mode(const std::string& mode) {
  if (mode == "likelihood") return qcs::DataStep::likelihood;
  if (mode == "vanilla") return qcs::DataStep::vanilla;
  throw qcs::ParameterError("--mode must be likelihood or vanilla");
}

qcs::InitMode parse_init(const std::string& init) {
  if (init == "zeros") return qcs::InitMode::zeros;
  if (init == "backprojection") return qcs::InitMode::backprojection;
  throw qcs::ParameterError("--init must be zeros or backprojection");
}

qcs::ImageShape shape_of(const std::vector<std::size_t>& shape, std::size_t n) {
  if (shape.empty()) return qcs::ImageShape::flat(n);
  qcs::io::TensorData t;
  t.shape = shape;
  return t.image_shape();
}

// Binary PGM (one channel) or PPM (three channels), values clamped to [0, 1].
void export_pnm(const std::string& path, const qcs::Vector& x, const qcs::ImageShape& s) {
  const bool color = s.channels == 3;
  std::ostringstream out;
  out << (color ? "P6" : "P5") << '\n' << s.width << ' ' << s.height << "\n255\n";
  for (std::size_t p = 0; p < s.height * s.width; ++p) {
    for (std::size_t c = 0; c < (color ? 3u : 1u); ++c) {
      const double v = std::clamp(x[static_cast<Eigen::Index>(p * s.channels + c)], 0.0, 1.0);
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  }
  qcs::io::write_file(path, out.str());
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string input, out;
  int q = 1;
  double delta = 1.0, sigma = 0.0;
  std::size_t m = 0;
  std::optional<std::uint64_t> op_seed, noise_seed;
};

int run_simulate(const SimulateArgs& a) {
  const qcs::io::TensorData x = qcs::io::load_tensor(a.input);
  if (a.m == 0) throw qcs::ParameterError("--m must be >= 1");
  if (!(a.sigma >= 0.0)) throw qcs::ParameterError("--sigma must be >= 0");
  const qcs::QuantizerSpec spec(a.q, a.delta);
  const std::uint64_t op_seed = a.op_seed.value_or(default_seed());
  const std::uint64_t noise_seed = a.noise_seed.value_or(default_seed());
  const auto n = static_cast<std::size_t>(x.values.size());

  const qcs::SensingOperator op = qcs::gaussian_operator(a.m, n, op_seed);
  qcs::io::MeasurementFile file;
  file.record = qcs::simulate(x.values, op, a.sigma, spec, noise_seed);
  file.record.operator_seed = op_seed;
  file.rows = a.m;
  file.cols = n;
  if (x.kind == "image") file.shape = x.shape;
  qcs::io::save_measurement(a.out, file);

  std::vector<std::size_t> hist(spec.levels(), 0);
  for (auto c : file.record.indices) ++hist[c.value];
  std::cout << "M " << a.m << "\nN " << n << "\nhistogram";
  for (std::size_t r = 0; r < hist.size(); ++r) std::cout << ' ' << r << ':' << hist[r];
  std::cout << '\n';
  return kOk;
}

struct ReconstructArgs {
  std::string meas, schedule, refine = "identity", mode = "likelihood", init = "zeros", out, trace,
      export_pgm;
  std::size_t stages = 10;
  bool monotone = false;
};

int run_reconstruct(const ReconstructArgs& a) {
  const qcs::io::MeasurementFile meas = qcs::io::load_measurement(a.meas);
  qcs::StageSchedule schedule;
  if (!a.schedule.empty()) {
    const qcs::io::ScheduleFile sf = qcs::io::load_schedule(a.schedule);
    if (sf.sigma != meas.record.sigma) {
      throw qcs::ConsistencyError("schedule sigma " + fmt(sf.sigma) + " != measurement sigma " +
                                  fmt(meas.record.sigma));
    }
    schedule = sf.schedule;
  } else {
    schedule = qcs::StageSchedule::default_for(a.stages);
  }
  const qcs::ImageShape shape = shape_of(meas.shape, meas.cols);
  const qcs::Refinement refinement = parse_refinement(a.refine, shape);
  const qcs::SensingOperator op = qcs::gaussian_operator(meas.rows, meas.cols, meas.record.operator_seed);

  qcs::ReconstructOptions options;
  options.init = parse_init(a.init);
  options.monotone = a.monotone;
  const qcs::ReconstructionResult result =
      qcs::run_reconstruction(parse_mode(a.mode), meas.record, op, schedule, refinement, options);

  qcs::io::save_tensor(a.out, qcs::io::make_tensor(result.estimate, shape, !meas.shape.empty()));
  if (!a.trace.empty()) {
    std::ostringstream csv;
    csv << "stage,nll,residual\n";
    for (std::size_t k = 0; k < result.nll_trace.size(); ++k) {
      csv << k + 1 << ',' << fmt(result.nll_trace[k]) << ',' << fmt(result.residual_trace[k]) << '\n';
    }
    qcs::io::write_file(a.trace, csv.str());
  }
  if (!a.export_pgm.empty()) export_pnm(a.export_pgm, result.estimate, shape);
  std::cout << "stages " << schedule.stages() << "\nfinal_nll "
            << fmt(result.nll_trace.empty() ? 0.0 : result.nll_trace.back()) << '\n';
  return kOk;
}

struct CalibrateArgs {
  std::string train_dir, out, refine = "identity", mode = "likelihood";
  int q = 1;
  double delta = 1.0, sigma = 0.0;
  std::size_t m = 0, stages = 10, budget = 200;
  std::optional<std::uint64_t> seed;
  bool monotone = false;
};

int run_calibrate(const CalibrateArgs& a) {
  if (!fs::is_directory(a.train_dir)) throw qcs::InputError("--train-dir is not a directory: " + a.train_dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(a.train_dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw NoDataError("no training tensors in " + a.train_dir);
  if (a.m == 0) throw qcs::ParameterError("--m must be >= 1");
  if (!(a.sigma >= 0.0)) throw qcs::ParameterError("--sigma must be >= 0");
  const qcs::QuantizerSpec spec(a.q, a.delta);
  const std::uint64_t seed = a.seed.value_or(default_seed());

  std::vector<qcs::io::TensorData> signals;
  for (const auto& f : files) signals.push_back(qcs::io::load_tensor(f.string()));
  for (const auto& s : signals) {
    if (s.shape != signals.front().shape) {
      throw qcs::ConsistencyError("training tensors have different shapes");
    }
  }
  const auto n = static_cast<std::size_t>(signals.front().values.size());
  const qcs::SensingOperator op = qcs::gaussian_operator(a.m, n, seed);
  std::vector<qcs::TrainingPair> pairs;
  for (std::size_t i = 0; i < signals.size(); ++i) {
    qcs::MeasurementRecord r = qcs::simulate(signals[i].values, op, a.sigma, spec, seed + 1 + i);
    r.operator_seed = seed;
    pairs.push_back({signals[i].values, std::move(r)});
  }
  const qcs::Refinement refinement = parse_refinement(a.refine, signals.front().image_shape());
  qcs::CalibrationOptions options;
  options.budget = a.budget;
  options.step = parse_mode(a.mode);
  options.reconstruct.monotone = a.monotone;
  const qcs::CalibrationResult result = qcs::calibrate(pairs, op, a.stages, refinement, options);
  qcs::io::save_schedule(a.out, result.schedule, a.sigma);
  std::cout << "initial_loss " << fmt(result.initial_loss) << "\nfinal_loss " << fmt(result.final_loss)
            << "\nevaluations " << result.evaluations << '\n';
  return kOk;
}

struct EvalArgs {
  std::string estimate, reference, out, export_pgm;
};

int run_eval(const EvalArgs& a) {
  const qcs::io::TensorData est = qcs::io::load_tensor(a.estimate);
  const qcs::io::TensorData ref = qcs::io::load_tensor(a.reference);
  if (est.values.size() != ref.values.size()) {
    throw qcs::ConsistencyError("estimate and reference sizes differ");
  }
  const qcs::ImageShape shape = ref.image_shape();
  const qcs::MetricReport m = qcs::evaluate(est.values, ref.values, shape);
  std::ostringstream csv;
  csv << "file,psnr,ssim,cosine,mse\n"
      << a.estimate << ',' << fmt(m.psnr) << ',' << fmt(m.ssim) << ',' << fmt(m.cosine) << ','
      << fmt(m.mse) << '\n';
  if (!a.out.empty()) qcs::io::write_file(a.out, csv.str());
  if (!a.export_pgm.empty()) export_pnm(a.export_pgm, est.values, shape);
  std::cout << csv.str();
  return kOk;
}

int report_checks(const std::vector<qcs::checks::CheckReport>& reports) {
  for (const auto& r : reports) {
    std::cout << (r.passed() ? "PASS " : "FAIL ") << r.name << ": max " << fmt(r.max_error) << " (tol "
              << fmt(r.tolerance) << ", trials " << r.trials << ", non-finite " << r.non_finite << ")\n";
  }
  for (const auto& r : reports) {
    if (!r.passed()) {
      std::cerr << "first failing check: " << r.name << '\n';
      return kCheckFailed;
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantized compressive sensing reconstruction toolkit"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Quantize Gaussian projections of a tensor");
  simulate->add_option("--input", sim.input, "Signal TensorFile")->required();
  simulate->add_option("--q", sim.q, "Bit depth Q (1..8)");
  simulate->add_option("--delta", sim.delta, "Quantizer step (Q > 1)");
  simulate->add_option("--sigma", sim.sigma, "Pre-quantization noise std");
  simulate->add_option("--m", sim.m, "Number of measurements M")->required();
  simulate->add_option("--op-seed", sim.op_seed, "Sensing operator seed (default QCS_SEED or 0)");
  simulate->add_option("--noise-seed", sim.noise_seed, "Noise seed (default QCS_SEED or 0)");
  simulate->add_option("--out", sim.out, "Output MeasurementFile")->required();

  ReconstructArgs rec;
  auto* reconstruct = app.add_subcommand("reconstruct", "Run the K-stage reconstruction");
  reconstruct->add_option("--meas", rec.meas, "MeasurementFile")->required();
  reconstruct->add_option("--schedule", rec.schedule, "Schedule JSON (default: built-in)");
  reconstruct->add_option("--stages", rec.stages, "K for the built-in schedule");
  reconstruct->add_option("--refine", rec.refine, "identity | dct:TAU | tv:WEIGHT,ITERS | dmb:FILE");
  reconstruct->add_option("--mode", rec.mode, "likelihood | vanilla");
  reconstruct->add_option("--init", rec.init, "zeros | backprojection");
  reconstruct->add_flag("--monotone", rec.monotone, "Backtrack lambda so the NLL never increases");
  reconstruct->add_option("--out", rec.out, "Estimate TensorFile")->required();
  reconstruct->add_option("--trace", rec.trace, "Per-stage CSV: stage,nll,residual");
  reconstruct->add_option("--export-pgm", rec.export_pgm, "Also write an 8-bit PGM/PPM");

  CalibrateArgs cal;
  auto* calibrate = app.add_subcommand("calibrate", "Fit the stage schedule on training tensors");
  calibrate->add_option("--train-dir", cal.train_dir, "Directory of TensorFiles")->required();
  calibrate->add_option("--q", cal.q, "Bit depth Q");
  calibrate->add_option("--delta", cal.delta, "Quantizer step");
  calibrate->add_option("--sigma", cal.sigma, "Noise std");
  calibrate->add_option("--m", cal.m, "Number of measurements M")->required();
  calibrate->add_option("--stages", cal.stages, "K");
  calibrate->add_option("--budget", cal.budget, "Objective evaluation budget");
  calibrate->add_option("--seed", cal.seed, "Operator/noise seed (default QCS_SEED or 0)");
  calibrate->add_option("--refine", cal.refine, "Refinement, as for reconstruct");
  calibrate->add_option("--mode", cal.mode, "likelihood | vanilla");
  calibrate->add_flag("--monotone", cal.monotone, "Monotone reconstruction inside the loss");
  calibrate->add_option("--out", cal.out, "Schedule JSON")->required();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "PSNR / SSIM / cosine / MSE against a reference");
  eval->add_option("--estimate", ev.estimate, "Estimate TensorFile")->required();
  eval->add_option("--reference", ev.reference, "Reference TensorFile")->required();
  eval->add_option("--out", ev.out, "Metrics CSV");
  eval->add_option("--export-pgm", ev.export_pgm, "Also write the estimate as PGM/PPM");

  qcs::checks::GradcheckOptions gc;
  std::vector<int> gc_bits;
  std::vector<double> eps_range;
  std::optional<std::uint64_t> gc_seed;
  auto* gradcheck = app.add_subcommand("gradcheck", "Analytic likelihood gradient vs finite differences");
  gradcheck->add_option("--q", gc_bits, "Bit depths (default 1 2 3)");
  gradcheck->add_option("--delta", gc.delta, "Quantizer step");
  gradcheck->add_option("--trials", gc.trials, "Trials per bit depth");
  gradcheck->add_option("--eps-range", eps_range, "eps_min eps_max")->expected(2);
  gradcheck->add_option("--seed", gc_seed, "Seed (default QCS_SEED or 0)");

  qcs::checks::SsmcheckOptions sc;
  std::vector<std::size_t> grid;
  std::vector<int> sc_steps;
  std::optional<std::uint64_t> sc_seed;
  auto* ssmcheck = app.add_subcommand("ssmcheck", "Spectral mixer oracle suite");
  ssmcheck->add_option("--grid", grid, "H W")->expected(2);
  ssmcheck->add_option("--rank", sc.rank, "Coupling rank R");
  ssmcheck->add_option("--steps", sc_steps, "J values (default 1 2 7 64)");
  ssmcheck->add_option("--trials", sc.trials, "Trials per J");
  ssmcheck->add_option("--seed", sc_seed, "Seed (default QCS_SEED or 0)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kParams;
  }

  try {
    if (*simulate) return run_simulate(sim);
    if (*reconstruct) return run_reconstruct(rec);
    if (*calibrate) return run_calibrate(cal);
    if (*eval) return run_eval(ev);
    if (*gradcheck) {
      if (!gc_bits.empty()) gc.bits = gc_bits;
      for (int q : gc.bits) qcs::QuantizerSpec(q, gc.delta);  // validates
      if (!eps_range.empty()) {
        gc.eps_min = eps_range[0];
        gc.eps_max = eps_range[1];
      }
      gc.seed = gc_seed.value_or(default_seed());
      const qcs::checks::CheckReport r = qcs::checks::gradcheck(gc);
      std::cout << "max_mismatch " << fmt(r.max_error) << '\n';
      return report_checks({r});
    }
    if (*ssmcheck) {
      if (!grid.empty()) {
        sc.height = grid[0];
        sc.width = grid[1];
      }
      if (!sc_steps.empty()) sc.steps = sc_steps;
      sc.seed = sc_seed.value_or(default_seed());
      return report_checks(qcs::checks::ssmcheck(sc));
    }
  } catch (const NoDataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNoData;
  } catch (const qcs::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const qcs::ConsistencyError& e) {
    std::cerr << "consistency error: " << e.what() << '\n';
    return kConsistency;
  } catch (const qcs::DimensionError& e) {
    std::cerr << "consistency error: " << e.what() << '\n';
    return kConsistency;
  } catch (const qcs::Error& e) {
    std::cerr << "parameter error: " << e.what() << '\n';
    return kParams;
  }
  return kParams;
}
