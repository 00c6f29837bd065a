#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "temcodec/temcodec.hpp"

using namespace temcodec;

namespace {

nlohmann::json real(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

void print_warnings(const std::vector<std::string>& w) {
  for (const auto& s : w) std::cerr << "warning: " << s << '\n';
}

struct GenerateArgs {
  double omega = std::numbers::pi;
  double t_start = 0.0;
  double t_end = 10.0;
  std::uint64_t seed = 1;
  bool zero = false;
  std::string out;
};

int cmd_generate(const GenerateArgs& a) {
  const TimeWindow w{a.t_start, a.t_end};
  const BandlimitedSignal s = a.zero ? BandlimitedSignal(a.omega, w, {}, {})
                                     : generate_random_signal(a.omega, w, a.seed);
  save_signal(s, a.out);
  std::printf("wrote %s: %zu centers, omega %.10g\n", a.out.c_str(), s.centers().size(), s.omega());
  return 0;
}

struct EncodeArgs {
  std::string signal;
  double kappa = 1.0;
  double delta = 1.0;
  std::optional<double> bias;
  double bias_margin = 1.0;
  std::size_t channels = 1;
  std::vector<double> shifts;
  std::optional<double> y1;
  std::optional<double> snr_db;
  std::uint64_t jitter_seed = 0;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string meta;
};

int cmd_encode(const EncodeArgs& a) {
  const BandlimitedSignal sig = load_signal(a.signal);
  const double c = signal_bound(sig);
  TemParams p{a.kappa, a.delta, a.bias ? *a.bias : c + a.bias_margin};
  p.validate();
  std::vector<double> shifts = a.shifts;
  if (shifts.empty()) shifts.assign(a.channels, 2.0 * p.delta / static_cast<double>(a.channels));
  if (shifts.size() != a.channels) throw UsageError("--shifts needs one value per channel");
  const auto cfg = MultiChannelConfig::from_shifts(p, shifts, a.y1);
  MultiSpikeTrain train = encode_multi(sig, cfg, {c / 1.01});
  if (a.snr_db) train = add_time_jitter(train, *a.snr_db, a.jitter_seed);

  SpikeMetadata meta = metadata_of(train);
  meta.signal_bound = c;
  meta.omega = sig.omega();
  meta.seed = a.seed;
  const std::string meta_path = a.meta.empty() ? a.out + ".meta.json" : a.meta;
  write_spikes(train, meta, a.out, meta_path);

  const RateReport r = diagnostics(train, c);
  std::printf("spikes: %zu (", train.events.size());
  for (std::size_t ch = 0; ch < train.channels(); ++ch)
    std::printf("%sch%zu=%zu", ch ? ", " : "", ch, train.channel_times(ch).size());
  std::printf(")\n");
  std::printf("combined rate %.6g (required %.6g): %s\n", r.combined_rate, r.required_rate,
              r.rate_ok ? "ok" : "LOW");
  std::printf("max same-channel gap %.6g (bound %.6g): %s\n", r.max_gap, r.gap_bound, r.gap_ok ? "ok" : "EXCEEDED");
  std::printf("min merged gap %.6g (bound %.6g): %s\n", r.min_separation, r.separation_bound,
              r.separation_ok ? "ok" : "VIOLATED");
  std::printf("interleaved: %s\n", r.interleaved ? "yes" : "no");
  std::printf("bandwidth bound for %zu channel(s): %.6g (signal omega %.6g)\n", train.channels(),
              bandwidth_bound(p, c, train.channels()), sig.omega());
  print_warnings(train.warnings);
  return 0;
}

struct DecodeArgs {
  std::string spikes;
  std::string meta;
  std::optional<double> omega;
  std::size_t grid_points = kDefaultGridPoints;
  std::string method = "closed_form";
  std::size_t max_iter = 2000;
  double tol = 1e-9;
  double rel_cutoff = 1e-12;
  std::string truth;
  std::string out = "estimate.csv";
  std::string result = "result.json";
};

int cmd_decode(const DecodeArgs& a) {
  const DecodeMethod method = parse_method(a.method);
  SpikeMetadata meta;
  const std::string meta_path = a.meta.empty() ? a.spikes + ".meta.json" : a.meta;
  const MultiSpikeTrain train = read_spikes(a.spikes, meta_path, &meta);
  const double omega = a.omega ? *a.omega : meta.omega.value_or(0.0);
  if (!(omega > 0.0)) throw UsageError("--omega is required when the metadata carries no bandwidth");
  const GridSpec grid{train.window, a.grid_points};

  DecodeResult d;
  switch (method) {
    case DecodeMethod::closed_form: d = decode_closed_form(train, omega, grid, {a.rel_cutoff, true}); break;
    case DecodeMethod::midpoint_closed_form:
      d = decode_closed_form_midpoint(train, omega, grid, {a.rel_cutoff, false});
      break;
    case DecodeMethod::iterative: d = decode_iterative(train, omega, grid, {a.max_iter, a.tol, std::nullopt}); break;
  }
  if (meta.signal_bound && omega >= bandwidth_bound(meta.params, *meta.signal_bound, train.channels()))
    d.warnings.push_back("bandwidth exceeds M-channel bound");

  std::ofstream est(a.out, std::ios::binary);
  if (!est) throw DataError("cannot write " + a.out);
  est << "t,value\n";
  char buf[80];
  for (std::size_t i = 0; i < d.estimate.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.15g,%.17g\n", d.estimate.time(i), d.estimate.values[i]);
    est << buf;
  }

  nlohmann::json j;
  j["tool_version"] = kToolVersion;
  j["method"] = to_string(d.method);
  j["status"] = d.status;
  j["omega"] = omega;
  j["grid"] = {{"t_start", grid.window.t_start}, {"t_end", grid.window.t_end}, {"n_points", grid.n_points}};
  j["iterations"] = d.iterations;
  j["final_residual"] = real(d.final_residual);
  j["residual_history"] = nlohmann::json::array();
  for (double v : d.residual_history) j["residual_history"].push_back(real(v));
  j["condition_number"] = real(d.condition_number);
  j["sampling_condition_number"] = real(d.sampling_condition_number);
  j["rank"] = d.rank;
  j["warnings"] = d.warnings;
  if (!a.truth.empty()) {
    const auto truth = load_signal(a.truth);
    const double mse = mse_mid90(d.estimate, to_grid(truth, grid));
    j["mse_mid90"] = mse;
    std::printf("mse_mid90 %.6e\n", mse);
  }
  std::ofstream res(a.result, std::ios::binary);
  if (!res) throw DataError("cannot write " + a.result);
  res << j.dump(2) << '\n';

  std::printf("method %s, status %s, iterations %zu, final residual %.3e\n", to_string(d.method),
              d.status.c_str(), d.iterations, d.final_residual);
  if (!d.residual_history.empty())
    std::printf("residual history: first %.3e, last %.3e (%zu entries)\n", d.residual_history.front(),
                d.residual_history.back(), d.residual_history.size());
  if (method != DecodeMethod::iterative)
    std::printf("condition number %.3e, effective rank %zu\n", d.condition_number, d.rank);
  print_warnings(d.warnings);
  return 0;
}

struct SweepArgs {
  std::string config;
  std::string out_dir = "sweep_out";
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> grid_points;
};

int cmd_sweep(const SweepArgs& a) {
  std::ifstream in(a.config);
  if (!in) throw DataError("cannot read " + a.config);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed JSON in " + a.config + ": " + e.what());
  }
  if (a.trials) j["trials"] = *a.trials;
  if (a.seed) j["seed"] = *a.seed;
  if (a.grid_points) j["grid_points"] = *a.grid_points;
  const SweepSpec spec = sweep_from_json(j);
  const SweepResult r = run_sweep(spec);
  write_sweep_outputs(r, a.out_dir);
  std::size_t failed = 0;
  for (const auto& t : r.records) failed += t.status == "error";
  std::printf("%zu cells, %zu trials (%zu failed); outputs in %s\n", r.cells.size(), r.records.size(), failed,
              a.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-encoding codec: integrate-and-fire encoders, POCS and closed-form decoders"};
  app.require_subcommand(1);

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "Write a random bandlimited signal (JSON)");
  gen->add_option("--omega", ga.omega, "Bandwidth (rad/s)");
  gen->add_option("--t-start", ga.t_start, "Window start (s)");
  gen->add_option("--t-end", ga.t_end, "Window end (s)");
  gen->add_option("--seed", ga.seed, "RNG seed");
  gen->add_flag("--zero", ga.zero, "Write the zero signal (no sinc centers)");
  gen->add_option("-o,--out", ga.out, "Output signal file")->required();

  EncodeArgs ea;
  auto* enc = app.add_subcommand("encode", "Encode a signal file into a spike CSV plus metadata");
  enc->add_option("--signal", ea.signal, "Signal JSON")->required();
  enc->add_option("--kappa", ea.kappa, "Integrator constant");
  enc->add_option("--delta", ea.delta, "Threshold");
  enc->add_option("--bias", ea.bias, "Bias b (default: signal bound + margin)");
  enc->add_option("--bias-margin", ea.bias_margin, "b - c when --bias is absent");
  enc->add_option("-M,--channels", ea.channels, "Number of channels")->check(CLI::PositiveNumber);
  enc->add_option("--shifts", ea.shifts, "Integrator shifts alpha_1..alpha_M (default 2 delta / M)")->delimiter(',');
  enc->add_option("--y1", ea.y1, "Initial integrator value of channel 0 (default -delta)");
  enc->add_option("--snr-db", ea.snr_db, "Add spike-time jitter at this SNR");
  enc->add_option("--jitter-seed", ea.jitter_seed, "Jitter RNG seed");
  enc->add_option("--seed", ea.seed, "Seed recorded in the metadata");
  enc->add_option("-o,--out", ea.out, "Spike CSV")->required();
  enc->add_option("--meta", ea.meta, "Metadata JSON (default <out>.meta.json)");

  DecodeArgs da;
  auto* dec = app.add_subcommand("decode", "Reconstruct a signal from a spike CSV plus metadata");
  dec->add_option("--spikes", da.spikes, "Spike CSV")->required();
  dec->add_option("--meta", da.meta, "Metadata JSON (default <spikes>.meta.json)");
  dec->add_option("--omega", da.omega, "Bandwidth (default: from metadata)");
  dec->add_option("--grid-points", da.grid_points, "Estimate grid size")->check(CLI::Range(2, 10000000));
  dec->add_option("--method", da.method, "closed_form | iterative | midpoint_closed_form");
  dec->add_option("--max-iter", da.max_iter, "Iterative: iteration cap");
  dec->add_option("--tol", da.tol, "Iterative: residual tolerance");
  dec->add_option("--rel-cutoff", da.rel_cutoff, "Closed form: relative singular-value cutoff");
  dec->add_option("--truth", da.truth, "Ground-truth signal JSON for mse_mid90");
  dec->add_option("-o,--out", da.out, "Estimate CSV (t,value)");
  dec->add_option("--result", da.result, "Result JSON");

  SweepArgs sa;
  auto* sw = app.add_subcommand("sweep", "Run a parameter sweep from a JSON spec");
  sw->add_option("--config", sa.config, "Sweep spec JSON")->required();
  sw->add_option("--out-dir", sa.out_dir, "Output directory");
  sw->add_option("--trials", sa.trials, "Override trials");
  sw->add_option("--seed", sa.seed, "Override base seed");
  sw->add_option("--grid-points", sa.grid_points, "Override grid points");

  auto* st = app.add_subcommand("selftest", "Run the built-in invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_generate(ga);
    if (enc->parsed()) return cmd_encode(ea);
    if (dec->parsed()) return cmd_decode(da);
    if (sw->parsed()) return cmd_sweep(sa);
    if (st->parsed()) return run_selftest() ? 0 : 3;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
