// Copyright 2026 The maskbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// maskbf command-line front end.
//
//   maskbf run --plan plan.json --out dir/ --jobs N
//   maskbf properties --suite all
//   maskbf synth --seed 7 --mics 3 --duration 2.0 --out scene/
//   maskbf sdr --ref ref.wav --est est.wav --channel 1
//
// Exit codes: 0 success, 1 failed property (or runtime failure), 2 plan or
// usage error.

#include <CLI11.hpp>

#include <iostream>

#include "maskbf/harness.hpp"
#include "maskbf/properties.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitPlan = 2;

struct RunArgs {
  std::string plan;
  std::string out;
  int jobs = 1;
  // flag defaults that a plan file may override
  std::vector<double> g;
  std::vector<std::string> variations;
  std::vector<std::string> scaling;
  int iterations = 0;
  double step_size = 0.0;
  int reference_mic = 0;
  bool quiet = false;
};

int cmd_run(const RunArgs& a) {
  using maskbf::json;
  json flags = json::object();
  if (!a.g.empty()) flags["g"] = a.g;
  if (!a.variations.empty()) flags["variations"] = a.variations;
  if (!a.scaling.empty()) flags["scaling"] = a.scaling;
  if (a.iterations > 0) flags["config"]["iterations"] = a.iterations;
  if (a.step_size > 0.0) flags["config"]["step_size"] = a.step_size;
  if (a.reference_mic > 0) flags["reference_mic"] = a.reference_mic;

  maskbf::ExperimentPlan plan;
  try {
    json merged = flags;
    std::filesystem::path base;
    if (!a.plan.empty()) {
      std::ifstream is(a.plan);
      if (!is) throw maskbf::PlanError("cannot open plan " + a.plan);
      json file;
      try {
        is >> file;
      } catch (const std::exception& e) {
        throw maskbf::PlanError(std::string("plan is not valid JSON: ") + e.what());
      }
      merged.merge_patch(file);
      base = std::filesystem::path(a.plan).parent_path();
    }
    plan = maskbf::parse_plan(merged, base);
    if (!a.out.empty()) plan.output_dir = a.out;
  } catch (const std::exception& e) {
    std::cerr << "maskbf run: " << e.what() << "\n";
    return kExitPlan;
  }
  try {
    const auto res = maskbf::run_experiment(plan, a.jobs, a.quiet ? nullptr : &std::cerr);
    std::cout << res.table.csv();
    int failed = 0;
    for (const auto& c : res.table.cells) failed += c.failed;
    return failed ? kExitFailure : 0;
  } catch (const maskbf::PlanError& e) {
    std::cerr << "maskbf run: " << e.what() << "\n";
    return kExitPlan;
  } catch (const std::exception& e) {
    std::cerr << "maskbf run: " << e.what() << "\n";
    return kExitFailure;
  }
}

int cmd_properties(const std::string& suite, std::uint64_t seed) {
  maskbf::PropertyOptions opt;
  opt.seed = seed;
  try {
    const auto rep = maskbf::run_properties(suite, opt);
    std::cout << maskbf::format_report(rep);
    return rep.passed() ? 0 : kExitFailure;
  } catch (const std::invalid_argument& e) {
    std::cerr << "maskbf properties: " << e.what() << "\n";
    return kExitPlan;
  }
}

int cmd_synth(std::uint64_t seed, int mics, int sources, double duration, double rate, double g,
              const std::string& out) {
  namespace fs = std::filesystem;
  try {
    auto [target, noise] = maskbf::synth_scene(seed, mics, sources, duration, rate);
    fs::create_directories(out);
    maskbf::MultichannelWave mix = target;
    mix.samples = target.samples + g * noise.samples;
    maskbf::write_wav(fs::path(out) / "target.wav", target, maskbf::WavEncoding::float32);
    maskbf::write_wav(fs::path(out) / "noise.wav", noise, maskbf::WavEncoding::float32);
    maskbf::write_wav(fs::path(out) / "mixture.wav", mix, maskbf::WavEncoding::float32);
    std::cout << "wrote " << (fs::path(out) / "{target,noise,mixture}.wav").string() << " (" << mics << " ch, "
              << target.length() << " samples)\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "maskbf synth: " << e.what() << "\n";
    return kExitPlan;
  }
}

int cmd_sdr(const std::string& ref, const std::string& est, int channel, int est_channel) {
  try {
    const auto r = maskbf::read_wav(ref);
    const auto e = maskbf::read_wav(est);
    if (channel < 1 || channel > r.channels())
      throw maskbf::ChannelMismatch("reference channel " + std::to_string(channel) + " outside 1.." +
                                    std::to_string(r.channels()));
    if (est_channel < 1 || est_channel > e.channels())
      throw maskbf::ChannelMismatch("estimate channel " + std::to_string(est_channel) + " outside 1.." +
                                    std::to_string(e.channels()));
    const auto res = maskbf::sdr(r.samples.row(channel - 1).transpose(), e.samples.row(est_channel - 1).transpose());
    std::cout << std::setprecision(6) << std::fixed << res.sdr_db << (res.capped ? " (capped)" : "") << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "maskbf sdr: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"maskbf: mask-based beamforming and optimal-mask search"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "execute an experiment plan");
  run_cmd->add_option("--plan", run.plan, "plan JSON (overrides flags)");
  run_cmd->add_option("--out", run.out, "output directory");
  run_cmd->add_option("--jobs", run.jobs, "worker threads")->check(CLI::PositiveNumber);
  run_cmd->add_option("--g", run.g, "background multipliers");
  run_cmd->add_option("--variations", run.variations, "variation names, or IdealMMSE");
  run_cmd->add_option("--scaling", run.scaling, "scaling methods: ideal, mdp, mask-based");
  run_cmd->add_option("--iterations", run.iterations, "iterations per run");
  run_cmd->add_option("--step-size", run.step_size, "optimizer step size");
  run_cmd->add_option("--reference-mic", run.reference_mic, "1-based reference microphone");
  run_cmd->add_flag("--quiet", run.quiet, "no per-cell progress on stderr");

  std::string suite = "all";
  std::uint64_t prop_seed = 1;
  auto* prop_cmd = app.add_subcommand("properties", "run property suites");
  prop_cmd->add_option("--suite", suite, "all, appendixB, appendixC, equivalence, gradients, scaling-nesting");
  prop_cmd->add_option("--seed", prop_seed, "base seed");

  std::uint64_t seed = 7;
  int mics = 3, sources = 2;
  double duration = 2.0, rate = 16000.0, g = 1.0;
  std::string synth_out = "scene";
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic scene as WAV files");
  synth_cmd->add_option("--seed", seed, "scene seed");
  synth_cmd->add_option("--mics", mics, "microphone count");
  synth_cmd->add_option("--sources", sources, "interferer count");
  synth_cmd->add_option("--duration", duration, "seconds");
  synth_cmd->add_option("--rate", rate, "sample rate");
  synth_cmd->add_option("--g", g, "background multiplier for mixture.wav");
  synth_cmd->add_option("--out", synth_out, "output directory");

  std::string ref, est;
  int channel = 1, est_channel = 1;
  auto* sdr_cmd = app.add_subcommand("sdr", "time-domain SDR of an estimate");
  sdr_cmd->add_option("--ref", ref, "reference WAV")->required();
  sdr_cmd->add_option("--est", est, "estimate WAV")->required();
  sdr_cmd->add_option("--channel", channel, "1-based reference channel");
  sdr_cmd->add_option("--est-channel", est_channel, "1-based estimate channel");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitPlan;
  }

  if (*run_cmd) return cmd_run(run);
  if (*prop_cmd) return cmd_properties(suite, prop_seed);
  if (*synth_cmd) return cmd_synth(seed, mics, sources, duration, rate, g, synth_out);
  if (*sdr_cmd) return cmd_sdr(ref, est, channel, est_channel);
  return kExitPlan;
}
