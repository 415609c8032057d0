// Copyright 2026 The maskbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Experiment runner: plan parsing, scenario construction, a worker pool over
// independent (scene, g, variation, scaling) cells, result tables and
// per-iteration curves.

#ifndef MASKBF_HARNESS_HPP
#define MASKBF_HARNESS_HPP

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>
#include <variant>

#include <nlohmann/json.hpp>

#include "maskbf/optimizer.hpp"

namespace maskbf {

using nlohmann::json;

/// Name accepted in the variation list for the fixed ideal MMSE filter.
inline constexpr const char* kIdealFilterName = "IdealMMSE";

struct SyntheticSource {
  std::uint64_t seed = 1;
  int count = 1;
  int mics = 3;
  int noise_sources = 2;
  double duration = 2.0;
  double sample_rate = 16000.0;
};

struct ManifestEntry {
  std::string name;
  std::vector<std::filesystem::path> target;  // one multichannel file or one file per channel
  std::vector<std::filesystem::path> noise;
};

struct PlanScaling {
  ScalingMethod method = ScalingMethod::ideal;
  MaskConstraint constraint = MaskConstraint::l1_mn;  // mask-based only

  std::string label() const {
    return method == ScalingMethod::mask_based ? "mask-based:" + to_string(constraint) : to_string(method);
  }
};

struct ExperimentPlan {
  std::variant<SyntheticSource, std::vector<ManifestEntry>> source = SyntheticSource{};
  std::vector<double> g_list{1.0, 2.0, 4.0};
  std::vector<std::string> variations;  // variation names or kIdealFilterName
  std::vector<PlanScaling> scaling{PlanScaling{}};
  MaskConstraint filter_constraint = MaskConstraint::ratio;
  std::optional<int> iterations;   // per-variation default when empty
  std::optional<bool> bn_enabled;  // per-variation default when empty
  OptimizationConfig config;
  StftConfig stft{256, 64, WindowKind::sqrt_hann};
  int reference_mic = 1;
  std::filesystem::path output_dir = "maskbf-out";
  bool write_audio = false;
};

namespace detail {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

inline std::vector<std::filesystem::path> paths_of(const json& j) {
  std::vector<std::filesystem::path> out;
  if (j.is_string()) out.emplace_back(j.get<std::string>());
  else
    for (const auto& p : j) out.emplace_back(p.get<std::string>());
  return out;
}

}  // namespace detail

/// Parses and validates a plan. Relative manifest paths resolve against
/// `base`. Throws PlanError.
inline ExperimentPlan parse_plan(const json& j, const std::filesystem::path& base = {}) {
  ExperimentPlan p;
  try {
    if (!j.is_object()) throw PlanError("plan must be a JSON object");
    if (j.contains("scenarios")) {
      const auto& s = j.at("scenarios");
      if (s.contains("synthetic")) {
        const auto& y = s.at("synthetic");
        SyntheticSource src;
        src.seed = detail::get_or<std::uint64_t>(y, "seed", 1);
        src.count = detail::get_or<int>(y, "count", 1);
        src.mics = detail::get_or<int>(y, "mics", 3);
        src.noise_sources = detail::get_or<int>(y, "noise_sources", 2);
        src.duration = detail::get_or<double>(y, "duration", 2.0);
        src.sample_rate = detail::get_or<double>(y, "sample_rate", 16000.0);
        if (src.count < 1 || src.mics < 2 || !(src.duration > 0.0) || src.noise_sources < 1)
          throw PlanError("synthetic source needs count >= 1, mics >= 2, noise_sources >= 1, duration > 0");
        p.source = src;
      } else if (s.contains("manifest")) {
        std::vector<ManifestEntry> entries;
        int idx = 0;
        for (const auto& e : s.at("manifest")) {
          ManifestEntry m;
          m.name = detail::get_or<std::string>(e, "name", "utt" + std::to_string(idx++));
          m.target = detail::paths_of(e.at("target"));
          m.noise = detail::paths_of(e.at("noise"));
          for (auto& q : m.target) if (q.is_relative()) q = base / q;
          for (auto& q : m.noise) if (q.is_relative()) q = base / q;
          entries.push_back(std::move(m));
        }
        if (entries.empty()) throw PlanError("manifest is empty");
        p.source = std::move(entries);
      } else {
        throw PlanError("scenarios needs a 'synthetic' or 'manifest' entry");
      }
    }
    if (j.contains("g")) p.g_list = j.at("g").get<std::vector<double>>();
    if (p.g_list.empty()) throw PlanError("g list is empty");
    for (double g : p.g_list)
      if (!(g >= 0.0)) throw PlanError("g multipliers must be non-negative");
    if (!j.contains("variations")) throw PlanError("plan lists no variations");
    p.variations = j.at("variations").get<std::vector<std::string>>();
    if (p.variations.empty()) throw PlanError("variation list is empty");
    for (const auto& v : p.variations)
      if (v != kIdealFilterName) VariationSpec::parse(v);
    if (j.contains("scaling")) {
      p.scaling.clear();
      for (const auto& s : j.at("scaling")) {
        PlanScaling ps;
        if (s.is_string()) {
          ps.method = scaling_from_string(s.get<std::string>());
        } else {
          ps.method = scaling_from_string(s.at("method").get<std::string>());
          if (s.contains("constraint")) ps.constraint = constraint_from_string(s.at("constraint").get<std::string>());
        }
        if (ps.method != ScalingMethod::ideal && ps.method != ScalingMethod::mdp &&
            ps.method != ScalingMethod::mask_based)
          throw PlanError("scaling '" + to_string(ps.method) + "' is not available in experiments");
        p.scaling.push_back(ps);
      }
      if (p.scaling.empty()) throw PlanError("scaling list is empty");
    }
    if (j.contains("filter_constraint"))
      p.filter_constraint = constraint_from_string(j.at("filter_constraint").get<std::string>());
    if (j.contains("config")) {
      const auto& c = j.at("config");
      if (c.contains("iterations")) {
        p.iterations = c.at("iterations").get<int>();
        if (*p.iterations < 1) throw PlanError("iterations must be at least 1");
      }
      if (c.contains("bn") && !c.at("bn").is_string()) p.bn_enabled = c.at("bn").get<bool>();
      p.config.step_size = detail::get_or<double>(c, "step_size", p.config.step_size);
      if (!(p.config.step_size > 0.0)) throw PlanError("step_size must be positive");
      const auto kind = detail::get_or<std::string>(c, "optimizer", "adam");
      if (kind == "adam") p.config.kind = OptimizerKind::adam;
      else if (kind == "plain") p.config.kind = OptimizerKind::plain;
      else throw PlanError("optimizer must be 'adam' or 'plain'");
      p.config.seed = detail::get_or<std::uint64_t>(c, "seed", 0);
      p.config.clip_norm = detail::get_or<double>(c, "clip_norm", p.config.clip_norm);
      p.config.loss_floor = detail::get_or<double>(c, "loss_floor", p.config.loss_floor);
      p.config.final_step_ratio = detail::get_or<double>(c, "final_step_ratio", p.config.final_step_ratio);
      if (!(p.config.final_step_ratio > 0.0)) throw PlanError("final_step_ratio must be positive");
      p.config.track_sdr = detail::get_or<bool>(c, "track_sdr", true);
    }
    if (j.contains("stft")) {
      const auto& s = j.at("stft");
      p.stft.window_length = detail::get_or<int>(s, "window_length", p.stft.window_length);
      p.stft.hop = detail::get_or<int>(s, "hop", p.stft.hop);
      if (s.contains("window")) p.stft.window = window_from_string(s.at("window").get<std::string>());
    }
    p.reference_mic = detail::get_or<int>(j, "reference_mic", 1);
    if (p.reference_mic < 1) throw PlanError("reference_mic is 1-based");
    if (j.contains("output_dir")) p.output_dir = j.at("output_dir").get<std::string>();
    p.write_audio = detail::get_or<bool>(j, "write_audio", false);
  } catch (const PlanError&) {
    throw;
  } catch (const std::exception& e) {
    throw PlanError(e.what());
  }
  return p;
}

inline ExperimentPlan load_plan(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw PlanError("cannot open plan " + path.string());
  json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    throw PlanError(std::string("plan is not valid JSON: ") + e.what());
  }
  return parse_plan(j, path.parent_path());
}

// ---------------------------------------------------------------------------
// Records

inline json to_json(const RunRecord& r) {
  json warnings = json::array();
  for (const auto& w : r.warnings) warnings.push_back(w);
  return {{"variation", r.variation},
          {"constraint", r.constraint},
          {"scaling", r.scaling},
          {"iterations", r.iterations},
          {"bn_enabled", r.bn_enabled},
          {"loss_curve", r.loss_curve},
          {"sdr_curve", r.sdr_curve},
          {"initial_loss", r.initial_loss},
          {"initial_sdr_db", r.initial_sdr_db},
          {"sdr_db", r.sdr_db},
          {"aborted", r.aborted},
          {"warnings", warnings}};
}

/// Writes via a temporary file and rename so readers never see partial output.
inline void write_atomically(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + tmp);
    os << content;
  }
  std::filesystem::rename(tmp, path);
}

/// Per-iteration loss and SDR of each record as CSV rows
/// variation,iteration,loss,sdr_db. An empty record list writes nothing.
inline std::string emit_curves(const std::vector<RunRecord>& records) {
  std::ostringstream os;
  os << std::setprecision(17);
  if (records.empty()) return {};
  os << "variation,iteration,loss,sdr_db\n";
  for (const auto& r : records)
    for (std::size_t i = 0; i < r.loss_curve.size(); ++i) {
      os << r.variation << "," << i + 1 << "," << r.loss_curve[i] << ",";
      if (i < r.sdr_curve.size()) os << r.sdr_curve[i];
      os << "\n";
    }
  return os.str();
}

/// First iteration (1-based) from which the SDR curve stays within `tol` dB
/// of its final value; 0 for an empty curve.
inline int iterations_to_converge(const RunRecord& r, double tol) {
  if (r.sdr_curve.empty()) return 0;
  const double last = r.sdr_curve.back();
  int idx = static_cast<int>(r.sdr_curve.size());
  for (int i = static_cast<int>(r.sdr_curve.size()) - 1; i >= 0; --i) {
    if (std::abs(r.sdr_curve[static_cast<std::size_t>(i)] - last) > tol) break;
    idx = i + 1;
  }
  return idx;
}

// ---------------------------------------------------------------------------
// Result table

struct ResultCell {
  std::string variation;
  double g = 1.0;
  std::string scaling;
  double mean_sdr_db = 0.0;
  int utterances = 0;
  int failed = 0;
  bool baseline = false;
  std::vector<std::string> warnings;  // record files or failure messages
};

struct ResultTable {
  std::vector<ResultCell> cells;

  const ResultCell* find(const std::string& variation, double g, const std::string& scaling) const {
    for (const auto& c : cells)
      if (c.variation == variation && c.g == g && c.scaling == scaling) return &c;
    return nullptr;
  }

  std::string csv() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "variation,g,scaling,mean_sdr_db,utterances,failed,baseline\n";
    for (const auto& c : cells)
      os << c.variation << "," << c.g << "," << c.scaling << "," << c.mean_sdr_db << "," << c.utterances << ","
         << c.failed << "," << (c.baseline ? 1 : 0) << "\n";
    return os.str();
  }

  json to_json() const {
    json rows = json::array();
    for (const auto& c : cells)
      rows.push_back({{"variation", c.variation}, {"g", c.g}, {"scaling", c.scaling}, {"mean_sdr_db", c.mean_sdr_db},
                      {"utterances", c.utterances}, {"failed", c.failed}, {"baseline", c.baseline},
                      {"warnings", c.warnings}});
    return {{"cells", rows}};
  }
};

struct SceneInput {
  std::string name;
  MultichannelWave target, noise;
};

inline std::vector<SceneInput> load_scenes(const ExperimentPlan& plan) {
  std::vector<SceneInput> out;
  if (const auto* syn = std::get_if<SyntheticSource>(&plan.source)) {
    for (int i = 0; i < syn->count; ++i) {
      const auto seed = syn->seed + static_cast<std::uint64_t>(i);
      auto [t, n] = synth_scene(seed, syn->mics, syn->noise_sources, syn->duration, syn->sample_rate);
      out.push_back({"synth-" + std::to_string(seed), std::move(t), std::move(n)});
    }
  } else {
    for (const auto& e : std::get<std::vector<ManifestEntry>>(plan.source)) {
      auto read = [](const std::vector<std::filesystem::path>& p) {
        return p.size() == 1 ? read_wav(p.front()) : read_wav_channels(p);
      };
      out.push_back({e.name, read(e.target), read(e.noise)});
    }
  }
  return out;
}

struct ExperimentResult {
  ResultTable table;
  std::vector<RunRecord> records;  // planned cells in plan order
  std::vector<std::string> record_names;
};

namespace detail {

struct CellJob {
  std::size_t scene = 0;
  std::size_t g = 0;
  std::string variation;
  PlanScaling scaling;
};

inline std::string sanitize(std::string s) {
  for (auto& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_' && ch != '.') ch = '_';
  return s;
}

inline std::string fmt_g(double g) {
  std::ostringstream os;
  os << g;
  return os.str();
}

inline RunRecord run_cell(const Scenario& sc, const FilterBank& ideal, const CellJob& job, const ExperimentPlan& plan) {
  if (job.variation == kIdealFilterName) {
    if (job.scaling.method == ScalingMethod::mask_based) {
      OptimizationConfig cfg = plan.config;
      cfg.iterations = plan.iterations.value_or(500);
      cfg.bn_enabled = plan.bn_enabled.value_or(true);
      RunRecord r = optimize_scaling_mask(sc, ideal, job.scaling.constraint, cfg);
      r.variation = kIdealFilterName;
      return r;
    }
    // fixed filter and fixed scale: a single evaluation, no parameters
    PipelineSpec ps;
    ps.scaling = job.scaling.method;
    OptimizationConfig cfg = plan.config;
    cfg.iterations = 1;
    RunRecord r = optimize(sc, ps, &ideal, cfg);
    r.variation = kIdealFilterName;
    return r;
  }
  const auto v = VariationSpec::parse(job.variation);
  OptimizationConfig cfg = plan.config;
  const auto def = default_config(v);
  cfg.iterations = plan.iterations.value_or(def.iterations);
  cfg.bn_enabled = plan.bn_enabled.value_or(def.bn_enabled);
  if (job.scaling.method == ScalingMethod::mask_based)
    return optimize_joint(sc, v, job.scaling.constraint, cfg, plan.filter_constraint);
  return optimize_filter_masks(sc, v, ScalingSpec{job.scaling.method, {}, {}}, cfg, plan.filter_constraint);
}

}  // namespace detail

/// Executes every planned cell on `jobs` worker threads, writes records,
/// table.csv, table.json and curves.csv under the output directory, and
/// returns the table. Cells are independent and results are assembled in plan
/// order, so the output does not depend on the worker count.
inline ExperimentResult run_experiment(const ExperimentPlan& plan, int jobs = 1,
                                       std::ostream* log = nullptr) {
  namespace fs = std::filesystem;
  fs::create_directories(plan.output_dir / "records");
  const auto inputs = load_scenes(plan);

  // scenarios per (scene, g), built once up front
  std::vector<std::vector<Scenario>> scenes(inputs.size());
  std::vector<std::vector<FilterBank>> ideal(inputs.size());
  for (std::size_t s = 0; s < inputs.size(); ++s)
    for (double g : plan.g_list) {
      if (plan.reference_mic > inputs[s].target.channels())
        throw PlanError("reference_mic " + std::to_string(plan.reference_mic) + " exceeds channel count");
      scenes[s].push_back(mix_scenario(inputs[s].target, inputs[s].noise, g, plan.reference_mic, plan.stft));
      ideal[s].push_back(ideal_mmse_bank(scenes[s].back()));
    }

  std::vector<detail::CellJob> cells;
  for (std::size_t gi = 0; gi < plan.g_list.size(); ++gi)
    for (const auto& v : plan.variations)
      for (const auto& sc : plan.scaling)
        for (std::size_t s = 0; s < inputs.size(); ++s) cells.push_back({s, gi, v, sc});

  std::vector<std::optional<RunRecord>> results(cells.size());
  std::vector<std::string> failures(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const auto& c = cells[i];
      try {
        results[i] = detail::run_cell(scenes[c.scene][c.g], ideal[c.scene][c.g], c, plan);
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
      if (log) {
        std::lock_guard<std::mutex> lock(log_mutex);
        *log << "[" << i + 1 << "/" << cells.size() << "] " << inputs[c.scene].name << " g=" << plan.g_list[c.g]
             << " " << c.variation << " " << c.scaling.label() << ": "
             << (results[i] ? std::to_string(results[i]->sdr_db) + " dB" : "failed: " + failures[i]) << "\n";
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  ExperimentResult out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    const std::string name = detail::sanitize(inputs[c.scene].name + "_g" + detail::fmt_g(plan.g_list[c.g]) + "_" +
                                              c.variation + "_" + c.scaling.label());
    out.record_names.push_back(name);
    if (!results[i]) continue;
    const auto& r = *results[i];
    json j = to_json(r);
    j["scene"] = inputs[c.scene].name;
    j["g"] = plan.g_list[c.g];
    write_atomically(plan.output_dir / "records" / (name + ".json"), j.dump(2) + "\n");
    for (const auto& [role, m] : r.masks) {
      const auto role_name = to_string(role);
      const auto con = role == MaskRole::scaling ? c.scaling.constraint : plan.filter_constraint;
      write_mask(plan.output_dir / "records" / (name + "_" + role_name), m, con, role_name);
    }
    write_filters(plan.output_dir / "records" / (name + "_filters"), r.filters, r.variation, false);
    if (plan.write_audio) {
      MultichannelWave w;
      w.sample_rate = scenes[c.scene][c.g].observation.sample_rate();
      w.samples = synthesize(scenes[c.scene][c.g], r.output).transpose();
      write_wav(plan.output_dir / "records" / (name + ".wav"), w, WavEncoding::float32);
    }
    out.records.push_back(r);
  }

  // table: one cell per (variation, g, scaling), mean over scenes
  for (std::size_t gi = 0; gi < plan.g_list.size(); ++gi) {
    for (const auto& v : plan.variations)
      for (const auto& sc : plan.scaling) {
        ResultCell cell{v, plan.g_list[gi], sc.label(), 0.0, 0, 0, false, {}};
        double sum = 0.0;
        for (std::size_t i = 0; i < cells.size(); ++i) {
          const auto& c = cells[i];
          if (c.g != gi || c.variation != v || c.scaling.label() != sc.label()) continue;
          if (results[i]) {
            sum += results[i]->sdr_db;
            ++cell.utterances;
            if (!results[i]->warnings.empty() || results[i]->aborted) cell.warnings.push_back(out.record_names[i]);
          } else {
            ++cell.failed;
            cell.warnings.push_back(out.record_names[i] + ": " + failures[i]);
          }
        }
        cell.mean_sdr_db = cell.utterances ? sum / cell.utterances : std::nan("");
        out.table.cells.push_back(cell);
      }
    ResultCell ib{"ideal-mmse", plan.g_list[gi], "ideal", 0.0, 0, 0, true, {}};
    ResultCell mic{"mic-" + std::to_string(plan.reference_mic), plan.g_list[gi], "none", 0.0, 0, 0, true, {}};
    for (std::size_t s = 0; s < inputs.size(); ++s) {
      ib.mean_sdr_db += output_sdr(scenes[s][gi], apply_filters(scenes[s][gi], ideal[s][gi])).sdr_db;
      mic.mean_sdr_db += reference_mic_sdr(scenes[s][gi]).sdr_db;
    }
    ib.utterances = mic.utterances = static_cast<int>(inputs.size());
    ib.mean_sdr_db /= static_cast<double>(inputs.size());
    mic.mean_sdr_db /= static_cast<double>(inputs.size());
    out.table.cells.push_back(ib);
    out.table.cells.push_back(mic);
  }

  write_atomically(plan.output_dir / "table.csv", out.table.csv());
  write_atomically(plan.output_dir / "table.json", out.table.to_json().dump(2) + "\n");
  write_atomically(plan.output_dir / "curves.csv", emit_curves(out.records));
  return out;
}

}  // namespace maskbf

#endif  // MASKBF_HARNESS_HPP
