#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ctsynth/archcheck.hpp"
#include "ctsynth/error.hpp"
#include "ctsynth/metrics.hpp"
#include "ctsynth/phantom.hpp"
#include "ctsynth/rng.hpp"
#include "ctsynth/sampler.hpp"
#include "ctsynth/volume_io.hpp"

namespace ctsynth::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

// Usage and config problems map to exit code 2; everything else is 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) fail(Errc::io, "cannot write " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) fail(Errc::io, "cannot create directory " + dir.string());
}

fs::path manifest_next_to_file(const fs::path& file) { return fs::path(file.string() + ".manifest.json"); }

struct Manifest {
  std::string command;
  json config = json::object();
  json seed = nullptr;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  double wall_seconds = 0.0;
  json throughput = nullptr;

  void write(const fs::path& path) const {
    const json j = {{"command", command},           {"config", config},
                    {"seed", seed},                 {"tool_version", std::string(kToolVersion)},
                    {"inputs", inputs},             {"outputs", outputs},
                    {"wall_time_s", wall_seconds},  {"throughput", throughput}};
    write_text(path, j.dump(2) + "\n");
  }
};

void write_pgm(const fs::path& path, int64_t w, int64_t h, const std::vector<uint8_t>& pixels) {
  std::string text = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  text.append(pixels.begin(), pixels.end());
  write_text(path, text);
}

std::vector<double> read_numbers(const fs::path& path) {
  const std::string text = read_text(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    try {
      return json::parse(text).get<std::vector<double>>();
    } catch (const json::exception& e) {
      fail(Errc::corrupt, path.string() + ": " + e.what());
    }
  }
  std::string cleaned = text;
  std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
  std::istringstream in(cleaned);
  std::vector<double> values;
  std::string token;
  while (in >> token) {
    size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size()) fail(Errc::corrupt, path.string() + ": not a number: " + token);
    values.push_back(v);
  }
  return values;
}

std::vector<std::string> sorted_cvol_names(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(Errc::io, "not a directory: " + dir.string());
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".cvol") names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

json error_record(const std::string& name, const std::string& code, const std::string& message) {
  return {{"case", name}, {"error", code}, {"message", message}};
}

// Runs fn on every case present in either directory; cases missing on one side become error records.
template <class Fn>
std::vector<json> for_each_case(const fs::path& pred_dir, const fs::path& gt_dir, Fn&& fn) {
  const auto gt_names = sorted_cvol_names(gt_dir);
  const auto pred_names = sorted_cvol_names(pred_dir);
  std::set<std::string> all(gt_names.begin(), gt_names.end());
  all.insert(pred_names.begin(), pred_names.end());
  std::vector<json> records;
  for (const auto& name : all) {
    const fs::path p = pred_dir / name, g = gt_dir / name;
    if (!fs::exists(p)) {
      records.push_back(error_record(name, "io", "no prediction for this case"));
      continue;
    }
    if (!fs::exists(g)) {
      records.push_back(error_record(name, "io", "no reference for this case"));
      continue;
    }
    try {
      json r = fn(read_mask(p), read_mask(g));
      r["case"] = name;
      records.push_back(std::move(r));
    } catch (const Error& e) {
      records.push_back(error_record(name, std::string(errc_name(e.code())), e.what()));
    }
  }
  return records;
}

void write_report(const fs::path& path, const std::vector<json>& records, const json& aggregate) {
  std::string text;
  for (const auto& r : records) text += r.dump() + "\n";
  text += aggregate.dump() + "\n";
  write_text(path, text);
}

int count_errors(const std::vector<json>& records) {
  return static_cast<int>(std::count_if(records.begin(), records.end(), [](const json& r) { return r.contains("error"); }));
}

// ---------------------------------------------------------------------------

struct PhantomArgs {
  std::string out;
  uint64_t seed = 0;
  int count = 1;
  std::vector<int64_t> dims{128, 128, 128};
};

int cmd_phantom(const PhantomArgs& a, std::ostream& out) {
  const auto t0 = Clock::now();
  PhantomConfig base;
  base.dims = {a.dims[0], a.dims[1], a.dims[2]};
  try {
    base.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  ensure_dir(a.out);
  Manifest m;
  m.command = "phantom";
  m.seed = a.seed;
  m.config = {{"count", a.count}, {"dims", a.dims}};
  for (int k = 0; k < a.count; ++k) {
    PhantomConfig pc = base;
    pc.seed = derive_rng(a.seed, "phantom", static_cast<uint64_t>(k)).next();
    const auto ph = generate_phantom(pc);
    char id[64];
    std::snprintf(id, sizeof id, "phantom_%llu_%03d", static_cast<unsigned long long>(a.seed), k);
    const fs::path vol = fs::path(a.out) / (std::string(id) + "_vol.cvol");
    const fs::path mask = fs::path(a.out) / (std::string(id) + "_mask.cvol");
    write_cvol(ph.volume, vol);
    write_cvol(ph.artery, mask);
    m.outputs.push_back(vol.string());
    m.outputs.push_back(mask.string());
  }
  m.wall_seconds = seconds_since(t0);
  m.write(fs::path(a.out) / "manifest.json");
  out << "wrote " << a.count << " phantom pair(s) to " << a.out << "\n";
  return 0;
}

struct ShardArgs {
  std::string volumes, config, out;
  uint64_t count = 0;
  unsigned workers = 1;
};

int cmd_shard(const ShardArgs& a, std::ostream& out) {
  const auto t0 = Clock::now();
  std::string text;
  try {
    text = read_text(a.config);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  SamplerConfig config;
  try {
    config = parse_sampler_config(text);
  } catch (const Error& e) {
    throw UsageError(a.config + ": " + e.what());
  }
  Manifest m;
  m.inputs.push_back(fs::path(a.config).string());
  std::vector<fs::path> files;
  const auto sources = load_sources(a.volumes, config, &files);
  for (const auto& f : files) m.inputs.push_back(f.string());
  const auto summary = generate_shard(sources, a.count, config, a.out, a.workers);
  m.command = "shard";
  m.config = to_json(config);
  m.config["count"] = a.count;
  m.config["workers"] = a.workers;
  m.seed = config.master_seed;
  m.outputs.push_back(a.out);
  m.wall_seconds = seconds_since(t0);
  m.throughput = summary.to_json();
  m.write(manifest_next_to_file(a.out));
  out << summary.to_json().dump() << "\n";
  return 0;
}

struct EvalArgs {
  std::string pred, gt, report;
  int64_t min_overlap = 10;
};

int cmd_eval_seg(const EvalArgs& a, std::ostream& out) {
  const auto t0 = Clock::now();
  auto records = for_each_case(a.pred, a.gt, [](const MaskVolume& p, const MaskVolume& g) {
    const auto s = score_segmentation(p, g);
    return json{{"dice", s.dice}, {"cldice", s.cldice},
                {"msd", std::isfinite(s.msd_voxels) ? json(s.msd_voxels) : json(nullptr)}};
  });
  double dice_sum = 0, cl_sum = 0, msd_sum = 0;
  int ok = 0, msd_n = 0;
  for (const auto& r : records) {
    if (r.contains("error")) continue;
    ++ok;
    dice_sum += r["dice"].get<double>();
    cl_sum += r["cldice"].get<double>();
    if (!r["msd"].is_null()) {
      msd_sum += r["msd"].get<double>();
      ++msd_n;
    }
  }
  const int errors = count_errors(records);
  auto mean = [](double s, int n) { return n ? json(s / n) : json(nullptr); };
  const json agg = {{"aggregate", true},           {"cases", records.size()},
                    {"errors", errors},            {"mean_dice", mean(dice_sum, ok)},
                    {"mean_cldice", mean(cl_sum, ok)}, {"mean_msd", mean(msd_sum, msd_n)},
                    {"msd_defined_cases", msd_n}};
  write_report(a.report, records, agg);
  Manifest m;
  m.command = "eval-seg";
  m.inputs = {a.pred, a.gt};
  m.outputs = {a.report};
  m.wall_seconds = seconds_since(t0);
  m.write(manifest_next_to_file(a.report));
  out << agg.dump() << "\n";
  return errors ? 1 : 0;
}

int cmd_eval_det(const EvalArgs& a, std::ostream& out) {
  const auto t0 = Clock::now();
  auto records = for_each_case(a.pred, a.gt, [&](const MaskVolume& p, const MaskVolume& g) {
    const auto s = match_lesions(p, g, a.min_overlap);
    return json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
                {"n_pred", s.n_pred},       {"n_gt", s.n_gt},     {"matched", s.matched_pairs.size()}};
  });
  uint64_t n_pred = 0, n_gt = 0, matched = 0;
  for (const auto& r : records) {
    if (r.contains("error")) continue;
    n_pred += r["n_pred"].get<uint64_t>();
    n_gt += r["n_gt"].get<uint64_t>();
    matched += r["matched"].get<uint64_t>();
  }
  // Pooled over lesions, with the same empty conventions as per-case scoring.
  double precision = 1.0, recall = 1.0;
  if (n_pred || n_gt) {
    precision = n_pred ? static_cast<double>(matched) / n_pred : 0.0;
    recall = n_gt ? static_cast<double>(matched) / n_gt : 0.0;
  }
  const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  const int errors = count_errors(records);
  const json agg = {{"aggregate", true}, {"cases", records.size()}, {"errors", errors},
                    {"min_overlap", a.min_overlap}, {"n_pred", n_pred}, {"n_gt", n_gt},
                    {"matched", matched}, {"precision", precision}, {"recall", recall}, {"f1", f1}};
  write_report(a.report, records, agg);
  Manifest m;
  m.command = "eval-det";
  m.config = {{"min_overlap", a.min_overlap}};
  m.inputs = {a.pred, a.gt};
  m.outputs = {a.report};
  m.wall_seconds = seconds_since(t0);
  m.write(manifest_next_to_file(a.report));
  out << agg.dump() << "\n";
  return errors ? 1 : 0;
}

struct RocArgs {
  std::string scores, labels, report;
  int resamples = 500;
  uint64_t seed = 0;
};

int cmd_roc(const RocArgs& a, std::ostream& out) {
  const auto t0 = Clock::now();
  const auto scores = read_numbers(a.scores);
  const auto raw = read_numbers(a.labels);
  std::vector<uint8_t> labels;
  labels.reserve(raw.size());
  for (double v : raw) {
    if (v != 0.0 && v != 1.0) fail(Errc::invalid_argument, a.labels + ": labels must be 0 or 1");
    labels.push_back(static_cast<uint8_t>(v));
  }
  const auto r = bootstrap_auc_ci(scores, labels, a.resamples, a.seed);
  const auto n_pos = std::count(labels.begin(), labels.end(), 1);
  const json j = {{"auc", r.auc},       {"ci_lo", r.ci_lo},   {"ci_hi", r.ci_hi},
                  {"n_resamples", r.n_resamples}, {"seed", a.seed}, {"n_pos", n_pos},
                  {"n_neg", static_cast<int64_t>(labels.size()) - n_pos}};
  out << j.dump() << "\n";
  if (!a.report.empty()) {
    write_text(a.report, j.dump(2) + "\n");
    Manifest m;
    m.command = "roc";
    m.config = {{"resamples", a.resamples}};
    m.seed = a.seed;
    m.inputs = {a.scores, a.labels};
    m.outputs = {a.report};
    m.wall_seconds = seconds_since(t0);
    m.write(manifest_next_to_file(a.report));
  }
  return 0;
}

struct ArchArgs {
  std::string spec, report;
};

int cmd_arch_check(const ArchArgs& a, std::ostream& out) {
  const auto t0 = Clock::now();
  ArchSpec arch = default_arch();
  if (!a.spec.empty()) {
    try {
      arch = arch_from_json(json::parse(read_text(a.spec)));
    } catch (const json::exception& e) {
      throw UsageError(a.spec + ": " + e.what());
    } catch (const Error& e) {
      throw UsageError(a.spec + ": " + e.what());
    }
  }
  const auto report = validate_arch(arch);
  out << report.to_text();
  out << (report.pass() ? "architecture: PASS\n" : "architecture: FAIL\n");
  if (!a.report.empty()) {
    json rows = json::array();
    for (const auto* list : {&report.rows, &report.invariants})
      for (const auto& r : *list)
        rows.push_back({{"name", r.name}, {"expected", r.expected}, {"actual", r.actual}, {"pass", r.pass}});
    write_text(a.report, json{{"pass", report.pass()}, {"rows", rows}}.dump(2) + "\n");
    Manifest m;
    m.command = "arch-check";
    m.config = to_json(arch);
    if (!a.spec.empty()) m.inputs = {a.spec};
    m.outputs = {a.report};
    m.wall_seconds = seconds_since(t0);
    m.write(manifest_next_to_file(a.report));
  }
  return report.pass() ? 0 : 1;
}

struct InspectArgs {
  std::string shard, out;
  uint64_t index = 0;
};

int cmd_inspect(const InspectArgs& a, std::ostream& out) {
  const auto t0 = Clock::now();
  ShardReader reader(a.shard);
  if (a.index >= reader.size())
    fail(Errc::invalid_argument, "index " + std::to_string(a.index) + " out of range for " +
                                     std::to_string(reader.size()) + " record(s)");
  const auto rec = reader.read(a.index);
  const int64_t d = reader.header().patch_size;
  const auto plane = static_cast<size_t>(d * d);

  // Slice through the most lesion voxels; the middle slice when the target is empty.
  int64_t z = d / 2, best = 0;
  for (int64_t k = 0; k < d; ++k) {
    const auto begin = rec.target.begin() + static_cast<std::ptrdiff_t>(k * plane);
    const auto n = std::count(begin, begin + static_cast<std::ptrdiff_t>(plane), uint8_t{1});
    if (n > best) best = n, z = k;
  }

  ensure_dir(a.out);
  Manifest m;
  m.command = "inspect";
  m.config = {{"index", a.index}};
  m.inputs = {a.shard};
  const std::string stem = "record_" + std::to_string(a.index);
  const auto& order = reader.header().channel_order;
  const size_t n = static_cast<size_t>(d) * plane;
  std::vector<uint8_t> px(plane);
  for (size_t c = 0; c < order.size(); ++c) {
    const float* src = rec.channels.data() + c * n + static_cast<size_t>(z) * plane;
    for (size_t i = 0; i < plane; ++i)
      px[i] = static_cast<uint8_t>(std::lround(std::clamp(src[i], 0.0f, 1.0f) * 255.0f));
    const fs::path p = fs::path(a.out) / (stem + "_" + order[c] + ".pgm");
    write_pgm(p, d, d, px);
    m.outputs.push_back(p.string());
  }
  for (size_t i = 0; i < plane; ++i) px[i] = rec.target[static_cast<size_t>(z) * plane + i] ? 255 : 0;
  const fs::path tp = fs::path(a.out) / (stem + "_target.pgm");
  write_pgm(tp, d, d, px);
  m.outputs.push_back(tp.string());

  const json info = {{"index", a.index},  {"slice_z", z},        {"slice_target_voxels", best},
                     {"patch_size", d},   {"channel_order", order}, {"meta", rec.meta}};
  const fs::path jp = fs::path(a.out) / (stem + ".json");
  write_text(jp, info.dump(2) + "\n");
  m.outputs.push_back(jp.string());
  m.wall_seconds = seconds_since(t0);
  m.write(fs::path(a.out) / "manifest.json");
  out << "wrote " << m.outputs.size() << " file(s) for record " << a.index << " to " << a.out << "\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic lesion patch engine and evaluation tools", "ctsynth"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.set_version_flag("--version", std::string(kToolVersion));

  PhantomArgs pa;
  auto* phantom = app.add_subcommand("phantom", "Generate phantom volume/mask pairs");
  phantom->add_option("--out", pa.out, "Output directory")->required();
  phantom->add_option("--seed", pa.seed, "Master seed")->required();
  phantom->add_option("--count", pa.count, "Number of phantoms")->required()->check(CLI::NonNegativeNumber);
  phantom->add_option("--dims", pa.dims, "Volume size X,Y,Z")->delimiter(',')->expected(3)->check(CLI::PositiveNumber);

  ShardArgs sa;
  auto* shard = app.add_subcommand("shard", "Write a training shard of synthesized patches");
  shard->add_option("--volumes", sa.volumes, "Directory of <id>_vol.cvol / <id>_mask.cvol pairs")->required();
  shard->add_option("--config", sa.config, "Sampler config JSON")->required();
  shard->add_option("--count", sa.count, "Number of patches")->required();
  shard->add_option("--out", sa.out, "Output shard file")->required();
  shard->add_option("--workers", sa.workers, "Worker threads")->check(CLI::Range(1u, 1024u));

  EvalArgs sega;
  auto* eval_seg = app.add_subcommand("eval-seg", "Score segmentation masks");
  eval_seg->add_option("--pred", sega.pred, "Prediction mask directory")->required();
  eval_seg->add_option("--gt", sega.gt, "Reference mask directory")->required();
  eval_seg->add_option("--report", sega.report, "JSON-lines report file")->required();

  EvalArgs deta;
  auto* eval_det = app.add_subcommand("eval-det", "Score lesion-level detection");
  eval_det->add_option("--pred", deta.pred, "Prediction mask directory")->required();
  eval_det->add_option("--gt", deta.gt, "Reference mask directory")->required();
  eval_det->add_option("--min-overlap", deta.min_overlap, "Overlap must exceed this many voxels")
      ->check(CLI::NonNegativeNumber);
  eval_det->add_option("--report", deta.report, "JSON-lines report file")->required();

  RocArgs ra;
  auto* roc = app.add_subcommand("roc", "AUROC with bootstrap confidence interval");
  roc->add_option("--scores", ra.scores, "Scores file")->required();
  roc->add_option("--labels", ra.labels, "Labels file (0/1)")->required();
  roc->add_option("--resamples", ra.resamples, "Bootstrap resamples")->check(CLI::PositiveNumber);
  roc->add_option("--seed", ra.seed, "Bootstrap seed");
  roc->add_option("--report", ra.report, "Optional JSON report file");

  ArchArgs aa;
  auto* arch = app.add_subcommand("arch-check", "Check the network shape contract");
  arch->add_option("--spec", aa.spec, "Architecture JSON (default: built-in)");
  arch->add_option("--report", aa.report, "Optional JSON report file");

  InspectArgs ia;
  auto* inspect = app.add_subcommand("inspect", "Dump slices of one shard record as PGM images");
  inspect->add_option("--shard", ia.shard, "Shard file")->required();
  inspect->add_option("--index", ia.index, "Record index");
  inspect->add_option("--out", ia.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*phantom) return cmd_phantom(pa, out);
    if (*shard) return cmd_shard(sa, out);
    if (*eval_seg) return cmd_eval_seg(sega, out);
    if (*eval_det) return cmd_eval_det(deta, out);
    if (*roc) return cmd_roc(ra, out);
    if (*arch) return cmd_arch_check(aa, out);
    if (*inspect) return cmd_inspect(ia, out);
  } catch (const UsageError& e) {
    err << "error [config]: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error [" << errc_name(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace ctsynth::cli
