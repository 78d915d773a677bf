// agglosynth: synthesize, detect, evaluate and report.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "agglo/agglo.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace agglo;

namespace {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

Level log_level() {
  const char* env = std::getenv("PF_LOG");
  if (!env) return Level::warn;
  const std::string v = env;
  if (v == "error") return Level::error;
  if (v == "info") return Level::info;
  if (v == "debug") return Level::debug;
  return Level::warn;
}

void log(Level level, const std::string& msg) {
  static const Level threshold = log_level();
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (level <= threshold) std::cerr << "[" << names[int(level)] << "] " << msg << "\n";
}

struct Common {
  std::string out = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
  std::string format = "json";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-o,--out", c.out, "output directory")->capture_default_str();
  cmd->add_option("--seed", c.seed, "global seed")->each([&c](const std::string&) { c.seed_set = true; });
  cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::Range(1, 1024))->capture_default_str();
  cmd->add_option("--format", c.format, "stdout format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
}

fs::path prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorKind::io, "cannot create output directory: " + dir, dir);
  return dir;
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

void write_run(const fs::path& out, const std::string& command, const Common& c, json resolved) {
  write_json(out / "run.json", {{"tool", kGeneratorVersion},
                                {"command", command},
                                {"seed", c.seed},
                                {"threads", c.threads},
                                {"format", c.format},
                                {"config", std::move(resolved)}});
}

std::string csv_number(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

json number_or_null(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// ------------------------------------------------------------------ synth --

struct SynthArgs {
  std::string config;
  std::vector<std::string> splits{"train"};
  std::vector<long> counts{1};
  std::string name = "synthetic";
  bool dump_maps = false;
};

SceneConfig default_scene() {
  SceneConfig cfg;
  cfg.neck_blend = 3.0;
  cfg.composite.blur_sigma = 0.8;
  cfg.composite.noise = {0.02, 200.0};
  cfg.agglomerates = {{{1, 1, {30, 1.3}, 0.0, AttachMode::uniform_random}, 1.0},
                      {{3, 12, {30, 1.3}, 0.2, AttachMode::compact}, 2.0}};
  return cfg;
}

int cmd_synth(const Common& c, const SynthArgs& a) {
  SceneConfig cfg = a.config.empty() ? default_scene() : parse_scene_config(load_json(a.config));
  if (c.seed_set) cfg.seed = c.seed;
  if (a.counts.size() != 1 && a.counts.size() != a.splits.size())
    throw Error(ErrorKind::invalid_input, "give one --count or one per --split", "--count");
  const fs::path out = prepare_out(c.out);

  json summary = json::object();
  std::vector<std::pair<std::string, std::size_t>> rows;
  for (std::size_t s = 0; s < a.splits.size(); ++s) {
    const std::string& split = a.splits[s];
    const long count = a.counts.size() == 1 ? a.counts[0] : a.counts[s];
    if (count < 0) throw Error(ErrorKind::invalid_input, "count must be >= 0", "--count");
    const fs::path dir = out / split;
    std::error_code ec;
    fs::create_directories(dir / "images", ec);
    if (ec) throw Error(ErrorKind::io, "cannot create " + (dir / "images").string(), (dir / "images").string());
    if (a.dump_maps) fs::create_directories(dir / "maps", ec);

    std::vector<AnnotatedImage> images(static_cast<std::size_t>(count));
    parallel_for(images.size(), c.threads, [&](std::size_t i) {
      const auto id = static_cast<std::int64_t>(i);
      auto img = synthesize_image(cfg, image_seed(cfg.seed, split, id), id, 1);
      write_png(dir / img.annotated.file_name, img.annotated.pixels);
      if (a.dump_maps) {
        char stem[32];
        std::snprintf(stem, sizeof stem, "%06lld", static_cast<long long>(id));
        const fs::path m = dir / "maps";
        write_float_map((m / (std::string(stem) + ".depth.pfmap")).string(), img.maps.depth);
        write_float_map((m / (std::string(stem) + ".instance.pfmap")).string(), instance_as_float(img.maps.instance_id));
        write_float_map((m / (std::string(stem) + ".diffuse.pfmap")).string(), img.maps.diffuse);
        write_float_map((m / (std::string(stem) + ".shadow.pfmap")).string(), img.maps.shadow);
      }
      img.annotated.pixels = Gray8();
      images[i] = std::move(img.annotated);
    });
    export_dataset(images, dir, a.name, split, cfg.seed);
    std::size_t particles = 0;
    for (const auto& img : images) particles += img.particles.size();
    summary[split] = {{"images", count}, {"particles", particles}};
    rows.emplace_back(split, particles);
    log(Level::info, split + ": " + std::to_string(count) + " images, " + std::to_string(particles) + " particles");
  }
  write_run(out, "synth", c,
            {{"scene", to_json(cfg)}, {"splits", a.splits}, {"counts", a.counts}, {"name", a.name}});
  if (c.format == "csv") {
    std::cout << "split,images,particles\n";
    for (const auto& [split, n] : rows) std::cout << split << "," << summary[split]["images"] << "," << n << "\n";
  } else {
    std::cout << summary.dump(2) << "\n";
  }
  return 0;
}

// ----------------------------------------------------------- detect-hough --

struct DetectArgs {
  std::string dataset;
  std::string params;
  std::optional<int> r_min, r_max;
  std::optional<double> acc_thr, edge_thr, nms;
  int repeat = 10;
};

json timing_block(const std::vector<double>& seconds, std::size_t n_images, std::size_t n_particles) {
  double mean = 0;
  for (double s : seconds) mean += s;
  mean /= double(seconds.size());
  double var = 0;
  for (double s : seconds) var += (s - mean) * (s - mean);
  const double sd = seconds.size() > 1 ? std::sqrt(var / double(seconds.size() - 1)) : 0.0;
  const double ips = mean > 0 ? double(n_images) / mean : 0.0;
  const double pps = mean > 0 ? double(n_particles) / mean : 0.0;
  // Rates: mean and std of per-repetition throughput.
  auto rate_sd = [&](double count) {
    if (seconds.size() < 2) return 0.0;
    double m = 0;
    for (double s : seconds) m += count / s;
    m /= double(seconds.size());
    double v = 0;
    for (double s : seconds) v += (count / s - m) * (count / s - m);
    return std::sqrt(v / double(seconds.size() - 1));
  };
  return {{"repetitions", seconds.size()},
          {"wall_seconds_mean", mean},
          {"wall_seconds_std", sd},
          {"images", n_images},
          {"particles", n_particles},
          {"images_per_second", ips},
          {"images_per_second_std", rate_sd(double(n_images))},
          {"particles_per_second", pps},
          {"particles_per_second_std", rate_sd(double(n_particles))}};
}

int cmd_detect(const Common& c, const DetectArgs& a) {
  HoughParams p = a.params.empty() ? HoughParams{} : parse_hough_params(load_json(a.params));
  if (a.r_min) p.r_min = *a.r_min;
  if (a.r_max) p.r_max = *a.r_max;
  if (a.acc_thr) p.accumulator_threshold = *a.acc_thr;
  if (a.edge_thr) p.edge_threshold = *a.edge_thr;
  if (a.nms) p.nms_distance_factor = *a.nms;
  if (a.repeat < 1) throw Error(ErrorKind::invalid_input, "repeat must be >= 1", "--repeat");

  const fs::path root = a.dataset;
  const auto gt = load_annotations(root / "annotations.json");
  std::vector<Gray8> pixels;
  for (const auto& img : gt) {
    auto px = read_png(root / img.file_name);
    if (px.size() != img.size)
      throw Error(ErrorKind::invalid_input, "image size differs from annotations", (root / img.file_name).string());
    pixels.push_back(std::move(px));
  }
  for (const auto& px : pixels) p.validate(px.size());
  const fs::path out = prepare_out(c.out);

  std::vector<AnnotatedImage> det(gt.size());
  std::vector<double> seconds;
  for (int rep = 0; rep < a.repeat; ++rep) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < gt.size(); ++i) {
      auto records = hough_detect(pixels[i], p, c.threads);
      if (rep == 0) {
        det[i].image_id = gt[i].image_id;
        det[i].file_name = gt[i].file_name;
        det[i].size = gt[i].size;
        det[i].particles = std::move(records);
      }
    }
    seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::size_t n_det = 0;
  for (const auto& d : det) n_det += d.particles.size();
  json doc = annotations_to_json(det);
  doc["timing"] = timing_block(seconds, det.size(), n_det);
  validate_annotations(doc, true);
  write_file_atomic(out / "detections.json", doc.dump() + "\n");
  write_run(out, "detect-hough", c, {{"dataset", a.dataset}, {"hough", to_json(p)}, {"repeat", a.repeat}});
  if (c.format == "csv")
    std::cout << "images,detections,images_per_second\n"
              << det.size() << "," << n_det << "," << doc["timing"]["images_per_second"] << "\n";
  else
    std::cout << json{{"images", det.size()}, {"detections", n_det}, {"timing", doc["timing"]}}.dump(2) << "\n";
  return 0;
}

// --------------------------------------------------------------- evaluate --

struct EvaluateArgs {
  std::vector<std::string> gt;
  std::vector<std::string> det;
  std::vector<std::string> sample_ids;
  std::string diameter = "max_feret";
};

std::vector<double> diameters_of(const std::vector<AnnotatedImage>& images, const std::string& field) {
  std::vector<double> d;
  for (const auto& img : images)
    for (const auto& p : img.particles) {
      const double v = field == "diameter" ? p.diameter : p.max_feret;
      if (v > 0) d.push_back(v);
    }
  return d;
}

int cmd_evaluate(const Common& c, const EvaluateArgs& a) {
  if (a.gt.size() != a.det.size())
    throw Error(ErrorKind::invalid_input, "--gt and --det must be given in pairs", "--det");
  if (!a.sample_ids.empty() && a.sample_ids.size() != a.gt.size())
    throw Error(ErrorKind::invalid_input, "one --sample-id per --gt", "--sample-id");
  const fs::path out = prepare_out(c.out);

  json samples = json::array();
  std::vector<double> err_dg, err_sg, err_n;
  std::ostringstream csv;
  csv << "sample_id,mean_solidity,d_g,sigma_g,N,eps_dg,eps_sg,eps_N,ap,ap50,ap75\n";
  json timings = json::array();
  for (std::size_t s = 0; s < a.gt.size(); ++s) {
    const std::string id = a.sample_ids.empty() ? fs::path(a.gt[s]).parent_path().filename().string() : a.sample_ids[s];
    const auto gt = load_annotations(a.gt[s]);
    const json det_doc = load_json(a.det[s]);
    std::vector<AnnotatedImage> det;
    try {
      det = annotations_from_json(det_doc, true);
    } catch (const Error& e) {
      throw Error(e.kind(), a.det[s] + ": " + e.what(), e.path());
    }
    if (det_doc.contains("timing")) timings.push_back({{"sample_id", id}, {"timing", det_doc["timing"]}});

    std::vector<EvalObject> g, d;
    double solidity_sum = 0;
    std::size_t solidity_n = 0;
    std::map<std::int64_t, ImageSize> sizes;
    for (const auto& img : gt) {
      sizes[img.image_id] = img.size;
      for (const auto& p : img.particles) {
        g.push_back({p.annotation_id, img.image_id, p.mask, {}});
        if (area(p.mask) > 0) {
          solidity_sum += solidity(p.mask).solidity;
          ++solidity_n;
        }
      }
    }
    for (const auto& img : det) {
      auto it = sizes.find(img.image_id);
      if (it != sizes.end() && !(it->second == img.size))
        throw Error(ErrorKind::invalid_input, "detection image size differs from ground truth", a.det[s]);
      for (const auto& p : img.particles) d.push_back({p.annotation_id, img.image_id, p.mask, p.score});
    }
    const auto rep = match_and_ap(g, d, c.threads);

    const auto gd = diameters_of(gt, a.diameter);
    const auto dd = diameters_of(det, "max_feret");
    std::optional<PsdStats> gs, ds;
    if (!gd.empty()) gs = psd_stats(gd);
    if (!dd.empty()) ds = psd_stats(dd);
    std::optional<double> e_dg, e_sg, e_n;
    if (gs && ds) {
      e_dg = percentage_error(ds->d_g, gs->d_g);
      e_sg = percentage_error(ds->sigma_g, gs->sigma_g);
    }
    if (gs) e_n = percentage_error(double(dd.size()), double(gd.size()));
    if (e_dg) err_dg.push_back(*e_dg);
    if (e_sg) err_sg.push_back(*e_sg);
    if (e_n) err_n.push_back(*e_n);
    const std::optional<double> mean_sol =
        solidity_n ? std::optional<double>(solidity_sum / double(solidity_n)) : std::nullopt;

    json curves = json::array();
    for (const auto& cv : rep.curves) curves.push_back({{"iou_threshold", cv.iou_threshold}, {"ap", cv.ap}});
    samples.push_back({{"sample_id", id},
                       {"mean_solidity", number_or_null(mean_sol)},
                       {"ground_truth",
                        {{"d_g", gs ? json(gs->d_g) : json(nullptr)},
                         {"sigma_g", gs ? json(gs->sigma_g) : json(nullptr)},
                         {"N", gd.size()}}},
                       {"detected",
                        {{"d_g", ds ? json(ds->d_g) : json(nullptr)},
                         {"sigma_g", ds ? json(ds->sigma_g) : json(nullptr)},
                         {"N", dd.size()}}},
                       {"errors_percent",
                        {{"d_g", number_or_null(e_dg)}, {"sigma_g", number_or_null(e_sg)}, {"N", number_or_null(e_n)}}},
                       {"ap", rep.ap},
                       {"ap50", rep.ap50},
                       {"ap75", rep.ap75},
                       {"per_threshold", curves}});
    auto opt = [](const std::optional<double>& v) { return v ? csv_number(*v) : std::string(); };
    csv << id << "," << opt(mean_sol) << "," << (ds ? csv_number(ds->d_g) : "") << ","
        << (ds ? csv_number(ds->sigma_g) : "") << "," << dd.size() << "," << opt(e_dg) << "," << opt(e_sg) << ","
        << opt(e_n) << "," << csv_number(rep.ap) << "," << csv_number(rep.ap50) << "," << csv_number(rep.ap75)
        << "\n";
  }
  auto mape_or_null = [](const std::vector<double>& e) { return e.empty() ? json(nullptr) : json(mape(e)); };
  json report{{"samples", samples},
              {"mape_percent", {{"d_g", mape_or_null(err_dg)}, {"sigma_g", mape_or_null(err_sg)}, {"N", mape_or_null(err_n)}}},
              {"diameter_field", a.diameter},
              {"kl_log_base", "e"}};
  if (!timings.empty()) report["timing"] = timings;
  write_json(out / "report.json", report);
  write_file_atomic(out / "report.csv", csv.str());
  write_run(out, "evaluate", c, {{"gt", a.gt}, {"det", a.det}, {"sample_ids", a.sample_ids}, {"diameter", a.diameter}});
  if (c.format == "csv") std::cout << csv.str();
  else std::cout << report.dump(2) << "\n";
  return 0;
}

// -------------------------------------------------------------------- psd --

struct PsdArgs {
  std::string annotations;
  std::string diameter = "max_feret";
  int bins = 64;
  std::optional<double> lo, hi;
};

std::string histogram_csv(const Histogram& h) {
  std::ostringstream os;
  os.precision(17);
  os << "lo,hi,p\n";
  for (std::size_t i = 0; i < h.probabilities.size(); ++i)
    os << h.bin_edges[i] << "," << h.bin_edges[i + 1] << "," << h.probabilities[i] << "\n";
  return os.str();
}

int cmd_psd(const Common& c, const PsdArgs& a) {
  const auto images = load_annotations(a.annotations);
  const auto d = diameters_of(images, a.diameter);
  const auto stats = psd_stats(d);
  const double lo = a.lo.value_or(*std::min_element(d.begin(), d.end()));
  double hi = a.hi.value_or(*std::max_element(d.begin(), d.end()));
  if (!(hi > lo)) hi = lo * 1.01;
  const auto hist = make_histogram(d, log_spaced_edges(lo, hi, a.bins));
  const fs::path out = prepare_out(c.out);
  const json j{{"d_g", stats.d_g}, {"sigma_g", stats.sigma_g}, {"n_particles", stats.n_particles},
               {"diameter_field", a.diameter}, {"std_convention", "population"}};
  write_json(out / "psd.json", j);
  write_file_atomic(out / "histogram.csv", histogram_csv(hist));
  write_run(out, "psd", c, {{"annotations", a.annotations}, {"diameter", a.diameter}, {"bins", a.bins}, {"lo", lo}, {"hi", hi}});
  if (c.format == "csv")
    std::cout << "d_g,sigma_g,N\n" << csv_number(stats.d_g) << "," << csv_number(stats.sigma_g) << "," << stats.n_particles << "\n";
  else
    std::cout << j.dump(2) << "\n";
  return 0;
}

// --------------------------------------------------------------------- kl --

Histogram read_histogram_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  Histogram h;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream f(line);
    double lo, hi, p;
    if (!(f >> lo >> hi >> p)) {
      if (n == 1) continue;
      throw Error(ErrorKind::invalid_input, "malformed histogram row " + std::to_string(n), path);
    }
    if (h.bin_edges.empty()) h.bin_edges.push_back(lo);
    else if (h.bin_edges.back() != lo)
      throw Error(ErrorKind::invalid_input, "histogram bins are not contiguous at row " + std::to_string(n), path);
    h.bin_edges.push_back(hi);
    h.probabilities.push_back(p);
  }
  try {
    h.validate();
  } catch (const Error& e) {
    throw Error(e.kind(), e.what(), path);
  }
  return h;
}

int cmd_kl(const Common& c, const std::string& p_path, const std::string& q_path) {
  const auto r = kl_divergence_detailed(read_histogram_csv(p_path), read_histogram_csv(q_path));
  const fs::path out = prepare_out(c.out);
  const json j{{"kl", r.value},
               {"log_base", "e"},
               {"excluded_mass_p", r.excluded_mass_p},
               {"excluded_mass_q", r.excluded_mass_q},
               {"exclusion_flagged", r.exclusion_flagged}};
  write_json(out / "kl.json", j);
  write_run(out, "kl", c, {{"p", p_path}, {"q", q_path}});
  if (r.exclusion_flagged) log(Level::warn, "more than 5% of the mass fell in excluded zero bins");
  if (c.format == "csv") std::cout << "kl\n" << csv_number(r.value) << "\n";
  else std::cout << j.dump(2) << "\n";
  return 0;
}

// ----------------------------------------------------------------- lr-fit --

int cmd_lr_fit(const Common& c, const std::string& curve_path, const std::string& alpha_min_arg,
               const std::string& kind) {
  const auto curve =
      parse_loss_csv(read_file(curve_path), kind == "validation" ? CurveKind::validation : CurveKind::training);
  double alpha_min = 0;
  if (alpha_min_arg == "auto") {
    alpha_min = detect_alpha_min(curve);
  } else {
    try {
      alpha_min = std::stod(alpha_min_arg);
    } catch (const std::exception&) {
      throw Error(ErrorKind::invalid_input, "alpha-min must be a number or 'auto'", "--alpha-min");
    }
  }
  const auto fit = fit_lr_range(curve, alpha_min);
  const fs::path out = prepare_out(c.out);
  const json j{{"m", fit.m}, {"b", fit.b}, {"c", fit.c}, {"alpha_min", fit.alpha_min}, {"alpha_max", fit.alpha_max},
               {"rms_residual", fit.rms_residual}};
  write_json(out / "lr_range.json", j);
  write_run(out, "lr-fit", c, {{"curve", curve_path}, {"alpha_min", alpha_min_arg}, {"kind", kind}});
  if (c.format == "csv")
    std::cout << "m,b,c,alpha_min,alpha_max,rms_residual\n"
              << csv_number(fit.m) << "," << csv_number(fit.b) << "," << csv_number(fit.c) << ","
              << csv_number(fit.alpha_min) << "," << csv_number(fit.alpha_max) << "," << csv_number(fit.rms_residual)
              << "\n";
  else
    std::cout << j.dump(2) << "\n";
  return 0;
}

// -------------------------------------------------------------------- rle --

int cmd_rle_encode(const Common& c, const std::string& png) {
  const auto img = read_png(png);
  Raster r(img.width(), img.height(), 0);
  for (std::size_t i = 0; i < r.data().size(); ++i) r.data()[i] = img.data()[i] ? 1 : 0;
  const auto m = encode_rle(r);
  const json j{{"width", m.width}, {"height", m.height}, {"rle", m.runs}, {"area", area(m)}};
  const fs::path out = prepare_out(c.out);
  write_json(out / "mask.json", j);
  write_run(out, "rle encode", c, {{"png", png}});
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_rle_decode(const Common& c, const std::string& mask_path) {
  const json j = load_json(mask_path);
  if (!j.is_object() || !j.contains("width") || !j.contains("height") || !j.contains("rle"))
    throw Error(ErrorKind::invalid_input, "mask JSON needs width, height and rle", "/");
  Mask m{j["width"].get<int>(), j["height"].get<int>(), j["rle"].get<std::vector<std::uint32_t>>()};
  const auto r = decode_rle(m);
  Gray8 img(r.width(), r.height(), 0);
  for (std::size_t i = 0; i < r.data().size(); ++i) img.data()[i] = r.data()[i] ? 255 : 0;
  const fs::path out = prepare_out(c.out);
  write_png(out / "mask.png", img);
  write_run(out, "rle decode", c, {{"mask", mask_path}});
  std::cout << json{{"png", (out / "mask.png").string()}, {"area", area(m)}}.dump() << "\n";
  return 0;
}

int exit_code(ErrorKind k) { return k == ErrorKind::io ? 2 : 1; }

void report_error(const std::string& kind, const std::string& message, const std::string& path) {
  json j{{"error", kind}, {"message", message}};
  if (!path.empty()) j["path"] = path;
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic agglomerate SEM images: synthesis, Hough baseline, evaluation and LR tools"};
  app.set_version_flag("--version", std::string(kGeneratorVersion));
  app.require_subcommand(1);

  Common common;
  std::function<int()> run;

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(s, common);
  s->add_option("--config", synth.config, "scene config JSON");
  s->add_option("--split", synth.splits, "split name(s)");
  s->add_option("--count", synth.counts, "images per split");
  s->add_option("--name", synth.name, "dataset name");
  s->add_flag("--dump-maps", synth.dump_maps, "write intermediate float maps");
  s->callback([&] { run = [&] { return cmd_synth(common, synth); }; });

  DetectArgs detect;
  auto* d = app.add_subcommand("detect-hough", "circular Hough baseline detector");
  add_common(d, common);
  d->add_option("--dataset", detect.dataset, "dataset directory with annotations.json and images/")->required();
  d->add_option("--params", detect.params, "Hough parameter JSON");
  d->add_option("--r-min", detect.r_min);
  d->add_option("--r-max", detect.r_max);
  d->add_option("--accumulator-threshold", detect.acc_thr);
  d->add_option("--edge-threshold", detect.edge_thr);
  d->add_option("--nms-distance-factor", detect.nms);
  d->add_option("--repeat", detect.repeat, "timing repetitions")->capture_default_str();
  d->callback([&] { run = [&] { return cmd_detect(common, detect); }; });

  EvaluateArgs eval;
  auto* e = app.add_subcommand("evaluate", "AP and PSD errors of detections against ground truth");
  add_common(e, common);
  e->add_option("--gt", eval.gt, "ground-truth annotations.json (one per sample)")->required();
  e->add_option("--det", eval.det, "detections.json (one per sample)")->required();
  e->add_option("--sample-id", eval.sample_ids, "sample ids");
  e->add_option("--diameter", eval.diameter, "ground-truth diameter field")
      ->check(CLI::IsMember({"max_feret", "diameter"}))
      ->capture_default_str();
  e->callback([&] { run = [&] { return cmd_evaluate(common, eval); }; });

  PsdArgs psd;
  auto* p = app.add_subcommand("psd", "PSD statistics and histogram");
  add_common(p, common);
  p->add_option("--annotations", psd.annotations, "annotations or detections JSON")->required();
  p->add_option("--diameter", psd.diameter)->check(CLI::IsMember({"max_feret", "diameter"}))->capture_default_str();
  p->add_option("--bins", psd.bins)->check(CLI::PositiveNumber)->capture_default_str();
  p->add_option("--lo", psd.lo);
  p->add_option("--hi", psd.hi);
  p->callback([&] { run = [&] { return cmd_psd(common, psd); }; });

  std::string hist_p, hist_q;
  auto* k = app.add_subcommand("kl", "KL divergence of two histogram CSVs");
  add_common(k, common);
  k->add_option("--p", hist_p, "histogram CSV (lo,hi,p)")->required();
  k->add_option("--q", hist_q, "histogram CSV (lo,hi,p)")->required();
  k->callback([&] { run = [&] { return cmd_kl(common, hist_p, hist_q); }; });

  std::string curve, alpha_min = "auto", kind = "training";
  auto* l = app.add_subcommand("lr-fit", "fit a learning-rate range test curve");
  add_common(l, common);
  l->add_option("--curve", curve, "CSV of alpha,loss")->required();
  l->add_option("--alpha-min", alpha_min, "number or 'auto'")->capture_default_str();
  l->add_option("--kind", kind)->check(CLI::IsMember({"training", "validation"}))->capture_default_str();
  l->callback([&] { run = [&] { return cmd_lr_fit(common, curve, alpha_min, kind); }; });

  std::string rle_in;
  auto* r = app.add_subcommand("rle", "encode a PNG mask or decode a mask JSON");
  r->require_subcommand(1);
  auto* enc = r->add_subcommand("encode", "PNG (nonzero = foreground) to RLE JSON");
  add_common(enc, common);
  enc->add_option("input", rle_in, "PNG file")->required();
  enc->callback([&] { run = [&] { return cmd_rle_encode(common, rle_in); }; });
  auto* dec = r->add_subcommand("decode", "RLE JSON to PNG");
  add_common(dec, common);
  dec->add_option("input", rle_in, "mask JSON")->required();
  dec->callback([&] { run = [&] { return cmd_rle_decode(common, rle_in); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what(), "");
    return 1;
  }

  try {
    return run();
  } catch (const Error& e) {
    report_error(std::string(to_string(e.kind())), e.what(), e.path());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    report_error("internal", e.what(), "");
    return 1;
  }
}
