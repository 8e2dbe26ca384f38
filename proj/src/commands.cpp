#include "rsssm/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "rsssm/bench.hpp"
#include "rsssm/checkpoint.hpp"
#include "rsssm/gradcheck.hpp"
#include "rsssm/ops.hpp"

namespace rsssm {

namespace fs = std::filesystem;

namespace {

template <typename F>
auto with_precision(Precision p, F&& f) {
  return p == Precision::F64 ? f.template operator()<double>() : f.template operator()<float>();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

fs::path checkpoint_path(const RunConfig& config) {
  return config.checkpoint.empty() ? config.out / "model.ckpt" : config.checkpoint;
}

template <typename T>
RsssmModel<T> load_model(const RunConfig& config) {
  auto model = RsssmModel<T>::create(config.model, config.seed);
  const auto path = checkpoint_path(config);
  if (!fs::exists(path)) throw std::runtime_error("checkpoint not found: " + path.string());
  model.load_checkpoint(load_checkpoint(path));
  return model;
}

std::string clip_dir_name(std::size_t i) {
  std::ostringstream s;
  s << "clip_" << std::setw(4) << std::setfill('0') << i;
  return s.str();
}

// Grayscale heatmap of a 2-D tensor, each cell drawn as a `cell` x `cell`
// block and scaled to its own min/max.
template <typename T>
std::pair<double, double> write_heatmap(const fs::path& path, const Tensor<T>& m, std::size_t cell = 8) {
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  const auto v = m.data();
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<std::uint8_t> px(rows * cell * cols * cell);
  for (std::size_t r = 0; r < rows * cell; ++r) {
    for (std::size_t c = 0; c < cols * cell; ++c) {
      const double x = v[(r / cell) * cols + c / cell];
      const double t = hi > lo ? (x - lo) / (hi - lo) : 0.0;
      px[r * cols * cell + c] = static_cast<std::uint8_t>(std::lround(t * 255.0));
    }
  }
  write_pgm(path, cols * cell, rows * cell, px.data());
  return {lo, hi};
}

std::string fmt(double v) {
  std::ostringstream o;
  o << std::setprecision(10) << v;
  return o.str();
}

}  // namespace

void prepare_output(const RunConfig& config) {
  config.validate();
  fs::create_directories(config.out);
  auto out = open_out(config.out / "config.txt");
  out << config.serialize();
  if (!out) throw std::runtime_error("failed to write " + (config.out / "config.txt").string());
}

std::vector<Clip> generate_split(const DataConfig& data, const std::string& split) {
  SceneSpec scene = data.scene;
  scene.seed = split == "train" ? data.seed : data.seed + 0x9e3779b9ULL;
  return generate_clips(scene, split == "train" ? data.train_clips : data.eval_clips);
}

std::vector<Clip> load_split(const DataConfig& data, const std::string& split, bool generate_if_missing) {
  const auto dir = data.dir / split;
  if (generate_if_missing && !fs::exists(dir / "clips.txt")) return generate_split(data, split);
  return read_split(dir);
}

int cmd_generate(const RunConfig& config, std::ostream& log) {
  prepare_output(config);
  for (const std::string split : {"train", "eval"}) {
    const auto clips = generate_split(config.data, split);
    write_split(config.data.dir / split, clips);
    double density = 0;
    for (const auto& c : clips) density += boundary_density(c);
    log << "wrote " << clips.size() << " " << split << " clips to " << (config.data.dir / split).string()
        << " (mean boundary density " << fmt(density / static_cast<double>(clips.size())) << ")\n";
  }
  return kExitOk;
}

int cmd_train(const RunConfig& config, std::ostream& log) {
  prepare_output(config);
  const auto train = load_split(config.data, "train", false);
  return with_precision(config.precision, [&]<typename T>() {
    auto model = RsssmModel<T>::create(config.model, config.seed);
    TrainConfig tc = config.train;
    tc.seed = config.seed;
    auto csv = open_out(config.out / "train_log.csv");
    log << "training " << variant_name(config.model.variant) << " (" << model.parameter_count()
        << " parameters) for " << tc.steps << " steps at " << precision_name(config.precision) << "\n";
    const auto rows = train_loop(model, train, tc, &csv);
    save_checkpoint(config.out / "model.ckpt", model.to_checkpoint());
    const auto skipped = std::count_if(rows.begin(), rows.end(), [](const StepLog& r) { return !r.applied; });
    if (!rows.empty()) {
      log << "final loss " << fmt(rows.back().loss_total) << ", L_ci " << fmt(rows.back().loss_ci) << ", "
          << skipped << " skipped steps\n";
    }
    log << "checkpoint: " << (config.out / "model.ckpt").string() << "\n";
    return skipped == static_cast<std::ptrdiff_t>(rows.size()) && !rows.empty() ? kExitNumeric : kExitOk;
  });
}

int cmd_eval(const RunConfig& config, std::ostream& log) {
  prepare_output(config);
  const auto data = load_split(config.data, "eval", false);
  return with_precision(config.precision, [&]<typename T>() {
    const auto model = load_model<T>(config);
    const auto m = eval_loop(model, data, config.eval_batch_clips, config.eval_streaming);
    auto text = open_out(config.out / "metrics.txt");
    write_metrics_text(text, m);
    auto csv = open_out(config.out / "metrics.csv");
    write_metrics_csv(csv, m);

    // Predicted masks, so the metrics can be recomputed independently.
    NoGradGuard no_grad;
    StreamState<T> carry;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto out = model.forward(clip_frames<T>(data[i]), 1, config.eval_streaming ? &carry : nullptr);
      const auto pred = predict_labels(out.logits);
      const auto dir = config.out / "predictions" / clip_dir_name(i);
      fs::create_directories(dir);
      const std::size_t hw = data[i].height * data[i].width;
      std::vector<std::uint8_t> px(hw);
      for (std::size_t t = 0; t < data[i].frames; ++t) {
        for (std::size_t p = 0; p < hw; ++p) px[p] = static_cast<std::uint8_t>(pred.data[t * hw + p]);
        write_pgm(dir / ("pred_" + std::to_string(t) + ".pgm"), data[i].width, data[i].height, px.data());
      }
    }
    log << "mIoU " << fmt(m.miou) << ", boundary F " << fmt(m.boundary_f) << " over " << m.frames << " frames\n";
    return std::isnan(m.miou) ? kExitNumeric : kExitOk;
  });
}

int cmd_gradcheck(const RunConfig& config, std::ostream& log) {
  prepare_output(config);
  const auto& g = config.gradcheck;
  if (config.precision != Precision::F64) log << "gradcheck always runs at f64\n";
  ModelConfig tiny = config.model;
  tiny.embed_dim = g.embed_dim;
  tiny.state_dim = g.state_dim;
  if (config.model.detach_spectrum) {
    const auto grads = channel_info_gradients(tiny, g.height, g.width, g.frames, config.seed);
    auto csv = open_out(config.out / "gradcheck.csv");
    csv << "leaf,max_abs_grad_of_loss_ci\n";
    const std::pair<std::string, double>* bad = nullptr;
    for (const auto& entry : grads) {
      csv << entry.first << ',' << fmt(entry.second) << '\n';
      if (entry.second != 0.0 && !bad) bad = &entry;
    }
    if (bad) {
      log << "FAIL: leaf " << bad->first << " receives gradient " << fmt(bad->second)
          << " from L_ci although the spectrum branch is detached\n";
      return kExitNumeric;
    }
    log << "PASS: no leaf receives gradient from L_ci with the spectrum branch detached\n";
    return kExitOk;
  }
  const auto report =
      gradcheck_model(tiny, g.height, g.width, g.frames, config.seed, g.step, g.tolerance);
  auto csv = open_out(config.out / "gradcheck.csv");
  write_report(csv, report);
  for (const auto& [module, worst] : report.by_module()) log << std::setw(8) << module << "  worst rel err " << fmt(worst) << "\n";
  if (const auto* f = report.first_failure()) {
    log << "FAIL: leaf " << f->name << " element " << f->worst_index << " analytic " << fmt(f->analytic)
        << " numeric " << fmt(f->numeric) << " rel err " << fmt(f->worst_rel) << "\n";
    return kExitNumeric;
  }
  log << "PASS: " << report.leaves.size() << " leaves within " << fmt(report.tolerance) << "\n";
  return kExitOk;
}

int cmd_bench(const RunConfig& config, std::ostream& log) {
  prepare_output(config);
  const auto& b = config.bench;
  const auto rows = bench_scan(b.lengths, b.channels, b.state_dim, b.repeats, config.seed);
  auto csv = open_out(config.out / "bench.csv");
  write_bench_csv(csv, rows);
  bool within = true;
  for (const auto& r : rows) {
    log << "L=" << r.length << "  forward " << fmt(r.forward_ms) << " ms  backward " << fmt(r.backward_ms) << " ms";
    if (r.forward_ratio > 0) {
      log << "  ratios " << fmt(r.forward_ratio) << " / " << fmt(r.backward_ratio);
      within = within && r.forward_ratio <= b.max_ratio && r.backward_ratio <= b.max_ratio;
    }
    log << "\n";
  }
  log << (within ? "doubling ratios within " : "doubling ratio above ") << fmt(b.max_ratio) << "\n";
  return kExitOk;
}

int cmd_ablate(const RunConfig& config, std::ostream& log) {
  prepare_output(config);
  const auto train = load_split(config.data, "train", true);
  const auto eval = load_split(config.data, "eval", true);
  auto csv = open_out(config.out / "ablation.csv");
  csv << "variant,seed,miou,boundary_f\n";
  struct Score {
    double miou, boundary_f;
  };
  std::map<std::pair<std::uint64_t, int>, Score> scores;
  for (const auto seed : config.ablate_seeds) {
    for (const Variant v : kAllVariants) {
      RunConfig run = config;
      run.seed = seed;
      run.model.variant = v;
      const Score s = with_precision(config.precision, [&]<typename T>() {
        auto model = build_ablation_variant<T>(v, run.model, seed);
        TrainConfig tc = run.train;
        tc.seed = seed;
        const auto dir = config.out / "runs" / (std::string(variant_name(v)) + "_seed" + std::to_string(seed));
        fs::create_directories(dir);
        auto log_csv = open_out(dir / "train_log.csv");
        train_loop(model, train, tc, &log_csv);
        const auto m = eval_loop(model, eval, run.eval_batch_clips, run.eval_streaming);
        return Score{m.miou, m.boundary_f};
      });
      scores[{seed, static_cast<int>(v)}] = s;
      csv << variant_name(v) << ',' << seed << ',' << fmt(s.miou) << ',' << fmt(s.boundary_f) << '\n' << std::flush;
      log << variant_name(v) << " seed " << seed << ": mIoU " << fmt(s.miou) << ", boundary F " << fmt(s.boundary_f)
          << "\n";
    }
  }
  log << "mean mIoU:";
  for (const Variant v : kAllVariants) {
    double sum = 0;
    for (const auto seed : config.ablate_seeds) sum += scores[{seed, static_cast<int>(v)}].miou;
    log << "  " << variant_name(v) << " " << fmt(sum / static_cast<double>(config.ablate_seeds.size()));
  }
  log << "\n";
  return kExitOk;
}

int cmd_inspect_gates(const RunConfig& config, std::ostream& log) {
  prepare_output(config);
  const auto clips = load_split(config.data, "eval", true);
  return with_precision(config.precision, [&]<typename T>() {
    const auto model = load_model<T>(config);
    NoGradGuard no_grad;
    const auto out = model.forward(clip_frames<T>(clips.front()), 1);
    const auto dir = config.out / "gates";
    fs::create_directories(dir);
    auto ranges = open_out(dir / "ranges.csv");
    ranges << "file,min,max\n";
    auto dump = [&](const std::string& name, const Tensor<T>& m) {
      const auto [lo, hi] = write_heatmap(dir / (name + ".pgm"), m);
      ranges << name << ".pgm," << fmt(lo) << ',' << fmt(hi) << '\n';
    };
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
      const auto& trace = out.layers[l];
      const auto& layer = model.layers()[l];
      const std::string pre = "layer" + std::to_string(l) + "_";
      const Tensor<T> A = layer.theta2.A();
      dump(pre + "A", A);
      dump(pre + "A_inverted", trace.gate ? trace.gate->a_inverted : invert_gate(A, config.model.fgir.axis));
      if (trace.gate) dump(pre + "A_refined", trace.gate->a_refined);
      const auto& gates = trace.gates1 ? *trace.gates1 : trace.gates2;
      dump(pre + "A_bar", gates.a_bar);
      dump(pre + "B_bar", gates.b_bar);
    }
    log << "wrote gate heatmaps for " << out.layers.size() << " layers to " << dir.string() << "\n";
    return kExitOk;
  });
}

int cmd_inspect_spectrum(const RunConfig& config, std::ostream& log) {
  prepare_output(config);
  const auto clips = load_split(config.data, "eval", true);
  return with_precision(config.precision, [&]<typename T>() {
    const auto model = load_model<T>(config);
    NoGradGuard no_grad;
    const auto out = model.forward(clip_frames<T>(clips.front()), 1);
    const auto dir = config.out / "spectrum";
    fs::create_directories(dir);
    std::size_t written = 0;
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
      const auto& spec = out.layers[l].spectrum;
      if (!spec) continue;
      auto csv = open_out(dir / ("layer" + std::to_string(l) + "_features.csv"));
      csv << "frame,channel,F\n";
      const std::size_t frames = spec->F.dim(0), channels = spec->F.dim(1);
      const auto f = spec->F.data();
      for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t c = 0; c < channels; ++c) csv << t << ',' << c << ',' << fmt(f[t * channels + c]) << '\n';
      }
      ++written;
    }
    const std::size_t rows = next_power_of_two(config.data.scene.height / config.model.patch);
    const std::size_t cols = next_power_of_two(config.data.scene.width / config.model.patch);
    const auto partition = build_band_partition(rows, cols, config.model.bands);
    for (std::size_t k = 0; k < partition.bands; ++k) {
      std::vector<std::uint8_t> px(partition.masks[k].size());
      for (std::size_t i = 0; i < px.size(); ++i) px[i] = partition.masks[k][i] ? 255 : 0;
      write_pgm(dir / ("band_" + std::to_string(k) + ".pgm"), cols, rows, px.data());
    }
    if (written == 0) log << "variant " << variant_name(config.model.variant) << " computes no spectrum features\n";
    log << "wrote spectrum features for " << written << " layers and " << partition.bands << " band masks to "
        << dir.string() << "\n";
    return kExitOk;
  });
}

}  // namespace rsssm
