// Command-line pipeline driver: dataset simulation, the two training
// stages, prediction, evaluation, latent-space analysis and report
// emission. Every run leaves behind a run-manifest JSON with the config
// hash, seed and artifact hashes needed to re-execute it.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>

#include "ogp/analysis.hpp"
#include "ogp/gridworld.hpp"
#include "ogp/metrics.hpp"
#include "ogp/predictor.hpp"
#include "ogp/report.hpp"
#include "ogp/repr_train.hpp"

namespace fs = std::filesystem;
using ogp::json;

namespace {

struct UsageError : ogp::Error {
  using Error::Error;
};

void write_run_manifest(const fs::path& where, const std::string& command, json info,
                        const std::vector<fs::path>& artifacts) {
  info["command"] = command;
  json outputs = json::object();
  for (const auto& a : artifacts)
    if (fs::exists(a)) outputs[a.string()] = ogp::file_hash_hex(a);
  info["outputs"] = outputs;
  const fs::path target = fs::is_directory(where) ? where / "run_manifest.json"
                                                  : fs::path(where.string() + ".run.json");
  ogp::save_json(info, target);
}

fs::path resolve_manifest(const fs::path& p) {
  if (fs::is_directory(p)) return p / ogp::kManifestFilename;
  return p;
}

int cmd_simulate(const fs::path& config, std::uint64_t seed, const fs::path& out) {
  ogp::SimConfig cfg = ogp::SimConfig::from_json(ogp::load_json(config));
  ogp::Manifest m = ogp::generate_dataset(cfg, seed, out);
  std::cout << "wrote " << m.sequences.size() << " scenes to " << out.string() << "\n";
  write_run_manifest(out, "simulate",
                     json{{"seed", seed}, {"config_hash", cfg.hash()}, {"config", config.string()}},
                     {out / ogp::kManifestFilename});
  return 0;
}

int cmd_train_repr(const fs::path& config, const fs::path& data, const fs::path& out) {
  ogp::ReprTrainConfig cfg = ogp::ReprTrainConfig::from_json(ogp::load_json(config));
  ogp::Manifest dataset = ogp::load_manifest(resolve_manifest(data));
  const fs::path log = out.parent_path() / (out.stem().string() + "_log.csv");
  ogp::ReprTrainResult res = ogp::train_representation(dataset, cfg, out, log);
  std::cout << "trained " << cfg.steps << " steps; final recon " << res.log.back().recon
            << ", kl " << res.log.back().kl << "\n"
            << "checkpoint " << out.string() << " (" << res.checkpoint_hash << ")\n";
  write_run_manifest(out, "train-repr",
                     json{{"seed", cfg.seed},
                          {"config_hash", cfg.model.hash()},
                          {"config", config.string()},
                          {"data", data.string()}},
                     {out, log});
  return 0;
}

int cmd_encode(const fs::path& encoder, const fs::path& data, const fs::path& out) {
  ogp::Manifest dataset = ogp::load_manifest(resolve_manifest(data));
  ogp::Manifest latents = ogp::encode_dataset(dataset, encoder, out);
  std::cout << "encoded " << latents.sequences.size() << " sequences to " << out.string() << "\n";
  write_run_manifest(out, "encode",
                     json{{"encoder", encoder.string()},
                          {"encoder_hash", ogp::file_hash_hex(encoder)},
                          {"data", data.string()}},
                     {out / ogp::kManifestFilename});
  return 0;
}

int cmd_train_pred(const fs::path& config, const fs::path& latents_path, const fs::path& out) {
  ogp::Manifest latents = ogp::load_manifest(resolve_manifest(latents_path));
  json j = ogp::load_json(config);
  if (!j.contains("H")) j["H"] = latents.H;
  if (!j.contains("P")) j["P"] = latents.P;
  ogp::PredictorConfig cfg = ogp::PredictorConfig::from_json(j);
  const fs::path log = out.parent_path() / (out.stem().string() + "_log.csv");
  ogp::PredictorTrainResult res = ogp::train_predictor(latents, cfg, out, log);
  std::cout << "trained " << res.steps_run << " steps; best val loss " << res.best_val_loss
            << " (constant-latent baseline " << res.baseline_val_loss << ")\n"
            << "checkpoint " << out.string() << "\n";
  write_run_manifest(out, "train-pred",
                     json{{"seed", cfg.seed},
                          {"config_hash", cfg.hash()},
                          {"config", config.string()},
                          {"latents", latents_path.string()},
                          {"best_val_loss", res.best_val_loss},
                          {"baseline_val_loss", res.baseline_val_loss}},
                     {out, log});
  return 0;
}

int cmd_predict(const fs::path& encoder, const fs::path& generator, const fs::path& predictor,
                const fs::path& data, int rollout, const std::string& split,
                const std::string& baseline, const fs::path& out) {
  ogp::PredictOptions opt;
  opt.rollout = rollout;
  opt.split = split;
  opt.baseline = ogp::baseline_from_string(baseline);
  if (opt.baseline != ogp::PredictBaseline::CopyLast && (encoder.empty() || generator.empty()))
    throw UsageError("--encoder and --generator are required unless --baseline copy-last");
  if (opt.baseline == ogp::PredictBaseline::None && predictor.empty())
    throw UsageError("--predictor is required unless a --baseline is selected");
  ogp::Manifest dataset = ogp::load_manifest(resolve_manifest(data));
  ogp::Manifest preds = ogp::predict_ogms(encoder, generator, predictor, dataset, opt, out);
  std::cout << "predicted " << preds.sequences.size() << " sequences ("
            << preds.extra.value("rollout", 0) << " frames each) to " << out.string() << "\n";
  write_run_manifest(out, "predict",
                     json{{"data", data.string()},
                          {"baseline", baseline},
                          {"rollout", preds.extra.value("rollout", 0)},
                          {"split", split}},
                     {out / ogp::kManifestFilename});
  return 0;
}

int cmd_evaluate(const fs::path& pred, const fs::path& truth, const fs::path& out, double t_free,
                 double t_occ) {
  ogp::Manifest pm = ogp::load_manifest(resolve_manifest(pred));
  ogp::Manifest tm = ogp::load_manifest(resolve_manifest(truth));
  ogp::EvalReport report = ogp::evaluate(pm, tm, ogp::Thresholds{t_free, t_occ});
  ogp::save_json(ogp::report_to_json(report), out);
  const fs::path csv = out.parent_path() / (out.stem().string() + ".csv");
  {
    std::ofstream os(csv, std::ios::trunc);
    os << ogp::report_to_csv(report);
  }
  std::string label = pm.extra.value("baseline", "");
  if (label.empty() || label == "none") label = "latent pipeline";
  std::cout << ogp::report_summary(report, label);
  write_run_manifest(out, "evaluate",
                     json{{"pred", pred.string()}, {"truth", truth.string()}}, {out, csv});
  return 0;
}

int cmd_analyze_sample(const fs::path& generator, int n, std::uint64_t seed, const fs::path& out) {
  auto models = ogp::load_repr_models<float>(generator);
  std::vector<ogp::Ogm> grids = ogp::sample_prior(*models.generator, n, seed);
  const std::string ck = ogp::file_hash_hex(generator).substr(0, 8);
  const std::string tag = "sample_seed" + std::to_string(seed) + "_" + ck;
  fs::create_directories(out);
  const int per_row = std::max(1, static_cast<int>(std::ceil(std::sqrt(double(n)))));
  ogp::write_montage(grids, per_row, out / (tag + ".png"));
  json stats = json::array();
  std::array<double, 3> mean_hist{0, 0, 0};
  for (const auto& g : grids) {
    const auto h = ogp::class_histogram(g);
    stats.push_back(json{{"free", h[0]}, {"occluded", h[1]}, {"occupied", h[2]}});
    for (int i = 0; i < 3; ++i) mean_hist[static_cast<std::size_t>(i)] += h[static_cast<std::size_t>(i)] / n;
  }
  ogp::save_json(json{{"seed", seed},
                      {"checkpoint_hash", ck},
                      {"per_sample", stats},
                      {"mean", {{"free", mean_hist[0]}, {"occluded", mean_hist[1]}, {"occupied", mean_hist[2]}}}},
                 out / (tag + ".json"));
  std::cout << "wrote " << (out / (tag + ".png")).string() << "\n";
  write_run_manifest(out, "analyze sample", json{{"seed", seed}, {"n", n}},
                     {out / (tag + ".png"), out / (tag + ".json")});
  return 0;
}

ogp::Ogm load_frame(const ogp::Manifest& dataset, const std::string& seq_id, int frame) {
  const ogp::SequenceEntry* e = dataset.find(seq_id);
  if (!e) throw ogp::Error("sequence not found in dataset: " + seq_id);
  ogp::ScenarioSequence seq = ogp::read_sequence(dataset.sequence_path(*e));
  if (frame < 0 || frame >= static_cast<int>(seq.frames.size()))
    throw ogp::Error("frame index out of range for " + seq_id);
  return seq.frames[static_cast<std::size_t>(frame)];
}

int cmd_analyze_swap(const fs::path& encoder, const fs::path& generator, const fs::path& data,
                     const std::string& seq_a, int frame_a, const std::string& seq_b, int frame_b,
                     const std::string& which, const std::string& source, std::uint64_t seed,
                     const fs::path& out) {
  auto enc = ogp::load_repr_models<float>(encoder);
  auto gen = ogp::load_repr_models<float>(generator);
  if (enc.config_hash != gen.config_hash)
    throw ogp::ConfigError("encoder/generator checkpoint config hashes differ");
  ogp::Manifest dataset = ogp::load_manifest(resolve_manifest(data));
  ogp::Ogm a = load_frame(dataset, seq_a, frame_a);
  const ogp::SwapWhich target = ogp::swap_which_from_string(which);

  ogp::Ogm swapped(a.spec);
  ogp::Ogm b(a.spec);
  if (source == "prior") {
    // draw the replacement latent from the prior instead of a data frame
    ogp::Rng rng(seed);
    const ogp::ModelConfig& cfg = gen.config;
    ogp::Tensor<float> style({1, cfg.style_dim});
    ogp::Tensor<float> content({1, cfg.content_channels, cfg.content_hw, cfg.content_hw});
    for (std::int64_t i = 0; i < style.size(); ++i) style[i] = static_cast<float>(rng.normal());
    for (std::int64_t i = 0; i < content.size(); ++i) content[i] = static_cast<float>(rng.normal());
    ogp::PosteriorBatch<float> pa = enc.encoder->forward(ogp::ogm_to_tensor<float>(a));
    const ogp::Tensor<float>& s = target == ogp::SwapWhich::Style ? style : pa.mu_style;
    const ogp::Tensor<float>& c = target == ogp::SwapWhich::Content ? content : pa.mu_content;
    swapped = ogp::tensor_to_ogm(gen.generator->forward(s, c), cfg.grid);
    b = ogp::tensor_to_ogm(gen.generator->forward(style, content), cfg.grid);
  } else if (source == "data") {
    b = load_frame(dataset, seq_b, frame_b);
    swapped = ogp::swap_latents(*enc.encoder, *gen.generator, a, b, target);
  } else {
    throw UsageError("--source must be 'data' or 'prior'");
  }

  const std::string ck = ogp::file_hash_hex(generator).substr(0, 8);
  const std::string tag = "swap_" + which + "_seed" + std::to_string(seed) + "_" + ck;
  fs::create_directories(out);
  ogp::write_montage({a, b, swapped}, 3, out / (tag + ".png"));
  const auto sa = ogp::occupied_stats(a), sb = ogp::occupied_stats(b), ss = ogp::occupied_stats(swapped);
  auto stat_json = [](const ogp::OccupiedStats& s) {
    return json{{"count", s.count}, {"centroid_row", s.centroid_row}, {"centroid_col", s.centroid_col}};
  };
  ogp::save_json(json{{"which", which},
                      {"source", source},
                      {"seed", seed},
                      {"checkpoint_hash", ck},
                      {"a", stat_json(sa)},
                      {"b", stat_json(sb)},
                      {"swapped", stat_json(ss)}},
                 out / (tag + ".json"));
  std::cout << "wrote " << (out / (tag + ".png")).string() << "\n";
  write_run_manifest(out, "analyze swap", json{{"which", which}, {"seed", seed}},
                     {out / (tag + ".png"), out / (tag + ".json")});
  return 0;
}

int cmd_analyze_interpolate(const fs::path& encoder, const fs::path& generator, const fs::path& data,
                            const std::string& seq_id, int frame_a, int frame_b, int steps,
                            const fs::path& out) {
  auto enc = ogp::load_repr_models<float>(encoder);
  auto gen = ogp::load_repr_models<float>(generator);
  if (enc.config_hash != gen.config_hash)
    throw ogp::ConfigError("encoder/generator checkpoint config hashes differ");
  ogp::Manifest dataset = ogp::load_manifest(resolve_manifest(data));
  ogp::Ogm a = load_frame(dataset, seq_id, frame_a);
  ogp::Ogm b = load_frame(dataset, seq_id, frame_b);
  std::vector<ogp::Ogm> frames = ogp::interpolate(*enc.encoder, *gen.generator, a, b, steps);

  const std::string ck = ogp::file_hash_hex(generator).substr(0, 8);
  const std::string tag = "interpolate_" + seq_id + "_" + ck;
  fs::create_directories(out);
  ogp::write_montage(frames, static_cast<int>(frames.size()), out / (tag + ".png"));
  json per_step = json::array();
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const auto s = ogp::occupied_stats(frames[k]);
    per_step.push_back(json{{"alpha", static_cast<double>(k) / (frames.size() - 1)},
                            {"count", s.count},
                            {"centroid_row", s.centroid_row},
                            {"centroid_col", s.centroid_col}});
  }
  ogp::save_json(json{{"sequence", seq_id},
                      {"frame_a", frame_a},
                      {"frame_b", frame_b},
                      {"checkpoint_hash", ck},
                      {"per_step", per_step}},
                 out / (tag + ".json"));
  std::cout << "wrote " << (out / (tag + ".png")).string() << "\n";
  write_run_manifest(out, "analyze interpolate", json{{"sequence", seq_id}},
                     {out / (tag + ".png"), out / (tag + ".json")});
  return 0;
}

int cmd_report(const fs::path& runs, const fs::path& out) {
  ogp::write_report(runs, out);
  std::cout << "wrote " << out.string() << "\n";
  write_run_manifest(out, "report", json{{"runs", runs.string()}}, {out});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-stage latent occupancy-grid prediction pipeline"};
  app.require_subcommand(1);

  std::string config, data, out, encoder, generator, predictor, split = "test", baseline = "none";
  std::string seq_a, seq_b, which = "content", source = "data";
  std::uint64_t seed = 0;
  int rollout = 0, n_samples = 16, frame_a = 0, frame_b = 0, steps = 8;
  double t_free = ogp::kDefaultFreeThreshold, t_occ = ogp::kDefaultOccupiedThreshold;

  auto* sim = app.add_subcommand("simulate", "generate a synthetic OGM dataset");
  sim->add_option("--config", config, "SimConfig JSON")->required();
  sim->add_option("--seed", seed, "dataset seed")->required();
  sim->add_option("--out", out, "output directory")->required();

  auto* trr = app.add_subcommand("train-repr", "stage-1 representation learning");
  trr->add_option("--config", config, "ReprTrainConfig JSON")->required();
  trr->add_option("--data", data, "dataset directory or manifest")->required();
  trr->add_option("--out", out, "output checkpoint path")->required();

  auto* enc = app.add_subcommand("encode", "encode a dataset into the latent space");
  enc->add_option("--encoder", encoder, "stage-1 checkpoint")->required();
  enc->add_option("--data", data, "dataset directory or manifest")->required();
  enc->add_option("--out", out, "output directory")->required();

  auto* trp = app.add_subcommand("train-pred", "stage-2 latent sequence prediction");
  trp->add_option("--config", config, "PredictorConfig JSON")->required();
  trp->add_option("--latents", data, "latent dataset directory or manifest")->required();
  trp->add_option("--out", out, "output checkpoint path")->required();

  auto* prd = app.add_subcommand("predict", "predict future OGMs for a dataset split");
  prd->add_option("--encoder", encoder, "stage-1 checkpoint (encoder)");
  prd->add_option("--generator", generator, "stage-1 checkpoint (generator)");
  prd->add_option("--predictor", predictor, "stage-2 checkpoint");
  prd->add_option("--data", data, "dataset directory or manifest")->required();
  prd->add_option("--rollout", rollout, "prediction steps (default: dataset P)");
  prd->add_option("--split", split, "dataset split to predict (default test)");
  prd->add_option("--baseline", baseline, "none | copy-last | constant-latent");
  prd->add_option("--out", out, "output directory")->required();

  auto* ev = app.add_subcommand("evaluate", "score predictions against ground truth");
  ev->add_option("--pred", data, "prediction directory or manifest")->required();
  ev->add_option("--truth", generator, "ground-truth dataset directory or manifest")->required();
  ev->add_option("--out", out, "output report JSON path")->required();
  ev->add_option("--t-free", t_free, "free-class threshold");
  ev->add_option("--t-occ", t_occ, "occupied-class threshold");

  auto* an = app.add_subcommand("analyze", "latent-space analysis experiments");
  an->require_subcommand(1);
  auto* ans = an->add_subcommand("sample", "decode prior samples");
  ans->add_option("--generator", generator, "stage-1 checkpoint")->required();
  ans->add_option("--n", n_samples, "number of samples");
  ans->add_option("--seed", seed, "sampling seed");
  ans->add_option("--out", out, "output directory")->required();
  auto* anw = an->add_subcommand("swap", "style/content swap between two frames");
  anw->add_option("--encoder", encoder, "stage-1 checkpoint")->required();
  anw->add_option("--generator", generator, "stage-1 checkpoint")->required();
  anw->add_option("--data", data, "dataset directory or manifest")->required();
  anw->add_option("--seq-a", seq_a, "sequence id of frame A")->required();
  anw->add_option("--frame-a", frame_a, "frame index of A");
  anw->add_option("--seq-b", seq_b, "sequence id of frame B");
  anw->add_option("--frame-b", frame_b, "frame index of B");
  anw->add_option("--which", which, "style | content");
  anw->add_option("--source", source, "data | prior (where B's latent comes from)");
  anw->add_option("--seed", seed, "prior seed when --source prior");
  anw->add_option("--out", out, "output directory")->required();
  auto* ani = an->add_subcommand("interpolate", "latent interpolation within a scene");
  ani->add_option("--encoder", encoder, "stage-1 checkpoint")->required();
  ani->add_option("--generator", generator, "stage-1 checkpoint")->required();
  ani->add_option("--data", data, "dataset directory or manifest")->required();
  ani->add_option("--seq", seq_a, "sequence id")->required();
  ani->add_option("--frame-a", frame_a, "first frame index")->required();
  ani->add_option("--frame-b", frame_b, "second frame index")->required();
  ani->add_option("--steps", steps, "interpolation steps");
  ani->add_option("--out", out, "output directory")->required();

  auto* rep = app.add_subcommand("report", "static HTML summary of runs");
  rep->add_option("--runs", data, "directory holding run outputs")->required();
  rep->add_option("--out", out, "output HTML path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed()) return cmd_simulate(config, seed, out);
    if (trr->parsed()) return cmd_train_repr(config, data, out);
    if (enc->parsed()) return cmd_encode(encoder, data, out);
    if (trp->parsed()) return cmd_train_pred(config, data, out);
    if (prd->parsed())
      return cmd_predict(encoder, generator, predictor, data, rollout, split, baseline, out);
    if (ev->parsed()) return cmd_evaluate(data, generator, out, t_free, t_occ);
    if (an->parsed()) {
      if (ans->parsed()) return cmd_analyze_sample(generator, n_samples, seed, out);
      if (anw->parsed())
        return cmd_analyze_swap(encoder, generator, data, seq_a, frame_a, seq_b, frame_b, which,
                                source, seed, out);
      if (ani->parsed())
        return cmd_analyze_interpolate(encoder, generator, data, seq_a, frame_a, frame_b, steps, out);
    }
    if (rep->parsed()) return cmd_report(data, out);
    std::cerr << "no subcommand\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const ogp::NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 3;
  } catch (const ogp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
