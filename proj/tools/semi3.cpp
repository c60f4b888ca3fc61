// Command-line entry points: dataset generation, two-stage training,
// retrieval evaluation and the gradient-check suite.

#include "semi3/errors.hpp"
#include "semi3/grad_check.hpp"
#include "semi3/retrieval.hpp"
#include "semi3/run_config.hpp"
#include "semi3/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

using namespace semi3;

void require_compatible(const ModelConfig& checkpoint, const ModelConfig& requested) {
  const BackboneConfig& a = checkpoint.backbone;
  const BackboneConfig& b = requested.backbone;
  auto same_stages = [](const std::vector<Stage>& x, const std::vector<Stage>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i].convs != y[i].convs || x[i].channels != y[i].channels) return false;
    }
    return true;
  };
  if (a.in_channels != b.in_channels || a.input_size != b.input_size || !same_stages(a.stages, b.stages) ||
      a.fc_dims != b.fc_dims || a.embed_dim != b.embed_dim || a.num_classes != b.num_classes ||
      checkpoint.reduction != requested.reduction) {
    throw ConfigError("config backbone does not match the checkpoint's architecture");
  }
  if (checkpoint.share != requested.share) {
    throw ConfigError("config share_plan " + to_string(requested.share) + " differs from checkpoint's " +
                      to_string(checkpoint.share));
  }
}

int gen_data(const std::string& spec_path, const std::string& out) {
  const RunConfig cfg = load_run_config(spec_path);
  const Dataset data = generate_dataset(cfg.data, out);
  std::cout << "wrote " << data.size() << " samples (" << data.train_indices().size() << " train, "
            << data.test_indices().size() << " test) to " << out << '\n';
  return 0;
}

int run_pretrain(const std::string& data_dir, const std::string& config_path, const std::string& out,
                 const std::string& log_path) {
  const RunConfig cfg = load_run_config(config_path);
  const Dataset data = load_dataset(data_dir);
  Semi3Model model(cfg.model);
  const TrainLog log = pretrain(model, data, cfg.train);
  save_checkpoint(model, out);
  if (!log_path.empty()) log.write_csv(log_path);
  if (!log.rows.empty()) {
    std::printf("pretrain: %zu steps, loss %.6f -> %.6f\n", log.rows.size(), log.rows.front().total,
                log.rows.back().total);
  }
  return 0;
}

int run_train(const std::string& data_dir, const std::string& config_path, const std::string& init,
              const std::string& out, std::string log_path) {
  const RunConfig cfg = load_run_config(config_path);
  const Dataset data = load_dataset(data_dir);
  Semi3Model model = load_checkpoint(init);
  require_compatible(model.config(), cfg.model);
  model.set_use_co_attention(cfg.model.use_co_attention);
  model.set_loss_weights(cfg.model.weights);
  if (log_path.empty()) log_path = cfg.train.log_path;

  const EpochHook hook = [&](std::size_t epoch, const Semi3Model& m) {
    if (cfg.train.checkpoint_every && (epoch + 1) % cfg.train.checkpoint_every == 0) {
      save_checkpoint(m, out + ".epoch" + std::to_string(epoch + 1));
    }
  };
  const TrainLog log = train_joint(model, data, cfg.train, hook);
  save_checkpoint(model, out);
  if (!log_path.empty()) log.write_csv(log_path);
  if (!log.rows.empty()) {
    std::printf("train: %zu steps, loss %.6f -> %.6f\n", log.rows.size(), log.rows.front().total,
                log.rows.back().total);
  }
  return 0;
}

int run_eval(const std::string& data_dir, const std::string& ckpt, const std::string& source) {
  const Semi3Model model = load_checkpoint(ckpt);
  const Dataset data = load_dataset(data_dir);
  const EvalResult result = evaluate(model, data, parse_feature_source(source));
  for (const std::string& w : result.map.warnings) std::cerr << "warning: " << w << '\n';
  std::printf("MAP=%.6f\n", result.map.map);
  return 0;
}

int run_retrieve(const std::string& data_dir, const std::string& ckpt, std::size_t query_id, std::size_t top,
                 const std::string& source) {
  const Semi3Model model = load_checkpoint(ckpt);
  const Dataset data = load_dataset(data_dir);
  const RetrievalIndex index = build_index(model, data, parse_feature_source(source));
  const RowMatrix query = embed_sketches(model, data, {data.index_of(query_id)});
  const Ranking ranking = rank(index, query.row(0).transpose(), query_id);
  for (std::size_t k = 0; k < std::min(top, ranking.order.size()); ++k) {
    std::printf("%zu,%zu,%.9f\n", k + 1, index.ids[ranking.order[k]], ranking.distances[k]);
  }
  return 0;
}

int run_grad_check() {
  bool ok = true;
  for (const GradCheckResult& r : run_gradient_suite()) {
    std::printf("%s %-32s max_rel_err=%.3e tol=%.0e coords=%zu\n", r.passed() ? "PASS" : "FAIL", r.name.c_str(),
                r.max_error, r.tolerance, r.coordinates);
    ok = ok && r.passed();
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Three-branch sketch/image/edgemap embedding: data, training, retrieval"};
  app.require_subcommand(1);

  std::string spec, out, data, config, init, log, ckpt, source = "image";
  std::size_t query = 0, top = 10;

  auto* gen = app.add_subcommand("gen-data", "Render a synthetic dataset");
  gen->add_option("--spec", spec, "Run configuration with data keys")->required();
  gen->add_option("--out", out, "Output directory")->required();

  auto* pre = app.add_subcommand("pretrain", "Per-branch cross-entropy pretraining, then tying");
  pre->add_option("--data", data)->required();
  pre->add_option("--config", config)->required();
  pre->add_option("--out", out, "Checkpoint to write")->required();
  pre->add_option("--log", log, "Optional CSV of pretraining losses");

  auto* train = app.add_subcommand("train", "Joint hybrid-loss training");
  train->add_option("--data", data)->required();
  train->add_option("--config", config)->required();
  train->add_option("--init", init, "Pretrained checkpoint")->required();
  train->add_option("--out", out, "Checkpoint to write")->required();
  train->add_option("--log", log, "CSV of per-step loss components");

  auto* eval = app.add_subcommand("eval", "MAP of test sketches against the full gallery");
  eval->add_option("--data", data)->required();
  eval->add_option("--ckpt", ckpt)->required();
  eval->add_option("--source", source)->check(CLI::IsMember({"image", "edgemap"}));

  auto* retrieve = app.add_subcommand("retrieve", "Rank the gallery for one sketch");
  retrieve->add_option("--ckpt", ckpt)->required();
  retrieve->add_option("--query", query, "Sample id of the query sketch")->required();
  retrieve->add_option("--top", top, "Number of hits to print");
  retrieve->add_option("--data", data, "Dataset directory holding the gallery")->required();
  retrieve->add_option("--source", source)->check(CLI::IsMember({"image", "edgemap"}));

  auto* grad = app.add_subcommand("grad-check", "Finite-difference gradient suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*gen) return gen_data(spec, out);
    if (*pre) return run_pretrain(data, config, out, log);
    if (*train) return run_train(data, config, init, out, log);
    if (*eval) return run_eval(data, ckpt, source);
    if (*retrieve) return run_retrieve(data, ckpt, query, top, source);
    if (*grad) return run_grad_check();
  } catch (const semi3::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
