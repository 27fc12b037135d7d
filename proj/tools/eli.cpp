// Command-line front end: corpus generation, distant supervision, training,
// prediction and evaluation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "eli/checkpoint.hpp"
#include "eli/config.hpp"
#include "eli/corpus.hpp"
#include "eli/error.hpp"
#include "eli/eval.hpp"
#include "eli/evidence.hpp"
#include "eli/inference.hpp"
#include "eli/linking.hpp"
#include "eli/log.hpp"
#include "eli/pipeline.hpp"
#include "eli/supervision.hpp"
#include "eli/synth.hpp"
#include "eli/tagger.hpp"

namespace fs = std::filesystem;
using namespace eli;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool verbose = false;
};

Config load_config(const Globals& g) {
  Config c = g.config_path.empty() ? Config{} : Config::load(g.config_path);
  if (g.seed) c.set("seed", std::to_string(*g.seed));
  return c;
}

std::uint64_t seed_of(const Config& c) { return c.get_uint("seed", 7); }

HeadTrainConfig head_config(const Config& c, const std::string& prefix) {
  HeadTrainConfig h;
  h.epochs = c.get_uint(prefix + ".epochs", h.epochs);
  h.learning_rate = c.get_double(prefix + ".lr", h.learning_rate);
  h.batch_size = c.get_uint(prefix + ".batch_size", h.batch_size);
  h.patience = c.get_uint(prefix + ".patience", h.patience);
  h.seed = seed_of(c);
  return h;
}

SupervisionConfig supervision_config(const Config& c) {
  SupervisionConfig s;
  s.grouping.similarity_threshold =
      c.get_double("supervision.similarity_threshold", s.grouping.similarity_threshold);
  s.linker_negatives = c.get_uint("supervision.linker_negatives", s.linker_negatives);
  s.seed = seed_of(c);
  return s;
}

std::unique_ptr<EncoderBackend> backend_of(const Config& c) {
  const EncoderConfig e = encoder_config(c);
  if (!e.frozen) throw ValidationError("encoder.frozen = false is not supported by the available backends");
  return make_encoder(e);
}

fs::path require_out(const Globals& g) {
  if (g.out.empty()) throw ValidationError("--out is required");
  return g.out;
}

// Training samples either from a sidecar file or derived from a gold corpus.
TrainingSamples samples_from(const std::string& samples_path, const std::string& corpus_path,
                             const Config& c) {
  if (!samples_path.empty()) return load_samples(samples_path);
  if (corpus_path.empty()) throw ValidationError("give --samples or --train");
  TrainingSamples out;
  const auto docs = load_corpus(corpus_path);
  const auto sup = supervision_config(c);
  for (const auto& d : docs) out.append(derive_samples(d, sup));
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

fs::path predictions_file(const std::string& pred) {
  fs::path p = pred;
  if (fs::is_directory(p)) return p / "pred.docs.jsonl";
  if (p.filename() == "pred.jsonl") return p.parent_path() / "pred.docs.jsonl";
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evidence extraction: extract, link and infer ICO findings from trial abstracts"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Settings file (key = value)");
  app.add_option("--seed", g.seed, "Random seed (overrides the config)");
  app.add_option("--out", g.out, "Output file or directory");
  app.add_flag("-v,--verbose", g.verbose, "Progress messages");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with prompts");
  SynthConfig synth_cfg;
  synth->add_option("--train", synth_cfg.train, "Training documents");
  synth->add_option("--dev", synth_cfg.dev, "Development documents");
  synth->add_option("--test", synth_cfg.test, "Test documents");

  // build-distant
  auto* distant = app.add_subcommand("build-distant", "Project prompts onto tagged documents");
  std::string raw_path, prompts_path, tagger_path;
  distant->add_option("--docs", raw_path, "Documents (JSON-Lines; annotations ignored)")->required();
  distant->add_option("--prompts", prompts_path, "Prompt annotations")->required();
  distant->add_option("--tagger", tagger_path, "Tagger checkpoint")->required();

  // train
  auto* train = app.add_subcommand("train", "Train one model");
  train->require_subcommand(1);
  std::string train_path, dev_path, samples_path;
  auto* t_tagger = train->add_subcommand("tagger", "Mention tagger");
  t_tagger->add_option("--train", train_path, "Annotated corpus")->required();
  t_tagger->add_option("--dev", dev_path, "Development corpus");
  std::vector<CLI::App*> heads;
  for (const char* name : {"evidence", "linker", "inference"}) {
    auto* sub = train->add_subcommand(name, std::string(name) + " model");
    sub->add_option("--samples", samples_path, "Sample sidecar from build-distant");
    sub->add_option("--train", train_path, "Annotated corpus to derive samples from");
    heads.push_back(sub);
  }

  // tune-threshold
  auto* tune = app.add_subcommand("tune-threshold", "Pick the grouping similarity threshold");
  std::string tune_dev;
  tune->add_option("--dev", tune_dev, "Development corpus with gold entities")->required();

  // predict / evaluate
  auto* predict = app.add_subcommand("predict", "Run the full pipeline");
  std::string input_path;
  GoldSwitches switches;
  predict->add_option("--input", input_path, "Documents (JSON-Lines)")->required();
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against gold");
  std::string gold_path, pred_path;
  bool partial = false;
  evaluate->add_option("--gold", gold_path, "Gold corpus")->required();
  evaluate->add_option("--pred", pred_path, "Predicted documents; omitted = run the pipeline now");
  evaluate->add_flag("--partial", partial, "Also report partial-overlap entity matches");
  for (auto* sub : {predict, evaluate}) {
    sub->add_flag("--gold-mentions", switches.mentions, "Use gold mentions and entities");
    sub->add_flag("--gold-evidence", switches.evidence, "Use gold evidence sentences");
    sub->add_flag("--gold-links", switches.links, "Use gold links; infer directions only");
  }

  // report
  auto* report = app.add_subcommand("report", "Corpus statistics");
  std::string report_path;
  report->add_option("--corpus", report_path, "Corpus file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  set_verbose(g.verbose);

  try {
    const Config config = load_config(g);

    if (synth->parsed()) {
      synth_cfg.seed = seed_of(config);
      synth_cfg.multi_arm = config.get_double("synth.multi_arm", synth_cfg.multi_arm);
      synth_cfg.hard_fraction = config.get_double("synth.hard_fraction", synth_cfg.hard_fraction);
      synth_cfg.extraneous = config.get_double("synth.extraneous", synth_cfg.extraneous);
      synth_cfg.held_out = config.get_double("synth.held_out", synth_cfg.held_out);
      write_synth_corpus(synth_corpus(synth_cfg), require_out(g));
      return 0;
    }

    if (report->parsed()) {
      const auto docs = load_corpus(report_path);
      const CorpusStats s = corpus_stats(docs);
      std::cout << "abstracts " << s.num_abstracts << "\nrelations " << s.num_relations << "\nentities "
                << s.num_entities << "\nmentions " << s.num_mentions << "\nrelations/doc "
                << s.relations_per_doc << "\nentities/doc " << s.entities_per_doc << "\nmentions/doc "
                << s.mentions_per_doc << '\n';
      return 0;
    }

    const auto backend = backend_of(config);

    if (distant->parsed()) {
      const fs::path out = require_out(g);
      const TaggerModel tagger = TaggerModel::from_checkpoint(load_checkpoint(tagger_path, "tagger"));
      std::vector<Document> raw;
      for (const auto& d : load_corpus(raw_path)) raw.push_back(d.document());
      const auto prompts = load_prompts(prompts_path);
      const DistantCorpus corpus = build_training_corpus(
          raw, prompts, [&](const Document& d) { return predict_mentions(tagger, *backend, d); }, *backend,
          supervision_config(config));
      write_corpus(corpus.docs, out);
      fs::path sidecar = out;
      sidecar.replace_extension(".samples.jsonl");
      write_samples(corpus.samples, sidecar);
      std::cerr << "documents " << corpus.docs.size() << ", prompts skipped " << corpus.skipped_prompts
                << ", not projected " << corpus.unprojected_prompts << '\n';
      return 0;
    }

    if (t_tagger->parsed()) {
      const fs::path out = require_out(g);
      TaggerConfig tc;
      tc.hidden = config.get_uint("tagger.hidden", tc.hidden);
      tc.epochs = config.get_uint("tagger.epochs", tc.epochs);
      tc.learning_rate = config.get_double("tagger.lr", tc.learning_rate);
      tc.batch_size = config.get_uint("tagger.batch_size", tc.batch_size);
      tc.patience = config.get_uint("tagger.patience", tc.patience);
      tc.seed = seed_of(config);
      const auto train_docs = load_corpus(train_path);
      const auto dev_docs = dev_path.empty() ? std::vector<AnnotatedDocument>{} : load_corpus(dev_path);
      const TaggerTrainResult r = train_tagger(train_docs, dev_docs, *backend, tc);
      save_checkpoint(r.model.to_checkpoint(), out);
      std::cerr << "best dev token F1 " << r.best_dev_f1 << " at epoch " << r.best_epoch << '\n';
      return 0;
    }

    if (heads[0]->parsed()) {
      EvidenceConfig ec;
      ec.train = head_config(config, "evidence");
      ec.dev_fraction = config.get_double("evidence.dev_fraction", ec.dev_fraction);
      ec.threshold = config.get_double("evidence.threshold", ec.threshold);
      const auto samples = samples_from(samples_path, train_path, config);
      const auto r = train_evidence_classifier(samples.evidence, *backend, ec);
      save_checkpoint(r.classifier.to_checkpoint(), require_out(g));
      std::cerr << "dev accuracy " << r.dev_accuracy << '\n';
      return 0;
    }
    if (heads[1]->parsed()) {
      LinkerConfig lc;
      lc.train = head_config(config, "linker");
      lc.dev_fraction = config.get_double("linker.dev_fraction", lc.dev_fraction);
      const auto samples = samples_from(samples_path, train_path, config);
      const auto r = train_linker(samples.link, *backend, lc);
      save_checkpoint(r.model.to_checkpoint(), require_out(g));
      std::cerr << "dev accuracy " << r.dev_accuracy << '\n';
      return 0;
    }
    if (heads[2]->parsed()) {
      InferenceConfig ic;
      ic.train = head_config(config, "inference");
      ic.dev_fraction = config.get_double("inference.dev_fraction", ic.dev_fraction);
      ic.include_comparator = config.get_bool("inference.include_comparator", ic.include_comparator);
      const auto samples = samples_from(samples_path, train_path, config);
      const auto r = train_inference(samples.infer, *backend, ic);
      save_checkpoint(r.model.to_checkpoint(), require_out(g));
      std::cerr << "dev macro-F1 " << r.dev_macro_f1 << '\n';
      return 0;
    }

    if (tune->parsed()) {
      const auto dev = load_corpus(tune_dev);
      const auto grid = config.get_grid("tune.grid", {0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95});
      const double best = tune_threshold(dev, *backend, grid);
      std::cout << "pipeline.grouping_threshold = " << best << '\n';
      if (!g.out.empty()) write_text(g.out, "pipeline.grouping_threshold = " + std::to_string(best) + "\n");
      return 0;
    }

    if (predict->parsed() || (evaluate->parsed() && pred_path.empty())) {
      const PipelineConfig pc = PipelineConfig::from_config(config);
      const PipelineModels models = load_models(pc);
      const auto docs = load_corpus(predict->parsed() ? input_path : gold_path);
      const RunOutput run = run_end_to_end(models, pc, docs, switches);
      const fs::path out = require_out(g);
      fs::create_directories(out);
      write_predictions(run.relations(), out / "pred.jsonl");
      write_corpus(run.predictions, out / "pred.docs.jsonl");
      write_text(out / "run_report.json", run.report.to_json());
      if (predict->parsed()) return run.report.failures.empty() ? 0 : 2;
      pred_path = (out / "pred.docs.jsonl").string();
    }

    if (evaluate->parsed()) {
      const auto gold = load_corpus(gold_path);
      const auto pred = load_corpus(predictions_file(pred_path));
      ReportFlags flags{switches.mentions || switches.links, switches.evidence || switches.links, switches.links,
                        partial};
      const Report r = make_report(gold, pred, flags);
      std::cout << r.table;
      if (!g.out.empty()) {
        fs::create_directories(g.out);
        write_text(fs::path(g.out) / "metrics.json", metrics_json(r.metrics));
      }
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
