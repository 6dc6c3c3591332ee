#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "headline_forge/checkpoint.hpp"
#include "headline_forge/error.hpp"
#include "headline_forge/experiment.hpp"
#include "headline_forge/ingest.hpp"
#include "headline_forge/labeler.hpp"
#include "headline_forge/scoring.hpp"
#include "headline_forge/service.hpp"
#include "headline_forge/synth.hpp"
#include "headline_forge/textprep.hpp"
#include "headline_forge/topics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hf;

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  return in;
}

std::vector<Document> load_corpus(const fs::path& path) {
  auto in = open_in(path);
  return read_corpus(in);
}

void log(const std::string& message) { std::cerr << message << std::endl; }

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::vector<fs::path> logs;
  double cap = 600, floor = 1;
  std::size_t partitions = 4;
  fs::path out;
  std::optional<fs::path> rejects;
};

void run_ingest(const IngestArgs& a) {
  std::vector<PageViewEvent> events;
  std::vector<std::pair<fs::path, RejectRecord>> rejects;
  for (const auto& path : a.logs) {
    ParseResult r = parse_log_file(path);
    log(path.string() + ": " + std::to_string(r.events.size()) + " events, " + std::to_string(r.rejects.size()) +
        " rejected");
    events.insert(events.end(), std::make_move_iterator(r.events.begin()), std::make_move_iterator(r.events.end()));
    for (auto& rej : r.rejects) rejects.emplace_back(path, std::move(rej));
  }
  const std::size_t parsed = events.size();
  events = filter_noise(std::move(events), NoiseFilter{a.cap, a.floor});
  const AggregateMap aggregates = aggregate_partitioned(events, a.partitions);
  auto out = open_out(a.out);
  write_aggregates(out, aggregates);
  if (a.rejects) {
    auto rout = open_out(*a.rejects);
    for (const auto& [path, r] : rejects)
      rout << json{{"file", path.string()}, {"line", r.line_number}, {"reason", to_string(r.reason)}, {"raw", r.raw_line}}
                  .dump()
           << '\n';
  }
  log("kept " + std::to_string(events.size()) + " of " + std::to_string(parsed) + " events; " +
      std::to_string(aggregates.size()) + " articles -> " + a.out.string());
}

void run_label(const fs::path& aggregates_path, double clip, const fs::path& out_path) {
  auto in = open_in(aggregates_path);
  const auto labels = label_corpus(read_aggregates(in), clip);
  auto out = open_out(out_path);
  write_labels(out, labels);
  std::array<std::size_t, 4> counts{};
  for (const auto& l : labels) ++counts[static_cast<std::size_t>(l.hard_label - 1)];
  log(std::to_string(labels.size()) + " labels; hard-label counts " + std::to_string(counts[0]) + "/" +
      std::to_string(counts[1]) + "/" + std::to_string(counts[2]) + "/" + std::to_string(counts[3]) + " -> " +
      out_path.string());
}

void run_prep(const fs::path& corpus_path, const fs::path& dir, std::uint64_t seed, std::size_t min_count,
              std::size_t max_vocab) {
  const auto docs = load_corpus(corpus_path);
  std::vector<std::string> ids;
  for (const auto& d : docs) ids.push_back(d.article_id);
  const CorpusSplit split = split_corpus(ids, seed);
  const std::set<std::string> train_ids(split.train.begin(), split.train.end());

  std::vector<std::vector<std::string>> heads, bodies, both;
  for (const auto& d : docs) {
    if (!train_ids.count(d.article_id)) continue;
    heads.push_back(tokenize(d.headline));
    bodies.push_back(tokenize(d.body));
    both.push_back(heads.back());
    both.push_back(bodies.back());
  }
  const Vocabulary vocab = Vocabulary::build(both, min_count, max_vocab);
  auto ids_of = [&](const std::vector<std::vector<std::string>>& toks) {
    std::vector<std::vector<std::int32_t>> out;
    for (const auto& t : toks) out.push_back(to_ids(t, vocab));
    return out;
  };
  const TfidfModel head = TfidfModel::fit(ids_of(heads), vocab.size());
  const TfidfModel body = TfidfModel::fit(ids_of(bodies), vocab.size());

  fs::create_directories(dir);
  auto vout = open_out(dir / "vocab.txt");
  for (std::size_t i = 0; i < vocab.size(); ++i) vout << vocab.token(static_cast<std::int32_t>(i)) << '\n';
  auto iout = open_out(dir / "idf.json");
  iout << json{{"documents", head.documents()}, {"headline", head.idf()}, {"body", body.idf()}}.dump() << '\n';
  auto sout = open_out(dir / "split.json");
  sout << json{{"seed", seed}, {"train", split.train}, {"validation", split.validation}, {"test", split.test}}.dump()
       << '\n';
  log("vocabulary " + std::to_string(vocab.size()) + " (fingerprint " + std::to_string(vocab.fingerprint()) +
      "); split " + std::to_string(split.train.size()) + "/" + std::to_string(split.validation.size()) + "/" +
      std::to_string(split.test.size()) + " -> " + dir.string());
}

void run_topics(const fs::path& corpus_path, std::size_t t, std::size_t iters, std::uint64_t seed,
                std::size_t min_count, const fs::path& dir) {
  const auto docs = load_corpus(corpus_path);
  std::vector<std::vector<std::string>> heads, bodies, both;
  for (const auto& d : docs) {
    heads.push_back(tokenize(d.headline));
    bodies.push_back(tokenize(d.body));
    both.push_back(heads.back());
    both.push_back(bodies.back());
  }
  const Vocabulary vocab = Vocabulary::build(both, min_count);
  fs::create_directories(dir);
  json summary = {{"topics", t}, {"vocab_size", vocab.size()}, {"vocab_fingerprint", vocab.fingerprint()}};
  auto words = open_out(dir / "top_words.txt");
  for (const auto& [field, toks] : {std::pair{"headline", &heads}, std::pair{"body", &bodies}}) {
    std::vector<std::vector<std::int32_t>> ids;
    for (const auto& x : *toks) ids.push_back(to_ids(x, vocab));
    const TfidfModel tfidf = TfidfModel::fit(ids, vocab.size());
    std::vector<SparseVector> rows;
    for (const auto& x : ids) rows.push_back(tfidf.transform(x));
    NnmfFit fit = nnmf_fit(tfidf_matrix(rows, vocab.size()), {t, iters, 1e-5, derive_seed(seed, std::string("topics.") + field)});
    fit.model.vocab_fingerprint = vocab.fingerprint();
    summary[field] = {{"loss_history", fit.model.loss_history}, {"iterations", fit.model.loss_history.size() - 1}};

    auto hout = open_out(dir / (std::string(field) + "_H.tsv"));
    hout.precision(17);
    for (Eigen::Index r = 0; r < fit.model.H.rows(); ++r) {
      for (Eigen::Index c = 0; c < fit.model.H.cols(); ++c) hout << (c ? "\t" : "") << fit.model.H(r, c);
      hout << '\n';
    }
    for (std::size_t k = 0; k < fit.model.topics(); ++k) {
      words << field << " topic " << k << ":";
      for (const auto& [w, weight] : top_words(fit.model, k, vocab, 10)) words << ' ' << w;
      words << '\n';
    }
    log(std::string(field) + ": loss " + std::to_string(fit.model.loss_history.front()) + " -> " +
        std::to_string(fit.model.loss_history.back()));
  }
  auto sout = open_out(dir / "topics.json");
  sout << summary.dump() << '\n';
}

struct TrainArgs {
  std::string arch = "proposed";
  fs::path labels, corpus, out;
  std::string loss = "mse_soft";
  std::uint64_t seed = 7;
  std::optional<fs::path> word_vectors, doc_vectors;
  TrainConfig train;
};

void run_train(const TrainArgs& a) {
  ExperimentConfig config;
  config.corpus = a.corpus;
  config.labels = a.labels;
  config.seed = a.seed;
  config.word_vectors = a.word_vectors;
  config.doc_vectors = a.doc_vectors;
  config.train = a.train;
  const Architecture arch = parse_architecture(a.arch);
  const LossKind loss = parse_loss(a.loss);

  PreparedData data = prepare_data(load_labeled_corpus(config), config);
  log("split " + std::to_string(data.train.size()) + "/" + std::to_string(data.validation.size()) + "/" +
      std::to_string(data.test.size()) + ", vocabulary " + std::to_string(data.features->vocab().size()));
  std::unique_ptr<Model> model;
  const ReportRow row = run_architecture(data, arch, loss, config, &model, log);

  TrainedModel trained;
  trained.model = std::move(model);
  trained.features = std::move(data.features);
  trained.info = {{"seed", a.seed},
                  {"loss", a.loss},
                  {"corpus", a.corpus.string()},
                  {"labels", a.labels.string()},
                  {"best_epoch", row.best_epoch},
                  {"test_mae", row.mae},
                  {"test_rae", row.rae}};
  save_checkpoint(trained, a.out);
  std::cout << json{{"architecture", row.architecture}, {"loss", row.loss},        {"test_mae", row.mae},
                    {"test_rae", row.rae},               {"epochs", row.epochs_run}, {"best_epoch", row.best_epoch},
                    {"checkpoint", a.out.string()}}
                   .dump(2)
            << std::endl;
}

void run_eval(const fs::path& config_path, const fs::path& out_path) {
  const ExperimentConfig config = load_experiment_config(config_path);
  const EvalReport report = run_experiment(config, log);
  auto out = open_out(out_path);
  out << to_json(report).dump(2) << '\n';
  for (const auto& r : report.rows)
    std::cout << r.architecture << (r.loss.empty() ? "" : "/" + r.loss) << "  MAE " << r.mae << "  RAE " << r.rae
              << '\n';
}

void run_synth(std::size_t n, double events, std::uint64_t seed, const fs::path& dir) {
  const SyntheticWorld world = generate_synthetic(n, events, seed);
  write_synthetic(world, dir);
  log(std::to_string(n) + " articles written to " + dir.string());
}

ScoringService* g_service = nullptr;

void run_serve(const fs::path& model_path, const ServiceConfig& config) {
  auto trained = std::make_shared<const TrainedModel>(load_checkpoint(model_path));
  ScoringService service(trained, config);
  const int port = service.bind();
  g_service = &service;
  std::signal(SIGINT, [](int) {
    if (g_service) g_service->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_service) g_service->stop();
  });
  log("serving " + std::string(to_string(trained->model->architecture())) + " on " + config.host + ":" +
      std::to_string(port));
  service.run();
  g_service = nullptr;
}

void run_score(const fs::path& model_path, const fs::path& body_file, const std::vector<std::string>& headlines) {
  const TrainedModel trained = load_checkpoint(model_path);
  std::ifstream in(body_file, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + body_file.string());
  std::stringstream body;
  body << in.rdbuf();
  std::cout << to_json(score(trained, body.str(), headlines)).dump(2) << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Headline quality labeling, training and scoring"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Parse click logs and aggregate engagement per article");
  c_ingest->add_option("--logs", ingest.logs, "Log files (JSON lines, optionally gzip)")->required()->check(CLI::ExistingFile);
  c_ingest->add_option("--cap", ingest.cap, "Dwell cap in seconds")->capture_default_str();
  c_ingest->add_option("--floor", ingest.floor, "Dwell floor in seconds")->capture_default_str();
  c_ingest->add_option("--partitions", ingest.partitions, "Concurrent aggregation partitions")->capture_default_str();
  c_ingest->add_option("--rejects", ingest.rejects, "Write rejected lines here");
  c_ingest->add_option("--out", ingest.out, "Aggregates output (JSON lines)")->required();

  fs::path agg_path, labels_out;
  double clip = 99;
  auto* c_label = app.add_subcommand("label", "Turn aggregates into soft quality labels");
  c_label->add_option("--aggregates", agg_path)->required()->check(CLI::ExistingFile);
  c_label->add_option("--clip", clip, "Upper clipping percentile")->capture_default_str();
  c_label->add_option("--out", labels_out)->required();

  fs::path prep_corpus, prep_out;
  std::uint64_t prep_seed = 7;
  std::size_t min_count = 2, max_vocab = 50000;
  auto* c_prep = app.add_subcommand("prep", "Build the vocabulary, idf vectors and split manifest");
  c_prep->add_option("--corpus", prep_corpus)->required()->check(CLI::ExistingFile);
  c_prep->add_option("--seed", prep_seed)->capture_default_str();
  c_prep->add_option("--min-count", min_count)->capture_default_str();
  c_prep->add_option("--max-vocab", max_vocab)->capture_default_str();
  c_prep->add_option("--out", prep_out)->required();

  fs::path topics_corpus, topics_out;
  std::size_t topics_t = 50, topics_iters = 200, topics_min_count = 2;
  std::uint64_t topics_seed = 7;
  auto* c_topics = app.add_subcommand("topics", "Fit headline and body topic models");
  c_topics->add_option("--corpus", topics_corpus)->required()->check(CLI::ExistingFile);
  c_topics->add_option("--t", topics_t, "Number of topics")->capture_default_str();
  c_topics->add_option("--iters", topics_iters)->capture_default_str();
  c_topics->add_option("--seed", topics_seed)->capture_default_str();
  c_topics->add_option("--min-count", topics_min_count)->capture_default_str();
  c_topics->add_option("--out", topics_out)->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train one architecture and write a checkpoint");
  c_train->add_option("--arch", tr.arch)
      ->check(CLI::IsMember({"proposed", "proposed_no_similarity", "tfidf_ffnn", "emb_cnn1d_ffnn", "emb_bgru_ffnn",
                             "emb_blstm_ffnn"}))
      ->capture_default_str();
  c_train->add_option("--labels", tr.labels)->required()->check(CLI::ExistingFile);
  c_train->add_option("--corpus", tr.corpus)->required()->check(CLI::ExistingFile);
  c_train->add_option("--loss", tr.loss)->check(CLI::IsMember({"mse_soft", "ce_hard"}))->capture_default_str();
  c_train->add_option("--seed", tr.seed)->capture_default_str();
  c_train->add_option("--word-vectors", tr.word_vectors)->check(CLI::ExistingFile);
  c_train->add_option("--doc-vectors", tr.doc_vectors)->check(CLI::ExistingFile);
  c_train->add_option("--epochs", tr.train.epochs)->capture_default_str();
  c_train->add_option("--patience", tr.train.patience)->capture_default_str();
  c_train->add_option("--lr", tr.train.lr)->capture_default_str();
  c_train->add_option("--batch", tr.train.batch)->capture_default_str();
  c_train->add_option("--out", tr.out)->required();

  fs::path eval_config, eval_out;
  auto* c_eval = app.add_subcommand("eval", "Run a train-and-compare experiment");
  c_eval->add_option("--config", eval_config)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--out", eval_out)->required();

  std::size_t synth_n = 2000;
  double synth_events = 1000;
  std::uint64_t synth_seed = 7;
  fs::path synth_out;
  auto* c_synth = app.add_subcommand("synth", "Write a synthetic world with planted labels");
  c_synth->add_option("--n", synth_n)->capture_default_str();
  c_synth->add_option("--events", synth_events, "Mean events per article")->capture_default_str();
  c_synth->add_option("--seed", synth_seed)->capture_default_str();
  c_synth->add_option("--out", synth_out)->required();

  fs::path serve_model;
  ServiceConfig serve_cfg;
  auto* c_serve = app.add_subcommand("serve", "Serve a checkpoint over HTTP");
  c_serve->add_option("--model", serve_model)->required()->check(CLI::ExistingFile);
  c_serve->add_option("--host", serve_cfg.host)->capture_default_str();
  c_serve->add_option("--port", serve_cfg.port)->capture_default_str();
  c_serve->add_option("--max-body-bytes", serve_cfg.max_body_bytes)->capture_default_str();
  c_serve->add_option("--threads", serve_cfg.threads)->capture_default_str();

  fs::path score_model, score_body;
  std::vector<std::string> score_headlines;
  auto* c_score = app.add_subcommand("score", "Score candidate headlines for one article body");
  c_score->add_option("--model", score_model)->required()->check(CLI::ExistingFile);
  c_score->add_option("--body-file", score_body)->required()->check(CLI::ExistingFile);
  c_score->add_option("--headline", score_headlines, "Candidate headline (repeatable)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_ingest) run_ingest(ingest);
    else if (*c_label) run_label(agg_path, clip, labels_out);
    else if (*c_prep) run_prep(prep_corpus, prep_out, prep_seed, min_count, max_vocab);
    else if (*c_topics) run_topics(topics_corpus, topics_t, topics_iters, topics_seed, topics_min_count, topics_out);
    else if (*c_train) run_train(tr);
    else if (*c_eval) run_eval(eval_config, eval_out);
    else if (*c_synth) run_synth(synth_n, synth_events, synth_seed, synth_out);
    else if (*c_serve) run_serve(serve_model, serve_cfg);
    else if (*c_score) run_score(score_model, score_body, score_headlines);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
