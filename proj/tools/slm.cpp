// slm: prepare | train | reestimate | ppl | parse
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "slm/decoder.hpp"
#include "slm/evalppl.hpp"
#include "slm/reestimate.hpp"

namespace fs = std::filesystem;
using namespace slm;

namespace {

struct Options {
  // shared
  int jobs = 1;
  std::size_t stack_depth = 10;
  double threshold = 6.91;
  std::size_t nbest = 10;
  int max_ops = 0;
  std::string data_dir = "prepared";
  std::string model_dir = "model";
  // prepare
  std::string dev, check, test, head_rules, bin_rules;
  std::size_t word_cap = 10000;
  // train
  double epsilon = 1e-6;
  // reestimate
  int iterations = 3;
  // ppl / parse
  std::string mode = "l2r";
  double lambda = -1.0;
  int iteration = -1;
  std::string corpus, text;
  bool machine = false;
  std::string sentence;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string file_hash(const fs::path& path) { return hex64(fnv1a(read_file(path))); }

template <class F>
auto with_file_context(const fs::path& path, F&& f) {
  try {
    return f();
  } catch (const ParseError& e) {
    throw ConfigError(path.string() + ":" + e.what());
  } catch (const StructureError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

SearchParams search_params(const Options& o) {
  SearchParams p;
  p.depth = o.stack_depth;
  p.threshold = o.threshold;
  p.nbest = o.nbest;
  p.max_ops = o.max_ops;
  p.validate();
  return p;
}

std::vector<HeadedTree> load_headed(const fs::path& path) {
  const std::string text = read_file(path);
  return with_file_context(path, [&] { return read_headed_treebank(text); });
}

// Raw sentences from a treebank (.mrg or headed) or a plain token file.
std::vector<Sentence> load_sentences(const Options& o, const fs::path& fallback) {
  std::vector<Sentence> out;
  if (!o.text.empty()) {
    std::istringstream in(read_file(o.text));
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream words(line);
      Sentence s;
      for (std::string w; words >> w;) s.push_back(intern(w));
      if (!s.empty()) out.push_back(std::move(s));
    }
    return out;
  }
  const fs::path path = o.corpus.empty() ? fallback : fs::path(o.corpus);
  const std::string text = read_file(path);
  const auto trees = with_file_context(path, [&] { return read_treebank(text); });
  for (const auto& t : trees) {
    Sentence s;
    for (const auto& w : leaf_words(t)) s.push_back(intern(w));
    out.push_back(std::move(s));
  }
  return out;
}

void write_manifest(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& entries) {
  std::string text = "slm-manifest 1\n";
  for (const auto& [k, v] : entries) text += k + "=" + v + "\n";
  write_file(path, text);
}

std::map<std::string, std::string> read_manifest(const fs::path& path) {
  std::map<std::string, std::string> out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

fs::path checkpoint(const Options& o, int k) { return fs::path(o.model_dir) / ("E" + std::to_string(k)); }

bool complete_checkpoint(const Options& o, int k) { return fs::exists(checkpoint(o, k) / "manifest.txt"); }

int latest_checkpoint(const Options& o) {
  int k = -1;
  while (complete_checkpoint(o, k + 1)) ++k;
  return k;
}

TrainingState load_checkpoint(const Options& o) {
  const int k = o.iteration >= 0 ? o.iteration : latest_checkpoint(o);
  if (k < 0 || !complete_checkpoint(o, k))
    throw ConfigError("no complete checkpoint in " + o.model_dir + (o.iteration >= 0 ? " for the requested iteration" : ""));
  return load_state(checkpoint(o, k), k);
}

// ---------------------------------------------------------------------------

int cmd_prepare(const Options& o) {
  if (o.dev.empty() || o.check.empty()) throw ConfigError("prepare needs --dev and --check");
  const PercolationRuleSet heads =
      o.head_rules.empty() ? PercolationRuleSet::defaults()
                           : PercolationRuleSet::parse(read_file(o.head_rules), o.head_rules);
  const BinarizationRuleSet schemes =
      o.bin_rules.empty() ? BinarizationRuleSet::defaults()
                          : BinarizationRuleSet::parse(read_file(o.bin_rules), o.bin_rules);

  const fs::path out(o.data_dir);
  fs::create_directories(out);
  std::vector<std::pair<std::string, std::string>> manifest{{"randomness", "none"},
                                                            {"word_cap", std::to_string(o.word_cap)}};
  auto add_input = [&](const char* key, const std::string& path) {
    if (!path.empty()) manifest.emplace_back(std::string(key) + "_hash", file_hash(path));
  };
  add_input("dev", o.dev);
  add_input("check", o.check);
  add_input("test", o.test);
  add_input("head_rules", o.head_rules);
  add_input("bin_rules", o.bin_rules);

  std::vector<HeadedTree> dev_trees;
  auto convert = [&](const std::string& path, const char* name, std::vector<HeadedTree>* keep) {
    const std::string text = read_file(path);
    std::string headed;
    with_file_context(path, [&] {
      for (const auto& raw : read_treebank(text)) {
        HeadedTree t = prepare_tree(raw, heads, schemes);
        headed += to_string(t) + '\n';
        if (keep) keep->push_back(std::move(t));
      }
      return 0;
    });
    const fs::path target = out / (std::string(name) + ".headed");
    write_file(target, headed);
    manifest.emplace_back(std::string(name) + ".headed", hex64(fnv1a(headed)));
  };
  convert(o.dev, "dev", &dev_trees);
  convert(o.check, "check", nullptr);
  if (!o.test.empty()) convert(o.test, "test", nullptr);
  if (dev_trees.empty()) throw ConfigError("empty development set: " + o.dev);

  const Vocabularies vocab = Vocabularies::build(dev_trees, o.word_cap);
  std::ostringstream v;
  vocab.save(v);
  write_file(out / "vocab.txt", v.str());
  manifest.emplace_back("vocab.txt", vocab.hash());
  write_manifest(out / "manifest.txt", manifest);
  std::cout << "prepared " << dev_trees.size() << " dev trees, " << vocab.words().size() << " words, "
            << vocab.tags().size() << " tags, " << vocab.labels().size() << " labels in " << out.string() << '\n';
  return 0;
}

Vocabularies load_vocab(const fs::path& path) {
  std::istringstream in(read_file(path));
  return Vocabularies::load(in);
}

int cmd_train(const Options& o) {
  const fs::path data(o.data_dir);
  const Vocabularies vocab = load_vocab(data / "vocab.txt");
  std::vector<HeadedTree> dev, check;
  for (const auto& t : load_headed(data / "dev.headed")) dev.push_back(complete_parse(t, vocab));
  for (const auto& t : load_headed(data / "check.headed")) check.push_back(complete_parse(t, vocab));

  TrainingOptions options;
  options.constraints.epsilon = o.epsilon;
  InitialReport report;
  const TrainingState state = initial_training(dev, check, vocab, options, &report);

  const fs::path dir = checkpoint(o, 0);
  save_state(dir, state);
  std::vector<std::pair<std::string, std::string>> manifest{
      {"iteration", "0"},
      {"randomness", "none"},
      {"data_manifest", file_hash(data / "manifest.txt")},
      {"dev_sentences", std::to_string(report.dev_sentences)},
      {"check_sentences", std::to_string(report.check_sentences)},
      {"check_skipped", std::to_string(report.check_skipped)},
      {"epsilon", format_double(o.epsilon)}};
  for (auto [name, fit] : {std::pair{"word", &report.word}, std::pair{"tagger", &report.tagger},
                           std::pair{"parser", &report.parser}, std::pair{"trigram", &report.trigram}}) {
    manifest.emplace_back(std::string(name) + "_lambda_iterations", std::to_string(fit->iterations));
    manifest.emplace_back(std::string(name) + "_check_loglik", format_double(fit->log_likelihood.back()));
  }
  write_manifest(dir / "manifest.txt", manifest);
  std::cout << "E0: " << report.dev_sentences << " dev sentences, " << report.check_sentences
            << " check sentences (" << report.check_skipped << " skipped) -> " << dir.string() << '\n';
  return 0;
}

int cmd_reestimate(const Options& o) {
  if (o.iterations < 0) throw ConfigError("--iterations must be nonnegative");
  const fs::path data(o.data_dir);
  const SearchParams params = search_params(o);
  std::vector<Sentence> dev;
  for (const auto& t : load_headed(data / "dev.headed")) dev.push_back(leaf_words(t));

  int k = latest_checkpoint(o);
  if (k < 0) throw ConfigError("no E0 checkpoint in " + o.model_dir + "; run train first");
  if (k > 0) std::cout << "resuming from E" << k << '\n';
  while (k < o.iterations) {
    // Always from disk, so a resumed run sees exactly what a fresh one does.
    const TrainingState state = load_state(checkpoint(o, k), k);
    IterationReport report;
    const TrainingState next = reestimation_iteration(state, dev, params, o.jobs, &report);
    const fs::path dir = checkpoint(o, k + 1);
    fs::remove(dir / "manifest.txt");
    save_state(dir, next);
    const auto fresh = zero_to_nonzero_report(state, next);
    write_manifest(dir / "manifest.txt",
                   {{"iteration", std::to_string(k + 1)},
                    {"randomness", "none"},
                    {"data_manifest", file_hash(data / "manifest.txt")},
                    {"stack_depth", std::to_string(params.depth)},
                    {"logprob_threshold_nats", format_double(params.threshold)},
                    {"nbest", std::to_string(params.nbest)},
                    {"max_ops", std::to_string(params.max_ops)},
                    {"sentences", std::to_string(report.sentences)},
                    {"skipped", std::to_string(report.skipped.size())},
                    {"new_events", std::to_string(fresh.size())},
                    {"previous_dev_l2r_ppl", format_double(report.dev_l2r.perplexity())},
                    {"previous_dev_sum_ppl", format_double(report.dev_sum.perplexity())}});
    char buf[160];
    std::snprintf(buf, sizeof buf, "E%d: dev L2R-PPL %.2f  SUM-PPL %.2f  -> E%d (%zu new events, %zu skipped)", k,
                  report.dev_l2r.perplexity(), report.dev_sum.perplexity(), k + 1, fresh.size(),
                  report.skipped.size());
    std::cout << buf << '\n';
    ++k;
  }
  return 0;
}

int cmd_ppl(const Options& o) {
  const PplMode mode = mode_from_name(o.mode);
  if (mode == PplMode::Interpolated && o.lambda != -1.0 && !(o.lambda >= 0.0 && o.lambda <= 1.0))
    throw ConfigError("--lambda must lie in [0,1]");
  const SearchParams params = search_params(o);
  const TrainingState state = load_checkpoint(o);
  const StructuredModel model = state.structured();
  const std::vector<Sentence> corpus = load_sentences(o, fs::path(o.data_dir) / "test.headed");
  if (corpus.empty()) throw ConfigError("empty evaluation corpus");

  const bool structured = mode != PplMode::Trigram;
  const bool baseline = mode == PplMode::Trigram || mode == PplMode::Interpolated;
  const auto traces = trace_corpus(structured ? &model : nullptr, baseline ? &state.trigram : nullptr, state.vocab,
                                   corpus, params, o.jobs);
  double lambda = o.lambda;
  if (mode == PplMode::Interpolated && lambda == -1.0) {
    std::vector<Sentence> check;
    for (const auto& t : load_headed(fs::path(o.data_dir) / "check.headed")) check.push_back(leaf_words(t));
    lambda = estimate_mix_lambda(trace_corpus(&model, &state.trigram, state.vocab, check, params, o.jobs));
  }
  const PplReport report = make_report(traces, mode, lambda);
  if (o.machine) report.print_machine(std::cout);
  else report.print_table(std::cout);
  return 0;
}

int cmd_parse(const Options& o) {
  if (o.sentence.empty()) throw ConfigError("parse needs --sentence");
  SearchParams params = search_params(o);
  const TrainingState state = load_checkpoint(o);
  const StructuredModel model = state.structured();
  std::vector<Symbol> words;
  std::istringstream in(o.sentence);
  for (std::string w; in >> w;) words.push_back(state.vocab.map_word(intern(w)));
  if (words.empty()) throw ConfigError("empty sentence");
  const DecodeResult r = decode(model, words, params);
  for (const auto& h : r.nbest)
    std::cout << format_double(h->logp) << '\t' << to_string(derivation_to_tree(h->derivation())) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"structured language model toolkit"};
  app.set_config("--config", "", "key=value file mirroring the flags; flags override it");
  app.require_subcommand(1);
  Options o;

  app.add_option("--jobs", o.jobs, "sentence-level parallelism")->check(CLI::PositiveNumber);
  app.add_option("--stack-depth", o.stack_depth, "maximum hypotheses per stack")->check(CLI::PositiveNumber);
  app.add_option("--logprob-threshold-nats", o.threshold, "stack pruning threshold")->check(CLI::NonNegativeNumber);
  app.add_option("--nbest", o.nbest, "N-best list size")->check(CLI::PositiveNumber);
  app.add_option("--max-ops", o.max_ops, "parser operations per word (0: 2k+2)")->check(CLI::NonNegativeNumber);
  app.add_option("--data", o.data_dir, "prepared data directory");
  app.add_option("--model-dir", o.model_dir, "checkpoint directory");

  auto* prepare = app.add_subcommand("prepare", "percolate and binarize treebanks, build vocabularies");
  prepare->add_option("--dev", o.dev, "development treebank")->check(CLI::ExistingFile);
  prepare->add_option("--check", o.check, "check treebank")->check(CLI::ExistingFile);
  prepare->add_option("--test", o.test, "test treebank")->check(CLI::ExistingFile);
  prepare->add_option("--head-rules", o.head_rules, "head percolation rules")->check(CLI::ExistingFile);
  prepare->add_option("--bin-rules", o.bin_rules, "binarization rules")->check(CLI::ExistingFile);
  prepare->add_option("--word-cap", o.word_cap, "word vocabulary size")->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "initial statistics and interpolation weights (E0)");
  train->add_option("--epsilon", o.epsilon, "floor on P(</s>)")->check(CLI::Range(1e-300, 0.5));

  auto* reest = app.add_subcommand("reestimate", "N-best re-estimation up to E_N");
  reest->add_option("--iterations", o.iterations, "target iteration")->check(CLI::NonNegativeNumber);

  auto* ppl = app.add_subcommand("ppl", "perplexity report");
  ppl->add_option("--mode", o.mode, "l2r|sum|viterbi|trigram|interpolated")
      ->check(CLI::IsMember({"l2r", "sum", "viterbi", "trigram", "interpolated"}));
  ppl->add_option("--lambda", o.lambda, "trigram weight; estimated on the check set if absent");
  ppl->add_option("--iteration", o.iteration, "checkpoint (default: latest)");
  ppl->add_option("--corpus", o.corpus, "treebank to score (default: prepared test set)")->check(CLI::ExistingFile);
  ppl->add_option("--text", o.text, "plain text, one sentence per line")->check(CLI::ExistingFile);
  ppl->add_flag("--machine", o.machine, "metric TAB value output");

  auto* parse = app.add_subcommand("parse", "N-best parses of one sentence");
  parse->add_option("--sentence", o.sentence, "space-separated words");
  parse->add_option("--iteration", o.iteration, "checkpoint (default: latest)");

  for (auto* sub : {prepare, train, reest, ppl, parse}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*prepare) return cmd_prepare(o);
    if (*train) return cmd_train(o);
    if (*reest) return cmd_reestimate(o);
    if (*ppl) return cmd_ppl(o);
    if (*parse) return cmd_parse(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
