// Acceptance run: one [PASS]/[FAIL] line per criterion.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <random>
#include <set>
#include <thread>

#include "support.hpp"

using namespace slmtest;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

Symbol s(const char* text) { return intern(text); }

// ---------------------------------------------------------------------------

Outcome round_trip() {
  const auto start = Clock::now();
  const auto& t = toy();
  std::size_t n = 0, ok = 0;
  for (const auto* set : {&t.train, &t.check, &t.test})
    for (const auto& body : *set) {
      ++n;
      const HeadedTree tree = complete_parse(body, t.vocab);
      if (derivation_to_tree(tree_to_derivation(tree)) == tree) ++ok;
    }
  const double secs = seconds_since(start);
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu/%zu trees, %.2f s", ok, n, secs);
  return {ok == n && n >= 200 && secs < 5.0, buf};
}

Outcome exhaustive_oracle() {
  const TrainingState state = train_tiny(kTinyTwoLabel);
  const StructuredModel model = state.structured();
  SearchParams params = SearchParams::exhaustive();
  params.restrict_tags = false;
  const std::vector<Symbol> tags{s("P"), s("Q")}, labels{s("A"), s("B")};
  std::size_t sentences = 0, parses = 0;
  double worst_parse = 0.0, worst_sum = 0.0;
  bool sets_match = true;
  for (const auto& words : all_sentences({s("a"), s("b"), s("c")}, 3)) {
    ++sentences;
    std::vector<Enumerated> brute;
    enumerate_derivations(model, words, state.vocab.tags(), brute);
    const DecodeResult r = decode(model, words, params);
    std::map<std::string, double> found;
    for (const auto& h : r.nbest) found.emplace(h->derivation().serialize(), h->logp);
    if (found.size() != brute.size()) sets_match = false;
    std::vector<double> brute_logps, found_logps;
    for (const auto& e : brute) {
      brute_logps.push_back(e.logp);
      const auto it = found.find(e.derivation);
      if (it == found.end()) {
        sets_match = false;
        continue;
      }
      worst_parse = std::max(worst_parse, std::abs(it->second - e.logp));
    }
    for (const auto& [d, lp] : found) found_logps.push_back(lp);
    worst_sum = std::max(worst_sum, std::abs(std::exp(log_sum(found_logps)) - std::exp(log_sum(brute_logps))));
    // The same parse set written down as trees without parser actions.
    const auto oracle = oracle_parses(words, tags, labels);
    std::set<std::string> trees;
    for (const auto& h : r.nbest) trees.insert(to_string(derivation_to_tree(h->derivation())));
    if (trees != std::set<std::string>(oracle.begin(), oracle.end())) sets_match = false;
    parses += found.size();
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "%zu sentences, %zu parses, max |dlogp| %.2e, max |dP(W)| %.2e", sentences, parses,
                worst_parse, worst_sum);
  return {sets_match && worst_parse <= 1e-9 && worst_sum <= 1e-9, buf};
}

Outcome normalization() {
  const auto& t = toy();
  const StructuredModel model = t.e0.structured();
  const auto words = word_outcomes(t.vocab);
  std::mt19937 rng(20240611);
  std::size_t word_ctx = 0, tag_ctx = 0, parser_ctx = 0;
  double worst = 0.0;
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  const auto bodies = sentences(t.check);
  while (word_ctx < 1000 || tag_ctx < 1000 || parser_ctx < 1000) {
    // Random legal walk over the words of a check sentence.
    const Sentence& sentence = bodies[pick(bodies.size())];
    std::vector<Symbol> seq;
    for (Symbol w : sentence) seq.push_back(t.vocab.map_word(w));
    seq.push_back(sym::sentence_end());
    WordParsePrefix p = WordParsePrefix::initial();
    std::size_t k = 0;
    while (p.phase() != WordParsePrefix::Phase::Complete) {
      if (p.phase() == WordParsePrefix::Phase::Word) {
        double total = 0.0;
        for (Symbol w : words) total += model.word_probability(p, w);
        worst = std::max(worst, std::abs(total - 1.0));
        ++word_ctx;
        p = p.predict(seq[k++]);
      } else if (p.phase() == WordParsePrefix::Phase::Tag) {
        const auto dist = model.tag_distribution(p, p.pending_word());
        double total = 0.0;
        for (const auto& [tag, pr] : dist) total += pr;
        worst = std::max(worst, std::abs(total - 1.0));
        ++tag_ctx;
        p = p.tag(dist[pick(dist.size())].first);
      } else {
        const auto dist = model.parser_distribution(p);
        double total = 0.0;
        for (const auto& [a, pr] : dist) total += pr;
        worst = std::max(worst, std::abs(total - 1.0));
        ++parser_ctx;
        const auto legal = legal_actions(p);
        const bool take_null = legal.null && pick(3) == 0;
        p = p.apply(take_null ? ParserAction::null() : dist[pick(dist.size())].first);
      }
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu word, %zu tag, %zu parser contexts, max |sum-1| %.2e", word_ctx, tag_ctx,
                parser_ctx, worst);
  return {worst <= 1e-9, buf};
}

Outcome trigram_equivalence() {
  const auto& t = toy();
  const Symbol merged = s("X");
  auto flat = [&](const std::vector<HeadedTree>& bodies, const Vocabularies* vocab) {
    std::vector<HeadedTree> out;
    for (const auto& b : bodies) {
      std::vector<HeadedTree> forest = flat_leaves(b, merged);
      if (vocab)
        for (auto& leaf : forest) leaf = map_words(leaf, *vocab);
      out.push_back(make_complete_parse(std::move(forest)));
    }
    return out;
  };
  const Vocabularies vocab = Vocabularies::build(flat(t.train, nullptr), 10000);
  TrainingOptions options;
  options.word_schema = ContextSchema::headwords_only();
  options.constraints.null_only = true;
  const TrainingState state = initial_training(flat(t.train, &vocab), flat(t.check, &vocab), vocab, options);
  const StructuredModel model = state.structured();
  const auto traces = trace_corpus(&model, &state.trigram, vocab, sentences(t.test), {}, jobs());
  double worst = 0.0;
  std::size_t tokens = 0;
  for (const auto& tr : traces)
    for (std::size_t i = 0; i < tr.tokens; ++i, ++tokens) worst = std::max(worst, std::abs(tr.l2r[i] - tr.trigram[i]));
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu test tokens, %zu free labels, max |dlogp| %.3e", tokens,
                vocab.free_labels().size(), worst);
  return {tokens > 0 && worst <= 1e-6, buf};
}

Outcome lambda_ascent() {
  const auto& t = toy();
  InitialReport report;
  initial_training(completed(t.train, t.vocab), completed(t.check, t.vocab), t.vocab, {}, &report);
  bool ok = true;
  std::string detail;
  for (auto [name, fit] : {std::pair{"word", &report.word}, std::pair{"tagger", &report.tagger},
                           std::pair{"parser", &report.parser}, std::pair{"trigram", &report.trigram}}) {
    for (std::size_t i = 1; i < fit->log_likelihood.size(); ++i)
      if (fit->log_likelihood[i] < fit->log_likelihood[i - 1]) ok = false;
    if (!fit->converged || fit->iterations > 100) ok = false;
    detail += std::string(detail.empty() ? "" : ", ") + name + " " + std::to_string(fit->iterations) + " it";
  }
  return {ok, detail};
}

Outcome conservation() {
  const auto& t = toy();
  const auto dev = sentences(t.train);
  IterationReport report;
  reestimation_iteration(t.e0, dev, {}, jobs(), &report);
  double worst_mass = 0.0, worst_phi = 0.0;
  for (std::size_t i = 0; i < dev.size(); ++i) {
    worst_mass = std::max(worst_mass, std::abs(report.word_mass[i] - static_cast<double>(dev[i].size() + 1)));
    worst_phi = std::max(worst_phi, std::abs(report.phi_total[i] - 1.0));
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu sentences, %zu skipped, max |mass-(n+1)| %.2e, max |sum phi-1| %.2e",
                dev.size(), report.skipped.size(), worst_mass, worst_phi);
  return {report.skipped.empty() && worst_mass <= 1e-9 && worst_phi <= 1e-9, buf};
}

// Every tag becomes T and every non-terminal L; the bracketing is kept.
HeadedTree single_type(const HeadedTree& tree) {
  HeadedTree out = tree;
  if (tree.is_leaf()) {
    out.label = out.tag = s("T");
    return out;
  }
  out.label = s("L");
  for (auto& c : out.children) c = single_type(c);
  out.tag = out.children[static_cast<std::size_t>(out.head_child)].tag;
  return out;
}

Outcome exhaustive_em() {
  const auto& t = toy();
  std::vector<HeadedTree> dev_bodies, check_bodies;
  for (const auto& b : t.train)
    if (leaf_words(b).size() <= 5) dev_bodies.push_back(single_type(b));
  for (const auto& b : t.check)
    if (leaf_words(b).size() <= 5) check_bodies.push_back(single_type(b));
  const Vocabularies vocab = Vocabularies::build(dev_bodies, 10000);
  TrainingState state = initial_training(completed(dev_bodies, vocab), completed(check_bodies, vocab), vocab);
  const auto dev = sentences(dev_bodies);
  const SearchParams params = SearchParams::exhaustive();
  std::vector<double> ppl;
  for (int i = 0; i < 3; ++i) {
    IterationReport report;
    state = reestimation_iteration(state, dev, params, jobs(), &report);
    ppl.push_back(report.dev_sum.perplexity());
  }
  ppl.push_back(sum_ppl(state.structured(), dev, params, jobs()).perplexity());
  bool ok = true;
  std::string detail = std::to_string(dev.size()) + " sentences, SUM-PPL";
  for (std::size_t i = 0; i < ppl.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, " E%zu %.6f", i, ppl[i]);
    detail += buf;
    if (i > 0 && ppl[i] > ppl[i - 1]) ok = false;
  }
  return {ok, detail};
}

Outcome headline() {
  const auto start = Clock::now();
  const auto& t = toy();
  const auto dev = sentences(t.train), check = sentences(t.check), test = sentences(t.test);
  const SearchParams params;
  const double dev_e0 = l2r_ppl(t.e0.structured(), dev, params, jobs()).perplexity();
  TrainingState state = t.e0;
  for (int i = 0; i < 3; ++i) state = reestimation_iteration(state, dev, params, jobs());
  const StructuredModel e3 = state.structured();
  const double dev_e3 = l2r_ppl(e3, dev, params, jobs()).perplexity();
  const double lambda = estimate_mix_lambda(trace_corpus(&e3, &state.trigram, t.vocab, check, params, jobs()));
  const auto traces = trace_corpus(&e3, &state.trigram, t.vocab, test, params, jobs());
  const double tri = make_report(traces, PplMode::Trigram).perplexity();
  const double mix = make_report(traces, PplMode::Interpolated, lambda).perplexity();
  const double slm = make_report(traces, PplMode::L2R).perplexity();
  const double secs = seconds_since(start);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "dev L2R E0 %.3f -> E3 %.3f; test trigram %.3f, SLM E3 %.3f, mix(lambda=%.2f) %.3f; %.1f s on %d "
                "threads",
                dev_e0, dev_e3, tri, slm, lambda, mix, secs, jobs());
  return {dev_e3 < dev_e0 && mix <= tri, buf};
}

struct Run {
  int code = -1;
  std::string out;
};

Run run_cli(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt";
  const std::string cmd = std::string(SLM_CLI_PATH) + " " + args + " >" + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(out)};
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "slm_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string data = " --data " + (dir / "prepared").string();
  auto must = [&](const std::string& args) {
    const Run r = run_cli(args, dir);
    if (r.code != 0) throw std::runtime_error("slm " + args + " failed: " + r.out);
    return r.out;
  };
  must("prepare" + data + " --dev " + (data_dir() / "toy/train.mrg").string() + " --check " +
       (data_dir() / "toy/check.mrg").string() + " --test " + (data_dir() / "toy/test.mrg").string());
  must("train" + data + " --model-dir " + (dir / "base").string());
  std::vector<std::string> logs;
  for (const char* run : {"a", "b", "c"}) {
    fs::copy(dir / "base", dir / run, fs::copy_options::recursive);
    const std::string j = std::string(run) == "c" ? " --jobs 4" : " --jobs 1";
    logs.push_back(must("reestimate --iterations 2" + j + data + " --model-dir " + (dir / run).string()));
  }
  bool same = logs[0] == logs[1] && logs[0] == logs[2];
  std::size_t files = 0;
  for (const char* e : {"E1", "E2"})
    for (const char* f : {"word.model", "tagger.model", "parser.model", "trigram.model", "vocab.txt", "manifest.txt"}) {
      const std::string a = read_file(dir / "a" / e / f);
      same = same && a == read_file(dir / "b" / e / f) && a == read_file(dir / "c" / e / f);
      ++files;
    }
  const std::string p1 = must("ppl --mode sum --jobs 1" + data + " --model-dir " + (dir / "a").string());
  const std::string p4 = must("ppl --mode sum --jobs 4" + data + " --model-dir " + (dir / "c").string());
  same = same && p1 == p4;
  fs::remove_all(dir);
  return {same, std::to_string(files) + " checkpoint files compared across jobs 1, 1, 4; reports " +
                    (p1 == p4 ? "identical" : "differ")};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {1, "derivation round trip", round_trip},
      {2, "exhaustive-oracle equivalence", exhaustive_oracle},
      {3, "normalization", normalization},
      {4, "trigram equivalence", trigram_equivalence},
      {5, "lambda EM ascent", lambda_ascent},
      {6, "re-estimation conservation", conservation},
      {7, "exhaustive-regime SUM-PPL monotonicity", exhaustive_em},
      {8, "scaled-down headline analogue", headline},
      {9, "determinism", determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                seconds_since(start));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
