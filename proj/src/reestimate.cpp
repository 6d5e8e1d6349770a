#include "slm/reestimate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "slm/parallel.hpp"

namespace slm {

StructuredModel TrainingState::structured() const { return StructuredModel(vocab, word, tagger, parser, constraints); }

HeadedTree complete_parse(const HeadedTree& body, const Vocabularies& vocab) {
  return make_complete_parse(map_words(body, vocab));
}

ComponentTables::ComponentTables(const TrainingOptions& options)
    : word(Component::Word, options.word_schema),
      tagger(Component::Tagger, options.tagger_schema),
      parser(Component::Parser, options.parser_schema),
      trigram(Component::Trigram, ContextSchema::trigram()) {}

void ComponentTables::add(const Derivation& d, double weight) {
  for (const auto& e : d.events) {
    switch (e.component) {
      case Component::Word: word.accumulate(e, weight); break;
      case Component::Tagger: tagger.accumulate(e, weight); break;
      case Component::Parser: parser.accumulate(e, weight); break;
      case Component::Trigram: trigram.accumulate(e, weight); break;
    }
  }
}

void ComponentTables::add_words(std::span<const Symbol> words, double weight) {
  for (const auto& e : trigram_events(words)) trigram.accumulate(e, weight);
}

namespace {

std::vector<Symbol> body_words(const Derivation& d) {
  std::vector<Symbol> out;
  for (const auto& e : d.events)
    if (e.component == Component::Word && e.outcome != sym::sentence_end()) out.push_back(e.outcome);
  return out;
}

bool in_vocabulary(const Derivation& d, const Vocabularies& vocab) {
  for (const auto& e : d.events) {
    if (e.component == Component::Tagger && e.outcome != sym::tag_end() && !vocab.has_tag(e.outcome)) return false;
    if (e.component == Component::Parser) {
      const ParserAction a = ParserAction::from_symbol(e.outcome);
      if (a.kind != ActionKind::Null && !vocab.has_label(a.label)) return false;
    }
  }
  return true;
}

ComponentModel fit(Component c, std::vector<Symbol> outcomes, const CountTable& dev, const CountTable& check,
                   const TrainingOptions& options, LambdaFit* out) {
  ComponentModel start(c, outcomes, dev, InterpolationWeights::geometric(dev.max_order(), options.doublings));
  LambdaFit result = estimate_lambdas(start, check, options.lambda_fit);
  ComponentModel model(c, std::move(outcomes), dev, result.weights);
  if (out) *out = std::move(result);
  return model;
}

}  // namespace

TrainingState initial_training(std::span<const HeadedTree> dev, std::span<const HeadedTree> check,
                               const Vocabularies& vocab, const TrainingOptions& options, InitialReport* report) {
  if (dev.empty()) throw ConfigError("empty development set");
  if (check.empty()) throw ConfigError("empty check set");
  InitialReport local;
  InitialReport& r = report ? *report : local;

  ComponentTables dev_tables(options), check_tables(options);
  for (const auto& tree : dev) {
    const Derivation d = tree_to_derivation(tree);
    dev_tables.add(d, 1.0);
    dev_tables.add_words(body_words(d), 1.0);
    ++r.dev_sentences;
  }
  for (const auto& tree : check) {
    const Derivation d = tree_to_derivation(tree);
    if (!in_vocabulary(d, vocab)) {
      ++r.check_skipped;
      continue;
    }
    check_tables.add(d, 1.0);
    check_tables.add_words(body_words(d), 1.0);
    ++r.check_sentences;
  }
  if (r.check_sentences == 0) throw ConfigError("no check sentence lies within the vocabulary");

  TrainingState s;
  s.iteration = 0;
  s.vocab = vocab;
  s.constraints = options.constraints;
  s.word = fit(Component::Word, word_outcomes(vocab), dev_tables.word, check_tables.word, options, &r.word);
  s.tagger = fit(Component::Tagger, tag_outcomes(vocab), dev_tables.tagger, check_tables.tagger, options, &r.tagger);
  s.parser = fit(Component::Parser, parser_outcomes(vocab), dev_tables.parser, check_tables.parser, options, &r.parser);
  s.trigram = fit(Component::Trigram, word_outcomes(vocab), dev_tables.trigram, check_tables.trigram, options,
                  &r.trigram);
  return s;
}

TrainingState reestimation_iteration(const TrainingState& state, std::span<const Sentence> dev,
                                     const SearchParams& params, int jobs, IterationReport* report) {
  const StructuredModel model = state.structured();

  struct Outcome {
    bool ok = false;
    std::string error;
    std::vector<std::pair<Derivation, double>> parses;
    SentenceTrace trace;
  };
  std::vector<Outcome> outcomes(dev.size());
  parallel_for(dev.size(), jobs, [&](std::size_t i) {
    Outcome& o = outcomes[i];
    try {
      std::vector<Symbol> mapped;
      for (Symbol w : dev[i]) mapped.push_back(state.vocab.map_word(w));
      const DecodeResult r = decode(model, mapped, params);
      for (const auto& wp : nbest_with_phi(r)) o.parses.emplace_back(wp.hyp->derivation(), wp.phi);
      o.trace.tokens = mapped.size() + 1;
      o.trace.l2r = r.l2r_logprob;
      double best = r.nbest.front()->logp, acc = 0.0;
      for (const auto& h : r.nbest) acc += std::exp(h->logp - best);
      o.trace.sum = best + std::log(acc);
      o.ok = true;
    } catch (const std::exception& e) {
      o.error = e.what();
    }
  });

  // Accumulated in sentence order so the result does not depend on jobs.
  TrainingOptions schemas;
  schemas.word_schema = state.word.schema();
  schemas.tagger_schema = state.tagger.schema();
  schemas.parser_schema = state.parser.schema();
  ComponentTables tables(schemas);
  IterationReport local;
  IterationReport& rep = report ? *report : local;
  rep = IterationReport{};
  rep.from = state.iteration;
  std::vector<SentenceTrace> traces;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const Outcome& o = outcomes[i];
    if (!o.ok) {
      std::cerr << "warning: skipping dev sentence " << i + 1 << ": " << o.error << '\n';
      rep.skipped.emplace_back(i, o.error);
      rep.word_mass.push_back(0.0);
      rep.phi_total.push_back(0.0);
      continue;
    }
    double mass = 0.0, phi_total = 0.0;
    for (const auto& [d, phi] : o.parses) {
      tables.add(d, phi);
      phi_total += phi;
      for (const auto& e : d.events)
        if (e.component == Component::Word) mass += phi;
    }
    rep.word_mass.push_back(mass);
    rep.phi_total.push_back(phi_total);
    traces.push_back(o.trace);
    ++rep.sentences;
  }
  if (!traces.empty()) {
    rep.dev_l2r = make_report(traces, PplMode::L2R);
    rep.dev_sum = make_report(traces, PplMode::Sum);
  }

  TrainingState next;
  next.iteration = state.iteration + 1;
  next.vocab = state.vocab;
  next.constraints = state.constraints;
  next.word = ComponentModel(Component::Word, state.word.outcomes(), std::move(tables.word), state.word.weights());
  next.tagger =
      ComponentModel(Component::Tagger, state.tagger.outcomes(), std::move(tables.tagger), state.tagger.weights());
  next.parser =
      ComponentModel(Component::Parser, state.parser.outcomes(), std::move(tables.parser), state.parser.weights());
  next.trigram = state.trigram;
  return next;
}

std::vector<NewEvent> zero_to_nonzero_report(const TrainingState& before, const TrainingState& after) {
  std::vector<NewEvent> out;
  auto scan = [&](const ComponentModel& a, const ComponentModel& b) {
    const std::size_t top = b.max_order();
    for (const auto& [ctx, entry] : b.counts().order(top))
      for (const auto& [y, c] : entry.outcomes)
        if (c > 0.0 && a.counts().count(ctx, y) == 0.0) out.push_back({b.component(), ctx, y});
  };
  scan(before.word, after.word);
  scan(before.tagger, after.tagger);
  scan(before.parser, after.parser);
  auto key = [](const NewEvent& e) {
    std::string k = component_name(e.component);
    for (std::size_t i = 0; i < e.context.size; ++i) k += '\t' + str(e.context.s[i]);
    return k + '\t' + str(e.outcome);
  };
  std::sort(out.begin(), out.end(), [&](const NewEvent& a, const NewEvent& b) { return key(a) < key(b); });
  return out;
}

void save_state(const std::filesystem::path& dir, const TrainingState& state) {
  std::filesystem::create_directories(dir);
  auto write = [&](const char* name, const ComponentModel& m) {
    std::ofstream out(dir / name, std::ios::binary);
    save_model(out, m, state.constraints.epsilon);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
  };
  write("word.model", state.word);
  write("tagger.model", state.tagger);
  write("parser.model", state.parser);
  write("trigram.model", state.trigram);
  std::ofstream vocab(dir / "vocab.txt", std::ios::binary);
  state.vocab.save(vocab);
  if (!vocab) throw std::runtime_error("cannot write " + (dir / "vocab.txt").string());
}

TrainingState load_state(const std::filesystem::path& dir, int iteration) {
  auto read = [&](const char* name, double* eps) {
    std::ifstream in(dir / name, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + (dir / name).string());
    return load_model(in, eps);
  };
  TrainingState s;
  s.iteration = iteration;
  double eps = 0.0;
  s.word = read("word.model", &eps);
  s.constraints.epsilon = eps;
  s.tagger = read("tagger.model", nullptr);
  s.parser = read("parser.model", nullptr);
  s.trigram = read("trigram.model", nullptr);
  std::ifstream vocab(dir / "vocab.txt", std::ios::binary);
  if (!vocab) throw ConfigError("cannot open " + (dir / "vocab.txt").string());
  s.vocab = Vocabularies::load(vocab);
  return s;
}

}  // namespace slm
