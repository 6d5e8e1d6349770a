#include "slm/evalppl.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "slm/parallel.hpp"

namespace slm {

const char* mode_name(PplMode mode) {
  switch (mode) {
    case PplMode::L2R: return "l2r";
    case PplMode::Sum: return "sum";
    case PplMode::Viterbi: return "viterbi";
    case PplMode::Trigram: return "trigram";
    case PplMode::Interpolated: return "interpolated";
  }
  return "?";
}

PplMode mode_from_name(const std::string& name) {
  for (PplMode m : {PplMode::L2R, PplMode::Sum, PplMode::Viterbi, PplMode::Trigram, PplMode::Interpolated})
    if (name == mode_name(m)) return m;
  throw ConfigError("unknown perplexity mode '" + name + "'");
}

double PplReport::perplexity() const {
  if (tokens == 0) throw ContractViolation("perplexity of an empty corpus");
  return std::exp(-logprob / static_cast<double>(tokens));
}

void PplReport::print_table(std::ostream& out) const {
  char buf[64];
  auto row = [&](const char* key, const std::string& value) {
    std::snprintf(buf, sizeof buf, "%-14s", key);
    out << buf << value << '\n';
  };
  row("metric", metric + (causal ? "" : " (non-causal diagnostic)"));
  if (metric == mode_name(PplMode::Interpolated)) row("lambda", format_double(lambda));
  row("sentences", std::to_string(sentences));
  row("tokens", std::to_string(tokens));
  row("oov", std::to_string(oov) + " (scored as <unk>)");
  std::snprintf(buf, sizeof buf, "%.4f", logprob);
  row("logprob_nats", buf);
  std::snprintf(buf, sizeof buf, "%.2f", perplexity());
  row("perplexity", buf);
}

void PplReport::print_machine(std::ostream& out) const {
  out << "metric\t" << metric << '\n';
  out << "causal\t" << (causal ? 1 : 0) << '\n';
  out << "lambda\t" << format_double(lambda) << '\n';
  out << "sentences\t" << sentences << '\n';
  out << "tokens\t" << tokens << '\n';
  out << "oov\t" << oov << '\n';
  out << "logprob\t" << format_double(logprob) << '\n';
  out << "perplexity\t" << format_double(perplexity()) << '\n';
  for (std::size_t i = 0; i < per_sentence.size(); ++i)
    out << "sentence\t" << i << '\t' << per_sentence[i].tokens << '\t' << format_double(per_sentence[i].logprob)
        << '\n';
}

PplReport PplReport::parse_machine(std::istream& in) {
  PplReport r;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string key;
    std::getline(fields, key, '\t');
    if (key == "metric") fields >> r.metric;
    else if (key == "causal") { int c = 1; fields >> c; r.causal = c != 0; }
    else if (key == "lambda") fields >> r.lambda;
    else if (key == "sentences") fields >> r.sentences;
    else if (key == "tokens") fields >> r.tokens;
    else if (key == "oov") fields >> r.oov;
    else if (key == "logprob") fields >> r.logprob;
    else if (key == "perplexity") continue;  // derived
    else if (key == "sentence") {
      std::size_t index = 0;
      SentenceScore s;
      fields >> index >> s.tokens >> s.logprob;
      if (!fields || index != r.per_sentence.size()) throw std::runtime_error("malformed sentence line: " + line);
      r.per_sentence.push_back(s);
    } else {
      throw std::runtime_error("unknown report key '" + key + "'");
    }
    if (fields.fail()) throw std::runtime_error("malformed report line: " + line);
  }
  return r;
}

double l2r_word_prob(const StructuredModel& model, std::span<const HypPtr> stage, Symbol word) {
  if (stage.empty()) throw ContractViolation("l2r word probability over an empty hypothesis set");
  std::vector<double> logps;
  for (const auto& h : stage) logps.push_back(h->logp);
  const std::vector<double> rho = normalized_weights(logps);
  double p = 0.0;
  for (std::size_t i = 0; i < stage.size(); ++i) p += rho[i] * model.word_probability(stage[i]->prefix, word);
  return p;
}

SentenceTrace trace_sentence(const StructuredModel* model, const ComponentModel* trigram, const Vocabularies& vocab,
                             const Sentence& words, const SearchParams& params) {
  SentenceTrace t;
  std::vector<Symbol> mapped;
  for (Symbol w : words) {
    const Symbol m = vocab.map_word(w);
    if (m != w) ++t.oov;
    mapped.push_back(m);
  }
  t.tokens = mapped.size() + 1;

  if (model) {
    const DecodeResult r = decode(*model, mapped, params);
    t.l2r = r.l2r_logprob;
    double best = r.nbest.front()->logp, acc = 0.0;
    for (const auto& h : r.nbest) acc += std::exp(h->logp - best);
    t.sum = best + std::log(acc);

    WordParsePrefix prefix = WordParsePrefix::initial();
    for (const auto& e : r.nbest.front()->derivation().events) {
      if (e.component == Component::Word) t.viterbi.push_back(std::log(model->word_probability(prefix, e.outcome)));
      prefix = prefix.apply(e);
    }
  }
  if (trigram) {
    for (const auto& e : trigram_events(mapped))
      t.trigram.push_back(std::log(trigram_probability(*trigram, e.outcome, e.context.s[0], e.context.s[1])));
  }
  return t;
}

std::vector<SentenceTrace> trace_corpus(const StructuredModel* model, const ComponentModel* trigram,
                                        const Vocabularies& vocab, std::span<const Sentence> corpus,
                                        const SearchParams& params, int jobs) {
  std::vector<SentenceTrace> out(corpus.size());
  parallel_for(corpus.size(), jobs, [&](std::size_t i) {
    try {
      out[i] = trace_sentence(model, trigram, vocab, corpus[i], params);
    } catch (const std::exception& e) {
      throw std::runtime_error("sentence " + std::to_string(i + 1) + ": " + e.what());
    }
  });
  return out;
}

PplReport make_report(std::span<const SentenceTrace> traces, PplMode mode, double lambda) {
  if (mode == PplMode::Interpolated && !(lambda >= 0.0 && lambda <= 1.0))
    throw ConfigError("interpolation weight must lie in [0,1]");
  PplReport r;
  r.metric = mode_name(mode);
  r.causal = mode != PplMode::Viterbi;
  r.lambda = mode == PplMode::Interpolated ? lambda : 0.0;
  for (const auto& t : traces) {
    SentenceScore s;
    s.tokens = t.tokens;
    auto total = [&](const std::vector<double>& v) {
      if (v.size() != t.tokens) throw ContractViolation(std::string("missing ") + mode_name(mode) + " scores");
      double acc = 0.0;
      for (double x : v) acc += x;
      return acc;
    };
    switch (mode) {
      case PplMode::L2R: s.logprob = total(t.l2r); break;
      case PplMode::Viterbi: s.logprob = total(t.viterbi); break;
      case PplMode::Trigram: s.logprob = total(t.trigram); break;
      case PplMode::Sum: s.logprob = t.sum; break;
      case PplMode::Interpolated:
        total(t.l2r);
        total(t.trigram);
        for (std::size_t i = 0; i < t.tokens; ++i)
          s.logprob += std::log(lambda * std::exp(t.trigram[i]) + (1.0 - lambda) * std::exp(t.l2r[i]));
        break;
    }
    r.sentences += 1;
    r.tokens += s.tokens;
    r.oov += t.oov;
    r.logprob += s.logprob;
    r.per_sentence.push_back(s);
  }
  return r;
}

PplReport l2r_ppl(const StructuredModel& model, std::span<const Sentence> corpus, const SearchParams& params,
                  int jobs) {
  return make_report(trace_corpus(&model, nullptr, model.vocab(), corpus, params, jobs), PplMode::L2R);
}

PplReport sum_ppl(const StructuredModel& model, std::span<const Sentence> corpus, const SearchParams& params,
                  int jobs) {
  return make_report(trace_corpus(&model, nullptr, model.vocab(), corpus, params, jobs), PplMode::Sum);
}

PplReport viterbi_ppl_diagnostic(const StructuredModel& model, std::span<const Sentence> corpus,
                                 const SearchParams& params, int jobs) {
  return make_report(trace_corpus(&model, nullptr, model.vocab(), corpus, params, jobs), PplMode::Viterbi);
}

PplReport trigram_ppl(const ComponentModel& trigram, const Vocabularies& vocab, std::span<const Sentence> corpus) {
  return make_report(trace_corpus(nullptr, &trigram, vocab, corpus, SearchParams{}, 1), PplMode::Trigram);
}

PplReport interpolated_ppl(const StructuredModel& model, const ComponentModel& trigram,
                           std::span<const Sentence> corpus, double lambda, const SearchParams& params, int jobs) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("interpolation weight must lie in [0,1]");
  return make_report(trace_corpus(&model, &trigram, model.vocab(), corpus, params, jobs), PplMode::Interpolated,
                     lambda);
}

double estimate_mix_lambda(std::span<const SentenceTrace> traces) {
  std::vector<std::pair<double, double>> probs;  // (trigram, l2r)
  for (const auto& t : traces)
    for (std::size_t i = 0; i < t.tokens; ++i) probs.emplace_back(std::exp(t.trigram.at(i)), std::exp(t.l2r.at(i)));
  if (probs.empty()) throw ContractViolation("no held-out tokens for the interpolation weight");
  // The log-likelihood is concave in lambda; bisect on its derivative.
  auto slope = [&](double lambda) {
    double g = 0.0;
    for (const auto& [a, b] : probs) g += (a - b) / (lambda * a + (1.0 - lambda) * b);
    return g;
  };
  if (slope(0.0) <= 0.0) return 0.0;
  if (slope(1.0) >= 0.0) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (slope(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace slm
