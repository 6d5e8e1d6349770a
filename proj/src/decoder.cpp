#include "slm/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace slm {

void SearchParams::validate() const {
  if (depth < 1) throw ConfigError("stack depth must be at least 1");
  if (!(threshold >= 0.0)) throw ConfigError("log-probability threshold must be nonnegative");
  if (max_ops < 0) throw ConfigError("parser operation cap must be nonnegative");
  if (nbest < 1) throw ConfigError("nbest must be at least 1");
}

Derivation Hypothesis::derivation() const {
  Derivation d;
  for (const Hypothesis* h = this; h->parent; h = h->parent.get()) d.events.push_back(h->last);
  std::reverse(d.events.begin(), d.events.end());
  return d;
}

namespace {

std::vector<const Hypothesis*> chain(const Hypothesis& h) {
  std::vector<const Hypothesis*> out;
  for (const Hypothesis* p = &h; p->parent; p = p->parent.get()) out.push_back(p);
  std::reverse(out.begin(), out.end());
  return out;
}

// Lexicographic comparison of the serialized derivations; only reached on
// exact score ties.
bool derivation_less(const Hypothesis& a, const Hypothesis& b) {
  return a.derivation().serialize() < b.derivation().serialize();
}

HypPtr extend(const HypPtr& parent, const ElementaryEvent& event, WordParsePrefix next, double prob) {
  auto h = std::make_shared<Hypothesis>();
  h->prefix = std::move(next);
  h->logp = parent->logp + std::log(prob);
  h->position_ops = event.component == Component::Parser ? parent->position_ops + 1 : 0;
  h->parent = parent;
  h->last = event;
  return h;
}

void sort_best_first(std::vector<HypPtr>& hyps) {
  std::sort(hyps.begin(), hyps.end(), [](const HypPtr& a, const HypPtr& b) { return hypothesis_before(*a, *b); });
}

// Depth and threshold prune of one sorted stack.
void prune(std::vector<HypPtr>& hyps, std::size_t depth, double threshold) {
  if (hyps.empty()) return;
  const double best = hyps.front()->logp;
  std::size_t keep = 0;
  while (keep < hyps.size() && keep < depth && best - hyps[keep]->logp <= threshold) ++keep;
  hyps.resize(keep);
}

bool handed_back(const WordParsePrefix& prefix) {
  return prefix.phase() == WordParsePrefix::Phase::Word || prefix.phase() == WordParsePrefix::Phase::Complete;
}

}  // namespace

bool hypothesis_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.logp != b.logp) return a.logp > b.logp;
  return derivation_less(a, b);
}

DecodeResult decode(const StructuredModel& model, std::span<const Symbol> words, const SearchParams& params) {
  params.validate();
  if (words.empty()) throw ContractViolation("cannot decode an empty sentence");

  std::vector<Symbol> seq(words.begin(), words.end());
  seq.push_back(sym::sentence_end());

  std::vector<Symbol> all_tags;
  for (Symbol t : model.tagger_model().outcomes())
    if (t != sym::tag_begin() && t != sym::tag_end()) all_tags.push_back(t);

  DecodeResult result;
  auto root = std::make_shared<Hypothesis>();
  root->prefix = WordParsePrefix::initial();
  std::vector<HypPtr> current{root};
  result.stages.push_back(current);

  for (std::size_t k = 0; k < seq.size(); ++k) {
    const Symbol w = seq[k];
    const int cap = params.max_ops > 0 ? params.max_ops : 2 * static_cast<int>(k + 1) + 2;

    // Mixture weights over S_k for the causal word probability.
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& h : current) best = std::max(best, h->logp);
    double mass = 0.0, mixed = 0.0;

    std::map<int, std::vector<HypPtr>> stacks;
    for (const auto& h : current) {
      ElementaryEvent we{Component::Word, w, h->prefix.head_context()};
      const double pw = model.word_probability(h->prefix, w);
      const double rho = std::exp(h->logp - best);
      mass += rho;
      mixed += rho * pw;
      if (!(pw > 0.0)) continue;
      HypPtr hw = extend(h, we, h->prefix.predict(w), pw);

      const std::vector<Symbol> tags = w == sym::sentence_end() ? std::vector<Symbol>{sym::tag_end()}
                                       : params.restrict_tags   ? model.tag_candidates(w)
                                                                : all_tags;
      for (Symbol t : tags) {
        const double pt = model.tag_probability(hw->prefix, w, t);
        if (!(pt > 0.0)) continue;
        ElementaryEvent te{Component::Tagger, t, hw->prefix.tag_context(w)};
        HypPtr ht = extend(hw, te, hw->prefix.tag(t), pt);
        stacks[ht->prefix.parser_ops()].push_back(std::move(ht));
      }
    }
    result.l2r_logprob.push_back(std::log(mixed / mass));

    std::vector<HypPtr> next;
    while (!stacks.empty()) {
      auto node = stacks.begin();
      const int p = node->first;
      std::vector<HypPtr> stack = std::move(node->second);
      stacks.erase(node);

      sort_best_first(stack);
      prune(stack, params.depth, params.threshold);
      if (params.record_stacks) result.stacks.push_back({static_cast<int>(k + 1), p, stack});

      for (const auto& h : stack) {
        if (handed_back(h->prefix)) {
          next.push_back(h);
          continue;
        }
        const Context ctx = h->prefix.head_context();
        for (const auto& [action, prob] : model.parser_distribution(h->prefix)) {
          if (!(prob > 0.0)) continue;
          if (h->position_ops + 1 > cap && action.kind != ActionKind::Null) continue;
          ElementaryEvent pe{Component::Parser, action.symbol(), ctx};
          HypPtr child = extend(h, pe, h->prefix.apply(action), prob);
          stacks[child->prefix.parser_ops()].push_back(std::move(child));
        }
      }
    }

    if (next.empty()) throw std::runtime_error("internal error: every hypothesis was pruned at word " +
                                               std::to_string(k + 1));
    sort_best_first(next);
    prune(next, std::numeric_limits<std::size_t>::max(), params.threshold);
    result.stages.push_back(next);
    current = std::move(next);
  }

  result.nbest = current;
  if (result.nbest.size() > params.nbest) result.nbest.resize(params.nbest);
  return result;
}

std::vector<double> normalized_weights(std::span<const double> logps) {
  if (logps.empty()) throw ContractViolation("no weights to normalize");
  const double best = *std::max_element(logps.begin(), logps.end());
  std::vector<double> out;
  out.reserve(logps.size());
  double total = 0.0;
  for (double l : logps) {
    out.push_back(std::exp(l - best));
    total += out.back();
  }
  for (double& v : out) v /= total;
  return out;
}

std::vector<WeightedParse> nbest_with_phi(const DecodeResult& result) {
  std::vector<double> logps;
  for (const auto& h : result.nbest) logps.push_back(h->logp);
  const std::vector<double> phi = normalized_weights(logps);
  std::vector<WeightedParse> out;
  for (std::size_t i = 0; i < phi.size(); ++i) out.push_back({result.nbest[i], phi[i]});
  return out;
}

std::string compact_derivation(const Hypothesis& h) {
  std::string out;
  for (const Hypothesis* p : chain(h)) {
    if (!out.empty()) out += ' ';
    switch (p->last.component) {
      case Component::Word: out += "w:"; break;
      case Component::Tagger: out += "t:"; break;
      default: break;
    }
    out += str(p->last.outcome);
  }
  return out;
}

void dump_lattice(std::ostream& out, const DecodeResult& result) {
  auto line = [&](std::size_t k, const Hypothesis& h) {
    out << k << '\t' << h.prefix.parser_ops() << '\t' << format_double(h.logp) << '\t' << compact_derivation(h)
        << '\n';
  };
  if (!result.stacks.empty()) {
    for (const auto& st : result.stacks)
      for (const auto& h : st.hyps) line(static_cast<std::size_t>(st.k), *h);
    return;
  }
  for (std::size_t k = 0; k < result.stages.size(); ++k)
    for (const auto& h : result.stages[k]) line(k, *h);
}

}  // namespace slm
