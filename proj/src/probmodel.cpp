#include "slm/probmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

namespace slm {

Context ContextSchema::project(const Context& full) const {
  Context c;
  c.size = static_cast<std::uint8_t>(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i] >= full.size) throw ContractViolation("context schema slot outside the event context");
    c.s[i] = full.s[slots[i]];
  }
  return c;
}

// ---------------------------------------------------------------------------

CountTable::CountTable(Component component, ContextSchema schema)
    : component_(component), schema_(std::move(schema)), orders_(schema_.max_order() + 1) {}

void CountTable::accumulate(const ElementaryEvent& event, double weight) {
  accumulate(schema_.project(event.context), event.outcome, weight);
}

void CountTable::accumulate(const Context& projected, Symbol outcome, double weight) {
  if (!(weight >= 0.0)) throw ContractViolation("count weight must be nonnegative");
  if (projected.size != max_order()) throw ContractViolation("context order does not match the table");
  if (weight == 0.0) return;
  for (std::size_t n = 0; n <= max_order(); ++n) {
    Entry& e = orders_[n][projected.truncated(n)];
    e.total += weight;
    e.outcomes[outcome] += weight;
  }
}

void CountTable::add_at_order(const Context& truncated, Symbol outcome, double weight) {
  if (!(weight >= 0.0)) throw ContractViolation("count weight must be nonnegative");
  Entry& e = orders_.at(truncated.size)[truncated];
  e.total += weight;
  e.outcomes[outcome] += weight;
}

void CountTable::merge(const CountTable& other) {
  if (orders_.empty()) {
    *this = other;
    return;
  }
  if (other.orders_.empty()) return;
  if (other.component_ != component_ || !(other.schema_ == schema_))
    throw ContractViolation("merging count tables with different schemas");
  for (std::size_t n = 0; n < orders_.size(); ++n) {
    for (const auto& [ctx, src] : other.orders_[n]) {
      Entry& dst = orders_[n][ctx];
      dst.total += src.total;
      for (const auto& [y, c] : src.outcomes) dst.outcomes[y] += c;
    }
  }
}

double CountTable::count(const Context& projected, Symbol outcome) const {
  const auto& map = orders_.at(projected.size);
  auto it = map.find(projected);
  if (it == map.end()) return 0.0;
  auto jt = it->second.outcomes.find(outcome);
  return jt == it->second.outcomes.end() ? 0.0 : jt->second;
}

double CountTable::marginal(const Context& projected) const {
  const auto& map = orders_.at(projected.size);
  auto it = map.find(projected);
  return it == map.end() ? 0.0 : it->second.total;
}

double CountTable::total() const {
  if (orders_.empty()) return 0.0;
  return marginal(Context{});
}

bool CountTable::empty() const { return orders_.empty() || orders_[0].empty(); }

bool CountTable::operator==(const CountTable& other) const {
  if (component_ != other.component_ || !(schema_ == other.schema_) || orders_.size() != other.orders_.size())
    return false;
  for (std::size_t n = 0; n < orders_.size(); ++n) {
    if (orders_[n].size() != other.orders_[n].size()) return false;
    for (const auto& [ctx, e] : orders_[n]) {
      auto it = other.orders_[n].find(ctx);
      if (it == other.orders_[n].end() || it->second.total != e.total || it->second.outcomes != e.outcomes)
        return false;
    }
  }
  return true;
}

CountTable merge_counts(const CountTable& a, const CountTable& b) {
  CountTable out = a;
  out.merge(b);
  return out;
}

// ---------------------------------------------------------------------------

InterpolationWeights::InterpolationWeights(std::size_t max_order, std::vector<double> upper_bounds,
                                           double initial)
    : upper_bounds_(std::move(upper_bounds)) {
  if (!std::is_sorted(upper_bounds_.begin(), upper_bounds_.end()) ||
      (!upper_bounds_.empty() && upper_bounds_.front() <= 0.0))
    throw ConfigError("lambda bucket bounds must be positive and increasing");
  if (initial < 0.0 || initial > 1.0) throw ConfigError("lambda must lie in [0,1]");
  lambdas_.assign(max_order + 1, std::vector<double>(bucket_count(), initial));
  for (auto& row : lambdas_) row[0] = 1.0;
}

InterpolationWeights InterpolationWeights::geometric(std::size_t max_order, int doublings, double initial) {
  std::vector<double> bounds;
  for (int i = 1; i <= doublings; ++i) bounds.push_back(std::ldexp(1.0, i));
  return InterpolationWeights(max_order, std::move(bounds), initial);
}

std::size_t InterpolationWeights::bucket(double context_count) const {
  if (context_count <= 0.0) return 0;
  auto it = std::upper_bound(upper_bounds_.begin(), upper_bounds_.end(), context_count);
  return 1 + static_cast<std::size_t>(it - upper_bounds_.begin());
}

double InterpolationWeights::lambda(std::size_t order, double context_count) const {
  return lambdas_.at(order)[bucket(context_count)];
}

// ---------------------------------------------------------------------------

ComponentModel::ComponentModel(Component component, std::vector<Symbol> outcomes, CountTable counts,
                               InterpolationWeights weights)
    : component_(component),
      outcomes_(std::move(outcomes)),
      counts_(std::move(counts)),
      weights_(std::move(weights)) {
  if (outcomes_.empty()) throw ConfigError("empty outcome vocabulary");
  if (weights_.max_order() != counts_.max_order())
    throw ConfigError("interpolation weights and counts disagree on the maximum order");
  for (std::uint32_t i = 0; i < outcomes_.size(); ++i) index_of_.emplace(outcomes_[i], i);
  compile();
}

void ComponentModel::compile() {
  compiled_.assign(max_order() + 1, {});
  for (std::size_t n = 0; n <= max_order(); ++n) {
    auto& dst = compiled_[n];
    dst.reserve(counts_.order(n).size());
    for (const auto& [ctx, entry] : counts_.order(n)) {
      if (entry.total <= 0.0) continue;
      Compiled c;
      c.total = entry.total;
      c.lambda = weights_.lambda(n, entry.total);
      c.outcomes.reserve(entry.outcomes.size());
      for (const auto& [y, count] : entry.outcomes) {
        auto it = index_of_.find(y);
        if (it == index_of_.end())
          throw ConfigError(std::string(component_name(component_)) + " counts outcome '" + str(y) +
                            "' outside the outcome vocabulary");
        if (count > 0.0) c.outcomes.emplace_back(it->second, count);
      }
      std::sort(c.outcomes.begin(), c.outcomes.end());
      dst.emplace(ctx, std::move(c));
    }
  }
}

std::size_t ComponentModel::outcome_index(Symbol y) const {
  auto it = index_of_.find(y);
  if (it == index_of_.end())
    throw std::out_of_range(std::string(component_name(component_)) + ": outcome '" + str(y) +
                            "' not in vocabulary");
  return it->second;
}

const ComponentModel::Compiled* ComponentModel::lookup(const Context& projected) const {
  const auto& map = compiled_[projected.size];
  auto it = map.find(projected);
  return it == map.end() ? nullptr : &it->second;
}

double ComponentModel::probability(Symbol y, const Context& full) const {
  return probability_projected(y, schema().project(full));
}

double ComponentModel::probability_projected(Symbol y, const Context& projected) const {
  const std::uint32_t index = static_cast<std::uint32_t>(outcome_index(y));
  double p = 1.0 / static_cast<double>(outcomes_.size());
  for (std::size_t n = 0; n <= max_order(); ++n) {
    const Compiled* c = lookup(projected.truncated(n));
    if (!c) break;  // unseen here means unseen at every longer order
    auto it = std::lower_bound(c->outcomes.begin(), c->outcomes.end(), std::make_pair(index, 0.0));
    const double f = (it != c->outcomes.end() && it->first == index) ? it->second / c->total : 0.0;
    p = c->lambda * p + (1.0 - c->lambda) * f;
  }
  return p;
}

void ComponentModel::distribution(const Context& full, std::vector<double>& out) const {
  const Context projected = schema().project(full);
  out.assign(outcomes_.size(), 1.0 / static_cast<double>(outcomes_.size()));
  for (std::size_t n = 0; n <= max_order(); ++n) {
    const Compiled* c = lookup(projected.truncated(n));
    if (!c) break;
    const double lambda = c->lambda;
    if (lambda != 1.0)
      for (double& v : out) v *= lambda;
    const double scale = (1.0 - lambda) / c->total;
    for (const auto& [i, count] : c->outcomes) out[i] += scale * count;
  }
}

std::vector<Symbol> ComponentModel::seen_outcomes(const Context& projected) const {
  std::vector<Symbol> out;
  if (projected.size > max_order()) return out;
  if (const Compiled* c = lookup(projected))
    for (const auto& [i, count] : c->outcomes) out.push_back(outcomes_[i]);
  return out;
}

double ComponentModel::relative_frequency(Symbol y, const Context& projected) const {
  const double total = counts_.marginal(projected);
  return total > 0.0 ? counts_.count(projected, y) / total : 0.0;
}

// ---------------------------------------------------------------------------

namespace {

struct HeldOutEvent {
  double weight;
  std::vector<double> f;              // per order
  std::vector<std::uint32_t> bucket;  // per order, 0 = unseen context
};

std::vector<HeldOutEvent> held_out_events(const ComponentModel& model, const CountTable& check) {
  if (check.empty()) throw ConfigError("empty check counts for lambda estimation");
  if (!(check.schema() == model.schema()))
    throw ConfigError("check counts gathered with a different context schema");
  const std::size_t top = model.max_order();
  std::vector<HeldOutEvent> events;
  // Sorted for a summation order independent of hash layout.
  std::vector<std::pair<Context, const CountTable::Entry*>> contexts;
  for (const auto& [ctx, entry] : check.order(top)) contexts.emplace_back(ctx, &entry);
  std::sort(contexts.begin(), contexts.end(), [](const auto& a, const auto& b) {
    return std::lexicographical_compare(a.first.s.begin(), a.first.s.begin() + a.first.size,
                                        b.first.s.begin(), b.first.s.begin() + b.first.size);
  });
  for (const auto& [ctx, entry] : contexts) {
    std::vector<std::pair<Symbol, double>> outcomes(entry->outcomes.begin(), entry->outcomes.end());
    std::sort(outcomes.begin(), outcomes.end());
    for (const auto& [y, weight] : outcomes) {
      if (weight <= 0.0) continue;
      HeldOutEvent e;
      e.weight = weight;
      model.outcome_index(y);
      for (std::size_t n = 0; n <= top; ++n) {
        const Context cn = ctx.truncated(n);
        const double total = model.counts().marginal(cn);
        e.bucket.push_back(static_cast<std::uint32_t>(model.weights().bucket(total)));
        e.f.push_back(total > 0.0 ? model.counts().count(cn, y) / total : 0.0);
      }
      events.push_back(std::move(e));
    }
  }
  return events;
}

// Forward pass of the recursion; fills per-order P_n.
double forward(const HeldOutEvent& e, const InterpolationWeights& w, double uniform, std::vector<double>& p) {
  double prev = uniform;
  for (std::size_t n = 0; n < e.f.size(); ++n) {
    const double lambda = e.bucket[n] == 0 ? 1.0 : w.at(n, e.bucket[n]);
    prev = lambda * prev + (1.0 - lambda) * e.f[n];
    p[n] = prev;
  }
  return prev;
}

}  // namespace

namespace {

// One EM update of every bucket that receives held-out mass; returns the
// log-likelihood at the input weights.
double em_step(const std::vector<HeldOutEvent>& events, std::size_t orders, double uniform,
               const InterpolationWeights& in, InterpolationWeights& out) {
  const std::size_t buckets = in.bucket_count();
  std::vector<double> p(orders), num(orders * buckets, 0.0), den(orders * buckets, 0.0);
  double ll = 0.0;
  for (const auto& e : events) {
    const double top = forward(e, in, uniform, p);
    ll += e.weight * std::log(top);
    // Posterior mass reaching order n from above, split into the part
    // explained by f_n and the part passed down to order n-1.
    double reach = 1.0;
    for (std::size_t n = orders; n-- > 0;) {
      if (e.bucket[n] == 0) continue;
      const double lambda = in.at(n, e.bucket[n]);
      const double below = n == 0 ? uniform : p[n - 1];
      const double passed = reach * lambda * below / p[n];
      num[n * buckets + e.bucket[n]] += e.weight * passed;
      den[n * buckets + e.bucket[n]] += e.weight * reach;
      reach = passed;
    }
  }
  out = in;
  for (std::size_t n = 0; n < orders; ++n)
    for (std::size_t b = 1; b < buckets; ++b)
      if (den[n * buckets + b] > 0.0) out.at(n, b) = num[n * buckets + b] / den[n * buckets + b];
  return ll;
}

double log_likelihood(const std::vector<HeldOutEvent>& events, std::size_t orders, double uniform,
                      const InterpolationWeights& w) {
  std::vector<double> p(orders);
  double ll = 0.0;
  for (const auto& e : events) ll += e.weight * std::log(forward(e, w, uniform, p));
  return ll;
}


// Exact maximization over one bucket's lambda with the others fixed. Each
// event's top-order probability is affine in that lambda, so the objective
// is concave in it; the stationary point is found by bisection on the
// derivative.
void line_maximize(const std::vector<HeldOutEvent>& events, std::size_t orders, double uniform, double floor,
                   InterpolationWeights& w, std::size_t order, std::size_t bucket) {
  std::vector<double> p(orders);
  std::vector<std::pair<double, double>> lines;  // P_top = alpha + beta * lambda
  std::vector<double> weights;
  for (const auto& e : events) {
    if (e.bucket[order] != bucket) continue;
    const double top = forward(e, w, uniform, p);
    double scale = 1.0;  // d P_top / d P_order
    for (std::size_t m = order + 1; m < orders; ++m)
      if (e.bucket[m] != 0) scale *= w.at(m, e.bucket[m]);
    const double below = order == 0 ? uniform : p[order - 1];
    const double beta = scale * (below - e.f[order]);
    const double lambda = w.at(order, bucket);
    lines.emplace_back(top - beta * lambda, beta);
    weights.push_back(e.weight);
  }
  if (lines.empty()) return;
  auto slope = [&](double x) {
    double g = 0.0;
    for (std::size_t i = 0; i < lines.size(); ++i) g += weights[i] * lines[i].second / (lines[i].first + lines[i].second * x);
    return g;
  };
  double lo = floor, hi = 1.0;
  if (!(slope(hi) < 0.0)) {
    w.at(order, bucket) = hi;
    return;
  }
  if (!(slope(lo) > 0.0)) {
    w.at(order, bucket) = lo;
    return;
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (slope(mid) > 0.0 ? lo : hi) = mid;
  }
  w.at(order, bucket) = 0.5 * (lo + hi);
}

}  // namespace

// Each iteration: one EM update over the mixture responsibilities, then a
// sweep of exact per-bucket line maximizations. Both steps are ascent steps.
LambdaFit estimate_lambdas(const ComponentModel& model, const CountTable& check_counts,
                           const LambdaFitOptions& options) {
  const auto events = held_out_events(model, check_counts);
  const std::size_t orders = model.max_order() + 1;
  const double uniform = 1.0 / static_cast<double>(model.outcomes().size());
  double total_weight = 0.0;
  for (const auto& e : events) total_weight += e.weight;

  LambdaFit fit;
  fit.weights = model.weights();
  const std::size_t buckets = fit.weights.bucket_count();
  InterpolationWeights next;
  double ll = log_likelihood(events, orders, uniform, fit.weights);
  fit.log_likelihood.push_back(ll);
  for (int it = 0; it < options.max_iterations; ++it) {
    em_step(events, orders, uniform, fit.weights, next);
    for (std::size_t n = 0; n < orders; ++n)
      for (std::size_t b = 1; b < buckets; ++b) next.at(n, b) = std::max(next.at(n, b), options.min_lambda);
    if (log_likelihood(events, orders, uniform, next) < ll) next = fit.weights;
    for (std::size_t n = 0; n < orders; ++n)
      for (std::size_t b = 1; b < buckets; ++b) line_maximize(events, orders, uniform, options.min_lambda, next, n, b);
    const double updated = log_likelihood(events, orders, uniform, next);
    fit.iterations = it + 1;
    if (updated < ll) {
      // Rounding at a flat optimum; keep the previous point.
      fit.log_likelihood.push_back(ll);
      fit.converged = true;
      break;
    }
    fit.weights = next;
    fit.log_likelihood.push_back(updated);
    const bool done = (updated - ll) / total_weight < options.tolerance;
    ll = updated;
    if (done) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

double check_log_likelihood(const ComponentModel& model, const CountTable& check_counts) {
  double ll = 0.0;
  const std::size_t top = model.max_order();
  for (const auto& [ctx, entry] : check_counts.order(top))
    for (const auto& [y, weight] : entry.outcomes) ll += weight * std::log(model.probability_projected(y, ctx));
  return ll;
}

// ---------------------------------------------------------------------------

std::vector<Symbol> word_outcomes(const Vocabularies& vocab) {
  std::vector<Symbol> out;
  for (Symbol w : vocab.words())
    if (w != sym::sentence_begin()) out.push_back(w);
  return out;
}

std::vector<Symbol> tag_outcomes(const Vocabularies& vocab) {
  std::vector<Symbol> out;
  for (Symbol t : vocab.tags())
    if (t != sym::tag_begin()) out.push_back(t);
  return out;
}

std::vector<Symbol> parser_outcomes(const Vocabularies& vocab) {
  std::vector<Symbol> out{ParserAction::null().symbol()};
  for (Symbol l : vocab.labels()) {
    out.push_back(ParserAction::unary(l).symbol());
    out.push_back(ParserAction::left(l).symbol());
    out.push_back(ParserAction::right(l).symbol());
  }
  return out;
}

StructuredModel::StructuredModel(Vocabularies vocab, ComponentModel word, ComponentModel tagger,
                                 ComponentModel parser, ConstraintLayer constraints)
    : vocab_(std::move(vocab)),
      word_(std::move(word)),
      tagger_(std::move(tagger)),
      parser_(std::move(parser)),
      constraints_(constraints) {
  if (!(constraints_.epsilon > 0.0 && constraints_.epsilon < 1.0))
    throw ConfigError("halting floor epsilon must lie in (0,1)");
  null_index_ = static_cast<std::uint32_t>(parser_.outcome_index(ParserAction::null().symbol()));
  for (Symbol l : vocab_.free_labels()) {
    label_ops_.push_back({l, static_cast<std::uint32_t>(parser_.outcome_index(ParserAction::unary(l).symbol())),
                          static_cast<std::uint32_t>(parser_.outcome_index(ParserAction::left(l).symbol())),
                          static_cast<std::uint32_t>(parser_.outcome_index(ParserAction::right(l).symbol()))});
  }
  word_.outcome_index(sym::sentence_end());
  tagger_.outcome_index(sym::tag_end());
}

double StructuredModel::word_probability(const WordParsePrefix& prefix, Symbol word) const {
  const Context ctx = prefix.head_context();
  const double end = word_.probability(sym::sentence_end(), ctx);
  const double eps = constraints_.epsilon;
  if (end >= eps) return word_.probability(word, ctx);
  if (word == sym::sentence_end()) return eps;
  return word_.probability(word, ctx) * (1.0 - eps) / (1.0 - end);
}

std::vector<std::pair<Symbol, double>> StructuredModel::tag_distribution(const WordParsePrefix& prefix,
                                                                         Symbol word) const {
  if (word == sym::sentence_end()) return {{sym::tag_end(), 1.0}};
  thread_local std::vector<double> dense;
  tagger_.distribution(prefix.tag_context(word), dense);
  std::vector<std::pair<Symbol, double>> out;
  double total = 0.0;
  for (std::size_t i = 0; i < dense.size(); ++i) {
    const Symbol t = tagger_.outcomes()[i];
    if (t == sym::tag_end() || t == sym::tag_begin()) continue;
    out.emplace_back(t, dense[i]);
    total += dense[i];
  }
  if (out.empty()) throw ContractViolation("no legal POS tag");
  for (auto& [t, p] : out) p /= total;
  return out;
}

double StructuredModel::tag_probability(const WordParsePrefix& prefix, Symbol word, Symbol tag) const {
  if (word == sym::sentence_end()) return tag == sym::tag_end() ? 1.0 : 0.0;
  if (tag == sym::tag_end() || tag == sym::tag_begin()) return 0.0;
  const Context ctx = prefix.tag_context(word);
  thread_local std::vector<double> dense;
  tagger_.distribution(ctx, dense);
  double total = 0.0;
  for (std::size_t i = 0; i < dense.size(); ++i) {
    const Symbol t = tagger_.outcomes()[i];
    if (t != sym::tag_end() && t != sym::tag_begin()) total += dense[i];
  }
  return dense[tagger_.outcome_index(tag)] / total;
}

std::vector<Symbol> StructuredModel::tag_candidates(Symbol word) const {
  if (word == sym::sentence_end()) return {sym::tag_end()};
  Context c;
  c.size = 1;
  c.s[0] = word;
  std::vector<Symbol> seen;
  for (Symbol t : tagger_.seen_outcomes(c))
    if (t != sym::tag_end() && t != sym::tag_begin()) seen.push_back(t);
  if (!seen.empty()) return seen;
  for (Symbol t : tagger_.outcomes())
    if (t != sym::tag_end() && t != sym::tag_begin()) seen.push_back(t);
  return seen;
}

std::vector<std::pair<ParserAction, double>> StructuredModel::parser_distribution(
    const WordParsePrefix& prefix) const {
  const LegalActions legal = legal_actions(prefix);
  if (legal.forced) return {{*legal.forced, 1.0}};
  if (constraints_.null_only && legal.null) return {{ParserAction::null(), 1.0}};
  thread_local std::vector<double> dense;
  parser_.distribution(prefix.head_context(), dense);
  std::vector<std::pair<ParserAction, double>> out;
  double total = 0.0;
  auto add = [&](ParserAction a, std::uint32_t index) {
    out.emplace_back(a, dense[index]);
    total += dense[index];
  };
  if (legal.null) add(ParserAction::null(), null_index_);
  for (const auto& ops : label_ops_) {
    if (legal.unary) add(ParserAction::unary(ops.label), ops.unary);
    if (legal.adjoin) {
      add(ParserAction::left(ops.label), ops.left);
      add(ParserAction::right(ops.label), ops.right);
    }
  }
  if (out.empty()) throw ContractViolation("empty legal action set");
  for (auto& [a, p] : out) p /= total;
  return out;
}

double StructuredModel::parser_probability(const WordParsePrefix& prefix, const ParserAction& action) const {
  for (const auto& [a, p] : parser_distribution(prefix))
    if (a == action) return p;
  return 0.0;
}

double StructuredModel::masked_probability(const WordParsePrefix& prefix, const ElementaryEvent& event) const {
  switch (event.component) {
    case Component::Word: return word_probability(prefix, event.outcome);
    case Component::Tagger: return tag_probability(prefix, prefix.pending_word(), event.outcome);
    case Component::Parser: return parser_probability(prefix, ParserAction::from_symbol(event.outcome));
    case Component::Trigram: break;
  }
  throw ContractViolation("trigram events have no structured probability");
}

// ---------------------------------------------------------------------------

std::vector<ElementaryEvent> trigram_events(std::span<const Symbol> words) {
  std::vector<ElementaryEvent> events;
  Symbol w1 = sym::sentence_begin(), w2 = sym::sentence_begin();
  auto push = [&](Symbol w) {
    ElementaryEvent e;
    e.component = Component::Trigram;
    e.outcome = w;
    e.context.size = 2;
    e.context.s[0] = w1;
    e.context.s[1] = w2;
    events.push_back(e);
    w2 = w1;
    w1 = w;
  };
  for (Symbol w : words) push(w);
  push(sym::sentence_end());
  return events;
}

double trigram_probability(const ComponentModel& model, Symbol w, Symbol w1, Symbol w2) {
  Context c;
  c.size = 2;
  c.s[0] = w1;
  c.s[1] = w2;
  return model.probability(w, c);
}

// ---------------------------------------------------------------------------

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void save_model(std::ostream& out, const ComponentModel& model, double epsilon) {
  out << "slm-model 1\n";
  out << "component " << component_name(model.component()) << '\n';
  out << "schema";
  for (auto s : model.schema().slots) out << ' ' << static_cast<int>(s);
  out << '\n';
  out << "max_order " << model.max_order() << '\n';
  out << "epsilon " << format_double(epsilon) << '\n';
  std::string listing;
  for (Symbol y : model.outcomes()) listing += str(y) + '\n';
  out << "vocab_hash " << hex64(fnv1a(listing)) << '\n';
  out << "outcomes " << model.outcomes().size() << '\n' << listing;
  const auto& w = model.weights();
  out << "buckets " << w.upper_bounds().size();
  for (double b : w.upper_bounds()) out << ' ' << format_double(b);
  out << '\n';
  for (std::size_t n = 0; n <= w.max_order(); ++n) {
    out << "lambda " << n;
    for (std::size_t b = 0; b < w.bucket_count(); ++b) out << ' ' << format_double(w.at(n, b));
    out << '\n';
  }
  std::vector<std::string> lines;
  for (std::size_t n = 0; n <= model.max_order(); ++n) {
    for (const auto& [ctx, entry] : model.counts().order(n)) {
      std::string prefix = std::to_string(n);
      for (std::size_t i = 0; i < ctx.size; ++i) prefix += '\t' + str(ctx.s[i]);
      for (const auto& [y, c] : entry.outcomes) lines.push_back(prefix + '\t' + str(y) + '\t' + format_double(c));
    }
  }
  std::sort(lines.begin(), lines.end());
  out << "counts " << lines.size() << '\n';
  for (const auto& line : lines) out << line << '\n';
}

namespace {

std::string expect_line(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("model file truncated before '" + key + "'");
  if (line.compare(0, key.size() + 1, key + " ") != 0 && line != key)
    throw ConfigError("model file: expected '" + key + "', got '" + line + "'");
  return line.size() > key.size() ? line.substr(key.size() + 1) : std::string();
}

double parse_double(const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0') throw ConfigError("model file: bad number '" + text + "'");
  return v;
}

}  // namespace

ComponentModel load_model(std::istream& in, double* epsilon) {
  if (expect_line(in, "slm-model") != "1") throw ConfigError("unsupported model file version");
  const Component component = component_from_name(expect_line(in, "component"));
  ContextSchema schema;
  {
    std::istringstream fields(expect_line(in, "schema"));
    for (int s; fields >> s;) schema.slots.push_back(static_cast<std::uint8_t>(s));
  }
  const std::size_t max_order = std::stoul(expect_line(in, "max_order"));
  if (max_order != schema.max_order()) throw ConfigError("model file: schema and max_order disagree");
  const double eps = parse_double(expect_line(in, "epsilon"));
  if (epsilon) *epsilon = eps;
  const std::string vocab_hash = expect_line(in, "vocab_hash");
  const std::size_t n_outcomes = std::stoul(expect_line(in, "outcomes"));
  std::vector<Symbol> outcomes;
  std::string listing, line;
  for (std::size_t i = 0; i < n_outcomes; ++i) {
    if (!std::getline(in, line)) throw ConfigError("model file truncated in outcomes");
    listing += line + '\n';
    outcomes.push_back(intern(line));
  }
  if (hex64(fnv1a(listing)) != vocab_hash) throw ConfigError("model file: vocabulary hash mismatch");

  std::vector<double> bounds;
  {
    std::istringstream fields(expect_line(in, "buckets"));
    std::size_t n = 0;
    fields >> n;
    for (std::string b; fields >> b;) bounds.push_back(parse_double(b));
    if (bounds.size() != n) throw ConfigError("model file: bucket count mismatch");
  }
  InterpolationWeights weights(max_order, bounds);
  for (std::size_t n = 0; n <= max_order; ++n) {
    std::istringstream fields(expect_line(in, "lambda"));
    std::size_t order = 0;
    fields >> order;
    if (order != n) throw ConfigError("model file: lambda rows out of order");
    std::size_t b = 0;
    for (std::string v; fields >> v; ++b) {
      if (b >= weights.bucket_count()) throw ConfigError("model file: too many lambdas");
      weights.at(n, b) = parse_double(v);
    }
    if (b != weights.bucket_count()) throw ConfigError("model file: too few lambdas");
  }

  CountTable counts(component, schema);
  const std::size_t n_counts = std::stoul(expect_line(in, "counts"));
  for (std::size_t i = 0; i < n_counts; ++i) {
    if (!std::getline(in, line)) throw ConfigError("model file truncated in counts");
    std::vector<std::string> f;
    std::size_t begin = 0;
    while (true) {
      const auto tab = line.find('\t', begin);
      f.push_back(line.substr(begin, tab - begin));
      if (tab == std::string::npos) break;
      begin = tab + 1;
    }
    const std::size_t order = std::stoul(f.at(0));
    if (order > max_order || f.size() != order + 3) throw ConfigError("model file: malformed count line");
    Context ctx;
    ctx.size = static_cast<std::uint8_t>(order);
    for (std::size_t k = 0; k < order; ++k) ctx.s[k] = intern(f[1 + k]);
    const Symbol y = intern(f[order + 1]);
    const double c = parse_double(f[order + 2]);
    counts.add_at_order(ctx, y, c);
  }
  return ComponentModel(component, std::move(outcomes), std::move(counts), std::move(weights));
}

}  // namespace slm
