// Deterministic toy treebank generator. A small PCFG in the Penn style
// (function tags, traces, n-ary rules) where the subject's head noun selects
// the main verb's class and number across relative clauses and PPs.
//
//   toygen --seed N --words W > out.mrg

#include <cstdint>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"

namespace {

struct Noun {
  std::string sg, pl;
  int cls;
};
struct Verb {
  std::string sg, pl, past;
  int cls;
  bool transitive;
};

// Classes: 0 animal, 1 person, 2 machine.
const std::vector<Noun> kNouns = {
    {"dog", "dogs", 0},         {"cat", "cats", 0},         {"horse", "horses", 0},   {"bird", "birds", 0},
    {"teacher", "teachers", 1}, {"lawyer", "lawyers", 1},   {"farmer", "farmers", 1}, {"student", "students", 1},
    {"engine", "engines", 2},   {"printer", "printers", 2}, {"radio", "radios", 2},   {"pump", "pumps", 2},
};
const std::vector<Verb> kVerbs = {
    {"barks", "bark", "barked", 0, false},     {"sleeps", "sleep", "slept", 0, false},
    {"chases", "chase", "chased", 0, true},    {"bites", "bite", "bit", 0, true},
    {"writes", "write", "wrote", 1, true},     {"argues", "argue", "argued", 1, false},
    {"reads", "read", "read", 1, true},        {"teaches", "teach", "taught", 1, true},
    {"hums", "hum", "hummed", 2, false},       {"breaks", "break", "broke", 2, false},
    {"prints", "print", "printed", 2, true},   {"drains", "drain", "drained", 2, true},
};
const std::vector<std::vector<std::string>> kObjects = {
    {"ball", "bone", "toy", "stick"}, {"letter", "book", "report", "poem"}, {"page", "tank", "signal", "file"}};
const std::vector<std::string> kDets = {"the", "a", "this", "every"};
const std::vector<std::string> kPlDets = {"the", "some", "these", "many"};
const std::vector<std::string> kAdjs = {"old", "small", "red", "quiet", "new", "busy"};
const std::vector<std::string> kPreps = {"near", "with", "behind", "under"};
const std::vector<std::string> kPlaces = {"house", "garden", "office", "station", "river"};
const std::vector<std::string> kAdvs = {"often", "rarely", "quickly"};

class Gen {
public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::string sentence(int& words) {
    words = 0;
    const Noun& subj = pick(kNouns);
    const bool plural = coin(0.35);
    std::string np = subject_np(subj, plural, words);
    std::string vp = verb_phrase(subj.cls, plural, words);
    ++words;
    return "( (S " + np + " " + vp + " (. .)) )";
  }

private:
  std::mt19937_64 rng_;

  std::size_t below(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
  bool coin(double p) { return static_cast<double>(rng_() % 1000000) < p * 1000000.0; }
  template <class T>
  const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }

  std::string leaf(const std::string& tag, const std::string& word, int& words) {
    ++words;
    return "(" + tag + " " + word + ")";
  }

  std::string base_np(const std::string& head, bool plural, int& words) {
    std::string out = "(NP " + leaf("DT", plural ? pick(kPlDets) : pick(kDets), words);
    if (coin(0.3)) out += " " + leaf("JJ", pick(kAdjs), words);
    if (coin(0.1)) out += " " + leaf("JJ", pick(kAdjs), words);
    return out + " " + leaf(plural ? "NNS" : "NN", head, words) + ")";
  }

  std::string regular_np(const std::string& sg, bool plural, int& words) {
    return base_np(plural ? sg + "s" : sg, plural, words);
  }

  std::string place_pp(const char* label, int& words) {
    return std::string("(") + label + " " + leaf("IN", pick(kPreps), words) + " " +
           regular_np(pick(kPlaces), coin(0.2), words) + ")";
  }

  // Subject with optional PP or relative clause between head and verb.
  std::string subject_np(const Noun& n, bool plural, int& words) {
    const std::string head = base_np(plural ? n.pl : n.sg, plural, words);
    const double r = static_cast<double>(below(100)) / 100.0;
    if (r < 0.3) return "(NP-SBJ " + head + " " + place_pp("PP-LOC", words) + ")";
    if (r < 0.55) return "(NP-SBJ " + head + " " + relative(words) + ")";
    return "(NP-SBJ" + head.substr(3);
  }

  // that/who + trace subject + an unrelated verb phrase.
  std::string relative(int& words) {
    const Noun& other = pick(kNouns);
    const bool plural = coin(0.4);
    std::string vp = "(VP " + leaf("VBD", pick(kVerbs).past, words);
    if (coin(0.6)) vp += " " + base_np(plural ? other.pl : other.sg, plural, words);
    vp += ")";
    return "(SBAR (WHNP-1 " + leaf("WDT", coin(0.5) ? "that" : "which", words) +
           ") (S (NP-SBJ (-NONE- *T*-1)) " + vp + "))";
  }

  std::string verb_phrase(int cls, bool plural, int& words) {
    std::vector<const Verb*> options;
    for (const auto& v : kVerbs)
      if (v.cls == cls) options.push_back(&v);
    const Verb& v = *options[below(options.size())];
    std::string out = "(VP ";
    if (coin(0.15)) out += "(ADVP " + leaf("RB", pick(kAdvs), words) + ") ";
    out += leaf(plural ? "VBP" : "VBZ", plural ? v.pl : v.sg, words);
    if (v.transitive) out += " " + regular_np(pick(kObjects[cls]), coin(0.3), words);
    if (coin(0.3)) out += " " + place_pp("PP-LOC", words);
    return out + ")";
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"toy treebank generator"};
  std::uint64_t seed = 1;
  int target = 10000;
  app.add_option("--seed", seed, "random seed");
  app.add_option("--words", target, "approximate corpus size in words")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  Gen gen(seed);
  int total = 0;
  while (total < target) {
    int words = 0;
    std::cout << gen.sentence(words) << '\n';
    total += words;
  }
  return 0;
}
