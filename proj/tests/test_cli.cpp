#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

#include "doctest.h"
#include "support.hpp"

using namespace slmtest;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

const fs::path& work() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "slm_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    // Small slices of the toy treebank keep the runs short.
    auto head = [&](const char* name, std::size_t n) {
      std::istringstream in(read_file(data_dir() / "toy" / (std::string(name) + ".mrg")));
      std::ofstream out(d / (std::string(name) + ".mrg"));
      std::string line;
      for (std::size_t i = 0; i < n && std::getline(in, line); ++i) out << line << '\n';
    };
    head("train", 150);
    head("check", 40);
    head("test", 30);
    return d;
  }();
  return dir;
}

Run run_cli(const std::string& args) {
  const fs::path out = work() / "stdout.txt", err = work() / "stderr.txt";
  const std::string cmd = std::string(SLM_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

std::string prepare_args(const fs::path& data) {
  const fs::path w = work();
  return "prepare --data " + data.string() + " --dev " + (w / "train.mrg").string() + " --check " +
         (w / "check.mrg").string() + " --test " + (w / "test.mrg").string() + " --head-rules " +
         (data_dir() / "rules/heads.rules").string() + " --bin-rules " + (data_dir() / "rules/binarize.rules").string();
}

// Prepared data and an E0 checkpoint shared by the tests below.
struct Fixture {
  fs::path data, model;
};

const Fixture& trained() {
  static const Fixture f = [] {
    Fixture f{work() / "prepared", work() / "model"};
    REQUIRE(run_cli(prepare_args(f.data)).code == 0);
    REQUIRE(run_cli("train --data " + f.data.string() + " --model-dir " + f.model.string()).code == 0);
    return f;
  }();
  return f;
}

std::string common(const Fixture& f) { return " --data " + f.data.string() + " --model-dir " + f.model.string(); }

PplReport machine(const Run& r) {
  std::istringstream in(r.out);
  return PplReport::parse_machine(in);
}

}  // namespace

TEST_CASE("cli: usage errors exit with 2") {
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("frobnicate").code == 2);
  CHECK(run_cli("--help").code == 0);
  const Run missing = run_cli(prepare_args(work() / "x") + " --head-rules /nonexistent/heads.rules");
  CHECK(missing.code == 2);
  CHECK(missing.err.find("heads.rules") != std::string::npos);
  CHECK(run_cli("prepare --data " + (work() / "y").string() + " --dev " + (work() / "train.mrg").string()).code == 2);
  const Fixture& f = trained();
  CHECK(run_cli("ppl --mode bogus" + common(f)).code == 2);
  CHECK(run_cli("ppl --mode interpolated --lambda 1.5" + common(f)).code == 2);
  CHECK(run_cli("ppl --stack-depth 0" + common(f)).code == 2);
  CHECK(run_cli("parse" + common(f)).code == 2);
  CHECK(run_cli("ppl --data " + f.data.string() + " --model-dir " + (work() / "nomodel").string()).code == 2);
}

TEST_CASE("cli: malformed treebank reports the file") {
  const fs::path bad = work() / "bad.mrg";
  std::ofstream(bad) << "( (S (NP (NN dog)) (VP (VBD ran))\n";
  const Run r = run_cli("prepare --data " + (work() / "z").string() + " --dev " + bad.string() + " --check " +
                    bad.string());
  CHECK(r.code == 2);
  CHECK(r.err.find("bad.mrg") != std::string::npos);
}

TEST_CASE("cli: prepare is deterministic") {
  const Fixture& f = trained();
  const fs::path again = work() / "prepared_again";
  REQUIRE(run_cli(prepare_args(again)).code == 0);
  for (const char* name : {"dev.headed", "check.headed", "test.headed", "vocab.txt", "manifest.txt"})
    CHECK(read_file(f.data / name) == read_file(again / name));
  CHECK(read_file(f.data / "manifest.txt").find("randomness=none") != std::string::npos);
  CHECK(read_headed_treebank(read_file(f.data / "dev.headed")).size() == 150);
}

TEST_CASE("cli: ppl matches the library") {
  const Fixture& f = trained();
  const TrainingState e0 = load_state(f.model / "E0", 0);
  std::vector<Sentence> test;
  for (const auto& t : read_treebank(read_file(work() / "test.mrg"))) {
    Sentence s;
    for (const auto& w : leaf_words(t)) s.push_back(intern(w));
    test.push_back(s);
  }
  const Run tri = run_cli("ppl --mode trigram --machine" + common(f));
  REQUIRE(tri.code == 0);
  const PplReport lib = trigram_ppl(e0.trigram, e0.vocab, test);
  const PplReport cli = machine(tri);
  CHECK(cli.logprob == doctest::Approx(lib.logprob).epsilon(1e-12));
  CHECK(cli.tokens == lib.tokens);
  CHECK(cli.oov == lib.oov);

  const Run inter = run_cli("ppl --mode interpolated --lambda 1 --machine" + common(f));
  REQUIRE(inter.code == 0);
  CHECK(machine(inter).logprob == doctest::Approx(cli.logprob).epsilon(1e-12));

  const Run l2r = run_cli("ppl --mode l2r --machine --jobs 3" + common(f));
  REQUIRE(l2r.code == 0);
  CHECK(machine(l2r).logprob == doctest::Approx(l2r_ppl(e0.structured(), test, {}).logprob).epsilon(1e-12));

  const Run estimated = run_cli("ppl --mode interpolated --machine" + common(f));
  REQUIRE(estimated.code == 0);
  CHECK(machine(estimated).lambda >= 0.0);
  CHECK(machine(estimated).lambda <= 1.0);

  const Run table = run_cli("ppl --mode viterbi" + common(f));
  REQUIRE(table.code == 0);
  CHECK(table.out.find("non-causal") != std::string::npos);
}

TEST_CASE("cli: parse") {
  const Fixture& f = trained();
  const Run one = run_cli("parse --nbest 1 --sentence 'the dog barks .'" + common(f));
  REQUIRE(one.code == 0);
  CHECK(std::count(one.out.begin(), one.out.end(), '\n') == 1);
  const Run many = run_cli("parse --sentence dogs" + common(f));
  REQUIRE(many.code == 0);
  std::istringstream in(many.out);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    REQUIRE(tab != std::string::npos);
    CHECK(std::stod(line.substr(0, tab)) < 0.0);
    const auto trees = read_headed_treebank(line.substr(tab + 1));
    REQUIRE(trees.size() == 1);
    CHECK(parse_body(trees[0]).size() >= 1);
    ++n;
  }
  CHECK(n >= 1);
}

TEST_CASE("cli: config file with flag override") {
  const Fixture& f = trained();
  const fs::path cfg = work() / "run.cfg";
  std::ofstream(cfg) << "nbest=1\nlogprob-threshold-nats=100\ndata=" << f.data.string() << "\nmodel-dir=" << f.model.string() << "\n";
  const Run a = run_cli("--config " + cfg.string() + " parse --sentence 'the dog barks .'");
  REQUIRE(a.code == 0);
  CHECK(std::count(a.out.begin(), a.out.end(), '\n') == 1);
  const Run b = run_cli("--config " + cfg.string() + " --nbest 3 --logprob-threshold-nats 100 parse --sentence 'the dog barks .'");
  REQUIRE(b.code == 0);
  CHECK(std::count(b.out.begin(), b.out.end(), '\n') == 3);
}

TEST_CASE("cli: reestimate checkpoints, resumes and is deterministic") {
  const Fixture& f = trained();
  const fs::path model = work() / "model_re";
  fs::remove_all(model);
  fs::copy(f.model, model, fs::copy_options::recursive);
  const std::string args = " --data " + f.data.string() + " --model-dir " + model.string();

  REQUIRE(run_cli("reestimate --iterations 0" + args).code == 0);
  CHECK_FALSE(fs::exists(model / "E1"));

  const Run r = run_cli("reestimate --iterations 2" + args);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("E0: dev L2R-PPL") != std::string::npos);
  for (const char* e : {"E1", "E2"})
    for (const char* file : {"word.model", "tagger.model", "parser.model", "trigram.model", "vocab.txt", "manifest.txt"})
      CHECK(fs::exists(model / e / file));
  const std::string e2_word = read_file(model / "E2" / "word.model");
  const std::string e2_manifest = read_file(model / "E2" / "manifest.txt");

  // An interrupted iteration leaves no manifest; the rerun redoes it.
  fs::remove(model / "E2" / "manifest.txt");
  fs::remove(model / "E2" / "parser.model");
  const Run resumed = run_cli("reestimate --iterations 2" + args);
  REQUIRE(resumed.code == 0);
  CHECK(resumed.out.find("resuming from E1") != std::string::npos);
  CHECK(read_file(model / "E2" / "word.model") == e2_word);
  CHECK(read_file(model / "E2" / "manifest.txt") == e2_manifest);

  // Same checkpoints with four workers.
  const fs::path par = work() / "model_par";
  fs::remove_all(par);
  fs::copy(f.model, par, fs::copy_options::recursive);
  REQUIRE(run_cli("reestimate --iterations 2 --jobs 4 --data " + f.data.string() + " --model-dir " + par.string()).code ==
          0);
  for (const char* file : {"word.model", "tagger.model", "parser.model", "trigram.model", "vocab.txt", "manifest.txt"})
    CHECK(read_file(model / "E2" / file) == read_file(par / "E2" / file));

  const Run at1 = run_cli("ppl --mode l2r --machine --iteration 1" + args);
  const Run at2 = run_cli("ppl --mode l2r --machine" + args);
  REQUIRE(at1.code == 0);
  REQUIRE(at2.code == 0);
  CHECK(machine(at1).logprob != machine(at2).logprob);
}
