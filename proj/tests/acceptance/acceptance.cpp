// Prints one PASS/FAIL line per acceptance criterion; exits non-zero if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "generator.hpp"
#include "lc/checker.hpp"
#include "lc/eval.hpp"
#include "lc/parser.hpp"
#include "lc/transforms.hpp"
#include "properties.hpp"

namespace fs = std::filesystem;
using namespace lc;
using lc::testing::PropertyStats;

namespace {

// Thresholds.
constexpr std::size_t kCorpusSize = 13;
constexpr double kCorpusSeconds = 1.0;
constexpr std::size_t kGenerated = 200;
constexpr double kPreservationSeconds = 60.0;
constexpr std::size_t kStateSample = 50;
constexpr std::size_t kLemmaInstances = 500;
constexpr std::size_t kRoundTrips = 1000;
constexpr std::size_t kSharedEvaluations = 1;
constexpr std::size_t kNaiveEvaluations = 2;
constexpr std::uint64_t kSeed = 1000;
constexpr std::size_t kFuel = 200'000;

const fs::path kRoot = LC_SOURCE_DIR;

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

struct Line {
  bool pass;
  std::string name;
  std::string detail;
};

// Well-typed generated closed programs; the rare rejected one is skipped and
// replaced so exactly `n` programs come back.
std::vector<SourceProgram> generated_programs(std::size_t n) {
  std::vector<SourceProgram> out;
  for (std::uint64_t seed = kSeed; out.size() < n; ++seed) {
    testing::TypedGenerator g(seed, {4, 3});
    SourceProgram p = g.closed_program();
    if (check_program(p).ok()) out.push_back(std::move(p));
  }
  return out;
}

std::vector<SourceProgram> accepted_files(const fs::path& dir) {
  std::vector<SourceProgram> out;
  for (const auto& f : testing::load_corpus(dir)) {
    SourceProgram p = parse_program(f.text);
    if (check_program(p).ok()) out.push_back(std::move(p));
  }
  return out;
}

Line corpus_classification() {
  auto start = std::chrono::steady_clock::now();
  auto files = testing::load_corpus(kRoot / "corpus");
  std::size_t right = 0;
  std::string wrong;
  for (const auto& f : files) {
    CheckResult r = check_program(parse_program(f.text));
    bool ok = f.expect == "accept" ? r.ok()
                                   : !r.ok() && r.error->kind == TypeError::Kind::LinearityViolation;
    if (ok) {
      ++right;
    } else {
      wrong += " " + f.name;
    }
  }
  double secs = seconds_since(start);
  bool pass = files.size() == kCorpusSize && right == kCorpusSize && secs < kCorpusSeconds;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu/%zu classified (need %zu/%zu), %.3f s (limit %.1f s)", right, files.size(),
                kCorpusSize, kCorpusSize, secs, kCorpusSeconds);
  return {pass, "corpus classification", buf + (wrong.empty() ? "" : ";" + wrong)};
}

Line transformation_preservation(const std::vector<SourceProgram>& generated) {
  auto start = std::chrono::steady_clock::now();
  std::vector<SourceProgram> programs = accepted_files(kRoot / "corpus");
  const std::size_t corpus_programs = programs.size();
  programs.insert(programs.end(), generated.begin(), generated.end());
  std::size_t sites = 0, failures = 0;
  std::string first;
  for (const auto& p : programs) {
    for (Pass pass : all_passes()) {
      if (!is_type_preserving(pass)) continue;
      for (const auto& o : check_all_sites(p, pass)) {
        ++sites;
        if (o.verdict != TransformOutcome::Verdict::Rejected) continue;
        if (failures++ == 0) first = std::string(pass_name(pass)) + " at " + show_path(*o.path) + ": " + o.error->render();
      }
    }
  }
  double secs = seconds_since(start);
  bool pass = failures == 0 && generated.size() >= kGenerated && secs < kPreservationSeconds;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%zu corpus + %zu generated programs, %zu rewrite sites, %zu rejected (need 0), %.1f s (limit %.0f s)",
                corpus_programs, generated.size(), sites, failures, secs, kPreservationSeconds);
  return {pass, "transformation preservation", buf + (first.empty() ? "" : "; first: " + first)};
}

TransformOutcome::Verdict reverse_swap(const std::string& text) {
  SourceProgram p = parse_program(text);
  auto outcomes = preservation_check(p, {PipelineStep{Pass::ReverseBinderSwap, std::nullopt}});
  return outcomes.empty() ? TransformOutcome::Verdict::NotApplicable : outcomes.back().verdict;
}

Line reverse_binder_swap() {
  auto linear = reverse_swap("data Unit = U;\nassume x :1 Unit;\ncase x of z { _ => z }");
  auto shared = reverse_swap("data Unit = U;\nassume x :w Unit;\ncase x of z { _ => z }");
  bool pass = linear == TransformOutcome::Verdict::Rejected && shared == TransformOutcome::Verdict::Preserved;
  return {pass, "reverse binder swap",
          "linear scrutinee " + to_string(linear) + " (need Rejected), unrestricted scrutinee " + to_string(shared) +
              " (need Preserved)"};
}

Line progress_preservation(const std::vector<PreparedProgram>& prepared) {
  std::size_t stuck = 0, fuel = 0, checked = 0, states = 0, state_failures = 0;
  std::string first;
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    const auto& p = prepared[i];
    EvalOptions opts;
    opts.sigs = &p.sigs;
    opts.fuel = kFuel;
    opts.readback = false;
    opts.assert_states = i < kStateSample;
    opts.expected_type = p.ty;
    EvalReport r = evaluate(p.main, opts);
    if (const auto* s = std::get_if<Stuck>(&r.outcome)) {
      if (stuck++ == 0) first = "stuck: " + to_string(s->reason) + " at " + s->name;
    }
    if (std::holds_alternative<FuelExhausted>(r.outcome)) ++fuel;
    if (opts.assert_states) {
      ++checked;
      states += r.states_checked;
      if (r.state_failures > 0 && state_failures++ == 0 && first.empty()) first = r.first_state_failure;
    }
  }
  bool pass = prepared.size() >= kGenerated && stuck == 0 && checked >= kStateSample && state_failures == 0;
  char buf[220];
  std::snprintf(buf, sizeof buf,
                "%zu programs, %zu stuck (need 0), %zu out of fuel; %zu-program sample re-checked %zu states, %zu failed (need 0)",
                prepared.size(), stuck, fuel, checked, states, state_failures);
  return {pass, "progress and preservation", buf + (first.empty() ? "" : "; first: " + first)};
}

Line bisimulation(const std::vector<PreparedProgram>& prepared) {
  std::vector<PreparedProgram> all;
  for (const auto& p : accepted_files(kRoot / "demos")) all.push_back(prepare_for_eval(p));
  const std::size_t demos = all.size();
  all.insert(all.end(), prepared.begin(), prepared.end());
  std::size_t compared = 0, mismatches = 0;
  std::string first;
  for (const auto& p : all) {
    DiffReport d = differential_run(p, kFuel);
    if (d.natural_fuel && d.instrumented_fuel) continue;  // not terminating within fuel
    ++compared;
    if (!d.agree && mismatches++ == 0) first = d.message;
  }
  bool pass = mismatches == 0 && compared >= kGenerated;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu demo + %zu generated programs, %zu terminating compared, %zu mismatches (need 0)",
                demos, prepared.size(), compared, mismatches);
  return {pass, "natural/instrumented bisimulation", buf + (first.empty() ? "" : "; first: " + first)};
}

Line lemmas() {
  struct Named {
    const char* name;
    PropertyStats stats;
  };
  std::vector<Named> results = {
      {"linear->delta", testing::lemma_linear_delta(kSeed, kLemmaInstances)},
      {"delta->linear", testing::lemma_delta_linear(kSeed, kLemmaInstances)},
      {"omega<->delta(empty)", testing::lemma_omega_delta(kSeed, kLemmaInstances)},
      {"irrelevance", testing::lemma_irrelevance(kSeed, kLemmaInstances)},
  };
  bool pass = true;
  std::string detail, first;
  for (const auto& r : results) {
    pass = pass && r.stats.instances >= kLemmaInstances && r.stats.failures == 0;
    detail += std::string(detail.empty() ? "" : ", ") + r.name + " " + std::to_string(r.stats.failures) + "/" +
              std::to_string(r.stats.instances);
    if (r.stats.checks > 0) detail += " over " + std::to_string(r.stats.checks) + " partitions";
    if (first.empty() && r.stats.failures > 0) first = r.stats.first_failure;
  }
  return {pass, "lemma conversions",
          "failures/instances: " + detail + " (need 0 failures, >= " + std::to_string(kLemmaInstances) + " each)" +
              (first.empty() ? "" : "; first: " + first)};
}

std::size_t shared_rhs_entries(const PreparedProgram& p, Semantics s) {
  EvalOptions opts;
  opts.sigs = &p.sigs;
  opts.semantics = s;
  EvalReport r = evaluate(p.main, opts);
  auto it = r.rhs_entries.find("shared");
  return it == r.rhs_entries.end() ? 0 : it->second;
}

Line sharing() {
  SourceProgram p = parse_program(testing::read_text(kRoot / "demos" / "sharing.lc"));
  PreparedProgram prepared = prepare_for_eval(p);
  std::size_t natural = shared_rhs_entries(prepared, Semantics::Natural);
  std::size_t instrumented = shared_rhs_entries(prepared, Semantics::Instrumented);
  std::size_t by_name = testing::call_by_name_rhs_evaluations(p, "shared");
  bool pass = natural == kSharedEvaluations && instrumented == kSharedEvaluations && by_name == kNaiveEvaluations;
  return {pass, "sharing observability",
          "shared right-hand side evaluated " + std::to_string(natural) + " (natural) and " +
              std::to_string(instrumented) + " (instrumented) time(s), need " + std::to_string(kSharedEvaluations) +
              "; substitution oracle " + std::to_string(by_name) + ", need " + std::to_string(kNaiveEvaluations)};
}

Line round_trip() {
  PropertyStats s = testing::parser_round_trip(kSeed, kRoundTrips);
  bool pass = s.instances >= kRoundTrips && s.failures == 0;
  return {pass, "parser round trip",
          std::to_string(s.instances) + " programs, " + std::to_string(s.failures) + " failures (need 0)" +
              (s.first_failure.empty() ? "" : "; first: " + s.first_failure)};
}

}  // namespace

int main() {
  std::vector<SourceProgram> generated = generated_programs(kGenerated);
  std::vector<PreparedProgram> prepared;
  for (const auto& p : generated) prepared.push_back(prepare_for_eval(p));

  std::vector<std::function<Line()>> criteria = {
      corpus_classification,
      [&] { return transformation_preservation(generated); },
      reverse_binder_swap,
      [&] { return progress_preservation(prepared); },
      [&] { return bisimulation(prepared); },
      lemmas,
      sharing,
      round_trip,
  };
  int failed = 0;
  for (const auto& criterion : criteria) {
    Line line;
    try {
      line = criterion();
    } catch (const std::exception& e) {
      line = {false, "criterion raised", e.what()};
    }
    std::cout << (line.pass ? "PASS " : "FAIL ") << line.name << ": " << line.detail << std::endl;
    failed += line.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
