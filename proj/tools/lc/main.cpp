#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "lc/checker.hpp"
#include "lc/eval.hpp"
#include "lc/parser.hpp"
#include "lc/transforms.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace lc;

namespace {

enum Exit { Ok = 0, Failed = 1, ParseFailed = 2, Internal = 3, OutOfFuel = 4 };

bool tracing() {
  const char* v = std::getenv("LC_TRACE");
  return v && std::string(v) == "1";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string location(const std::string& file, const SourceProgram& p, NodeId node) {
  auto it = p.spans.find(node);
  if (it == p.spans.end()) return file;
  return file + ":" + std::to_string(it->second.line) + ":" + std::to_string(it->second.col);
}

std::string describe(const ParseError& e) {
  std::string expected;
  for (std::size_t i = 0; i < e.expected.size(); ++i) expected += (i ? ", " : "") + e.expected[i];
  return "parse error: expected " + expected + ", found " + e.found;
}

void print_trace(const std::vector<TraceRecord>& trace, const std::string& file, const SourceProgram& p) {
  for (const auto& t : trace) {
    std::cerr << t.rule << " " << location(file, p, t.node) << "  " << t.delta_in << " => " << t.delta_out << "\n";
  }
}

// check ------------------------------------------------------------------------

int cmd_check(const std::string& file) {
  SourceProgram p = parse_program(read_file(file));
  std::vector<TraceRecord> trace;
  CheckOptions opts;
  if (tracing()) opts.trace = &trace;
  CheckResult r = check_program(p, opts);
  print_trace(trace, file, p);
  if (!r.ok()) {
    std::cerr << location(file, p, r.error->node) << ": " << r.error->render() << "\n";
    if (r.error->kind != TypeError::Kind::LinearityViolation) std::cerr << "  " << r.error->message << "\n";
    return Failed;
  }
  std::cout << pretty_type(r.ty) << "\n";
  return Ok;
}

// eval -------------------------------------------------------------------------

struct EvalFlags {
  std::string semantics = "instrumented";
  std::size_t fuel = 1'000'000;
  bool assert_states = false;
  bool unchecked = false;
};

int report_outcome(const std::string& label, const EvalReport& r) {
  if (const auto* s = std::get_if<Stuck>(&r.outcome)) {
    std::cerr << label << "Stuck(" << to_string(s->reason) << ") at " << s->name << " after " << s->step << " steps\n";
    return Failed;
  }
  if (std::holds_alternative<FuelExhausted>(r.outcome)) {
    std::cerr << label << "fuel exhausted after " << r.steps << " steps\n";
    return OutOfFuel;
  }
  return Ok;
}

int cmd_eval(const std::string& file, const EvalFlags& flags) {
  SourceProgram p = parse_program(read_file(file));
  Signatures sigs(p.decls);
  ExprPtr main;
  TypePtr ty;
  if (flags.unchecked) {
    if (!p.assumptions.empty()) throw std::runtime_error("evaluation needs a closed program (found assumptions)");
    main = introduce_sharing(p.main);
  } else {
    CheckResult r = check_program(p);
    if (!r.ok()) {
      std::cerr << location(file, p, r.error->node) << ": " << r.error->render() << "\n";
      return Failed;
    }
    PreparedProgram prep = prepare_for_eval(p);
    main = prep.main;
    ty = prep.ty;
  }
  if (flags.assert_states && !ty) std::cerr << "note: --assert-states needs a checked program; skipped\n";

  std::vector<Semantics> runs;
  if (flags.semantics == "natural" || flags.semantics == "both") runs.push_back(Semantics::Natural);
  if (flags.semantics == "instrumented" || flags.semantics == "both") runs.push_back(Semantics::Instrumented);

  std::vector<EvalReport> reports;
  for (Semantics s : runs) {
    EvalOptions opts;
    opts.sigs = &sigs;
    opts.semantics = s;
    opts.fuel = flags.fuel;
    opts.assert_states = flags.assert_states && ty;
    opts.expected_type = ty;
    if (tracing()) opts.trace = [](const std::string& line) { std::cerr << line << "\n"; };
    reports.push_back(evaluate(main, opts));
  }

  int code = Ok;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::string label = runs.size() > 1 ? (runs[i] == Semantics::Natural ? "natural: " : "instrumented: ") : "";
    const EvalReport& r = reports[i];
    int c = report_outcome(label, r);
    if (c == Ok) std::cout << label << r.readback << "\n";
    if (r.state_failures) {
      std::cerr << label << r.state_failures << " of " << r.states_checked
                << " states failed to re-check; first " << r.first_state_failure << "\n";
      c = std::max(c, static_cast<int>(Failed));
    } else if (r.states_checked) {
      std::cerr << label << r.states_checked << " states re-checked\n";
    }
    // Fuel exhaustion is reported as such unless something worse happened.
    if (c == Failed || code == Ok) code = c;
  }
  if (runs.size() == 2 && code == Ok && reports[0].readback != reports[1].readback) {
    std::cerr << "mismatch: natural " << reports[0].readback << " vs instrumented " << reports[1].readback << "\n";
    code = Failed;
  }
  return code;
}

// transform --------------------------------------------------------------------

struct TransformFlags {
  std::string passes;
  std::string at;
  bool everywhere = false;
  bool verify = false;
  bool expect_reject = false;
};

std::vector<Pass> parse_passes(const std::string& list) {
  std::vector<Pass> out;
  if (list == "all") return all_passes();
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto p = pass_from_name(item);
    if (!p) throw CLI::ValidationError("--pass", "unknown pass '" + item + "'");
    out.push_back(*p);
  }
  if (out.empty()) throw CLI::ValidationError("--pass", "no pass given");
  return out;
}

int cmd_transform(const std::string& file, const TransformFlags& flags) {
  SourceProgram p = parse_program(read_file(file));
  CheckResult base = check_program(p);
  if (!base.ok()) {
    std::cerr << location(file, p, base.error->node) << ": " << base.error->render() << "\n";
    return Failed;
  }
  std::optional<Path> at;
  if (!flags.at.empty()) {
    at = parse_path(flags.at);
    if (!at) throw CLI::ValidationError("--at", "malformed path '" + flags.at + "'");
  }
  std::vector<PipelineStep> steps;
  for (Pass pass : parse_passes(flags.passes)) steps.push_back(PipelineStep{pass, at});

  auto outcomes = preservation_check(p, steps);
  SourceProgram shown = p;
  bool rejected = false;
  for (const auto& o : outcomes) {
    if (o.verdict == TransformOutcome::Verdict::Preserved || o.verdict == TransformOutcome::Verdict::Rejected) {
      shown.main = o.after;
    }
    rejected = rejected || o.verdict == TransformOutcome::Verdict::Rejected;
  }
  std::cout << pretty_print(shown);
  for (const auto& o : outcomes) {
    std::string where = o.path ? " at " + show_path(*o.path) : "";
    std::string line = "-- " + std::string(pass_name(o.pass)) + where + ": ";
    switch (o.verdict) {
      case TransformOutcome::Verdict::NotApplicable: line += "NotApplicable (" + o.note + ")"; break;
      case TransformOutcome::Verdict::GuardFailed: line += "GuardFailed (" + o.note + ")"; break;
      case TransformOutcome::Verdict::Preserved:
      case TransformOutcome::Verdict::Rejected:
        if (!flags.verify && !flags.expect_reject) {
          line += "applied (" + o.note + ")";
          break;
        }
        line += to_string(o.verdict);
        if (o.error) line += ": " + o.error->render();
        if (!o.note.empty()) line += " (" + o.note + ")";
        break;
    }
    std::cout << line << "\n";
  }
  if (flags.expect_reject) return rejected ? Ok : Failed;
  return flags.verify && rejected ? Failed : Ok;
}

// corpus -----------------------------------------------------------------------

struct CorpusEntry {
  std::string name;
  std::string expect;
  std::string actual;
  std::string error_kind;
  json pass_results = json::object();
  double ms = 0;
  bool mismatch = false;
};

std::string expected_verdict(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.rfind("--", 0) != 0) break;
    auto pos = line.find("EXPECT:");
    if (pos == std::string::npos) continue;
    std::string v = line.substr(pos + 7);
    v.erase(0, v.find_first_not_of(" \t"));
    v.erase(v.find_last_not_of(" \t\r") + 1);
    return v;
  }
  return "";
}

CorpusEntry run_entry(const fs::path& file, const std::vector<Pass>& passes) {
  auto start = std::chrono::steady_clock::now();
  CorpusEntry e;
  e.name = file.filename().string();
  try {
    std::string text = read_file(file.string());
    e.expect = expected_verdict(text);
    SourceProgram p = parse_program(text);
    CheckResult r = check_program(p);
    e.actual = r.ok() ? "accept" : "reject";
    if (!r.ok()) e.error_kind = r.error->kind_name();
    if (r.ok()) {
      for (Pass pass : passes) {
        std::size_t preserved = 0;
        std::size_t rejected = 0;
        auto outcomes = check_all_sites(p, pass);
        for (const auto& o : outcomes) {
          if (o.verdict == TransformOutcome::Verdict::Preserved) ++preserved;
          if (o.verdict == TransformOutcome::Verdict::Rejected) ++rejected;
        }
        e.pass_results[std::string(pass_name(pass))] =
            json{{"sites", outcomes.size()}, {"preserved", preserved}, {"rejected", rejected}};
        if (rejected && is_type_preserving(pass)) e.mismatch = true;
      }
    }
  } catch (const ParseError& err) {
    e.actual = "parse-error";
    e.error_kind = "ParseError";
  } catch (const std::exception& err) {
    e.actual = "internal-error";
    e.error_kind = err.what();
  }
  // A rejection only counts when it is a linearity error.
  bool verdict_ok = e.actual == e.expect && (e.actual != "reject" || e.error_kind == "LinearityViolation");
  e.mismatch = e.mismatch || !verdict_ok;
  e.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return e;
}

int cmd_corpus(const std::string& dir, const std::string& report, const std::string& passes_flag, unsigned jobs) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".lc") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    return a.filename().string() < b.filename().string();
  });
  std::vector<Pass> passes = passes_flag.empty() ? std::vector<Pass>{} : parse_passes(passes_flag);

  std::vector<CorpusEntry> entries(files.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < files.size(); i = next++) entries[i] = run_entry(files[i], passes);
  };
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (unsigned i = 0; i < std::min<std::size_t>(jobs, files.size()); ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  json programs = json::array();
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t mismatches = 0;
  for (const auto& e : entries) {
    accepted += e.actual == "accept";
    rejected += e.actual == "reject";
    mismatches += e.mismatch;
    programs.push_back(json{{"name", e.name},
                            {"expect", e.expect},
                            {"actual", e.actual},
                            {"error_kind", e.error_kind},
                            {"pass_results", e.pass_results},
                            {"ms", e.ms}});
    std::cout << (e.mismatch ? "MISMATCH " : "ok       ") << e.name << "  expect " << e.expect << ", got " << e.actual;
    if (!e.error_kind.empty()) std::cout << " (" << e.error_kind << ")";
    std::cout << "\n";
  }
  std::cout << accepted << " accepted, " << rejected << " rejected, " << mismatches << " mismatches\n";
  if (!report.empty()) {
    json doc{{"programs", programs},
             {"totals", json{{"accepted", accepted}, {"rejected", rejected}, {"mismatches", mismatches}}}};
    std::ofstream out(report);
    if (!out) throw std::runtime_error("cannot write " + report);
    out << doc.dump(2) << "\n";
  }
  return mismatches ? Failed : Ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lc: checker, evaluator and transformation driver for the linear core calculus"};
  app.require_subcommand(1);

  std::string file;
  auto* check = app.add_subcommand("check", "Type-check a program and print its type");
  check->add_option("file", file, "Program file")->required();

  EvalFlags eval_flags;
  auto* eval = app.add_subcommand("eval", "Evaluate a closed program to WHNF and print the value");
  eval->add_option("file", file, "Program file")->required();
  eval->add_option("--semantics", eval_flags.semantics, "natural, instrumented or both")
      ->check(CLI::IsMember({"natural", "instrumented", "both"}));
  eval->add_option("--fuel", eval_flags.fuel, "Step limit");
  eval->add_flag("--assert-states", eval_flags.assert_states, "Re-check every intermediate state");
  eval->add_flag("--unchecked", eval_flags.unchecked, "Skip the type checker");

  TransformFlags tr_flags;
  auto* transform = app.add_subcommand("transform", "Apply rewrites and optionally verify them");
  transform->add_option("file", file, "Program file")->required();
  transform->add_option("--pass", tr_flags.passes, "Comma-separated passes, or 'all'")->required();
  auto* at = transform->add_option("--at", tr_flags.at, "Path of the site, e.g. 1.0 ('.' is the root)");
  auto* everywhere = transform->add_flag("--everywhere", tr_flags.everywhere, "Apply at every site (default)");
  at->excludes(everywhere);
  transform->add_flag("--verify", tr_flags.verify, "Re-check the result and report Preserved/Rejected");
  transform->add_flag("--expect-reject", tr_flags.expect_reject, "Succeed only if some step is rejected");

  std::string dir;
  std::string report;
  std::string passes;
  unsigned jobs = 0;
  auto* corpus = app.add_subcommand("corpus", "Check every .lc file against its EXPECT header");
  corpus->add_option("dir", dir, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  corpus->add_option("--report", report, "Write a JSON report here");
  corpus->add_option("--passes", passes, "Also check every site of these passes ('all' or a list)");
  corpus->add_option("--jobs", jobs, "Worker threads (default: hardware concurrency)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? Ok : Internal;
  }

  try {
    if (check->parsed()) return cmd_check(file);
    if (eval->parsed()) return cmd_eval(file, eval_flags);
    if (transform->parsed()) return cmd_transform(file, tr_flags);
    if (corpus->parsed()) return cmd_corpus(dir, report, passes, jobs);
  } catch (const ParseError& e) {
    std::cerr << file << ":" << e.line << ":" << e.col << ": " << describe(e) << "\n";
    return ParseFailed;
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return Internal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Internal;
  }
  return Internal;
}
