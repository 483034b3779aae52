#pragma once

// Command-line front end. Every session-mutating command builds the same JSON
// body the HTTP API accepts and routes it through Service::step, so a CLI
// replay and an HTTP replay leave identical ledgers behind.
//
// Exit codes: 0 ok, 1 validation or state error, 2 storage error, 64 usage.

#include <CLI11.hpp>

#include <cctype>
#include <deque>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ghosty/api/generator.hpp"
#include "ghosty/api/http.hpp"
#include "ghosty/api/report.hpp"
#include "ghosty/api/service.hpp"
#include "ghosty/batch.hpp"
#include "ghosty/config.hpp"

namespace ghosty::api {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitStorage = 2;
inline constexpr int kExitUsage = 64;

namespace cli_detail {

inline json read_json_file(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::StorageFailure, "cannot read " + file);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::BadRequest, file + " is not valid JSON: " + e.what());
  }
}

/// Sets body[a][b]... for a dotted key.
inline void set_path(json& body, const std::string& dotted, json value) {
  json* node = &body;
  std::size_t start = 0;
  for (std::size_t dot; (dot = dotted.find('.', start)) != std::string::npos; start = dot + 1)
    node = &(*node)[dotted.substr(start, dot - start)];
  (*node)[dotted.substr(start)] = std::move(value);
}

/// Option storage for one subcommand. Values given on the command line are
/// laid over an optional raw --json body.
struct Fields {
  std::map<std::string, std::string> text;
  std::map<std::string, std::vector<std::string>> lists;
  std::map<std::string, std::vector<int>> ints;
  std::map<std::string, bool> flags;
  std::string raw;
  std::string file;

  json body() const {
    json b = json::object();
    if (!file.empty()) b = read_json_file(file);
    if (!raw.empty()) {
      try {
        b = json::parse(raw);
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::BadRequest, std::string("--json is not valid JSON: ") + e.what(), "json");
      }
    }
    if (!b.is_object()) throw Error(ErrorCode::BadRequest, "request body must be a JSON object");
    for (const auto& [k, v] : text)
      if (!v.empty()) set_path(b, k, v);
    for (const auto& [k, v] : lists)
      if (!v.empty()) set_path(b, k, v);
    for (const auto& [k, v] : ints)
      if (!v.empty()) set_path(b, k, v);
    for (const auto& [k, v] : flags)
      if (v) set_path(b, k, true);
    return b;
  }
};

}  // namespace cli_detail

class Cli {
 public:
  Cli(Environment env, std::ostream& out, std::ostream& err) : env_(std::move(env)), out_(out), err_(err) {}

  int run(std::vector<std::string> args) {
    CLI::App app{"Run GHOSTY COLLIDER and PRECOG sessions against an append-only ledger.", "ghosty"};
    app.require_subcommand(1);
    app.add_option("--store", env_.store_path, "ledger file (env GHOSTY_STORE)");
    app.add_option("--config", env_.config_path, "threshold config file (env GHOSTY_CONFIG)");
    build(app);
    try {
      std::reverse(args.begin(), args.end());
      app.parse(args);
    } catch (const CLI::CallForHelp&) {
      out_ << app.help();
      return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
      out_ << app.help("", CLI::AppFormatMode::All);
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      err_ << "usage error: " << e.what() << "\n\n" << app.help("", CLI::AppFormatMode::All);
      return kExitUsage;
    }
    if (!action_) {
      err_ << app.help("", CLI::AppFormatMode::All);
      return kExitUsage;
    }
    try {
      return action_();
    } catch (const PersistedError& e) {
      err_ << code_name(e.code()) << ": " << e.what() << field_suffix(e) << "\n";
      out_ << "session " << e.session().value("id", "") << " recorded as " << e.session().value("status", "") << "\n";
      return kExitValidation;
    } catch (const Error& e) {
      err_ << code_name(e.code()) << ": " << e.what() << field_suffix(e) << "\n";
      return is_storage_error(e.code()) ? kExitStorage : kExitValidation;
    } catch (const std::exception& e) {
      err_ << "error: " << e.what() << "\n";
      return kExitValidation;
    }
  }

 private:
  using Fields = cli_detail::Fields;

  static std::string field_suffix(const Error& e) {
    return e.field_path().empty() ? "" : " (field " + e.field_path() + ")";
  }

  Service& service() {
    if (!svc_) {
      cfg_ = env_.config();
      store_ = std::make_unique<ledger::Store>(env_.store_path, &err_);
      svc_ = std::make_unique<Service>(*store_, cfg_, env_.clock());
    }
    return *svc_;
  }

  Fields& fields() { return fields_.emplace_back(); }

  static void text(CLI::App* sub, Fields& f, const std::string& flag, const std::string& key, const std::string& help,
                   bool required = false) {
    auto* o = sub->add_option(flag, f.text[key], help);
    if (required) o->required();
  }
  static void list(CLI::App* sub, Fields& f, const std::string& flag, const std::string& key, const std::string& help) {
    sub->add_option(flag, f.lists[key], help)->delimiter(',');
  }
  static void raw_body(CLI::App* sub, Fields& f) {
    sub->add_option("--json", f.raw, "raw JSON request body; flags override its fields");
    sub->add_option("--file", f.file, "read the JSON request body from a file");
  }

  /// Adds a leaf command that applies one step to a session.
  CLI::App* step_command(CLI::App* parent, const std::string& name, const std::string& help,
                         const std::string& step_name, std::function<void(CLI::App*, Fields&)> options) {
    auto* sub = parent->add_subcommand(name, help);
    auto& f = fields();
    auto id = std::make_shared<std::string>();
    sub->add_option("session", *id, "session id")->required();
    raw_body(sub, f);
    if (options) options(sub, f);
    sub->callback([this, id, &f, step_name] {
      action_ = [this, id, &f, step_name] {
        const json res = service().step(*id, step_name, f.body());
        print_step(step_name, res);
        return kExitOk;
      };
    });
    return sub;
  }

  void print_step(const std::string& step_name, const json& res) {
    const json& session = res.at("session");
    const json& result = res.at("result");
    if (step_name == "grid" && result.contains("judgment")) {
      out_ << judgment_line(parse<precog::TimingJudgment>(result.at("judgment"))) << "\n";
    } else if (result.is_object() && !result.empty()) {
      out_ << result.dump(2) << "\n";
    }
    if (res.contains("precog_session"))
      out_ << "precog " << res["precog_session"].value("id", "") << ": " << res["precog_session"].value("status", "")
           << "\n";
    out_ << session.value("id", "") << ": " << session.value("status", session.contains("mappings") ? "integration" : "")
         << "\n";
  }

  static std::string judgment_line(const precog::TimingJudgment& j) {
    std::string overall(to_string(j.overall));
    overall[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(overall[0])));
    return overall + " (sum=" + std::to_string(j.polarity_sum) +
           ", escalation: " + (j.escalated_contrarian_required ? "required" : "not required") + ")";
  }

  void build(CLI::App& app) {
    build_session(app);
    build_collider(app);
    build_precog(app);
    build_integration(app);
    build_longitudinal(app);
    build_batch(app);
    build_misc(app);
  }

  void build_session(CLI::App& app) {
    auto* session = app.add_subcommand("session", "create, inspect and close sessions")->require_subcommand(1);

    auto* create = session->add_subcommand("new", "create a ghosty or precog session");
    auto& f = fields();
    raw_body(create, f);
    auto protocol = std::make_shared<std::string>();
    auto fragments_file = std::make_shared<std::string>();
    create->add_option("--protocol", *protocol, "ghosty | precog")->required();
    text(create, f, "--theme", "theme", "session theme");
    text(create, f, "--horizon", "horizon", "PRECOG time horizon");
    create->add_option("--fragments-file", *fragments_file, "JSON list of 3-5 fragments; starts the session");
    create->callback([this, &f, protocol, fragments_file] {
      action_ = [this, &f, protocol, fragments_file] {
        json body = f.body();
        body["protocol"] = *protocol;
        if (!fragments_file->empty()) body["fragments"] = cli_detail::read_json_file(*fragments_file);
        const json res = service().create(body);
        out_ << res.at("result").at("id").get<std::string>() << "\n";
        return kExitOk;
      };
    });

    step_command(session, "start", "run pre-flight and begin ghost extraction", "start", nullptr);
    step_command(session, "finalize", "close a session (completes GHOSTY, finalizes PRECOG)", "finalize", nullptr);

    auto* show = session->add_subcommand("show", "print the latest session snapshot");
    auto show_id = std::make_shared<std::string>();
    show->add_option("session", *show_id)->required();
    show->callback([this, show_id] {
      action_ = [this, show_id] {
        out_ << service().load(*show_id).payload.dump(2) << "\n";
        return kExitOk;
      };
    });

    auto* gates = session->add_subcommand("gates", "print gate outcomes and flags");
    auto gates_id = std::make_shared<std::string>();
    gates->add_option("session", *gates_id)->required();
    gates->callback([this, gates_id] {
      action_ = [this, gates_id] {
        out_ << service().gates(*gates_id).dump(2) << "\n";
        return kExitOk;
      };
    });
  }

  void build_collider(CLI::App& app) {
    auto* fragment = app.add_subcommand("fragment", "GHOSTY fragments")->require_subcommand(1);
    step_command(fragment, "add", "add a fragment while the session is a draft", "fragment", [](CLI::App* s, Fields& f) {
      text(s, f, "--id", "id", "fragment id (default f<N>)");
      text(s, f, "--text", "text", "fragment text");
      text(s, f, "--domain", "domain_tag", "domain tag");
      text(s, f, "--kind", "source_kind", "quantitative-data | observation | aesthetic | gut-feeling | absent-pattern | experience | constraint");
    });

    auto* ghost = app.add_subcommand("ghost", "GHOSTY ghost extraction")->require_subcommand(1);
    step_command(ghost, "set", "attach a ghost to a fragment", "ghost", [](CLI::App* s, Fields& f) {
      text(s, f, "--fragment", "fragment_id", "fragment id");
      text(s, f, "--text", "structural_description", "structural description");
      s->add_flag("--verbs", f.flags["checklist.uses_verbs"], "checklist: uses verbs");
      s->add_flag("--emotion", f.flags["checklist.includes_emotion"], "checklist: includes emotion");
      s->add_flag("--cross-domain", f.flags["checklist.cross_domain_comprehensible"], "checklist: cross-domain");
      s->add_flag("--reversible", f.flags["checklist.reversibility_pass"], "checklist: reversibility test passed");
    });

    auto* collide = app.add_subcommand("collide", "GHOSTY collision matrix")->require_subcommand(1);
    step_command(collide, "score", "score one fragment pair", "score", [](CLI::App* s, Fields& f) {
      text(s, f, "--pair", "pair", "pair as a+b, e.g. f1+f3");
      text(s, f, "--score", "score", "boring | interesting | electric");
      text(s, f, "--rationale", "rationale", "why the pair resonates");
    });
    step_command(collide, "gate", "apply the collision gate to a fully scored matrix", "gate", nullptr);

    auto* vision = app.add_subcommand("vision", "GHOSTY vision crystallization")->require_subcommand(1);
    step_command(vision, "add", "crystallize a vision from an Electric collision", "vision", [](CLI::App* s, Fields& f) {
      text(s, f, "--collision", "collision_id", "collision id, e.g. f1+f3");
      text(s, f, "--name", "name", "vision name");
      text(s, f, "--one-line", "one_line", "one-line description");
      text(s, f, "--emotion", "emotion", "emotional core");
      text(s, f, "--image", "cinematic_image", "cinematic image");
      text(s, f, "--why-now", "why_now", "why now");
      s->add_option("--ratings", f.ints["ratings"], "novelty,feasibility,resonance,timing (1-5 each)")
          ->delimiter(',')
          ->expected(4);
    });

    auto* bridge = app.add_subcommand("bridge", "GHOSTY reality bridge")->require_subcommand(1);
    step_command(bridge, "set", "attach a reality bridge to an advancing vision", "bridge", [](CLI::App* s, Fields& f) {
      text(s, f, "--vision", "vision_id", "vision id");
      text(s, f, "--mvv", "mvv", "minimum viable vision");
      s->add_option("--capability", f.lists["existing_capabilities"], "existing capability (repeatable)");
      s->add_option("--kill", f.lists["kill_conditions"], "kill condition (repeatable)");
      text(s, f, "--first-step", "first_step_24h", "first step within 24 hours");
    });
  }

  void build_precog(CLI::App& app) {
    auto* signal = app.add_subcommand("signal", "PRECOG signals")->require_subcommand(1);
    step_command(signal, "add", "record a weak signal", "signal", [](CLI::App* s, Fields& f) {
      text(s, f, "--key", "key", "signal key, e.g. S1");
      text(s, f, "--description", "description", "signal description");
      s->add_option("--evidence", f.lists["evidence"], "evidence as 'claim|source' (repeatable)");
      text(s, f, "--strength", "strength", "weak | emerging | strong");
      text(s, f, "--direction", "direction", "decelerating | stable | accelerating");
      text(s, f, "--confidence", "confidence", "verified | reported | speculative");
      text(s, f, "--source", "source_kind", "numeric | behavioral | narrative | absent");
    });

    auto* converge = app.add_subcommand("converge", "PRECOG convergence analysis")->require_subcommand(1);
    step_command(converge, "add", "record a convergence point", "convergence", [](CLI::App* s, Fields& f) {
      list(s, f, "--signals", "signal_keys", "cited signal keys, comma separated");
      text(s, f, "--hypothesis", "hypothesis", "one-sentence structural hypothesis");
      text(s, f, "--logic", "causal_logic", "causal logic");
      text(s, f, "--confidence", "confidence", "high | medium | low");
      text(s, f, "--rationale", "confidence_rationale", "confidence rationale");
    });

    auto* contrarian = app.add_subcommand("contrarian", "PRECOG contrarian view")->require_subcommand(1);
    step_command(contrarian, "set", "set the contrarian view (scenarios via --json or --file)", "contrarian",
                 [](CLI::App* s, Fields& f) {
                   text(s, f, "--overestimation", "overestimation_reason", "why the conclusion may be overestimated");
                 });

    auto* grid = app.add_subcommand("grid", "PRECOG timing grid")->require_subcommand(1);
    auto* eval = grid->add_subcommand("eval", "judge a timing grid; with a session id the judgment is recorded");
    auto& gf = fields();
    auto gid = std::make_shared<std::string>();
    eval->add_option("session", *gid, "PRECOG session id (omit for a dry evaluation)");
    raw_body(eval, gf);
    text(eval, gf, "--label", "label", "grid label, e.g. the vision name");
    text(eval, gf, "--market", "market_phase", "pre-emergence | emergence | acceleration | peak | correction | plateau");
    text(eval, gf, "--competitive", "competitive", "first-mover | fast-follower | fortifier | too-late | undefined");
    text(eval, gf, "--readiness", "readiness", "not-ready | partially-ready | ready");
    text(eval, gf, "--external", "external_window", "open | opening | closed");
    text(eval, gf, "--annotation", "annotation", "free-text annotation");
    eval->callback([this, gid, &gf] {
      action_ = [this, gid, &gf] {
        const json body = gf.body();
        if (gid->empty()) {
          const auto grid = parse<precog::TimingGrid>(body);
          out_ << judgment_line(precog::evaluate_timing_grid(grid, env_.config().timing)) << "\n";
          return kExitOk;
        }
        print_step("grid", service().step(*gid, "grid", body));
        return kExitOk;
      };
    });

    auto* action = app.add_subcommand("action", "PRECOG action window")->require_subcommand(1);
    step_command(action, "add", "record an action item", "action", [](CLI::App* s, Fields& f) {
      text(s, f, "--category", "category", "now | soon | watch | kill");
      text(s, f, "--action", "action", "what to do");
      text(s, f, "--trigger", "trigger", "trigger condition");
      text(s, f, "--cost", "cost_estimate", "cost estimate");
    });
  }

  void build_integration(CLI::App& app) {
    auto* integrate = app.add_subcommand("integrate", "PRECOG to GHOSTY integration")->require_subcommand(1);

    auto* start = integrate->add_subcommand("start", "turn selected convergences plus externals into a GHOSTY session");
    auto& f = fields();
    raw_body(start, f);
    text(start, f, "--precog", "precog_session_id", "PRECOG session id");
    text(start, f, "--theme", "theme", "GHOSTY theme (default: the PRECOG theme key)");
    list(start, f, "--select", "selection", "convergence ids, comma separated (2-3)");
    auto externals_file = std::make_shared<std::string>();
    start->add_option("--externals-file", *externals_file, "JSON list of 1-2 external fragments");
    start->callback([this, &f, externals_file] {
      action_ = [this, &f, externals_file] {
        json body = f.body();
        body["protocol"] = "integration";
        if (!externals_file->empty()) body["externals"] = cli_detail::read_json_file(*externals_file);
        const json res = service().create(body);
        out_ << res.at("result").at("id").get<std::string>() << " " << res.at("result").at("collider_session_id").get<std::string>()
             << "\n";
        return kExitOk;
      };
    });

    step_command(integrate, "map", "map a GHOSTY vision onto the PRECOG timing grid", "map", [](CLI::App* s, Fields& f) {
      text(s, f, "--vision", "vision_id", "vision id");
      text(s, f, "--label", "label", "grid label (default: vision name)");
      text(s, f, "--market", "market_phase", "market phase");
      text(s, f, "--competitive", "competitive", "competitive position");
      text(s, f, "--external", "external_window", "external window");
      text(s, f, "--readiness", "readiness", "override the feasibility-derived readiness");
      text(s, f, "--annotation", "annotation", "free-text annotation");
    });
    step_command(integrate, "actions", "emit action items from the bridges", "actions", nullptr);
  }

  void build_longitudinal(CLI::App& app) {
    auto* history = app.add_subcommand("history", "signal history across sessions")->require_subcommand(1);
    auto* diff = history->add_subcommand("diff", "classify signal changes between two completed sessions");
    auto theme = std::make_shared<std::string>();
    auto from = std::make_shared<std::string>();
    auto to = std::make_shared<std::string>();
    auto as_json = std::make_shared<bool>(false);
    diff->add_option("--theme", *theme, "theme key")->required();
    diff->add_option("--from", *from, "earlier session id");
    diff->add_option("--to", *to, "later session id");
    diff->add_flag("--json", *as_json, "print JSON");
    diff->callback([=, this] {
      action_ = [=, this] {
        const json d = service().history_diff(*theme, *from, *to);
        if (*as_json) {
          out_ << d.dump(2) << "\n";
          return kExitOk;
        }
        out_ << "theme " << d["theme_key"].get<std::string>() << ": " << d["from"].get<std::string>() << " -> "
             << d["to"].get<std::string>() << "\n";
        for (const auto& row : d["deltas"]) {
          auto strength = [](const json& v) { return v.is_null() ? std::string("-") : v.get<std::string>(); };
          out_ << (row["priority"].get<bool>() ? "! " : "  ") << std::left << std::setw(8)
               << row["signal_key"].get<std::string>() << std::setw(14) << row["classification"].get<std::string>()
               << strength(row["prev_strength"]) << " -> " << strength(row["curr_strength"]) << "\n";
        }
        return kExitOk;
      };
    });

    auto* predict = app.add_subcommand("predict", "prediction feedback loop")->require_subcommand(1);
    auto* add = predict->add_subcommand("add", "record a prediction");
    auto& pf = fields();
    raw_body(add, pf);
    text(add, pf, "--theme", "theme_key", "theme key");
    text(add, pf, "--statement", "statement", "what is predicted");
    text(add, pf, "--start", "horizon.start", "horizon start");
    text(add, pf, "--end", "horizon.end", "horizon end");
    add->callback([this, &pf] {
      action_ = [this, &pf] {
        out_ << service().add_prediction(pf.body()).at("id").get<std::string>() << "\n";
        return kExitOk;
      };
    });
    auto* eval = predict->add_subcommand("eval", "evaluate a recorded prediction");
    auto& ef = fields();
    auto pid = std::make_shared<std::string>();
    eval->add_option("prediction", *pid, "prediction id")->required();
    raw_body(eval, ef);
    text(eval, ef, "--outcome", "outcome", "hit | miss | partial");
    text(eval, ef, "--timing", "timing_accuracy", "timing accuracy (free text)");
    text(eval, ef, "--contrarian", "contrarian_value", "contrarian value (free text)");
    eval->callback([this, pid, &ef] {
      action_ = [this, pid, &ef] {
        const json res = service().evaluate_prediction(*pid, ef.body());
        const auto& sum = res.at("summary");
        out_ << *pid << ": " << res.at("prediction").at("outcome").get<std::string>() << "\n"
             << "theme " << res.at("prediction").at("theme_key").get<std::string>() << ": hit " << sum["hit"]
             << ", miss " << sum["miss"] << ", partial " << sum["partial"] << ", pending " << sum["pending"] << "\n";
        return kExitOk;
      };
    });

    auto* score = app.add_subcommand("score", "evaluation rubric")->require_subcommand(1);
    auto* rubric = score->add_subcommand("rubric", "score a target on the 8-dimension rubric");
    auto& rf = fields();
    raw_body(rubric, rf);
    text(rubric, rf, "--target", "target_ref", "what is being scored");
    rubric->add_option("--scores", rf.ints["scores"], "8 scores, comma separated (0-10)")->delimiter(',');
    auto no_persist = std::make_shared<bool>(false);
    rubric->add_flag("--no-persist", *no_persist, "do not record the score in the ledger");
    rubric->callback([this, &rf, no_persist] {
      action_ = [this, &rf, no_persist] {
        const json s = service().rubric(rf.body(), !*no_persist);
        out_ << s.at("target_ref").get<std::string>() << ": " << s.at("total").get<int>() << "/" << s.at("max").get<int>()
             << "\n";
        return kExitOk;
      };
    });
  }

  void build_batch(CLI::App& app) {
    auto* batch_cmd = app.add_subcommand("batch", "batch runs")->require_subcommand(1);
    auto* run = batch_cmd->add_subcommand("run", "replay scripted collider runs and print aggregate statistics");
    auto files = std::make_shared<std::vector<std::string>>();
    auto as_json = std::make_shared<bool>(false);
    run->add_option("--fixtures", *files, "fixture file(s)")->required();
    run->add_flag("--json", *as_json, "print JSON");
    run->callback([=, this] {
      action_ = [=, this] {
        std::vector<batch::RunConfig> configs;
        json scripts = json::array();
        for (const auto& file : *files) {
          auto fx = batch::load_fixture(file);
          configs.insert(configs.end(), fx.configs.begin(), fx.configs.end());
          for (auto& r : fx.runs) scripts.push_back(r);
        }
        batch::ScriptedProvider provider(scripts);
        const auto cfg = env_.config();
        const auto outcomes = batch::run_batch(configs, provider, env_.clock()(), cfg.collider);
        const auto stats = batch::compute_stats(outcomes);
        if (*as_json) {
          out_ << json{{"runs", outcomes}, {"stats", stats}}.dump(2) << "\n";
          return kExitOk;
        }
        out_ << std::fixed << std::setprecision(1);
        for (const auto& o : outcomes)
          out_ << std::left << std::setw(40) << o.pairing_label << " electric " << o.electric_count << "/" << o.pair_count
               << " (" << o.hit_rate() * 100 << "%)  visions " << o.advancing_visions() << "  "
               << to_string(o.result) << "\n";
        out_ << std::setprecision(4) << "success rate " << stats.success_rate << ", failure rate " << stats.failure_rate
             << "\nmean hit rate: successful runs " << stats.mean_hit_rate_successful << ", all runs "
             << stats.mean_hit_rate_all << "\nvisions " << stats.total_visions << ", per successful run " << std::setprecision(2)
             << stats.mean_visions_per_successful << std::setprecision(4) << "\nnovelty/feasibility r: ";
        if (stats.novelty_feasibility_r)
          out_ << *stats.novelty_feasibility_r << "\n";
        else
          out_ << "n/a\n";
        out_ << std::defaultfloat;
        return kExitOk;
      };
    });
  }

  void build_misc(CLI::App& app) {
    auto* exp = app.add_subcommand("export", "export a session trace");
    auto id = std::make_shared<std::string>();
    auto format = std::make_shared<std::string>("md");
    exp->add_option("session", *id, "session id")->required();
    exp->add_option("--format", *format, "md | data");
    exp->callback([=, this] {
      action_ = [=, this] {
        out_ << export_report(service(), *id, parse_enum<ReportFormat>(*format, "format"));
        if (*format != "md") out_ << "\n";
        return kExitOk;
      };
    });

    auto* gen = app.add_subcommand("generate", "ask the configured generator for a draft (never committed)");
    auto gid = std::make_shared<std::string>();
    auto kind = std::make_shared<std::string>();
    auto target = std::make_shared<std::string>();
    gen->add_option("session", *gid, "session id")->required();
    gen->add_option("--kind", *kind, "ghost | collision-rationale | vision | bridge | signal | contrarian")->required();
    gen->add_option("--target", *target, "fragment id, pair or vision id the draft is for");
    gen->callback([=, this] {
      action_ = [=, this] {
        const auto req = draft_request(service(), *gid, parse_enum<StepKind>(*kind, "kind"), *target);
        const auto res = request_generation({env_.generator_url, std::chrono::milliseconds(env_.generator_timeout_ms)}, req);
        out_ << res.candidate_text << "\n";
        err_ << "draft only: review it, then submit it with the matching step command\n";
        return kExitOk;
      };
    });

    auto* serve = app.add_subcommand("serve", "serve the HTTP session API");
    auto port = std::make_shared<int>(8080);
    auto host = std::make_shared<std::string>("127.0.0.1");
    serve->add_option("--port", *port, "port (0 picks a free one)");
    serve->add_option("--host", *host, "bind address");
    serve->callback([=, this] {
      action_ = [=, this] {
        HttpServer server(service(), {env_.generator_url, std::chrono::milliseconds(env_.generator_timeout_ms)});
        const int bound = server.bind(*host, *port);
        out_ << "listening on http://" << *host << ":" << bound << "\n" << std::flush;
        server.run();
        return kExitOk;
      };
    });
  }

  Environment env_;
  std::ostream& out_;
  std::ostream& err_;
  EngineConfig cfg_;
  std::unique_ptr<ledger::Store> store_;
  std::unique_ptr<Service> svc_;
  std::deque<Fields> fields_;
  std::function<int()> action_;
};

/// Runs one command line (without the program name). Returns the exit code.
inline int cli_dispatch(std::vector<std::string> args, const Environment& env, std::ostream& out, std::ostream& err) {
  return Cli(env, out, err).run(std::move(args));
}

}  // namespace ghosty::api
