// dvr: command-line front end over the C API.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dvr/dvr.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int check(dvr_status s) {
  if (s == DVR_OK) return 0;
  std::cerr << "error (" << dvr_status_name(s) << "): " << dvr_last_error() << "\n";
  return 1;
}

std::string take(char* s) {
  std::string out = s ? s : "";
  dvr_string_free(s);
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

json read_json_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return json::parse(in);
}

void print_rounds(const json& report) {
  std::printf("%5s %7s %7s %7s %9s %7s\n", "round", "R@1", "R@5", "R@10", "MeanR", "SE");
  for (const auto& r : report.at("per_round")) {
    std::printf("%5zu %7.2f %7.2f %7.2f %9.2f %7.2f\n", r.at("round").get<std::size_t>(), r.at("r1").get<double>(),
                r.at("r5").get<double>(), r.at("r10").get<double>(), r.at("mean_rank").get<double>(),
                r.at("mean_rank_se").get<double>());
  }
  if (!report.at("skipped").empty()) {
    std::fprintf(stderr, "warning: %zu samples skipped (fewer GT rounds than requested)\n",
                 report.at("skipped").size());
  }
}

struct EngineArgs {
  std::string checkpoint;
  std::string corpus;
  std::string split = "test";
  unsigned rounds = 10;
};

void add_engine_options(CLI::App* cmd, EngineArgs& a) {
  cmd->add_option("--checkpoint", a.checkpoint, "checkpoint.bin written by train")->required();
  cmd->add_option("--corpus", a.corpus, "corpus directory (default: the one used for training)");
  cmd->add_option("--split", a.split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  cmd->add_option("--rounds", a.rounds, "dialog rounds T");
}

dvr_engine* open_engine(const EngineArgs& a, const json& extra) {
  json opts = extra;
  opts["split"] = a.split;
  opts["rounds"] = a.rounds;
  dvr_engine* e = nullptr;
  if (check(dvr_engine_open(a.checkpoint.c_str(), a.corpus.empty() ? nullptr : a.corpus.c_str(),
                            opts.dump().c_str(), &e))) {
    return nullptr;
  }
  return e;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dialog-based interactive video retrieval"};
  app.require_subcommand(1);
  app.set_version_flag("--version", dvr_version());

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "generate the synthetic corpus");
  std::string gen_out = "corpus", gen_config;
  json gen_cfg = json::object();
  std::uint64_t gen_seed = 7;
  std::size_t n_train = 2000, n_val = 200, n_test = 200, frames = 8;
  double noise = 0.1;
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--config", gen_config, "corpus config JSON file");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--train", n_train, "training videos");
  gen->add_option("--val", n_val, "validation videos");
  gen->add_option("--test", n_test, "test videos");
  gen->add_option("--frames", frames, "frames per video");
  gen->add_option("--noise", noise, "feature noise sigma");

  // train
  auto* train = app.add_subcommand("train", "two-phase training");
  std::string tr_corpus = "corpus", tr_out = "run", tr_config, tr_variant, tr_feat, tr_sampling;
  std::uint64_t tr_seed = 0;
  std::size_t tr_p1 = 0, tr_p2 = 0;
  train->add_option("--corpus", tr_corpus, "corpus directory");
  train->add_option("--out", tr_out, "output directory");
  train->add_option("--config", tr_config, "training config JSON file");
  train->add_option("--variant", tr_variant, "proposed, basic or flat")
      ->check(CLI::IsMember({"proposed", "basic", "flat"}));
  train->add_option("--feat-loss", tr_feat, "ranking or l2")->check(CLI::IsMember({"ranking", "l2"}));
  train->add_option("--round-sampling", tr_sampling, "uniform or final")->check(CLI::IsMember({"uniform", "final"}));
  auto* seed_opt = train->add_option("--seed", tr_seed, "training seed");
  auto* p1_opt = train->add_option("--phase1-epochs", tr_p1, "epochs with the joint maps frozen");
  auto* p2_opt = train->add_option("--phase2-epochs", tr_p2, "epochs training everything");

  // baselines
  auto* base = app.add_subcommand("baselines", "train and compare proposed, basic, basic+l2 and flat");
  std::string bl_corpus = "corpus", bl_out = "baselines", bl_config;
  base->add_option("--corpus", bl_corpus, "corpus directory");
  base->add_option("--out", bl_out, "output directory");
  base->add_option("--config", bl_config, "training config JSON file");

  // eval
  auto* eval = app.add_subcommand("eval", "per-round R@k and MeanR with GT dialogs");
  EngineArgs ev;
  std::string ev_out = "eval";
  add_engine_options(eval, ev);
  eval->add_option("--out", ev_out, "directory for report.json and report.csv");

  // simulate
  auto* sim = app.add_subcommand("simulate", "oracle-answered sessions over a split");
  EngineArgs sm;
  std::string sm_out = "simulate";
  bool sm_gt = false;
  add_engine_options(sim, sm);
  sim->add_option("--out", sm_out, "directory for simulate.json and simulate.csv");
  sim->add_flag("--gt-questions", sm_gt, "ask the stored GT questions instead of generated ones");

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP session API");
  EngineArgs sv;
  std::string host = "127.0.0.1", static_dir;
  int port = 8080;
  bool sv_gt = false;
  long ttl = 1800;
  add_engine_options(serve, sv);
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "port (0 picks a free one)");
  serve->add_option("--static-dir", static_dir, "directory served at /");
  serve->add_option("--ttl", ttl, "idle session lifetime in seconds");
  serve->add_flag("--gt-questions", sv_gt, "ask the target's stored GT questions");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      json cfg = read_json_file(gen_config);
      if (gen->count("--seed") || !cfg.contains("seed")) cfg["seed"] = gen_seed;
      if (gen->count("--train") || !cfg.contains("train_size")) cfg["train_size"] = n_train;
      if (gen->count("--val") || !cfg.contains("val_size")) cfg["val_size"] = n_val;
      if (gen->count("--test") || !cfg.contains("test_size")) cfg["test_size"] = n_test;
      if (gen->count("--frames") || !cfg.contains("frames")) cfg["frames"] = frames;
      if (gen->count("--noise") || !cfg.contains("noise_sigma")) cfg["noise_sigma"] = noise;
      if (int rc = check(dvr_generate_corpus(cfg.dump().c_str(), gen_out.c_str()))) return rc;
      std::cout << "corpus written to " << gen_out << "\n";
      return 0;
    }
    if (train->parsed()) {
      json cfg = read_json_file(tr_config);
      if (!tr_variant.empty()) cfg["variant"] = tr_variant;
      if (!tr_feat.empty()) cfg["feat_loss"] = tr_feat;
      if (!tr_sampling.empty()) cfg["round_sampling"] = tr_sampling;
      if (seed_opt->count()) cfg["seed"] = tr_seed;
      if (p1_opt->count()) cfg["phase1_epochs"] = tr_p1;
      if (p2_opt->count()) cfg["phase2_epochs"] = tr_p2;
      char* summary = nullptr;
      if (int rc = check(dvr_train(tr_corpus.c_str(), cfg.dump().c_str(), tr_out.c_str(), &summary))) return rc;
      const auto s = json::parse(take(summary));
      std::cout << "best: phase " << s.at("best_phase") << " epoch " << s.at("best_epoch") << ", val MeanR "
                << s.at("best_val_mean_rank") << "\ncheckpoint: " << (fs::path(tr_out) / "checkpoint.bin").string()
                << "\n";
      return 0;
    }
    if (base->parsed()) {
      json cfg = read_json_file(bl_config);
      char* table = nullptr;
      if (int rc = check(dvr_baselines(bl_corpus.c_str(), cfg.dump().c_str(), bl_out.c_str(), &table))) return rc;
      std::printf("%-10s %7s %7s %7s %9s\n", "model", "R@1", "R@5", "R@10", "MeanR");
      for (const auto& r : json::parse(take(table))) {
        std::printf("%-10s %7.2f %7.2f %7.2f %9.2f\n", r.at("model").get<std::string>().c_str(),
                    r.at("R@1").get<double>(), r.at("R@5").get<double>(), r.at("R@10").get<double>(),
                    r.at("MeanR").get<double>());
      }
      return 0;
    }
    if (eval->parsed() || sim->parsed()) {
      const bool is_eval = eval->parsed();
      const auto& a = is_eval ? ev : sm;
      auto* e = open_engine(a, json::object());
      if (!e) return 1;
      char* rep = nullptr;
      char* csv = nullptr;
      const auto st = is_eval ? dvr_evaluate(e, a.rounds, &rep, &csv) : dvr_simulate(e, a.rounds, sm_gt ? 1 : 0, &rep, &csv);
      dvr_engine_close(e);
      if (int rc = check(st)) return rc;
      const auto report = json::parse(take(rep));
      const fs::path dir = is_eval ? ev_out : sm_out;
      const std::string stem = is_eval ? "report" : "simulate";
      write_file(dir / (stem + ".json"), report.dump(2) + "\n");
      write_file(dir / (stem + ".csv"), take(csv));
      print_rounds(report);
      if (report.contains("question_parse_rate") && report.at("questions_asked").get<std::size_t>() > 0) {
        std::printf("generated questions parsed: %.1f%%\n", 100.0 * report.at("question_parse_rate").get<double>());
      }
      return 0;
    }
    if (serve->parsed()) {
      auto* e = open_engine(sv, {{"gt_questions", sv_gt}, {"ttl_seconds", ttl}});
      if (!e) return 1;
      const auto st = dvr_serve(e, host.c_str(), port, static_dir.empty() ? nullptr : static_dir.c_str());
      dvr_engine_close(e);
      return check(st);
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
