// pedmix command-line driver.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "pedmix/coefficients.hpp"
#include "pedmix/config.hpp"
#include "pedmix/engine.hpp"
#include "pedmix/inference.hpp"
#include "pedmix/relationships.hpp"
#include "pedmix/simstudy.hpp"
#include "pedmix/synth.hpp"

namespace fs = std::filesystem;
using namespace pedmix;

namespace {

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  std::ostringstream o;
  for (unsigned int i = 0; i < len; ++i) o << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return o.str();
}

struct Manifest {
  std::string subcommand;
  std::vector<std::string> inputs, outputs;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string path;

  json files(const std::vector<std::string>& paths) const {
    json a = json::array();
    for (const auto& p : paths) {
      std::ifstream in(p, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      a.push_back({{"path", p}, {"sha256", in ? sha256_hex(ss.str()) : ""}});
    }
    return a;
  }

  void emit(double seconds, int exit_code) const {
    json m = {{"subcommand", subcommand}, {"version", PEDMIX_VERSION}, {"seed", seed},
              {"threads", threads},       {"inputs", files(inputs)},   {"outputs", files(outputs)},
              {"seconds", seconds},       {"exit_code", exit_code}};
    if (path.empty()) {
      std::cerr << m.dump() << '\n';
      return;
    }
    std::ofstream(path) << m.dump(2) << '\n';
  }
};

struct Globals {
  int threads = 1;
  std::uint64_t seed = 1;
  bool seed_given = false;
  double threshold = 50.0;
  std::string manifest;
};

/// Write to `path`, or stdout when empty.
void write_output(Manifest& man, const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << text;
  man.outputs.push_back(path);
}

std::vector<EPGData> load_epgs(Manifest& man, const std::vector<std::string>& paths, double threshold) {
  std::vector<EPGData> out;
  for (const auto& p : paths) {
    out.push_back(EPGData::parse(detail::read_file(p, "EPG"), threshold));
    man.inputs.push_back(p);
  }
  return out;
}

AlleleFrequencyTable load_freqs(Manifest& man, const std::string& path) {
  man.inputs.push_back(path);
  auto t = AlleleFrequencyTable::load(path);
  for (const auto& w : t.warnings()) std::cerr << "warning: " << w << '\n';
  return t;
}

Hypothesis load_hyp(Manifest& man, const std::string& path) {
  man.inputs.push_back(path);
  return load_hypothesis(path);
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string x; std::getline(ss, x, ',');)
    if (!x.empty()) out.push_back(x);
  return out;
}

IbdMode parse_mode(const std::string& m) {
  if (m == "exact") return IbdMode::Exact;
  if (m == "naive") return IbdMode::Naive;
  if (m == "montecarlo") return IbdMode::MonteCarlo;
  throw ValidationError("unknown IBD mode '" + m + "'");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Likelihood ratios for DNA mixtures with related contributors"};
  app.set_version_flag("--version", std::string("pedmix ") + PEDMIX_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Random seed")->each([&](const std::string&) { g.seed_given = true; });
  app.add_option("--threshold", g.threshold, "Detection threshold in rfu")->check(CLI::NonNegativeNumber);
  app.add_option("--manifest", g.manifest, "Where to write the run manifest");

  Manifest man;
  std::string out_path, out_dir;
  std::function<void()> action;

  // ibd
  auto* ibd = app.add_subcommand("ibd", "IBD pattern distribution of target individuals");
  std::string ped_path, targets, mode = "exact";
  std::size_t samples = 1'000'000;
  ibd->add_option("--ped", ped_path, "Pedigree file")->required();
  ibd->add_option("--targets", targets, "Comma-separated target ids")->required();
  ibd->add_option("--mode", mode, "exact, naive or montecarlo");
  ibd->add_option("--samples", samples, "Monte Carlo samples");
  ibd->add_option("--out", out_path, "Output CSV (default stdout)");
  ibd->callback([&] {
    action = [&] {
      man.inputs.push_back(ped_path);
      IbdOptions o;
      o.mode = parse_mode(mode);
      o.mc_samples = samples;
      o.seed = g.seed;
      auto dist = pattern_distribution(Pedigree::load(ped_path), split(targets), o);
      write_output(man, out_path, dist.to_csv());
    };
  });

  // kappa
  auto* kappa = app.add_subcommand("kappa", "Pairwise identity coefficients");
  std::string pair, relationship;
  kappa->add_option("--ped", ped_path, "Pedigree file");
  kappa->add_option("--pair", pair, "Two comma-separated ids (with --ped)");
  kappa->add_option("--relationship", relationship, "Built-in two-person relationship");
  kappa->add_option("--out", out_path, "Output JSON (default stdout)");
  kappa->callback([&] {
    action = [&] {
      PairwiseCoefficients pc;
      if (!relationship.empty()) {
        pc = coefficients_from_distribution(named_relationship(relationship).distribution());
      } else {
        if (ped_path.empty() || split(pair).size() != 2) throw CLI::ValidationError("need --relationship or --ped with --pair A,B");
        man.inputs.push_back(ped_path);
        auto ids = split(pair);
        pc = pairwise_coefficients(Pedigree::load(ped_path), ids[0], ids[1]);
      }
      json d = json::array(), de = json::array();
      for (int i = 0; i < 9; ++i) {
        d.push_back(pc.delta[i]);
        de.push_back(pc.delta_exact[i].to_string());
      }
      json j = {{"delta", d}, {"delta_exact", de}, {"theta", pc.theta}, {"theta_exact", pc.theta_exact.to_string()}};
      if (pc.kappa) j["kappa"] = *pc.kappa;
      write_output(man, out_path, j.dump(2) + "\n");
    };
  });

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate related genotypes and an EPG");
  std::string members, contributors, cells, freqs_path;
  int markers = 10;
  SynthParams sp;
  sim->add_option("--relationship", relationship, "Built-in relationship");
  sim->add_option("--ped", ped_path, "Pedigree file (with --members)");
  sim->add_option("--members", members, "Comma-separated pedigree members to simulate");
  sim->add_option("--contributors", contributors, "Comma-separated contributor ids")->required();
  sim->add_option("--cells", cells, "Comma-separated cell counts")->required();
  sim->add_option("--freqs", freqs_path, "Allele frequency CSV (default: generated database)");
  sim->add_option("--markers", markers, "Markers in the generated database")->check(CLI::Range(1, 99));
  sim->add_option("--rho-per-cell", sp.rho_per_cell, "Amplification per cell");
  sim->add_option("--eta", sp.eta, "Gamma scale");
  sim->add_option("--xi", sp.xi, "Stutter proportion");
  sim->add_option("--out-dir", out_dir, "Output directory")->required();
  sim->callback([&] {
    action = [&] {
      Relationship rel;
      if (!relationship.empty()) {
        rel = named_relationship(relationship);
      } else if (!ped_path.empty()) {
        man.inputs.push_back(ped_path);
        rel = Relationship{ped_path, split(members), Pedigree::load(ped_path), std::nullopt};
      } else {
        throw CLI::ValidationError("need --relationship or --ped with --members");
      }
      sp.threshold = g.threshold;
      fs::create_directories(out_dir);
      AlleleFrequencyTable freqs;
      if (freqs_path.empty()) {
        freqs = synthetic_frequencies(markers);
        write_output(man, (fs::path(out_dir) / "freqs.csv").string(), freqs.to_csv());
      } else {
        freqs = load_freqs(man, freqs_path);
      }
      auto profiles = simulate_profiles(rel.distribution(), freqs, derive_seed(g.seed, {1}));
      std::vector<GenotypeProfile> cps;
      std::vector<double> cc;
      for (const auto& c : split(cells)) cc.push_back(detail::parse_double(c, "--cells"));
      const auto ids = split(contributors);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!profiles.contains(ids[i]))
          profiles[ids[i]] = simulate_profiles(IBDPatternDistribution::unrelated({ids[i]}), freqs,
                                               derive_seed(g.seed, {2, i}))[ids[i]];
        cps.push_back(profiles[ids[i]]);
      }
      for (const auto& [id, p] : profiles)
        write_output(man, (fs::path(out_dir) / (id + ".csv")).string(), p.to_csv());
      auto epg = synthesize_epg(cps, cc, freqs.markers(), sp, derive_seed(g.seed, {3}));
      write_output(man, (fs::path(out_dir) / "epg.csv").string(), epg.to_csv());
    };
  });

  // loglik
  auto* ll = app.add_subcommand("loglik", "Log-likelihood of EPG data under a hypothesis");
  std::vector<std::string> epg_paths;
  std::string hyp_path, params_path;
  double theta = 0.0;
  bool oracle = false;
  ll->add_option("--epg", epg_paths, "EPG CSV (repeat for joint analysis)")->required();
  ll->add_option("--hypothesis", hyp_path, "Hypothesis JSON")->required();
  ll->add_option("--freqs", freqs_path, "Allele frequency CSV")->required();
  ll->add_option("--params", params_path, "Parameter JSON")->required();
  ll->add_option("--theta", theta, "Coancestry coefficient");
  ll->add_flag("--oracle", oracle, "Use the brute-force genotype enumeration");
  ll->add_option("--out", out_path, "Output JSON (default stdout)");
  ll->callback([&] {
    action = [&] {
      auto epgs = load_epgs(man, epg_paths, g.threshold);
      auto h = load_hyp(man, hyp_path);
      auto freqs = load_freqs(man, freqs_path);
      man.inputs.push_back(params_path);
      auto params = params_list_from_json(load_json(params_path));
      EngineOptions eo;
      eo.threads = g.threads;
      eo.coancestry.theta = theta;
      auto res = oracle ? brute_force_likelihood(epgs, h, freqs, params, eo) : likelihood(epgs, h, freqs, params, eo);
      json j = to_json(res);
      j["method"] = oracle ? "brute-force" : "sweep";
      write_output(man, out_path, j.dump(2) + "\n");
    };
  });

  // mle
  auto* fit = app.add_subcommand("mle", "Maximum-likelihood mixture parameters");
  int starts = 5;
  fit->add_option("--epg", epg_paths, "EPG CSV (repeat for joint analysis)")->required();
  fit->add_option("--hypothesis", hyp_path, "Hypothesis JSON")->required();
  fit->add_option("--freqs", freqs_path, "Allele frequency CSV")->required();
  fit->add_option("--starts", starts, "Optimiser starts")->check(CLI::PositiveNumber);
  fit->add_option("--theta", theta, "Coancestry coefficient");
  fit->add_option("--out", out_path, "Output JSON (default stdout)");
  fit->callback([&] {
    action = [&] {
      auto epgs = load_epgs(man, epg_paths, g.threshold);
      auto h = load_hyp(man, hyp_path);
      auto freqs = load_freqs(man, freqs_path);
      EngineOptions eo;
      eo.threads = g.threads;
      eo.coancestry.theta = theta;
      MleOptions mo;
      mo.starts = starts;
      mo.seed = g.seed;
      write_output(man, out_path, to_json(mle(epgs, h, freqs, mo, eo)).dump(2) + "\n");
    };
  });

  // lr
  auto* lrc = app.add_subcommand("lr", "Likelihood ratio between two hypotheses");
  std::string hp_path, h0_path, policy = "shared_h0_mles", table_path;
  lrc->add_option("--epg", epg_paths, "EPG CSV (repeat for joint analysis)")->required();
  lrc->add_option("--hp", hp_path, "Numerator hypothesis JSON")->required();
  lrc->add_option("--h0", h0_path, "Denominator hypothesis JSON")->required();
  lrc->add_option("--freqs", freqs_path, "Allele frequency CSV")->required();
  lrc->add_option("--policy", policy, "shared_h0_mles, separate_mles or fixed_params");
  lrc->add_option("--params", params_path, "Parameter JSON for fixed_params");
  lrc->add_option("--starts", starts, "Optimiser starts")->check(CLI::PositiveNumber);
  lrc->add_option("--theta", theta, "Coancestry coefficient");
  lrc->add_option("--table", table_path, "Also write the marker-wise table as CSV");
  lrc->add_option("--out", out_path, "Output JSON (default stdout)");
  lrc->callback([&] {
    action = [&] {
      auto epgs = load_epgs(man, epg_paths, g.threshold);
      auto hp = load_hyp(man, hp_path);
      auto h0 = load_hyp(man, h0_path);
      auto freqs = load_freqs(man, freqs_path);
      LrOptions o;
      o.policy = parse_policy(policy);
      if (!params_path.empty()) {
        man.inputs.push_back(params_path);
        o.params = params_list_from_json(load_json(params_path));
      }
      o.engine.threads = g.threads;
      o.engine.coancestry.theta = theta;
      o.mle.starts = starts;
      o.mle.seed = g.seed;
      auto rep = lr(epgs, hp, h0, freqs, o);
      write_output(man, out_path, to_json(rep).dump(2) + "\n");
      if (!table_path.empty()) write_output(man, table_path, lr_table_csv(rep));
    };
  });

  // study
  auto* st = app.add_subcommand("study", "Replicated simulation study");
  std::string config_path;
  st->add_option("--config", config_path, "Study JSON")->required();
  st->add_option("--out-dir", out_dir, "Output directory")->required();
  st->callback([&] {
    action = [&] {
      man.inputs.push_back(config_path);
      auto cfg = load_study(config_path);
      if (g.seed_given) cfg.seed = g.seed;
      man.seed = cfg.seed;
      cfg.threads = g.threads;
      auto res = run_study(cfg);
      fs::create_directories(out_dir);
      write_output(man, (fs::path(out_dir) / "medians.csv").string(), res.medians_csv());
      write_output(man, (fs::path(out_dir) / "replicates.csv").string(), res.replicates_csv());
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  man.subcommand = app.get_subcommands().front()->get_name();
  man.seed = g.seed;
  man.threads = g.threads;
  man.path = g.manifest;
  if (man.path.empty() && !out_path.empty()) man.path = out_path + ".manifest.json";
  if (man.path.empty() && !out_dir.empty()) man.path = (fs::path(out_dir) / "manifest.json").string();

  const auto t0 = std::chrono::steady_clock::now();
  int code = 0;
  try {
    action();
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    code = 2;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    code = 2;
  } catch (const ImpossibleEvidence& e) {
    std::cerr << "impossible evidence" << (e.marker().empty() ? "" : " at marker " + e.marker()) << ": " << e.what()
              << '\n';
    code = 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    code = 1;
  }
  if (!out_dir.empty() && !fs::exists(out_dir)) man.path.clear();
  man.emit(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), code);
  return code;
}
