// latent-unmix: identifiability checking and moment-based parameter recovery
// for latent-tree parsing models.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lunmix/estimators.hpp"
#include "lunmix/evaluation.hpp"
#include "lunmix/hypergraph.hpp"
#include "lunmix/identifiability.hpp"
#include "lunmix/io.hpp"
#include "lunmix/mixing.hpp"
#include "lunmix/spectral.hpp"

using namespace lunmix;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<int> int_list(const std::string& s) {
  std::vector<int> out;
  for (const auto& tok : split_list(s)) out.push_back(std::stoi(tok));
  return out;
}

std::string timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

int thread_cap() {
  const char* env = std::getenv("LATENT_UNMIX_THREADS");
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  if (env) {
    int v = std::atoi(env);
    if (v >= 1) return std::min(v, hw);
  }
  return hw;
}

std::vector<Eta> make_etas(const std::string& mode, int d, uint64_t seed) {
  if (mode == "e1") return {eta_e1(d)};
  if (mode == "ones") return {eta_ones(d)};
  if (mode == "random") return {eta_tau(d, seed)};
  if (mode == "both") return {eta_ones(d), eta_tau(d, seed)};
  throw ConfigError("unknown eta mode: " + mode);
}

ObservationSpec spec_for(ObsFamily family, const std::string& eta_mode, int d,
                         uint64_t seed) {
  bool thin =
      family == ObsFamily::thin_triples || family == ObsFamily::all_thin_triples;
  return ObservationSpec::make(family, thin ? make_etas(eta_mode, d, seed)
                                            : std::vector<Eta>{});
}

void emit(const ordered_json& payload, const std::string& out) {
  if (out.empty()) {
    std::cout << payload.dump(2) << "\n";
  } else {
    std::ofstream os(out);
    if (!os) throw ConfigError("cannot write " + out);
    os << payload.dump(2) << "\n";
  }
}

struct CommonOpts {
  std::string family = "pcfg-ie";
  std::string obs = "all-thin-triples";
  std::string k = "2";
  std::string d = "2";
  int L = 0;
  int L_min = 0, L_max = 0;
  uint64_t seed = 0;
  int draws = 3;
  long samples = 10000;
  std::string in, in2, out;
  std::string format = "json";
  std::string eta_mode;

  std::vector<int> lengths(int fallback) const {
    if (L > 0) return {L};
    if (L_min > 0 && L_max >= L_min) {
      std::vector<int> ls;
      for (int l = L_min; l <= L_max; ++l) ls.push_back(l);
      return ls;
    }
    return {fallback};
  }
  ordered_json config_json(const std::string& command) const {
    ordered_json c;
    c["command"] = command;
    c["family"] = family;
    c["obs"] = obs;
    c["k"] = k;
    c["d"] = d;
    if (L > 0) c["L"] = L;
    if (L_min > 0) c["L_min"] = L_min;
    if (L_max > 0) c["L_max"] = L_max;
    c["seed"] = seed;
    c["draws"] = draws;
    c["samples"] = samples;
    if (!in.empty()) c["in"] = in;
    if (!in2.empty()) c["truth"] = in2;
    if (!eta_mode.empty()) c["eta_mode"] = eta_mode;
    c["format"] = format;
    return c;
  }
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_model = true) {
  if (with_model) {
    cmd->add_option("--family", o.family, "model family (comma list sweeps)");
    cmd->add_option("--obs", o.obs, "observation family (comma list sweeps)");
    cmd->add_option("--k", o.k, "hidden state count (comma list sweeps)");
    cmd->add_option("--d", o.d, "vocabulary size (comma list sweeps)");
  }
  cmd->add_option("--L", o.L, "sentence length");
  cmd->add_option("--L-min", o.L_min, "first length of a range");
  cmd->add_option("--L-max", o.L_max, "last length of a range");
  cmd->add_option("--seed", o.seed, "master RNG seed");
  cmd->add_option("--in", o.in, "input path");
  cmd->add_option("--out", o.out, "output path");
  cmd->add_option("--format", o.format, "output format: json|csv")
      ->check(CLI::IsMember({"json", "csv"}));
  cmd->add_option("--eta-mode", o.eta_mode, "projection(s): e1|ones|random|both")
      ->check(CLI::IsMember({"e1", "ones", "random", "both"}));
}

// ---------------------------------------------------------------------------

struct CheckCell {
  FamilyKind family;
  int k, d, L;
  ObsFamily obs;
};

int cmd_check(const CommonOpts& o) {
  std::vector<CheckCell> cells;
  for (const auto& fam_s : split_list(o.family)) {
    FamilyKind fk = parse_family(fam_s);
    bool dep = ModelFamily{fk, 0, 1}.is_dependency();
    std::vector<int> ks = dep ? std::vector<int>{0} : int_list(o.k);
    for (const auto& obs_s : split_list(o.obs))
      for (int k : ks)
        for (int d : int_list(o.d))
          for (int L : o.lengths(3))
            cells.push_back({fk, k, d, L, parse_obs_family(obs_s)});
  }
  std::string eta_mode = o.eta_mode.empty() ? "e1" : o.eta_mode;

  std::vector<IdentifiabilityVerdict> verdicts(cells.size());
  std::vector<std::string> errors(cells.size());
  std::atomic<size_t> next{0};
  int workers = std::min<int>(thread_cap(), static_cast<int>(cells.size()));
  auto run = [&]() {
    for (size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) {
      const CheckCell& c = cells[i];
      try {
        ModelFamily fam{c.family, c.k, c.d};
        if (fam.is_dependency()) fam.k = 0;
        auto spec = spec_for(c.obs, eta_mode, c.d, mix_seed(o.seed, 0xe7a));
        verdicts[i] =
            check_identifiability(fam, spec, {c.L}, mix_seed(o.seed, i), o.draws);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();

  ordered_json out;
  out["artifact_version"] = kArtifactVersion;
  out["config"] = o.config_json("check");
  out["timestamp"] = timestamp();
  ordered_json arr = ordered_json::array();
  bool any_error = false;
  for (size_t i = 0; i < cells.size(); ++i) {
    const CheckCell& c = cells[i];
    ordered_json cell;
    cell["family"] = family_name(c.family);
    cell["obs"] = obs_family_name(c.obs);
    ModelFamily fam{c.family, c.k, c.d};
    if (!fam.is_dependency()) cell["k"] = c.k;
    cell["d"] = c.d;
    cell["L"] = c.L;
    if (!errors[i].empty()) {
      cell["error"] = errors[i];
      any_error = true;
    } else {
      cell.update(verdict_to_json(verdicts[i]));
    }
    arr.push_back(cell);
    std::ostringstream line;
    line << family_name(c.family) << " " << obs_family_name(c.obs);
    if (!fam.is_dependency()) line << " k=" << c.k;
    line << " d=" << c.d << " L=" << c.L << " -> ";
    if (!errors[i].empty())
      line << "error: " << errors[i];
    else
      line << answer_name(verdicts[i].answer) << " (rank " << verdicts[i].rank << "/"
           << verdicts[i].n << ", m=" << verdicts[i].m << ")";
    std::cout << line.str() << "\n";
  }
  out["cells"] = std::move(arr);

  // grid summary in the tables' layout: families x observation specs, cells
  // listing (k, d, L >= x) thresholds derived from the swept lengths
  auto families = split_list(o.family);
  auto obs_list = split_list(o.obs);
  if (families.size() > 1 || obs_list.size() > 1) {
    std::cout << "\ngrid (cells list (k,d,L>=x) for 'yes'; '-' = never yes):\n";
    for (const auto& fam_s : families) {
      for (const auto& obs_s : obs_list) {
        std::cout << "  " << fam_s << " / " << obs_s << ": ";
        std::vector<std::string> found;
        bool dep = ModelFamily{parse_family(fam_s), 0, 1}.is_dependency();
        std::vector<int> ks = dep ? std::vector<int>{0} : int_list(o.k);
        for (int k : ks)
          for (int d : int_list(o.d)) {
            int first_yes = 0;
            bool tail_yes = true;
            for (size_t i = 0; i < cells.size(); ++i) {
              const CheckCell& c = cells[i];
              if (c.family != parse_family(fam_s) || c.obs != parse_obs_family(obs_s) ||
                  c.k != k || c.d != d || !errors[i].empty())
                continue;
              bool yes = verdicts[i].answer == IdentifiabilityVerdict::Answer::yes;
              if (yes && first_yes == 0) first_yes = c.L;
              if (first_yes > 0 && c.L >= first_yes && !yes) tail_yes = false;
            }
            if (first_yes > 0 && tail_yes) {
              std::ostringstream cell;
              if (dep)
                cell << "(d=" << d << ",L>=" << first_yes << ")";
              else
                cell << "(" << k << "," << d << ",L>=" << first_yes << ")";
              found.push_back(cell.str());
            }
          }
        if (found.empty()) {
          std::cout << "-";
        } else {
          for (size_t i = 0; i < found.size(); ++i)
            std::cout << (i ? " " : "") << found[i];
        }
        std::cout << "\n";
      }
    }
  }

  if (!o.out.empty()) {
    if (o.format == "csv") {
      std::ofstream os(o.out);
      if (!os) throw ConfigError("cannot write " + o.out);
      os << "# artifact_version=" << kArtifactVersion << " seed=" << o.seed << "\n";
      os << "family,obs,k,d,L,answer,rank,n,m,gap_ratio\n";
      for (size_t i = 0; i < cells.size(); ++i) {
        const CheckCell& c = cells[i];
        os << family_name(c.family) << "," << obs_family_name(c.obs) << "," << c.k
           << "," << c.d << "," << c.L << ",";
        if (!errors[i].empty())
          os << "error,,,,\n";
        else
          os << answer_name(verdicts[i].answer) << "," << verdicts[i].rank << ","
             << verdicts[i].n << "," << verdicts[i].m << ","
             << format_sig(verdicts[i].gap_ratio) << "\n";
      }
    } else {
      emit(out, o.out);
    }
  }
  return any_error ? 1 : 0;
}

int cmd_mixing(const CommonOpts& o) {
  FamilyKind fk = parse_family(split_list(o.family)[0]);
  ObsFamily ok = parse_obs_family(split_list(o.obs)[0]);
  int d = int_list(o.d)[0];
  ModelFamily fam{fk, int_list(o.k)[0], d};
  if (fam.is_dependency()) fam.k = 0;
  auto lengths = o.lengths(3);
  auto spec = spec_for(ok, o.eta_mode.empty() ? "e1" : o.eta_mode, d,
                       mix_seed(o.seed, 0xe7a));
  MixingMatrix m = mixing_matrix(fam, spec, lengths);

  Eigen::ColPivHouseholderQR<Matrix> qr(m.M);
  qr.setThreshold(1e-10);
  std::cout << "mixing matrix: " << m.rows() << " x " << m.cols()
            << " (rank " << qr.rank() << ")\n";
  double worst = 0.0;
  for (int r = 0; r < m.rows(); ++r) {
    long total = 0;
    for (auto& [c, n] : m.rows_exact[r]) total += n;
    worst = std::max(worst, std::abs(static_cast<double>(total) - m.row_denoms[r]));
  }
  std::cout << "row-sum audit: max |sum - 1| = "
            << (worst == 0.0 ? "0 (exact)" : format_sig(worst)) << "\n";

  if (!o.out.empty()) {
    std::ofstream csv(o.out + ".csv");
    if (!csv) throw ConfigError("cannot write " + o.out + ".csv");
    csv << "# artifact_version=" << kArtifactVersion << " family="
        << family_name(fk) << " obs=" << obs_family_name(ok) << " seed=" << o.seed
        << "\n";
    write_mixing_csv(m, csv);
    ordered_json reg;
    reg["artifact_version"] = kArtifactVersion;
    reg["config"] = o.config_json("mixing");
    reg["timestamp"] = timestamp();
    reg.update(mixing_registry_json(m));
    emit(reg, o.out + ".terms.json");
    std::cout << "wrote " << o.out << ".csv and " << o.out << ".terms.json\n";
  }
  return 0;
}

int cmd_simulate(const CommonOpts& o) {
  if (o.in.empty()) throw ConfigError("simulate needs --in <params.json>");
  if (o.out.empty()) throw ConfigError("simulate needs --out <corpus>");
  ModelParams p = load_params(o.in);
  p.validate();
  std::vector<Sentence> corpus;
  Rng rng(mix_seed(o.seed, 0x51));
  for (int L : o.lengths(3))
    for (long i = 0; i < o.samples; ++i)
      corpus.push_back(sample_sentence(p, L, rng));
  save_corpus(corpus, o.out);
  std::cout << "wrote " << corpus.size() << " sentences to " << o.out << "\n";
  return 0;
}

int cmd_estimate(const CommonOpts& o) {
  if (o.in.empty()) throw ConfigError("estimate needs --in <corpus or params.json>");
  FamilyKind fk = parse_family(split_list(o.family)[0]);
  // exact mode when the input parses as a parameter file
  bool exact = false;
  ModelParams truth;
  {
    std::ifstream probe(o.in);
    if (!probe) throw ConfigError("cannot read " + o.in);
    char first = 0;
    probe >> first;
    if (first == '{') {
      truth = load_params(o.in);
      truth.validate();
      if (truth.family.kind != fk)
        throw ConfigError("estimate: --family disagrees with the parameter file");
      exact = true;
    }
  }
  std::vector<Sentence> corpus;
  int d = exact ? truth.family.d : int_list(o.d)[0];
  if (!exact) corpus = load_corpus(o.in);

  auto empirical = [&](const ObservationSpec& spec, const std::vector<int>& ls) {
    return empirical_moments(corpus, spec, d, ls);
  };
  auto exact_mu = [&](const ObservationSpec& spec, const std::vector<int>& ls) {
    return exact_moments_range(truth, spec, ls);
  };
  auto moments = [&](const ObservationSpec& spec, const std::vector<int>& ls) {
    return exact ? exact_mu(spec, ls) : empirical(spec, ls);
  };

  RecoveredParams rec;
  if (fk == FamilyKind::pcfg_ie) {
    int k = int_list(o.k)[0];
    auto spec = ObservationSpec::make(
        ObsFamily::all_thin_triples,
        make_etas(o.eta_mode.empty() ? "both" : o.eta_mode, d, mix_seed(o.seed, 0xe7a)));
    if (spec.etas.size() < 2)
      throw ConfigError("estimate pcfg-ie needs --eta-mode both");
    auto lengths = o.lengths(3);
    PcfgIeMixing mix(spec, lengths);
    rec = estimate_pcfg_ie(moments(spec, lengths), mix, k);
  } else if (fk == FamilyKind::dep_ies) {
    auto pairs = ObservationSpec::make(ObsFamily::all_pairs);
    auto first = ObservationSpec::make(ObsFamily::first_moment);
    MomentSet mp = moments(pairs, {2, 3});
    MomentSet m1 = moments(first, {3});
    rec = estimate_dep_ies(m1.flat(3, 0), mp.as_matrix(3, 0), mp.as_matrix(3, 1),
                           mp.as_matrix(2, 0));
  } else if (fk == FamilyKind::hmm) {
    int k = int_list(o.k)[0];
    auto pairs = ObservationSpec::make(ObsFamily::all_pairs);
    auto first = ObservationSpec::make(ObsFamily::first_moment);
    MomentSet mp = moments(pairs, {4});
    MomentSet m1 = moments(first, {4});
    // AllPairs ids at L=4: 12 13 14 23 24 34
    rec = estimate_hmm_allpairs(mp.as_matrix(4, 0), mp.as_matrix(4, 5), m1.flat(4, 0),
                                k);
  } else {
    throw UnsupportedError(
        "estimators cover pcfg-ie, dep-ies, and hmm; no moment-based recovery "
        "exists for the other families");
  }

  ordered_json out;
  out["artifact_version"] = kArtifactVersion;
  out["config"] = o.config_json("estimate");
  out["timestamp"] = timestamp();
  out["mode"] = exact ? "exact-moments" : "empirical-moments";
  if (!exact) out["corpus_sentences"] = corpus.size();
  out.update(recovered_to_json(rec));
  if (exact) {
    MatchReport match = match_params(rec.params, truth);
    out["match_vs_truth"] = match_report_to_json(match);
    std::cout << "matched error vs ground truth: " << match.matched_error << "\n";
  }
  emit(out, o.out);
  return 0;
}

int cmd_eval(const CommonOpts& o) {
  if (o.in.empty() || o.in2.empty())
    throw ConfigError("eval needs --in <estimate.json> and --truth <params.json>");
  // accept either bare parameter files or estimate outputs
  auto load_any = [](const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read " + path);
    json j = json::parse(is);
    if (j.contains("params")) return params_from_json(j["params"]);
    return params_from_json(j);
  };
  ModelParams est = load_any(o.in);
  ModelParams truth = load_any(o.in2);
  MatchReport r = match_params(est, truth);
  ordered_json out;
  out["artifact_version"] = kArtifactVersion;
  out["config"] = o.config_json("eval");
  out["timestamp"] = timestamp();
  out.update(match_report_to_json(r));
  emit(out, o.out);
  return 0;
}

int cmd_validate(const CommonOpts& o) {
  if (o.in.empty()) throw ConfigError("validate needs --in <params.json>");
  std::ifstream is(o.in);
  if (!is) throw ConfigError("cannot read " + o.in);
  json j = json::parse(is);
  auto problems = validate_params_report(j);
  ordered_json out;
  out["artifact_version"] = kArtifactVersion;
  out["config"] = o.config_json("validate");
  out["timestamp"] = timestamp();
  out["valid"] = problems.empty();
  out["problems"] = problems;
  emit(out, o.out);
  return problems.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "latent-unmix: numerical identifiability checking and moment unmixing "
      "for latent-tree parsing models"};
  app.require_subcommand(1);

  CommonOpts check_o, mixing_o, sim_o, est_o, eval_o, val_o;
  auto* check = app.add_subcommand("check", "Jacobian-rank identifiability check");
  add_common(check, check_o);
  check->add_option("--draws", check_o.draws, "random interior draws per cell");

  auto* mixing = app.add_subcommand("mixing", "build and export a mixing matrix");
  add_common(mixing, mixing_o);

  auto* simulate = app.add_subcommand("simulate", "sample sentences from a model");
  add_common(simulate, sim_o);
  simulate->add_option("--samples", sim_o.samples, "sentences per length");

  auto* estimate =
      app.add_subcommand("estimate", "recover parameters from moments");
  add_common(estimate, est_o);

  auto* eval = app.add_subcommand("eval", "compare two parameter files");
  add_common(eval, eval_o, false);
  eval->add_option("--truth", eval_o.in2, "reference parameter file");

  auto* validate = app.add_subcommand("validate", "check a parameter file");
  add_common(validate, val_o, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed()) return cmd_check(check_o);
    if (mixing->parsed()) return cmd_mixing(mixing_o);
    if (simulate->parsed()) return cmd_simulate(sim_o);
    if (estimate->parsed()) return cmd_estimate(est_o);
    if (eval->parsed()) return cmd_eval(eval_o);
    if (validate->parsed()) return cmd_validate(val_o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << "\n";
    return 3;
  } catch (const ConditioningError& e) {
    std::cerr << "conditioning error: " << e.what() << "\n";
    return 4;
  } catch (const UnsupportedError& e) {
    std::cerr << "unsupported: " << e.what() << "\n";
    return 5;
  } catch (const EnumerationError& e) {
    std::cerr << "enumeration guard: " << e.what() << "\n";
    return 6;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
